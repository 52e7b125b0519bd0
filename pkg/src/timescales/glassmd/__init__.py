"""2D binary inverse-power-law liquid: dynamics and analysis."""
