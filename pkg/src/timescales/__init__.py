"""Multiscale simulation workbench.

Engines for double-well tipping dynamics, a 2D binary inverse-power-law
glass former, the beta-cell exocytosis pool cascade, multiplier-accelerator
business cycles and greenhouse-gas compartment models, plus a CLI that
writes CSV/JSON output with run manifests.
"""

__version__ = "0.1.0"
