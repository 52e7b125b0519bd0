from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Sampled trajectory: ``values[k]`` is the state vector at ``times[k]``.

    ``columns`` optionally names the components of each value vector and
    ``meta`` carries per-run diagnostics (flags, counters).
    """

    times: np.ndarray
    values: np.ndarray
    columns: tuple[str, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if len(self.times) != len(self.values):
            raise ValueError(
                f"{len(self.times)} times but {len(self.values)} value vectors")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if self.columns is not None:
            self.columns = tuple(self.columns)
            if len(self.columns) != self.values.shape[1]:
                raise ValueError("columns do not match value dimension")

    def __len__(self):
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        if self.columns is None:
            raise KeyError(name)
        return self.values[:, self.columns.index(name)]

    def to_dict(self) -> dict:
        out = {"times": self.times.tolist(), "values": self.values.tolist()}
        if self.columns is not None:
            out["columns"] = list(self.columns)
        return out
