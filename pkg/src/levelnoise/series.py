"""Spacing sequence container shared by the model samplers and unfolding."""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpacingSeries:
    """Ordered nearest-neighbour spacings ``S_n`` and their recorded mean."""

    spacings: np.ndarray
    mean_spacing: float = field(default=None)

    def __post_init__(self):
        s = np.asarray(self.spacings, dtype=float)
        if np.any(s < 0):
            raise ValueError("spacings must be non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "spacings", s)
        if self.mean_spacing is None:
            object.__setattr__(self, "mean_spacing", float(s.mean()) if s.size else float("nan"))

    def __len__(self):
        return self.spacings.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.spacings, dtype=dtype)
