"""Nontrivial zeros of the Riemann zeta function as a spectrum.

Heights ``t_n`` of the zeros ``1/2 + i t_n`` are unfolded with the smooth
Riemann-von Mangoldt count

    Nbar(t) = (t / 2 pi) log(t / (2 pi e)) + 7/8,

which is exact on average, so no empirical density fit is needed.
"""
from dataclasses import dataclass
from importlib import resources
import math

import numpy as np

from .errors import DataIntegrityError, DomainError
from .unfolding import UnfoldedSpectrum

# Nbar'(t) = log(t / 2 pi) / 2 pi, so Nbar increases for t > 2 pi
THRESHOLD = 2 * math.pi
BUNDLED = "zeros_30000.txt"


@dataclass(frozen=True, eq=False)
class ZeroTable:
    """Strictly increasing positive zero heights."""

    heights: np.ndarray
    source: str = ""
    first_index: int = 1

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.ndim != 1 or h.size == 0:
            raise DataIntegrityError("zero table is empty")
        if np.any(h <= 0):
            raise DataIntegrityError("zero heights must be positive")
        bad = np.flatnonzero(np.diff(h) <= 0)
        if bad.size:
            raise DataIntegrityError(f"heights not strictly increasing at entry {bad[0] + 2}")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def count(self):
        return self.heights.size

    def __len__(self):
        return self.heights.size


def load_zeros(path):
    """Parse one height per line; ``#`` lines and blank lines are skipped."""
    heights = []
    prev = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                t = float(text)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {text!r} as a zero height") from None
            if not math.isfinite(t) or t <= 0:
                raise DataIntegrityError(f"{path}:{lineno}: height {text!r} is not positive and finite")
            if prev is not None and t <= prev:
                raise DataIntegrityError(
                    f"{path}:{lineno}: height {text} does not exceed the previous {prev!r}"
                )
            prev = t
            heights.append(t)
    if not heights:
        raise DataIntegrityError(f"{path}: no zero heights found")
    return ZeroTable(np.asarray(heights), str(path))


def bundled_zeros_path():
    return resources.files("levelnoise") / "data" / BUNDLED


def load_bundled_zeros():
    """First 30000 zeros shipped with the package (absolute error < 1e-4)."""
    with resources.as_file(bundled_zeros_path()) as p:
        return load_zeros(p)


def smooth_zero_count(t):
    t = np.asarray(t, dtype=float)
    return t / (2 * np.pi) * np.log(t / (2 * np.pi * np.e)) + 7.0 / 8.0


def unfold_zeros(table, offset=0, count=None):
    """Unfold zeros ``offset+1 .. offset+count`` (1-based) of ``table``.

    Raises
    ------
    DomainError
        A selected height lies at or below ``2 pi``, where ``Nbar`` stops
        increasing.
    """
    if offset < 0 or offset >= table.count:
        raise ValueError(f"offset {offset} outside table of {table.count} zeros")
    stop = table.count if count is None else offset + int(count)
    if stop > table.count:
        raise ValueError(f"requested zeros up to {stop} but table holds {table.count}")
    t = table.heights[offset:stop]
    if t[0] <= THRESHOLD:
        raise DomainError(f"height {t[0]!r} is below the unfolding threshold 2*pi")
    source = {
        "kind": "zeta_zeros",
        "table": table.source,
        "first_zero": table.first_index + offset,
        "count": t.size,
    }
    return UnfoldedSpectrum(smooth_zero_count(t), source, "riemann_von_mangoldt")
