"""Unfolding raw eigenvalues to unit mean spacing.

The averaged integrated density of states ``N(E)`` maps each raw level to
``eps_n = N(E_n)``. Three estimators are available:

``ensemble_staircase``
    average of the per-realization counting staircases, sampled on a grid of
    nodes (every ``levels_per_node`` pooled levels) and joined by a monotone
    cubic (PCHIP) interpolant.
``polynomial``
    least-squares polynomial of degree ``degree`` fitted to the pooled
    staircase; rejected if it decreases anywhere by more than 0.1% of the
    levels per realization (smaller dips are absorbed when unfolding).
``gaussian_broadened``
    the staircase convolved with a Gaussian of width ``width`` mean spacings.
"""
from dataclasses import dataclass, field
from enum import Enum
import warnings

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import ndtr

from . import textio
from .eigensolver import Spectrum
from .errors import DomainError, InsufficientDataError, NonMonotoneError
from .series import SpacingSeries

__all__ = [
    "IDOS",
    "SpacingSeries",
    "UnfoldedSpectrum",
    "UnfoldMethod",
    "estimate_idos",
    "spacings",
    "unfold",
    "unfold_ensemble",
]


class UnfoldMethod(str, Enum):
    ENSEMBLE_STAIRCASE = "ensemble_staircase"
    POLYNOMIAL = "polynomial"
    GAUSSIAN_BROADENED = "gaussian_broadened"


# tolerated decrease of a polynomial IDOS, as a fraction of levels per realization
MONOTONE_SLACK = 1e-3
MONOTONE_SLACK_MIN = 0.01


def default_method(n_realizations):
    return UnfoldMethod.ENSEMBLE_STAIRCASE if n_realizations >= 10 else UnfoldMethod.POLYNOMIAL


@dataclass(frozen=True, eq=False)
class IDOS:
    """Monotone map ``E -> N(E)`` over ``domain``, normalised per realization."""

    func: object
    domain: tuple
    method: UnfoldMethod
    params: dict = field(default_factory=dict)
    n_realizations: int = 1

    def __call__(self, energies):
        e = np.asarray(energies, dtype=float)
        lo, hi = self.domain
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        bad = (e < lo - slack) | (e > hi + slack)
        if np.any(bad):
            value = e[bad].flat[0]
            raise DomainError(f"energy {value!r} outside IDOS domain [{lo!r}, {hi!r}]")
        return self.func(np.clip(e, lo, hi))

    def describe(self):
        parts = [self.method.value] + [f"{k}={v}" for k, v in sorted(self.params.items())]
        return ";".join(parts)


@dataclass(frozen=True, eq=False)
class UnfoldedSpectrum:
    """Unfolded levels ``eps_n`` with the provenance of their raw spectrum."""

    levels: np.ndarray
    source: dict = field(default_factory=dict)
    method: str = ""
    scale: float = 1.0

    def __post_init__(self):
        v = np.array(self.levels, dtype=float)
        if np.any(np.diff(v) < 0):
            raise ValueError("unfolded levels must be non-decreasing")
        v.setflags(write=False)
        object.__setattr__(self, "levels", v)

    def __len__(self):
        return self.levels.size

    def mean_spacing(self):
        return float(np.diff(self.levels).mean()) if self.levels.size > 1 else float("nan")

    def save(self, path):
        meta = {f"source_{k}": v for k, v in self.source.items()}
        meta.update(method=self.method, scale=self.scale)
        return textio.write_series(path, self.levels, meta)


def _values(s):
    return s.values if isinstance(s, Spectrum) else np.sort(np.asarray(s, dtype=float))


def _common_window(spectra):
    windows = {s.window for s in spectra if isinstance(s, Spectrum)}
    if len(windows) == 1 and all(isinstance(s, Spectrum) for s in spectra):
        w = windows.pop()
        return None if w is None else (float(w[0]), float(w[1]))
    return None


def estimate_idos(
    spectra,
    method=UnfoldMethod.ENSEMBLE_STAIRCASE,
    *,
    levels_per_node=200,
    degree=7,
    width=3.0,
    domain=None,
):
    """Averaged integrated density of states of an ensemble of spectra.

    Parameters
    ----------
    spectra : list of Spectrum or array-like
        One entry per realization. When every spectrum records the same
        solve window it becomes the IDOS domain.
    method : str or UnfoldMethod
    levels_per_node : int
        Grid spacing of ``ensemble_staircase`` in pooled levels.
    degree : int
        Polynomial degree for ``polynomial``.
    width : float
        Kernel width of ``gaussian_broadened`` in mean level spacings.
    domain : (float, float), optional
        Overrides the inferred domain.
    """
    method = UnfoldMethod(method)
    if isinstance(spectra, Spectrum):
        spectra = [spectra]
    spectra = list(spectra)
    if not spectra:
        raise InsufficientDataError("IDOS needs at least one spectrum")
    R = len(spectra)
    pooled = np.sort(np.concatenate([_values(s) for s in spectra]))
    if pooled.size < 2:
        raise InsufficientDataError("IDOS needs at least two pooled levels")
    if domain is None:
        domain = _common_window(spectra) or (float(pooled[0]), float(pooled[-1]))
    lo, hi = map(float, domain)
    if pooled[0] < lo or pooled[-1] > hi:
        raise DomainError("pooled levels extend outside the requested IDOS domain")

    if method is UnfoldMethod.ENSEMBLE_STAIRCASE:
        step = int(max(1, min(levels_per_node, pooled.size // 4)))
        k = np.arange(step, pooled.size, step)
        mids = 0.5 * (pooled[k - 1] + pooled[k])
        nodes = np.concatenate([[lo], mids, [hi]])
        counts = np.searchsorted(pooled, nodes, side="right") / R
        nodes, first = np.unique(nodes, return_index=True)
        counts = counts[first]
        if nodes.size < 2:
            raise InsufficientDataError("degenerate pooled spectrum")
        func = PchipInterpolator(nodes, counts, extrapolate=False)
        params = {"levels_per_node": step}
    elif method is UnfoldMethod.POLYNOMIAL:
        if pooled.size <= degree:
            raise InsufficientDataError(f"degree {degree} fit needs more than {degree} levels")
        ranks = (np.arange(pooled.size) + 0.5) / R
        with warnings.catch_warnings():
            # tied levels make the fit rank deficient; monotonicity is checked below
            warnings.simplefilter("ignore", np.exceptions.RankWarning)
            poly = np.polynomial.Polynomial.fit(pooled, ranks, degree)
        probe = np.union1d(np.linspace(pooled[0], pooled[-1], 4096), pooled)
        vals = poly(probe)
        # edge wiggles smaller than the slack only clamp a few levels when unfolding
        slack = max(MONOTONE_SLACK_MIN, MONOTONE_SLACK * pooled.size / R)
        if np.max(np.maximum.accumulate(vals) - vals) > slack:
            raise NonMonotoneError(
                f"degree-{degree} polynomial IDOS is not monotone on the data range; "
                "lower the degree"
            )
        func = poly
        params = {"degree": degree}
    else:
        spacing = (hi - lo) / (pooled.size / R)
        sigma = width * spacing
        n_grid = int(min(200_000, max(512, 4 * (hi - lo) / sigma)))
        grid = np.linspace(lo, hi, n_grid)
        vals = np.empty_like(grid)
        chunk = max(1, 4_000_000 // pooled.size)
        for i in range(0, grid.size, chunk):
            g = grid[i : i + chunk, None]
            vals[i : i + chunk] = ndtr((g - pooled[None, :]) / sigma).sum(axis=1) / R
        vals = np.maximum.accumulate(vals)
        func = PchipInterpolator(grid, vals, extrapolate=False)
        params = {"width": width}
    return IDOS(func, (lo, hi), method, params, R)


def unfold(spectrum, idos, *, window=None, trim=0.0, rescale=False):
    """Map levels through ``idos``, optionally keep a window and rescale.

    ``window`` selects raw energies in ``[a, b]``; ``trim`` then drops the
    given fraction of the window's unfolded span at each end. With
    ``rescale=True`` the levels are scaled so their mean spacing is exactly 1.
    """
    values = _values(spectrum)
    levels = np.asarray(idos(values), dtype=float)
    # PCHIP is monotone but floating round-off can reorder equal neighbours
    levels = np.maximum.accumulate(levels)
    if window is not None:
        a, b = map(float, window)
        keep = (values >= a) & (values <= b)
        levels = levels[keep]
        if trim:
            n_a, n_b = idos(np.array([a, b]))
            cut = trim * (n_b - n_a)
            levels = levels[(levels >= n_a + cut) & (levels <= n_b - cut)]
    scale = 1.0
    if rescale:
        if levels.size < 2:
            raise InsufficientDataError("cannot normalise fewer than two levels")
        scale = 1.0 / float(np.diff(levels).mean())
        levels = levels * scale
    meta = dict(spectrum.meta) if isinstance(spectrum, Spectrum) else {}
    return UnfoldedSpectrum(levels, meta, idos.describe(), scale)


def unfold_ensemble(spectra, idos, *, window=None, trim=0.0):
    """Unfold every realization with one common affine rescale.

    The scale is chosen so that the mean of all within-realization spacings
    pooled together is exactly 1; individual realizations keep their own
    count fluctuations.
    """
    parts = [unfold(s, idos, window=window, trim=trim) for s in spectra]
    gaps = [np.diff(p.levels) for p in parts if p.levels.size > 1]
    if not gaps:
        raise InsufficientDataError("no realization retains two levels")
    pooled = np.concatenate(gaps)
    scale = 1.0 / float(pooled.mean())
    return [UnfoldedSpectrum(p.levels * scale, p.source, p.method, scale) for p in parts]


def spacings(unfolded):
    """Nearest-neighbour spacings ``eps_n - eps_{n-1}`` in order."""
    levels = unfolded.levels if isinstance(unfolded, UnfoldedSpectrum) else np.asarray(unfolded)
    if levels.size < 2:
        raise InsufficientDataError(f"need at least 2 levels, got {levels.size}")
    # ties stay as exact zeros; round-off can make them -0.0 or -1e-17
    return SpacingSeries(np.maximum(np.diff(levels), 0.0))
