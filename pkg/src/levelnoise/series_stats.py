"""Statistics of level and spacing sequences.

The level signal is the running sum of centred spacings,
``eps_n = sum_{i<=n} (S_i - <S>)``. Its periodogram

    P(f) = |sum_n eps_n exp(-2 pi i f n / N)|**2 / N,   f = 1 .. N/2,

is fitted by a power law ``P ~ f**-alpha`` whose exponent maps to the graph
dimension ``D = (5 - alpha) / 2``. Spacing increments ``S_n - S_{n-1}`` are
compared with a fitted Gaussian and with reference laws.
"""
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .errors import DomainError, FitDomainError, InsufficientDataError
from .series import SpacingSeries


@dataclass(frozen=True)
class LevelSignal:
    values: np.ndarray
    mean_spacing: float

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class PowerSpectrum:
    """Periodogram at integer frequencies ``1 .. N // 2``."""

    powers: np.ndarray
    n_averaged: int
    N: int

    @property
    def frequencies(self):
        return np.arange(1, self.N // 2 + 1)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    alpha_err: float
    f_range: tuple
    intercept: float = 0.0


@dataclass(frozen=True)
class IncrementSeries:
    increments: np.ndarray

    def __len__(self):
        return len(self.increments)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.increments, dtype=dtype)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    n_outside: int = 0

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma2: float
    goodness: float
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class BoxCount:
    dimension: float
    scales: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class DistributionDistance:
    ks: float
    l1: float


@dataclass(frozen=True)
class SmallSpacingFit:
    beta: float
    beta_err: float
    s_max: float
    n: int


def _array(x):
    if isinstance(x, SpacingSeries):
        return np.asarray(x.spacings, dtype=float)
    if isinstance(x, (LevelSignal,)):
        return np.asarray(x.values, dtype=float)
    if isinstance(x, IncrementSeries):
        return np.asarray(x.increments, dtype=float)
    return np.asarray(x, dtype=float)


# --- level signal and its spectrum -------------------------------------------


def level_signal(spacings, mean=None):
    """Cumulative centred spacings; ``mean`` defaults to the sample mean."""
    s = _array(spacings)
    if s.size == 0:
        raise InsufficientDataError("level signal of an empty spacing series")
    m = float(s.mean()) if mean is None else float(mean)
    return LevelSignal(np.cumsum(s - m), m)


def power_spectrum(signal):
    x = _array(signal)
    N = x.size
    if N < 4:
        raise InsufficientDataError(f"power spectrum needs N >= 4, got {N}")
    X = np.fft.fft(x)[1 : N // 2 + 1]
    return PowerSpectrum((X.real**2 + X.imag**2) / N, 1, N)


def direct_power_spectrum(signal, full=False):
    """Reference O(N^2) evaluation of the periodogram sum, n = 1 .. N.

    With ``full=True`` every frequency ``0 .. N-1`` is returned, which is the
    set Parseval's identity sums over.
    """
    x = _array(signal)
    N = x.size
    f = np.arange(N) if full else np.arange(1, N // 2 + 1)
    n = np.arange(1, N + 1)
    phase = np.exp(-2j * np.pi * np.outer(f, n) / N)
    S = phase @ x
    return (S.real**2 + S.imag**2) / N


def average_power_spectra(spectra):
    """Element-wise mean, weighted by how many realizations each input holds."""
    spectra = list(spectra)
    if not spectra:
        raise InsufficientDataError("nothing to average")
    N = spectra[0].N
    if any(p.N != N for p in spectra):
        raise ValueError(f"mismatched signal lengths: {sorted({p.N for p in spectra})}")
    weights = np.array([p.n_averaged for p in spectra], dtype=float)
    total = np.zeros_like(spectra[0].powers)
    for w, p in zip(weights, spectra):
        total = total + w * p.powers
    n = int(weights.sum())
    return PowerSpectrum(total / n, n, N)


def default_fit_range(N):
    """``[4, N/32]``, widened to 8 frequencies for short signals."""
    hi = max(N // 32, 11)
    return (4, min(hi, N // 2))


def fit_power_law(spectrum, f_range=None):
    """Least-squares slope of ``log P`` against ``log f`` over ``f_range``."""
    lo, hi = default_fit_range(spectrum.N) if f_range is None else map(int, f_range)
    f = spectrum.frequencies
    sel = (f >= lo) & (f <= hi)
    if sel.sum() < 8:
        raise FitDomainError(f"fit range [{lo}, {hi}] holds {int(sel.sum())} frequencies, need 8")
    p = spectrum.powers[sel]
    if np.any(p <= 0):
        raise FitDomainError("nonpositive power inside the fit range")
    res = stats.linregress(np.log(f[sel]), np.log(p))
    return PowerLawFit(float(-res.slope), float(res.stderr), (lo, hi), float(res.intercept))


def dimension_from_alpha(fit):
    alpha = fit.alpha if isinstance(fit, PowerLawFit) else float(fit)
    return (5.0 - alpha) / 2.0


def alpha_from_dimension(D):
    return 5.0 - 2.0 * float(D)


# --- fractal dimension --------------------------------------------------------


def default_box_scales(N):
    """Six dyadic scales; the finest keeps >= 16 samples per column when N allows."""
    k_max = max(5, int(math.floor(math.log2(N / 16.0))))
    return 2.0 ** -np.arange(k_max - 5, k_max + 1)


def box_counting_dimension(signal, scales=None):
    """Box-counting dimension of the graph ``(n, eps_n)`` in the unit square.

    The curve is rescaled to the unit square and linearly interpolated
    between samples. For a scale ``s`` the abscissa is cut into columns of
    width ``s`` and each column needs ``(max - min) / s`` boxes of side ``s``
    to cover the curve inside it. The dimension is the slope of
    ``log count`` against ``log(1/s)``.
    """
    y = _array(signal)
    N = y.size
    if N < 64:
        raise InsufficientDataError(f"box counting needs N >= 64, got {N}")
    scales = default_box_scales(N) if scales is None else np.asarray(scales, dtype=float)
    scales = np.sort(scales)[::-1]
    if scales.size < 4 or math.log10(scales[0] / scales[-1]) < 1.5 - 1e-9:
        raise ValueError("need >= 4 scales spanning >= 1.5 decades")
    span = y.max() - y.min()
    if span <= 0:
        raise DomainError("box-counting dimension undefined for a constant signal")
    y = (y - y.min()) / span
    x = np.linspace(0.0, 1.0, N)
    counts = np.empty(scales.size)
    for i, s in enumerate(scales):
        m = int(round(1.0 / s))
        edges = np.linspace(0.0, 1.0, m + 1)
        ye = np.interp(edges, x, y)
        lo = np.minimum(ye[:-1], ye[1:])
        hi = np.maximum(ye[:-1], ye[1:])
        col = np.minimum((x * m).astype(int), m - 1)
        np.minimum.at(lo, col, y)
        np.maximum.at(hi, col, y)
        counts[i] = np.sum(hi - lo) / s
    slope = np.polyfit(np.log(1.0 / scales), np.log(counts), 1)[0]
    return BoxCount(float(slope), scales, counts)


# --- distributions ------------------------------------------------------------


def histogram(samples, bin_width, range=None):
    """Histogram with uniform bins and density normalised to unit integral.

    Without ``range`` the bins start at the sample minimum and cover every
    sample. Samples outside an explicit ``range`` are counted in
    ``n_outside`` and excluded from the normalisation.
    """
    x = _array(samples).ravel()
    if x.size == 0:
        raise InsufficientDataError("histogram of an empty sample")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if range is None:
        lo = float(x.min())
        nbins = max(1, int(math.floor((x.max() - lo) / bin_width)) + 1)
    else:
        lo, hi = map(float, range)
        nbins = max(1, int(math.ceil((hi - lo) / bin_width - 1e-9)))
    edges = lo + bin_width * np.arange(nbins + 1)
    inside = (x >= edges[0]) & (x <= edges[-1])
    counts, _ = np.histogram(x[inside], bins=edges)
    total = counts.sum()
    density = counts / (total * bin_width) if total else np.zeros(nbins)
    return Histogram(edges, counts, density, int(x.size - inside.sum()))


class ReferenceKind(str, Enum):
    WIGNER_GOE = "wigner_goe"
    GOE_SMALL_S = "goe_small_s"
    GUE_SMALL_S = "gue_small_s"
    POISSON = "poisson"
    SEMI_POISSON = "semi_poisson"
    GAUSS = "gauss"
    LAPLACE = "laplace"
    POISSON_INCREMENT = "poisson_increment"


@dataclass(frozen=True)
class ReferenceDistribution:
    """Closed-form reference law.

    The ``*_small_s`` kinds are the leading small-spacing behaviour
    ``P(S) ~ c S**beta`` of the GOE (beta=1) and GUE (beta=2) surmises; they
    are not normalised and have no CDF. ``poisson_increment`` is the signed
    density ``exp(-2|x|)``; ``folded()`` gives the law of ``|x|``.
    """

    kind: ReferenceKind
    params: dict = field(default_factory=dict)
    folded_: bool = False

    @property
    def beta(self):
        return {ReferenceKind.GOE_SMALL_S: 1, ReferenceKind.GUE_SMALL_S: 2}.get(self.kind)

    @property
    def has_cdf(self):
        return self.beta is None

    def _laplace_scale(self):
        if self.kind is ReferenceKind.POISSON_INCREMENT:
            return 0.5
        return float(self.params["b"])

    def folded(self):
        symmetric = self.kind in (ReferenceKind.LAPLACE, ReferenceKind.POISSON_INCREMENT) or (
            self.kind is ReferenceKind.GAUSS and self.params["mu"] == 0
        )
        if not symmetric:
            raise ValueError(f"{self.kind.value} is not symmetric about 0")
        return ReferenceDistribution(self.kind, self.params, True)

    def _signed_pdf(self, x):
        k = self.kind
        if k is ReferenceKind.GAUSS:
            mu, s2 = self.params["mu"], self.params["sigma2"]
            return np.exp(-((x - mu) ** 2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
        b = self._laplace_scale()
        return np.exp(-np.abs(x) / b) / (2 * b)

    def _signed_cdf(self, x):
        if self.kind is ReferenceKind.GAUSS:
            mu, s2 = self.params["mu"], self.params["sigma2"]
            return ndtr((x - mu) / np.sqrt(s2))
        b = self._laplace_scale()
        return np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0) / b), 1 - 0.5 * np.exp(-np.maximum(x, 0) / b))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        pos = x >= 0
        xp = np.where(pos, x, 0.0)
        if k is ReferenceKind.WIGNER_GOE:
            return np.where(pos, np.pi / 2 * xp * np.exp(-np.pi * xp**2 / 4), 0.0)
        if k is ReferenceKind.GOE_SMALL_S:
            return np.where(pos, np.pi / 2 * xp, 0.0)
        if k is ReferenceKind.GUE_SMALL_S:
            return np.where(pos, 32 / np.pi**2 * xp**2, 0.0)
        if k is ReferenceKind.POISSON:
            return np.where(pos, np.exp(-xp), 0.0)
        if k is ReferenceKind.SEMI_POISSON:
            return np.where(pos, 4 * xp * np.exp(-2 * xp), 0.0)
        if self.folded_:
            return np.where(pos, 2 * self._signed_pdf(xp), 0.0)
        return self._signed_pdf(x)

    def cdf(self, x):
        if not self.has_cdf:
            raise ValueError(f"{self.kind.value} is a small-S asymptote without a CDF")
        x = np.asarray(x, dtype=float)
        k = self.kind
        xp = np.maximum(x, 0.0)
        if k is ReferenceKind.WIGNER_GOE:
            return 1 - np.exp(-np.pi * xp**2 / 4)
        if k is ReferenceKind.POISSON:
            return 1 - np.exp(-xp)
        if k is ReferenceKind.SEMI_POISSON:
            return 1 - (1 + 2 * xp) * np.exp(-2 * xp)
        if self.folded_:
            return 2 * self._signed_cdf(xp) - 1
        return self._signed_cdf(x)

    @property
    def support(self):
        signed = self.kind in (ReferenceKind.GAUSS, ReferenceKind.LAPLACE, ReferenceKind.POISSON_INCREMENT)
        return (-np.inf if signed and not self.folded_ else 0.0, np.inf)


def reference_distribution(kind, **params):
    """Reference curve evaluator.

    ``gauss`` takes ``mu`` (default 0) and ``sigma2`` (default 1);
    ``laplace`` takes ``b`` (default 1).
    """
    kind = ReferenceKind(kind)
    if kind is ReferenceKind.GAUSS:
        p = {"mu": float(params.get("mu", 0.0)), "sigma2": float(params.get("sigma2", 1.0))}
        if not p["sigma2"] > 0:
            raise ValueError("gauss needs sigma2 > 0")
    elif kind is ReferenceKind.LAPLACE:
        p = {"b": float(params.get("b", 1.0))}
        if not p["b"] > 0:
            raise ValueError("laplace needs b > 0")
    else:
        if params:
            raise ValueError(f"{kind.value} takes no parameters")
        p = {}
    return ReferenceDistribution(kind, p)


def ks_distance(samples, cdf):
    """One-sample Kolmogorov-Smirnov sup distance to a CDF callable."""
    x = np.sort(_array(samples).ravel())
    n = x.size
    if n == 0:
        raise InsufficientDataError("KS distance of an empty sample")
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def distribution_distance(data, reference, bin_width=0.1):
    """KS sup distance on CDFs and L1 distance on densities.

    ``data`` may be raw samples, a :class:`Histogram` or another
    :class:`ReferenceDistribution`. For a histogram the KS distance is taken
    at the bin edges.
    """
    if isinstance(data, ReferenceDistribution):
        lo = max(data.support[0], reference.support[0])
        lo = -12.0 if np.isinf(lo) else lo
        grid = np.linspace(lo, 12.0, 200_001)
        ks = float(np.max(np.abs(data.cdf(grid) - reference.cdf(grid))))
        l1 = float(np.trapezoid(np.abs(data.pdf(grid) - reference.pdf(grid)), grid))
        return DistributionDistance(ks, l1)
    if isinstance(data, Histogram):
        hist = data
        n = hist.counts.sum()
        emp = np.concatenate([[0.0], np.cumsum(hist.counts) / n])
        ks = float(np.max(np.abs(emp - reference.cdf(hist.edges) + reference.cdf(hist.edges[0]))))
    else:
        ks = ks_distance(data, reference.cdf)
        hist = histogram(data, bin_width)
    l1 = float(np.sum(np.abs(hist.density - reference.pdf(hist.centers))) * hist.bin_width)
    return DistributionDistance(ks, l1)


# --- increments ---------------------------------------------------------------


def increment_series(spacings):
    """Spacing increments ``S_n - S_{n-1}``."""
    s = _array(spacings)
    if s.size < 2:
        raise InsufficientDataError(f"need at least 2 spacings, got {s.size}")
    return IncrementSeries(np.diff(s))


def fit_gaussian(increments, min_samples=2):
    """Moment fit of a normal law plus its KS sup distance to the data.

    A zero-variance sample is flagged ``degenerate`` with ``goodness`` NaN.
    """
    x = _array(increments).ravel()
    if x.size < min_samples:
        raise InsufficientDataError(f"Gaussian fit needs {min_samples} samples, got {x.size}")
    if np.ptp(x) == 0:
        return GaussianFit(float(x[0]), 0.0, float("nan"), int(x.size), True)
    mu = float(x.mean())
    sigma2 = float(x.var())
    ks = ks_distance(x, lambda t: ndtr((t - mu) / math.sqrt(sigma2)))
    return GaussianFit(mu, sigma2, ks, int(x.size))


def small_spacing_exponent(spacings, s_max=0.3):
    """Exponent ``beta`` of ``P(S) ~ S**beta`` below ``s_max``.

    Maximum-likelihood estimate for a pure power law on ``(0, s_max]``:
    ``beta + 1 = n / sum(log(s_max / S_i))``; exact zeros are skipped.
    """
    s = _array(spacings)
    s = s[(s > 0) & (s <= s_max)]
    if s.size < 10:
        raise InsufficientDataError(f"only {s.size} spacings below {s_max}")
    k = s.size / np.sum(np.log(s_max / s))
    return SmallSpacingFit(float(k - 1), float(k / math.sqrt(s.size)), float(s_max), int(s.size))
