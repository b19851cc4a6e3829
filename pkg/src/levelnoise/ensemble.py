"""Many-realization experiments with an on-disk spectrum cache.

An experiment directory holds::

    plan.txt                  key=value plan, including its hash
    spectra/real_XXXXX.txt    one cached raw spectrum per realization
    provenance.csv            index, seed, solver and level count per realization
    power_spectrum.csv        averaged periodogram, "f,P"
    spacing_histogram.csv     "bin_center,density" rows, likewise for increments
    level_signal.csv          level signal of the first realization
    summary.txt               headline numbers

Every report file is a pure function of the plan and the cached spectra.
Floats are written with ``repr``, so a rerun on a warm cache reproduces the
report byte for byte, whatever the number of workers.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
import hashlib
import logging
import math
from pathlib import Path
import shutil

import numpy as np

from . import series_stats as st
from . import textio
from .eigensolver import DENSE_CAP, Spectrum, eigs_dense, eigs_window
from .errors import InsufficientDataError, FitDomainError, NonMonotoneError, PlanMismatchError, SolverError
from .models import AndersonParams, Boundary, GOLDEN_SIGMA, HarperParams, build_anderson, build_harper
from .unfolding import UnfoldMethod, default_method, estimate_idos, spacings, unfold_ensemble

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.10

# excluded from the plan hash: they select which realizations run and where
_RANGE_FIELDS = ("first_index", "n_realizations")
_LOCAL_FIELDS = ("output_dir", "workers")


class ExperimentAborted(RuntimeError):
    """Too many realizations failed to solve."""


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything that determines an experiment's outputs.

    ``window`` is the analysis window in raw energy; the solve window extends
    it by ``margin`` times its width on both sides. ``None`` analyses the full
    spectrum. ``unfolding=None`` picks the ensemble staircase from 10
    realizations upward and the degree-``degree`` polynomial below.
    """

    model: str = "anderson"
    L: int = 12
    W: float = 10.0
    boundary: str = "open"
    N: int = 2048
    sigma: float = GOLDEN_SIGMA
    phase: float = 0.0
    random_phase: bool = False
    n_realizations: int = 1
    first_index: int = 0
    base_seed: int = 0
    window: tuple = None
    margin: float = 0.1
    trim: float = 0.02
    unfolding: str = None
    levels_per_node: int = 200
    degree: int = 7
    signal_length: int = 2048
    fit_range: tuple = None
    solver: str = "auto"
    tol: float = 1e-8
    max_steps: int = None
    spacing_bin: float = 0.1
    increment_bin: float = 0.1
    increment_span: float = 5.0
    output_dir: str = None
    workers: int = 1

    def __post_init__(self):
        if self.model not in ("anderson", "harper"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.solver not in ("auto", "dense", "lanczos"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.n_realizations < 1 or self.first_index < 0:
            raise ValueError("need n_realizations >= 1 and first_index >= 0")
        if self.window is not None:
            a, b = map(float, self.window)
            if not a < b:
                raise ValueError(f"window must satisfy a < b, got {self.window!r}")
            object.__setattr__(self, "window", (a, b))
        if self.fit_range is not None:
            object.__setattr__(self, "fit_range", tuple(int(x) for x in self.fit_range))
        if self.unfolding is not None:
            object.__setattr__(self, "unfolding", UnfoldMethod(self.unfolding).value)
        if not 0 <= self.trim < 0.5 or self.margin < 0:
            raise ValueError("need 0 <= trim < 0.5 and margin >= 0")
        Boundary(self.boundary)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def indices(self):
        return range(self.first_index, self.first_index + self.n_realizations)

    @property
    def solve_window(self):
        if self.window is None:
            return None
        a, b = self.window
        pad = self.margin * (b - a)
        return (a - pad, b + pad)

    def record(self, include_range=True):
        """Ordered key/value view written to ``plan.txt`` and hashed."""
        skip = set(_LOCAL_FIELDS) | (set() if include_range else set(_RANGE_FIELDS))
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}

    @property
    def plan_hash(self):
        text = "\n".join(f"{k}={textio.format_value(v)}" for k, v in self.record(False).items())
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_record(cls, items):
        """Rebuild a plan from string values (``plan.txt`` or a config file)."""
        kwargs = {}
        types = {f.name: f for f in fields(cls)}
        for key, raw in items.items():
            if key == "plan_hash":
                continue
            if key not in types:
                raise KeyError(key)
            kwargs[key] = _parse_field(key, raw)
        return cls(**kwargs)


_INT = {"L", "N", "n_realizations", "first_index", "base_seed", "levels_per_node", "degree", "signal_length", "workers"}
_FLOAT = {"W", "sigma", "phase", "margin", "trim", "tol", "spacing_bin", "increment_bin", "increment_span"}
_PAIR = {"window", "fit_range"}


def _parse_field(key, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if key == "max_steps":
        return None if text.lower() in ("none", "") else int(text)
    if key in _PAIR or key in ("unfolding", "output_dir"):
        if text.lower() in ("none", ""):
            return None
        if key in _PAIR:
            parts = text.split(",")
            if len(parts) != 2:
                raise ValueError(f"{key} expects two comma-separated numbers, got {raw!r}")
            return tuple(float(p) for p in parts)
        return text
    if key in _INT:
        return int(text)
    if key in _FLOAT:
        return float(text)
    if key == "random_phase":
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"random_phase expects a boolean, got {raw!r}")
        return text.lower() in ("true", "1", "yes")
    return text


def realization_seed(base_seed, index):
    """Seed of realization ``index``; depends on nothing else."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def build_realization(plan, index):
    """Hamiltonian and provenance of one realization."""
    seed = realization_seed(plan.base_seed, index)
    if plan.model == "anderson":
        params = AndersonParams(plan.L, plan.W, seed, plan.boundary)
        meta = {"model": "anderson", "L": plan.L, "W": plan.W, "boundary": plan.boundary}
        matrix = build_anderson(params)
    else:
        phase = plan.phase
        if plan.random_phase:
            phase = 2 * math.pi * np.random.default_rng(seed).random()
        params = HarperParams(plan.N, plan.sigma, phase)
        meta = {"model": "harper", "N": plan.N, "sigma": plan.sigma, "phase": phase}
        matrix = build_harper(params)
    meta.update(index=index, seed=seed)
    return matrix, meta


def solve_realization(plan, index):
    matrix, meta = build_realization(plan, index)
    meta["plan_hash"] = plan.plan_hash
    window = plan.solve_window
    solver = plan.solver
    if solver == "auto":
        solver = "dense" if matrix.dim <= DENSE_CAP else "lanczos"
    if solver == "dense":
        spec = eigs_dense(matrix, cap=max(DENSE_CAP, matrix.dim))
        values = spec.values
        if window is not None:
            values = values[(values >= window[0]) & (values <= window[1])]
            meta["window"] = window
        meta["solver"] = "dense"
        return Spectrum(values, meta)
    if window is None:
        raise ValueError("the Lanczos path needs an energy window")
    return eigs_window(matrix, window, tol=plan.tol, max_steps=plan.max_steps, seed=meta["seed"], meta=meta)


def cache_path(directory, index):
    return Path(directory) / "spectra" / f"real_{index:05d}.txt"


def load_cached(path, plan_hash):
    """Cached spectrum if present and stamped with ``plan_hash``, else None."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        spec = Spectrum.load(path)
    except ValueError as exc:
        log.warning("ignoring unreadable cache file %s: %s", path, exc)
        return None
    if spec.meta.get("plan_hash") != plan_hash:
        log.warning("cache file %s carries a different plan hash; recomputing", path)
        return None
    return spec


def _run_one(args):
    plan, index = args
    path = cache_path(plan.output_dir, index)
    if load_cached(path, plan.plan_hash) is not None:
        return index, None
    try:
        spec = solve_realization(plan, index)
    except SolverError as exc:
        return index, str(exc)
    spec.save(path)
    return index, None


@dataclass
class ExperimentReport:
    """Reduced statistics of an ensemble of cached spectra."""

    plan: ExperimentPlan
    summary: dict
    power: st.PowerSpectrum = None
    fit: st.PowerLawFit = None
    spacing_hist: st.Histogram = None
    increment_hist: st.Histogram = None
    abs_increment_hist: st.Histogram = None
    gaussian: st.GaussianFit = None
    signal: np.ndarray = None
    provenance: list = field(default_factory=list)
    spacings: np.ndarray = None
    increments: np.ndarray = None
    signals: list = field(default_factory=list)
    output_dir: Path = None
    provenance_columns: tuple = ("index", "seed", "solver", "n_levels", "file")

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        head = {"plan_hash": self.plan.plan_hash, "model": self.plan.model}
        rec = dict(self.plan.record())
        rec["plan_hash"] = self.plan.plan_hash
        textio.write_keyvalue(directory / "plan.txt", rec)
        textio.write_table(
            directory / "provenance.csv",
            list(self.provenance_columns),
            self.provenance,
            head,
        )
        fmeta = dict(head, unfolding=self.summary["unfolding"])
        if self.power is not None:
            fmeta.update(
                n_averaged=self.power.n_averaged,
                N=self.power.N,
                fit_range=self.summary["fit_range"],
                alpha=self.summary["alpha"],
            )
            textio.write_table(
                directory / "power_spectrum.csv",
                ["f", "P"],
                zip(self.power.frequencies.tolist(), self.power.powers.tolist()),
                fmeta,
            )
        for name, hist in (
            ("spacing_histogram.csv", self.spacing_hist),
            ("increment_histogram.csv", self.increment_hist),
            ("increment_abs_histogram.csv", self.abs_increment_hist),
        ):
            if hist is not None:
                textio.write_table(
                    directory / name,
                    ["bin_center", "density"],
                    zip(hist.centers.tolist(), hist.density.tolist()),
                    dict(fmeta, bin_width=hist.bin_width),
                )
        if self.signal is not None:
            textio.write_table(
                directory / "level_signal.csv",
                ["n", "eps"],
                zip(range(1, self.signal.size + 1), self.signal.tolist()),
                dict(fmeta, realization=self.provenance[0][0]),
            )
        textio.write_keyvalue(directory / "summary.txt", self.summary)
        self.output_dir = directory
        return directory


def _unfold_all(plan, spectra):
    method = UnfoldMethod(plan.unfolding) if plan.unfolding else default_method(len(spectra))
    degree = plan.degree
    window = plan.window or (
        min(float(s.values[0]) for s in spectra if len(s)),
        max(float(s.values[-1]) for s in spectra if len(s)),
    )
    while True:
        try:
            idos = estimate_idos(
                spectra,
                method,
                levels_per_node=plan.levels_per_node,
                degree=degree,
                domain=plan.solve_window,
            )
            break
        except NonMonotoneError:
            # Cantor-like spectra defeat high-degree fits; step down and report
            if method is not UnfoldMethod.POLYNOMIAL or degree <= 1:
                raise
            degree -= 1
            log.warning("polynomial IDOS not monotone; retrying with degree %d", degree)
    trim = plan.trim if plan.window else 0.0
    return unfold_ensemble(spectra, idos, window=window, trim=trim), idos


def _maybe(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (InsufficientDataError, FitDomainError) as exc:
        log.warning("%s unavailable: %s", getattr(fn, "__name__", fn), exc)
        return None


def _statistics(plan, per_real, signal_pieces):
    """Distribution and signal statistics shared by spectra and zero tables.

    ``per_real`` are the spacing sequences whose pooled values and
    increments enter the histograms; ``signal_pieces`` are equal-length
    spacing sequences turned into level signals and averaged periodograms.
    """
    pooled = np.concatenate(per_real)
    incs = [np.diff(s) for s in per_real if s.size >= 2]
    increments = np.concatenate(incs) if incs else np.empty(0)
    summary = {"n_spacings": int(pooled.size), "mean_spacing": float(pooled.mean())}

    top = plan.spacing_bin * max(1, math.ceil(pooled.max() / plan.spacing_bin + 1e-9))
    spacing_hist = st.histogram(pooled, plan.spacing_bin, (0.0, top))
    for kind in ("wigner_goe", "poisson", "semi_poisson"):
        d = st.distribution_distance(pooled, st.reference_distribution(kind), plan.spacing_bin)
        summary[f"ks_{kind}"] = d.ks
        summary[f"l1_{kind}"] = d.l1
    beta = _maybe(st.small_spacing_exponent, pooled)
    summary["beta_small_s"] = beta.beta if beta else float("nan")

    increment_hist = abs_hist = gaussian = None
    for key in ("mu", "sigma2", "gauss_ks", "ks_laplace", "ks_abs_poisson_increment"):
        summary[key] = float("nan")
    if increments.size >= 2:
        span = plan.increment_span
        increment_hist = st.histogram(increments, plan.increment_bin, (-span, span))
        abs_hist = st.histogram(np.abs(increments), plan.increment_bin, (0.0, span))
        gaussian = st.fit_gaussian(increments)
        summary.update(mu=gaussian.mu, sigma2=gaussian.sigma2, gauss_ks=gaussian.goodness)
        summary["ks_laplace"] = st.ks_distance(increments, st.reference_distribution("laplace", b=1.0).cdf)
        folded = st.reference_distribution("poisson_increment").folded()
        summary["ks_abs_poisson_increment"] = st.ks_distance(np.abs(increments), folded.cdf)

    signals = [st.level_signal(s).values for s in signal_pieces]
    n_sig = signals[0].size
    summary["signal_length"] = n_sig
    summary["n_signals"] = len(signals)
    power = fit = None
    for key in ("alpha", "alpha_err", "D_from_alpha", "box_D", "box_D_std"):
        summary[key] = float("nan")
    summary["fit_range"] = "none"
    if n_sig >= 4:
        power = st.average_power_spectra([st.power_spectrum(x) for x in signals])
        fit = _maybe(st.fit_power_law, power, plan.fit_range)
        if fit is not None:
            summary.update(
                alpha=fit.alpha,
                alpha_err=fit.alpha_err,
                D_from_alpha=st.dimension_from_alpha(fit),
                fit_range=fit.f_range,
            )
    if n_sig >= 64:
        boxes = [st.box_counting_dimension(x).dimension for x in signals if np.ptp(x) > 0]
        if boxes:
            summary["box_D"] = float(np.mean(boxes))
            summary["box_D_std"] = float(np.std(boxes))
    return summary, dict(
        power=power,
        fit=fit,
        spacing_hist=spacing_hist,
        increment_hist=increment_hist,
        abs_increment_hist=abs_hist,
        gaussian=gaussian,
        signal=signals[0],
        spacings=pooled,
        increments=increments,
        signals=signals,
    )


def analyze_spectra(plan, spectra, failed=()):
    """Reduce cached spectra (sorted by index) to an :class:`ExperimentReport`."""
    spectra = [s for s in spectra if len(s) >= 2]
    if not spectra:
        raise InsufficientDataError("no realization holds two levels")
    unfolded, idos = _unfold_all(plan, spectra)
    per_real = [np.asarray(spacings(u).spacings) for u in unfolded if len(u) >= 2]
    n_sig = min(plan.signal_length, min(s.size for s in per_real))
    summary = {
        "plan_hash": plan.plan_hash,
        "n_realizations": len(spectra),
        "n_failed": len(failed),
        "failed_indices": ",".join(str(i) for i in failed) or "none",
        "unfolding": idos.describe(),
        "n_levels": int(sum(len(u) for u in unfolded)),
    }
    stats_summary, parts = _statistics(plan, per_real, [s[:n_sig] for s in per_real])
    summary.update(stats_summary)
    provenance = [
        (int(s.meta["index"]), int(s.meta["seed"]), s.meta.get("solver", ""), len(s), f"spectra/real_{int(s.meta['index']):05d}.txt")
        for s in spectra
    ]
    return ExperimentReport(plan=plan, summary=summary, provenance=provenance, **parts)


def _collect(plan, directory):
    spectra, failed = [], []
    for i in plan.indices:
        spec = load_cached(cache_path(directory, i), plan.plan_hash)
        if spec is None:
            failed.append(i)
        else:
            spectra.append(spec)
    return spectra, failed


def run_experiment(plan, progress=None):
    """Solve (or reuse) every realization, then reduce and write the report.

    Raises
    ------
    ExperimentAborted
        More than 10% of the realizations failed to solve.
    """
    if plan.output_dir is None:
        raise ValueError("plan.output_dir is required")
    out = Path(plan.output_dir)
    (out / "spectra").mkdir(parents=True, exist_ok=True)
    jobs = [(plan, i) for i in plan.indices]
    errors = {}
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_one(job))
            if progress is not None:
                progress(job[1])
    for index, err in results:
        if err is not None:
            errors[index] = err
            log.warning("realization %d failed: %s", index, err)
    if len(errors) > MAX_FAILURE_FRACTION * plan.n_realizations:
        raise ExperimentAborted(
            f"{len(errors)} of {plan.n_realizations} realizations failed "
            f"(limit {MAX_FAILURE_FRACTION:.0%}); first: {next(iter(errors.values()))}"
        )
    spectra, failed = _collect(plan, out)
    report = analyze_spectra(plan, spectra, failed)
    report.write(out)
    return report


def load_plan(directory):
    return ExperimentPlan.from_record(textio.read_keyvalue(Path(directory) / "plan.txt"))


def merge_reports(parts, output_dir):
    """Combine partial runs over disjoint realization ranges.

    ``parts`` are experiment directories (or reports written to them). The
    result is recomputed from the union of cached spectra, so it equals a
    single run over the union exactly.
    """
    dirs = [Path(p.output_dir) if isinstance(p, ExperimentReport) else Path(p) for p in parts]
    if not dirs:
        raise PlanMismatchError("nothing to merge")
    plans = [load_plan(d) for d in dirs]
    hashes = {p.plan_hash for p in plans}
    if len(hashes) != 1:
        raise PlanMismatchError(f"plan hashes differ: {sorted(hashes)}")
    ranges = sorted((p.first_index, p.first_index + p.n_realizations, d) for p, d in zip(plans, dirs))
    for (a0, a1, da), (b0, b1, db) in zip(ranges, ranges[1:]):
        if b0 < a1:
            raise PlanMismatchError(f"realization ranges of {da} and {db} overlap")
        if b0 > a1:
            raise PlanMismatchError(f"gap between {da} and {db}: indices {a1}..{b0 - 1} missing")
    first, last = ranges[0][0], ranges[-1][1]
    merged = replace(plans[0], first_index=first, n_realizations=last - first, output_dir=str(output_dir))
    out = Path(output_dir)
    (out / "spectra").mkdir(parents=True, exist_ok=True)
    for lo, hi, d in ranges:
        for i in range(lo, hi):
            src = cache_path(d, i)
            if src.exists() and src.resolve() != cache_path(out, i).resolve():
                shutil.copyfile(src, cache_path(out, i))
    spectra, failed = _collect(merged, out)
    if len(failed) > MAX_FAILURE_FRACTION * merged.n_realizations:
        raise ExperimentAborted(f"{len(failed)} of {merged.n_realizations} realizations missing")
    report = analyze_spectra(merged, spectra, failed)
    report.write(out)
    return report


@dataclass(frozen=True)
class ZerosPlan:
    """Analysis settings for a table of zeta zeros.

    The unfolded spacings are cut into consecutive segments of
    ``signal_length`` whose periodograms are averaged; histograms and fits
    use the whole selected sequence.
    """

    zeros: str = "bundled"
    offset: int = 0
    count: int = None
    signal_length: int = 2048
    fit_range: tuple = None
    spacing_bin: float = 0.1
    increment_bin: float = 0.1
    increment_span: float = 5.0
    output_dir: str = None

    model = "zeta_zeros"

    def record(self, include_range=True):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "output_dir"}

    @property
    def plan_hash(self):
        text = "\n".join(f"{k}={textio.format_value(v)}" for k, v in self.record().items())
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def analyze_zeros(plan, table):
    """Report for zeros ``offset+1 .. offset+count`` of ``table``."""
    from .riemann import unfold_zeros

    unfolded = unfold_zeros(table, plan.offset, plan.count)
    s = np.asarray(spacings(unfolded).spacings)
    n_sig = min(plan.signal_length, s.size)
    pieces = [s[k : k + n_sig] for k in range(0, s.size - n_sig + 1, n_sig)]
    summary = {
        "plan_hash": plan.plan_hash,
        "first_zero": unfolded.source["first_zero"],
        "n_zeros": len(unfolded),
        "unfolding": unfolded.method,
    }
    stats_summary, parts = _statistics(plan, [s], pieces)
    summary.update(stats_summary)
    first = unfolded.source["first_zero"]
    provenance = [(k, first + k * n_sig, n_sig) for k in range(len(pieces))]
    return ExperimentReport(
        plan=plan,
        summary=summary,
        provenance=provenance,
        provenance_columns=("segment", "first_zero", "n_spacings"),
        **parts,
    )
