"""Command-line driver: ``levelnoise {run,zeros,figures,merge}``.

Configuration comes from an optional ``key=value`` file (``--config``) and
command-line flags; flags win. The effective configuration is written to
``config.txt`` in every output directory. Output directories default to
``$LEVELNOISE_CACHE/<name>`` (``./levelnoise_runs`` when unset); ``--cache-root``
overrides the variable.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
import argparse
from dataclasses import fields, replace
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__, textio
from . import series_stats as st
from .ensemble import (
    ExperimentAborted,
    ExperimentPlan,
    ZerosPlan,
    analyze_zeros,
    merge_reports,
    run_experiment,
)
from .errors import PlanMismatchError

log = logging.getLogger("levelnoise")

CACHE_ENV = "LEVELNOISE_CACHE"

# flag name -> plan field, for flags whose names differ from the field
_RUN_ALIASES = {
    "realizations": "n_realizations",
    "seed": "base_seed",
    "output": "output_dir",
    "unfold": "unfolding",
}
_REQUIRED = {"anderson": ("L", "W"), "harper": ("N",)}


class UsageError(Exception):
    pass


def _plan_fields():
    return {f.name for f in fields(ExperimentPlan)}


def read_config(path):
    try:
        return textio.read_keyvalue(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cache_root(args):
    root = getattr(args, "cache_root", None) or os.environ.get(CACHE_ENV) or "levelnoise_runs"
    return Path(root)


def effective_config(args, flag_keys, aliases):
    """Merge the config file with explicitly given flags (flags win)."""
    config = read_config(args.config) if args.config else {}
    config = {aliases.get(k, k): v for k, v in config.items()}
    for flag in flag_keys:
        value = getattr(args, flag, None)
        if value is not None:
            config[aliases.get(flag, flag)] = value if isinstance(value, str) else str(value)
    return config


def _effective(plan, **extra):
    config = {k: textio.format_value(v) for k, v in plan.record().items()}
    config["output_dir"] = str(plan.output_dir)
    config.update({k: textio.format_value(v) for k, v in extra.items()})
    return config


def _echo_config(directory, config):
    textio.write_keyvalue(Path(directory) / "config.txt", dict(sorted(config.items())))


def _print_summary(summary, keys):
    for key in keys:
        if key in summary:
            print(f"{key}={textio.format_value(summary[key])}")


_HEADLINE = (
    "n_realizations",
    "n_failed",
    "n_spacings",
    "mean_spacing",
    "ks_wigner_goe",
    "ks_poisson",
    "sigma2",
    "gauss_ks",
    "beta_small_s",
    "alpha",
    "alpha_err",
    "D_from_alpha",
    "box_D",
)


# --- run ------------------------------------------------------------------------

_RUN_FLAGS = (
    "model", "L", "W", "boundary", "N", "sigma", "phase", "random_phase",
    "realizations", "first_index", "seed", "window", "margin", "trim", "unfold",
    "levels_per_node", "degree", "signal_length", "fit_range", "solver", "tol", "max_steps",
    "spacing_bin", "increment_bin", "increment_span", "output", "workers",
)


def build_plan(config, args):
    valid = _plan_fields()
    unknown = sorted(set(config) - valid)
    if unknown:
        raise UsageError(f"unknown configuration key(s): {', '.join(unknown)}")
    model = config.get("model")
    if model is None:
        raise UsageError("missing required key: model")
    for key in _REQUIRED.get(model, ()):
        if key not in config:
            raise UsageError(f"missing required key: {key} (model={model})")
    try:
        plan = ExperimentPlan.from_record(config)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    if plan.output_dir is None:
        plan = replace(plan, output_dir=str(cache_root(args) / f"{plan.model}_{plan.plan_hash}"))
    return plan


def cmd_run(args):
    config = effective_config(args, _RUN_FLAGS, _RUN_ALIASES)
    plan = build_plan(config, args)
    report = run_experiment(plan)
    _echo_config(plan.output_dir, _effective(plan, workers=plan.workers))
    print(f"output={plan.output_dir}")
    _print_summary(report.summary, _HEADLINE)
    return 0


# --- zeros ----------------------------------------------------------------------

_ZEROS_FLAGS = ("zeros", "offset", "count", "signal_length", "fit_range", "spacing_bin", "increment_bin", "increment_span", "output")


def cmd_zeros(args):
    from .riemann import load_bundled_zeros, load_zeros

    config = effective_config(args, _ZEROS_FLAGS, {"output": "output_dir"})
    known = {"zeros", "offset", "count", "signal_length", "fit_range", "spacing_bin",
             "increment_bin", "increment_span", "output_dir"}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown configuration key(s): {', '.join(unknown)}")
    try:
        kwargs = {}
        for key, raw in config.items():
            if key in ("offset", "count", "signal_length"):
                kwargs[key] = None if raw == "none" else int(raw)
            elif key == "fit_range":
                kwargs[key] = None if raw == "none" else tuple(int(float(x)) for x in raw.split(","))
            elif key in ("spacing_bin", "increment_bin", "increment_span"):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
        plan = ZerosPlan(**kwargs)
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    if plan.zeros == "bundled":
        table = load_bundled_zeros()
    else:
        if not Path(plan.zeros).is_file():
            raise FileNotFoundError(f"zeros file not found: {plan.zeros}")
        table = load_zeros(plan.zeros)
    out = plan.output_dir or str(cache_root(args) / f"zeros_{plan.plan_hash}")
    report = analyze_zeros(plan, table)
    report.write(out)
    _echo_config(out, _effective(plan, output_dir=out))
    print(f"output={out}")
    _print_summary(report.summary, ("first_zero", "n_zeros") + _HEADLINE)
    return 0


# --- merge ----------------------------------------------------------------------


def cmd_merge(args):
    report = merge_reports(args.parts, args.output)
    _echo_config(args.output, {"parts": ",".join(args.parts), "output_dir": args.output})
    print(f"output={args.output}")
    _print_summary(report.summary, _HEADLINE)
    return 0


# --- figures --------------------------------------------------------------------

_REGIMES = ("chaotic", "integrable", "harper", "zeros")


def _need(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"missing input: {path}")
    return path


def _series(path, column):
    columns, rows, meta = textio.read_table(_need(path))
    i = columns.index(column)
    return np.array([r[i] for r in rows], dtype=float), meta


def cmd_figures(args):
    """Collect the datasets behind the four figures from experiment directories."""
    dirs = {r: getattr(args, r) for r in _REGIMES if getattr(args, r)}
    missing = [r for r in ("chaotic", "integrable", "zeros") if r not in dirs]
    if missing:
        raise UsageError("missing required input director" + ("y" if len(missing) == 1 else "ies")
                         + ": " + ", ".join(f"--{m}" for m in missing))
    for r, d in dirs.items():
        if not Path(d).is_dir():
            raise FileNotFoundError(f"missing input: {r} directory {d}")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    names = list(dirs)
    provenance = {f"{r}_dir": str(d) for r, d in dirs.items()}
    for r, d in dirs.items():
        provenance[f"{r}_plan_hash"] = textio.read_keyvalue(_need(Path(d) / "summary.txt"))["plan_hash"]

    # figure 1: level signals
    sig = {r: _series(Path(d) / "level_signal.csv", "eps")[0] for r, d in dirs.items()}
    n = max(v.size for v in sig.values())
    rows = [[k + 1] + [float(sig[r][k]) if k < sig[r].size else None for r in names] for k in range(n)]
    textio.write_table(out / "fig1_signals.csv", ["n"] + [f"eps_{r}" for r in names], rows, provenance)

    # figure 2: averaged power spectra, one column pair per regime
    ps = {}
    meta2 = dict(provenance)
    for r, d in dirs.items():
        P, meta = _series(Path(d) / "power_spectrum.csv", "P")
        ps[r] = P
        meta2[f"{r}_alpha"] = meta.get("alpha", "nan")
        meta2[f"{r}_fit_range"] = meta.get("fit_range", "none")
    n = max(v.size for v in ps.values())
    rows = [[k + 1] + [float(ps[r][k]) if k < ps[r].size else None for r in names] for k in range(n)]
    textio.write_table(out / "fig2_powerspectra.csv", ["f"] + [f"P_{r}" for r in names], rows, meta2)

    # figure 3: spacing densities on a common bin grid plus reference curves
    width = None
    hists = {}
    for r, d in dirs.items():
        h, meta = _series(Path(d) / "spacing_histogram.csv", "density")
        c, _ = _series(Path(d) / "spacing_histogram.csv", "bin_center")
        hists[r] = dict(zip(np.round(c, 9), h))
        width = float(meta["bin_width"])
    top = max(max(v) for v in hists.values()) + width / 2
    centers = (np.arange(int(round(top / width))) + 0.5) * width
    refs = {k: st.reference_distribution(k) for k in ("wigner_goe", "poisson", "semi_poisson")}
    rows = []
    for c in centers:
        row = [float(c)] + [float(hists[r].get(round(c, 9), 0.0)) for r in names]
        row += [float(ref.pdf(c)) for ref in refs.values()]
        rows.append(row)
    textio.write_table(
        out / "fig3_spacings.csv",
        ["S"] + [f"P_{r}" for r in names] + list(refs),
        rows,
        dict(provenance, bin_width=width),
    )

    # figure 4: increment densities with fitted Gaussians and Laplace references
    cols = ["x"]
    data = {}
    meta4 = dict(provenance)
    for r, d in dirs.items():
        h, meta = _series(Path(d) / "increment_histogram.csv", "density")
        c, _ = _series(Path(d) / "increment_histogram.csv", "bin_center")
        summ = textio.read_keyvalue(Path(d) / "summary.txt")
        sigma2 = float(summ["sigma2"])
        meta4[f"{r}_sigma2"] = sigma2
        data[r] = (c, h, sigma2)
    x = data[names[0]][0]
    for r in names:
        if not np.allclose(data[r][0], x):
            raise ValueError(f"increment histogram bins of {r} differ from {names[0]}")
    cols += [f"P_{r}" for r in names] + [f"gauss_{r}" for r in names] + ["laplace", "poisson_increment"]
    lap = st.reference_distribution("laplace", b=1.0)
    pinc = st.reference_distribution("poisson_increment")
    gauss = {
        r: st.reference_distribution("gauss", sigma2=data[r][2]) if data[r][2] > 0 and math.isfinite(data[r][2]) else None
        for r in names
    }
    rows = []
    for k, xv in enumerate(x):
        row = [float(xv)] + [float(data[r][1][k]) for r in names]
        row += [float(gauss[r].pdf(xv)) if gauss[r] else None for r in names]
        row += [float(lap.pdf(xv)), float(pinc.pdf(xv))]
        rows.append(row)
    textio.write_table(out / "fig4_increments.csv", cols, rows, meta4)
    print(f"output={out}")
    return 0


# --- parser ---------------------------------------------------------------------


def _pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None
    return text


def build_parser():
    parser = argparse.ArgumentParser(
        prog="levelnoise",
        description="Level-spacing noise diagnostics for tight-binding spectra and zeta zeros.",
    )
    parser.add_argument("--version", action="version", version=f"levelnoise {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key=value configuration file")
        p.add_argument("--cache-root", metavar="DIR", help=f"root for default output directories (overrides ${CACHE_ENV})")

    run = sub.add_parser("run", help="solve an ensemble of Hamiltonians and analyse it")
    common(run)
    run.add_argument("--model", choices=["anderson", "harper"])
    run.add_argument("--L", type=int, help="Anderson lattice side")
    run.add_argument("--W", type=float, help="Anderson disorder strength")
    run.add_argument("--boundary", choices=["open", "periodic"])
    run.add_argument("--N", type=int, help="Harper chain length")
    run.add_argument("--sigma", type=float, help="Harper frequency (default inverse golden mean)")
    run.add_argument("--phase", type=float, help="Harper phase")
    run.add_argument("--random-phase", dest="random_phase", action="store_const", const="true",
                     help="draw a random Harper phase per realization")
    run.add_argument("--realizations", type=int, help="number of realizations")
    run.add_argument("--first-index", dest="first_index", type=int, help="index of the first realization")
    run.add_argument("--seed", type=int, help="base seed")
    run.add_argument("--window", type=_pair, metavar="A,B", help="analysis energy window")
    run.add_argument("--margin", type=float, help="solve margin as a fraction of the window width")
    run.add_argument("--trim", type=float, help="fraction of the unfolded window dropped at each end")
    run.add_argument("--unfold", choices=["ensemble_staircase", "polynomial", "gaussian_broadened"])
    run.add_argument("--levels-per-node", dest="levels_per_node", type=int)
    run.add_argument("--degree", type=int, help="polynomial unfolding degree")
    run.add_argument("--signal-length", dest="signal_length", type=int)
    run.add_argument("--fit-range", dest="fit_range", type=_pair, metavar="FMIN,FMAX")
    run.add_argument("--solver", choices=["auto", "dense", "lanczos"])
    run.add_argument("--tol", type=float, help="Lanczos convergence tolerance")
    run.add_argument("--max-steps", dest="max_steps", type=int, help="Lanczos Krylov dimension limit")
    run.add_argument("--spacing-bin", dest="spacing_bin", type=float)
    run.add_argument("--increment-bin", dest="increment_bin", type=float)
    run.add_argument("--increment-span", dest="increment_span", type=float)
    run.add_argument("--output", metavar="DIR")
    run.add_argument("--workers", type=int, help="worker processes")
    run.set_defaults(func=cmd_run)

    zeros = sub.add_parser("zeros", help="analyse a table of Riemann zeta zeros")
    common(zeros)
    zeros.add_argument("--zeros", metavar="PATH", help="zero table (default: bundled first 30000)")
    zeros.add_argument("--offset", type=int, help="skip this many zeros")
    zeros.add_argument("--count", type=int, help="number of zeros to analyse")
    zeros.add_argument("--signal-length", dest="signal_length", type=int)
    zeros.add_argument("--fit-range", dest="fit_range", type=_pair, metavar="FMIN,FMAX")
    zeros.add_argument("--spacing-bin", dest="spacing_bin", type=float)
    zeros.add_argument("--increment-bin", dest="increment_bin", type=float)
    zeros.add_argument("--increment-span", dest="increment_span", type=float)
    zeros.add_argument("--output", metavar="DIR")
    zeros.set_defaults(func=cmd_zeros)

    figs = sub.add_parser("figures", help="collect plot-ready datasets from finished runs")
    figs.add_argument("--chaotic", metavar="DIR", help="weak-disorder Anderson run")
    figs.add_argument("--integrable", metavar="DIR", help="strong-disorder Anderson run")
    figs.add_argument("--harper", metavar="DIR", help="Harper run (optional)")
    figs.add_argument("--zeros", metavar="DIR", help="zeros analysis")
    figs.add_argument("--output", metavar="DIR", required=True)
    figs.set_defaults(func=cmd_figures)

    merge = sub.add_parser("merge", help="merge runs over disjoint realization ranges")
    merge.add_argument("parts", nargs="+", metavar="DIR")
    merge.add_argument("--output", metavar="DIR", required=True)
    merge.set_defaults(func=cmd_merge)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"levelnoise {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, PlanMismatchError, ExperimentAborted) as exc:
        print(f"levelnoise {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
