import filecmp

import numpy as np
import pytest

from levelnoise import ensemble, textio
from levelnoise.eigensolver import Spectrum
from levelnoise.ensemble import (
    ExperimentAborted,
    ExperimentPlan,
    ZerosPlan,
    analyze_zeros,
    cache_path,
    merge_reports,
    realization_seed,
    run_experiment,
)
from levelnoise.errors import PlanMismatchError, SolverError
from levelnoise.riemann import load_bundled_zeros

SMALL = dict(L=5, W=10.0, window=(-2.0, 2.0), boundary="periodic")
REPORT_FILES = [
    "plan.txt",
    "provenance.csv",
    "power_spectrum.csv",
    "spacing_histogram.csv",
    "increment_histogram.csv",
    "increment_abs_histogram.csv",
    "level_signal.csv",
    "summary.txt",
]


def same_reports(a, b):
    match, mismatch, errors = filecmp.cmpfiles(a, b, REPORT_FILES, shallow=False)
    return not mismatch and not errors


def test_seeds_are_pure():
    assert realization_seed(7, 3) == realization_seed(7, 3)
    assert len({realization_seed(7, i) for i in range(100)}) == 100
    assert realization_seed(7, 3) != realization_seed(8, 3)


def test_plan_hash_ignores_range_and_location():
    a = ExperimentPlan(n_realizations=5, output_dir="x", workers=3, **SMALL)
    b = ExperimentPlan(n_realizations=9, first_index=4, output_dir="y", **SMALL)
    assert a.plan_hash == b.plan_hash
    assert a.plan_hash != ExperimentPlan(n_realizations=5, base_seed=1, **SMALL).plan_hash


def test_plan_roundtrip(tmp_path):
    p = ExperimentPlan(n_realizations=3, fit_range=(4, 20), unfolding="polynomial", **SMALL)
    textio.write_keyvalue(tmp_path / "plan.txt", p.record())
    back = ExperimentPlan.from_record(textio.read_keyvalue(tmp_path / "plan.txt"))
    assert back == p


def test_cube_report(tmp_path):
    rep = run_experiment(ExperimentPlan(L=2, W=0.0, output_dir=str(tmp_path)))
    spec = Spectrum.load(cache_path(tmp_path, 0))
    assert np.allclose(spec.values, [-3, -1, -1, -1, 1, 1, 1, 3])
    assert rep.summary["n_levels"] == 8
    assert rep.summary["mean_spacing"] == pytest.approx(1.0, abs=1e-12)
    assert (tmp_path / "summary.txt").exists()


def test_warm_cache_is_byte_identical(tmp_path):
    plan = ExperimentPlan(n_realizations=10, output_dir=str(tmp_path / "a"), **SMALL)
    run_experiment(plan)
    first = {f: (tmp_path / "a" / f).read_bytes() for f in REPORT_FILES}
    stamp = cache_path(tmp_path / "a", 0).stat().st_mtime_ns
    run_experiment(plan)
    assert cache_path(tmp_path / "a", 0).stat().st_mtime_ns == stamp
    assert first == {f: (tmp_path / "a" / f).read_bytes() for f in REPORT_FILES}


def test_parallel_matches_serial(tmp_path):
    run_experiment(ExperimentPlan(n_realizations=6, output_dir=str(tmp_path / "s"), **SMALL))
    run_experiment(ExperimentPlan(n_realizations=6, output_dir=str(tmp_path / "p"), workers=2, **SMALL))
    assert same_reports(tmp_path / "s", tmp_path / "p")


def test_stale_cache_recomputed(tmp_path):
    plan = ExperimentPlan(n_realizations=2, output_dir=str(tmp_path), **SMALL)
    run_experiment(plan)
    path = cache_path(tmp_path, 1)
    text = path.read_text().replace(f"plan_hash={plan.plan_hash}", "plan_hash=0000")
    path.write_text(text)
    run_experiment(plan)
    assert f"plan_hash={plan.plan_hash}" in path.read_text()


def test_merge_equals_monolithic(tmp_path):
    run_experiment(ExperimentPlan(n_realizations=12, output_dir=str(tmp_path / "all"), **SMALL))
    run_experiment(ExperimentPlan(n_realizations=5, output_dir=str(tmp_path / "a"), **SMALL))
    run_experiment(ExperimentPlan(n_realizations=7, first_index=5, output_dir=str(tmp_path / "b"), **SMALL))
    merge_reports([tmp_path / "b", tmp_path / "a"], tmp_path / "m")
    assert same_reports(tmp_path / "all", tmp_path / "m")


def test_merge_of_singles(tmp_path):
    run_experiment(ExperimentPlan(n_realizations=3, output_dir=str(tmp_path / "all"), **SMALL))
    parts = []
    for i in range(3):
        d = tmp_path / f"one{i}"
        run_experiment(ExperimentPlan(n_realizations=1, first_index=i, output_dir=str(d), **SMALL))
        parts.append(d)
    merge_reports(parts, tmp_path / "m")
    assert same_reports(tmp_path / "all", tmp_path / "m")


def test_merge_refusals(tmp_path):
    run_experiment(ExperimentPlan(n_realizations=3, output_dir=str(tmp_path / "a"), **SMALL))
    run_experiment(ExperimentPlan(n_realizations=3, first_index=2, output_dir=str(tmp_path / "b"), **SMALL))
    run_experiment(ExperimentPlan(n_realizations=3, first_index=3, base_seed=9, output_dir=str(tmp_path / "c"), **SMALL))
    with pytest.raises(PlanMismatchError, match="overlap"):
        merge_reports([tmp_path / "a", tmp_path / "b"], tmp_path / "m")
    with pytest.raises(PlanMismatchError, match="hash"):
        merge_reports([tmp_path / "a", tmp_path / "c"], tmp_path / "m")


def test_failures_abort(tmp_path):
    # ten Krylov vectors cannot resolve a window holding dozens of levels
    plan = ExperimentPlan(n_realizations=3, solver="lanczos", max_steps=10, output_dir=str(tmp_path), **SMALL)
    with pytest.raises(ExperimentAborted, match="3 of 3"):
        run_experiment(plan)


def test_failed_realization_excluded(tmp_path, monkeypatch):
    real = ensemble.solve_realization

    def flaky(plan, index):
        if index == 4:
            raise SolverError("synthetic failure", iterations=1)
        return real(plan, index)

    monkeypatch.setattr(ensemble, "solve_realization", flaky)
    rep = run_experiment(ExperimentPlan(n_realizations=10, output_dir=str(tmp_path), **SMALL))
    assert rep.summary["n_failed"] == 1
    assert rep.summary["failed_indices"] == "4"
    assert rep.summary["n_realizations"] == 9
    assert not cache_path(tmp_path, 4).exists()


def test_lanczos_path_matches_dense(tmp_path):
    d = run_experiment(ExperimentPlan(n_realizations=2, solver="dense", output_dir=str(tmp_path / "d"), **SMALL))
    l = run_experiment(ExperimentPlan(n_realizations=2, solver="lanczos", output_dir=str(tmp_path / "l"), **SMALL))
    for i in range(2):
        a = Spectrum.load(cache_path(tmp_path / "d", i)).values
        b = Spectrum.load(cache_path(tmp_path / "l", i)).values
        assert np.allclose(a, b, atol=1e-8)
    assert d.summary["sigma2"] == pytest.approx(l.summary["sigma2"], rel=1e-6)


def test_harper_single_spectrum(tmp_path):
    rep = run_experiment(ExperimentPlan(model="harper", N=1024, output_dir=str(tmp_path)))
    assert rep.summary["unfolding"].startswith("polynomial")
    assert rep.summary["n_levels"] == 1024


def test_report_headers(tmp_path):
    run_experiment(ExperimentPlan(n_realizations=4, output_dir=str(tmp_path), **SMALL))
    cols, rows, meta = textio.read_table(tmp_path / "power_spectrum.csv")
    assert cols == ["f", "P"] and meta["model"] == "anderson" and "fit_range" in meta
    cols, rows, meta = textio.read_table(tmp_path / "spacing_histogram.csv")
    assert cols == ["bin_center", "density"]
    dens = np.array([r[1] for r in rows])
    assert np.sum(dens) * float(meta["bin_width"]) == pytest.approx(1.0, abs=1e-9)


def test_zeros_report(tmp_path):
    rep = analyze_zeros(ZerosPlan(count=4096), load_bundled_zeros())
    rep.write(tmp_path)
    assert rep.summary["n_signals"] == 1
    assert rep.summary["signal_length"] == 2048
    assert rep.power.N == 2048
