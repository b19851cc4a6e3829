import numpy as np
import pytest

from levelnoise.eigensolver import Spectrum, eigs_dense, eigs_window, inertia
from levelnoise.errors import IncompleteWindowError, SizeError
from levelnoise.models import AndersonParams, HarperParams, SparseSymmetricMatrix, build_anderson, build_harper

CUBE = [-3, -1, -1, -1, 1, 1, 1, 3]


def chain(n):
    r = np.arange(n - 1)
    return SparseSymmetricMatrix(n, np.zeros(n), r, r + 1, np.ones(n - 1))


def test_scalar():
    m = SparseSymmetricMatrix(1, np.array([2.5]), np.empty(0, int), np.empty(0, int), np.empty(0))
    assert eigs_dense(m).values.tolist() == [2.5]


def test_two_site_chain():
    assert np.allclose(eigs_dense(chain(2)).values, [-1, 1])
    assert np.allclose(eigs_window(chain(2), (-5, 5)).values, [-1, 1])


def test_cube_both_paths():
    m = build_anderson(AndersonParams(2, 0.0))
    assert np.allclose(eigs_dense(m).values, CUBE, atol=1e-12)
    assert np.allclose(eigs_window(m, (-4, 4)).values, CUBE, atol=1e-8)
    inner = eigs_window(m, (-1, 1))
    assert np.allclose(inner.values, [-1, -1, -1, 1, 1, 1], atol=1e-8)


def test_dense_cap():
    with pytest.raises(SizeError, match="eigs_window"):
        eigs_dense(chain(10), cap=5)


def test_trace():
    m = build_anderson(AndersonParams(6, 10.0, seed=2))
    assert eigs_dense(m).values.sum() == pytest.approx(m.trace(), rel=1e-8)


@pytest.mark.parametrize("seed", [0, 1])
def test_window_matches_dense(seed):
    m = build_anderson(AndersonParams(4, 10.0, seed=seed))
    dense = eigs_dense(m).values
    ref = dense[(dense >= 0) & (dense <= 2)]
    got = eigs_window(m, (0, 2))
    assert got.values.size == ref.size
    assert np.allclose(got.values, ref, atol=1e-8)
    assert got.window == (0.0, 2.0)


def test_full_range_matches_dense_periodic():
    m = build_anderson(AndersonParams(8, 10.0, seed=4, boundary="periodic"))
    dense = eigs_dense(m).values
    lo, hi = dense[0] - 1, dense[-1] + 1
    got = eigs_window(m, (lo, hi))
    assert np.allclose(got.values, dense, atol=1e-8)


def test_empty_gap_window():
    m = build_anderson(AndersonParams(2, 0.0))
    assert len(eigs_window(m, (1.5, 2.5))) == 0


def test_inertia_matches_dense():
    m = build_anderson(AndersonParams(5, 6.0, seed=9))
    ev = eigs_dense(m).values
    for shift in (-5.0, -0.3, 0.0, 1.7, 9.0):
        assert inertia(m, shift) == int(np.sum(ev < shift))
        assert inertia(m, shift, dense_cap=0) == int(np.sum(ev < shift))


def test_incomplete_window_detected():
    m = build_anderson(AndersonParams(6, 10.0, seed=1))
    with pytest.raises(IncompleteWindowError) as info:
        eigs_window(m, (0, 2), max_steps=20)
    assert info.value.expected > info.value.found


def test_permutation_invariance():
    m = build_anderson(AndersonParams(4, 5.0, seed=3))
    perm = np.random.default_rng(0).permutation(m.dim)
    assert np.allclose(eigs_dense(m).values, eigs_dense(m.permuted(perm)).values, atol=1e-10)


def test_harper_degenerate_free_window():
    m = build_harper(HarperParams(300))
    dense = eigs_dense(m).values
    got = eigs_window(m, (-1.0, 1.0))
    assert np.allclose(got.values, dense[(dense >= -1) & (dense <= 1)], atol=1e-8)


def test_spectrum_validation_and_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        Spectrum([2.0, 1.0])
    with pytest.raises(ValueError):
        Spectrum([0.0, np.inf])
    with pytest.raises(ValueError):
        Spectrum([0.0, 3.0], {"window": (0.0, 2.0)})
    s = Spectrum([0.1, 1.0 / 3.0, 1.5], {"window": (0.0, 2.0), "seed": 5})
    s.save(tmp_path / "s.txt")
    back = Spectrum.load(tmp_path / "s.txt")
    assert np.array_equal(back.values, s.values)
    assert back.window == (0.0, 2.0)
