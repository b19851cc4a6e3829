"""Tight-binding Hamiltonians and reference spacing samplers.

Two lattice models are provided: the 3D Anderson model on an ``L x L x L``
cubic lattice with box-distributed site energies, and the 1D Harper chain
with the quasi-periodic potential ``2 cos(2 pi sigma n + phase)``. Hoppings
are unity in both.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import SizeError
from .series import SpacingSeries

GOLDEN_SIGMA = (np.sqrt(5.0) - 1.0) / 2.0

# indices are stored as int64, but the CSR path hands them to scipy as int32
MAX_DIM = np.iinfo(np.int32).max


class Boundary(str, Enum):
    OPEN = "open"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class AndersonParams:
    L: int
    W: float
    seed: int = 0
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L!r}")
        if not self.W >= 0:
            raise ValueError(f"W must be >= 0, got {self.W!r}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if self.boundary is Boundary.PERIODIC and self.L < 3:
            # L=2 would wrap a bond onto itself and double the hopping
            raise ValueError("periodic boundaries need L >= 3")

    @property
    def dim(self):
        return int(self.L) ** 3


@dataclass(frozen=True)
class HarperParams:
    N: int
    sigma: float = GOLDEN_SIGMA
    phase: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma!r}")


@dataclass(frozen=True, eq=False)
class SparseSymmetricMatrix:
    """Real symmetric matrix stored as a diagonal plus upper-triangle triples.

    Each symmetric pair ``(i, j)`` with ``i < j`` is stored once in
    ``rows``/``cols``/``values``.
    """

    dim: int
    diagonal: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diagonal, dtype=float)
        rows = np.array(self.rows, dtype=np.int64)
        cols = np.array(self.cols, dtype=np.int64)
        vals = np.array(self.values, dtype=float)
        if diag.shape != (self.dim,):
            raise ValueError("diagonal length must equal dim")
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols and values must have equal length")
        if rows.size:
            if np.any(rows >= cols):
                raise ValueError("off-diagonal entries must satisfy row < col")
            if rows.min() < 0 or cols.max() >= self.dim:
                raise ValueError("off-diagonal index out of range")
            key = rows * self.dim + cols
            if np.unique(key).size != key.size:
                raise ValueError("duplicate off-diagonal entry")
        for arr in (diag, rows, cols, vals):
            arr.setflags(write=False)
        object.__setattr__(self, "diagonal", diag)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    @property
    def n_offdiagonal(self):
        return self.rows.size

    def trace(self):
        return float(self.diagonal.sum())

    def to_csr(self):
        idx = np.arange(self.dim)
        r = np.concatenate([idx, self.rows, self.cols])
        c = np.concatenate([idx, self.cols, self.rows])
        v = np.concatenate([self.diagonal, self.values, self.values])
        return sp.csr_matrix((v, (r, c)), shape=(self.dim, self.dim))

    def to_dense(self):
        m = np.diag(self.diagonal)
        m[self.rows, self.cols] = self.values
        m[self.cols, self.rows] = self.values
        return m

    def norm_bound(self):
        """Gershgorin bound on the spectral radius."""
        radius = np.abs(self.diagonal).copy()
        np.add.at(radius, self.rows, np.abs(self.values))
        np.add.at(radius, self.cols, np.abs(self.values))
        return float(radius.max()) if self.dim else 0.0

    def permuted(self, perm):
        """Relabel sites: new site ``k`` is old site ``perm[k]``."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        r, c = inv[self.rows], inv[self.cols]
        lo, hi = np.minimum(r, c), np.maximum(r, c)
        return SparseSymmetricMatrix(self.dim, self.diagonal[perm], lo, hi, self.values)

    def dump(self, path):
        """Write ``row col value`` triples (0-based), diagonal included."""
        with open(path, "w") as fh:
            for i, v in enumerate(self.diagonal):
                fh.write(f"{i} {i} {float(v)!r}\n")
            for i, j, v in zip(self.rows, self.cols, self.values):
                fh.write(f"{i} {j} {float(v)!r}\n")


def _check_dim(dim):
    if dim > MAX_DIM:
        raise SizeError(f"matrix dimension {dim} exceeds index limit {MAX_DIM}")


def build_anderson(params):
    """Anderson Hamiltonian on a simple cubic lattice.

    Site energies are i.i.d. uniform on ``[-W/2, W/2]`` (variance ``W**2/12``)
    drawn from a PCG64 stream seeded by ``params.seed``; every nearest-neighbour
    bond carries hopping 1. Sites are numbered ``x*L*L + y*L + z``.
    """
    L = int(params.L)
    dim = L**3
    _check_dim(dim)
    rng = np.random.default_rng(params.seed)
    diagonal = rng.uniform(-params.W / 2.0, params.W / 2.0, size=dim)

    idx = np.arange(dim, dtype=np.int64).reshape(L, L, L)
    coord = np.indices((L, L, L)).reshape(3, -1)
    rows, cols = [], []
    for axis in range(3):
        nb = np.roll(idx, -1, axis=axis).ravel()
        here = idx.ravel()
        if params.boundary is Boundary.OPEN:
            keep = coord[axis] < L - 1
            here, nb = here[keep], nb[keep]
        rows.append(np.minimum(here, nb))
        cols.append(np.maximum(here, nb))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    return SparseSymmetricMatrix(dim, diagonal, rows, cols, np.ones(rows.size))


def harper_potential(params):
    n = np.arange(1, int(params.N) + 1)
    return 2.0 * np.cos(2.0 * np.pi * params.sigma * n + params.phase)


def build_harper(params):
    """Tridiagonal Harper chain, sites ``n = 1..N``, unit hopping."""
    N = int(params.N)
    _check_dim(N)
    rows = np.arange(N - 1)
    return SparseSymmetricMatrix(N, harper_potential(params), rows, rows + 1, np.ones(N - 1))


class SpacingKind(str, Enum):
    WIGNER_GOE = "wigner_goe"
    POISSON = "poisson"
    SEMI_POISSON = "semi_poisson"


def sample_reference_spacings(kind, count, seed=0):
    """Draw ``count`` i.i.d. unit-mean spacings from a reference law.

    ``wigner_goe`` and ``poisson`` use their closed-form inverse CDFs;
    ``semi_poisson`` is Gamma(2, scale 1/2), the sum of two exponentials
    of mean 1/2.
    """
    kind = SpacingKind(kind)
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count!r}")
    rng = np.random.default_rng(seed)
    if kind is SpacingKind.SEMI_POISSON:
        u = rng.random((2, int(count)))
        s = -0.5 * np.log1p(-u).sum(axis=0)
    else:
        u = rng.random(int(count))
        if kind is SpacingKind.POISSON:
            s = -np.log1p(-u)
        else:
            s = np.sqrt(-4.0 / np.pi * np.log1p(-u))
    return SpacingSeries(s)
