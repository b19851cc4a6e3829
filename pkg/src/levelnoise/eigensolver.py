"""Eigenvalues of sparse symmetric Hamiltonians.

Two paths are offered. ``eigs_dense`` hands the full matrix to LAPACK and is
the reference for small systems. ``eigs_window`` runs Lanczos with full
reorthogonalization on the raw operator and keeps the converged Ritz values
inside an energy window; completeness is enforced against the Sylvester
inertia count, so a slow solve is reported as incomplete rather than
returning a silently short spectrum.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IncompleteWindowError, SizeError, SolverError
from . import textio

log = logging.getLogger(__name__)

DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted raw eigenvalues plus provenance metadata."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("spectrum values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum contains non-finite values")
        if np.any(np.diff(v) < 0):
            raise ValueError("spectrum values must be sorted ascending")
        window = self.meta.get("window")
        if window is not None and v.size:
            a, b = window
            if v[0] < a or v[-1] > b:
                raise ValueError(f"values outside recorded window [{a}, {b}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.values.size

    @property
    def window(self):
        return self.meta.get("window")

    def save(self, path):
        return textio.write_series(path, self.values, self.meta)

    @classmethod
    def load(cls, path):
        values, raw = textio.read_series(path)
        meta = dict(raw)
        if meta.get("window") not in (None, "none"):
            a, b = meta["window"].split(",")
            meta["window"] = (float(a), float(b))
        else:
            meta.pop("window", None)
        return cls(values, meta)


def eigs_dense(matrix, cap=DENSE_CAP, meta=None):
    """All eigenvalues via LAPACK's symmetric tridiagonal reduction."""
    if matrix.dim > cap:
        raise SizeError(
            f"dense solve refused for dim={matrix.dim} > cap={cap}; "
            "use eigs_window with an energy window instead"
        )
    try:
        values = np.linalg.eigvalsh(matrix.to_dense())
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"dense eigensolver did not converge: {exc}") from exc
    info = {"solver": "dense"}
    info.update(meta or {})
    return Spectrum(values, info)


def _dense_negcount(a):
    _, d, _ = sla.ldl(a, lower=True)
    n = d.shape[0]
    count = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            ev = np.linalg.eigvalsh(d[i : i + 2, i : i + 2])
            count += int(np.sum(ev < 0))
            i += 2
        else:
            count += int(d[i, i] < 0)
            i += 1
    return count


def _sparse_negcount(csr, shift):
    n = csr.shape[0]
    shifted = (csr - shift * sp.identity(n, format="csr")).tocsc()
    lu = spla.splu(
        shifted,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise SolverError("sparse LDL^T fell back to off-diagonal pivoting")
    return int(np.sum(lu.U.diagonal() < 0))


def inertia(matrix, shift, dense_cap=DENSE_CAP):
    """Number of eigenvalues strictly below ``shift``.

    Counts negative pivots of a symmetric factorization of ``M - shift*I``
    (Sylvester's law of inertia). Bunch-Kaufman LDL^T for small matrices,
    symmetric-mode sparse LU with diagonal pivots otherwise.
    """
    scale = max(1.0, matrix.norm_bound())
    bump = 0.0
    for _ in range(4):
        s = shift + bump
        try:
            if matrix.dim <= dense_cap:
                a = matrix.to_dense()
                a[np.diag_indices_from(a)] -= s
                return _dense_negcount(a)
            return _sparse_negcount(matrix.to_csr(), s)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            if isinstance(exc, SolverError):
                raise
            # exactly singular shift; nudge off the eigenvalue
            bump = (bump * 10.0) or 1e-13 * scale
    raise SolverError(f"inertia count failed at shift {shift!r}")


def eigs_window(matrix, window, tol=1e-8, max_steps=None, seed=0, check_every=None, meta=None):
    """Every eigenvalue in ``[a, b]`` by full-reorthogonalization Lanczos.

    Parameters
    ----------
    matrix : SparseSymmetricMatrix
    window : (float, float)
        Closed energy window ``(a, b)`` with ``a < b``.
    tol : float
        Ritz pairs count as converged when the residual bound
        ``|beta_m y_m|`` is at most ``tol * max(1, |theta|)``.
    max_steps : int, optional
        Krylov dimension limit; defaults to the matrix dimension.
    seed : int
        Seed of the random starting vector (and of restart vectors).

    Returns
    -------
    Spectrum
        Sorted eigenvalues with multiplicity, ``meta['window'] == (a, b)``.

    Raises
    ------
    IncompleteWindowError
        The converged count never reached the inertia count.
    """
    a, b = map(float, window)
    if not a < b:
        raise ValueError(f"window must satisfy a < b, got {window!r}")
    n = matrix.dim
    if n < 2:
        raise ValueError("windowed solve needs dim >= 2")
    lo = a - tol * max(1.0, abs(a))
    hi = b + tol * max(1.0, abs(b))
    expected = inertia(matrix, hi) - inertia(matrix, lo)
    info = {"solver": "lanczos", "window": (a, b)}
    info.update(meta or {})
    info["window"] = (a, b)
    if expected == 0:
        return Spectrum(np.empty(0), info)

    op = matrix.to_csr()
    m_max = n if max_steps is None else min(int(max_steps), n)
    if check_every is None:
        check_every = max(16, min(100, n // 20))
    rng = np.random.default_rng(seed)
    eps = np.finfo(float).eps
    breakdown = 1e3 * eps * max(1.0, matrix.norm_bound())

    Q = np.empty((m_max, n))
    alphas = np.empty(m_max)
    betas = np.empty(m_max)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    found = 0
    for j in range(m_max):
        Q[j] = q
        w = op @ q
        alphas[j] = q @ w
        basis = Q[: j + 1]
        for _ in range(2):
            w -= basis.T @ (basis @ w)
        beta = float(np.linalg.norm(w))
        m = j + 1
        last = m == m_max
        if beta <= breakdown or last or m % check_every == 0:
            theta, found = _converged_ritz(alphas[:m], betas[: m - 1], beta, lo, hi, tol)
            if found == expected:
                vals = np.clip(np.sort(theta), a, b)
                info["lanczos_steps"] = m
                return Spectrum(vals, info)
            if found > expected:
                raise SolverError(
                    f"Lanczos produced {found} Ritz values where inertia allows {expected}",
                    iterations=m,
                )
        if last:
            break
        if beta <= breakdown:
            # Krylov space became invariant: continue from a fresh direction
            q = rng.standard_normal(n)
            for _ in range(2):
                q -= basis.T @ (basis @ q)
            nq = np.linalg.norm(q)
            if nq <= breakdown:
                break
            q /= nq
            betas[j] = 0.0
        else:
            q = w / beta
            betas[j] = beta
    raise IncompleteWindowError(found, expected, iterations=j + 1)


def _converged_ritz(alpha, beta, beta_next, lo, hi, tol):
    """Ritz values of the Lanczos tridiagonal in ``[lo, hi]`` that have converged."""
    if alpha.size == 1:
        theta, y = alpha.copy(), np.ones((1, 1))
        keep = (theta >= lo) & (theta <= hi)
        theta, y = theta[keep], y[:, keep]
    else:
        theta, y = sla.eigh_tridiagonal(alpha, beta, select="v", select_range=(lo, hi))
    if theta.size == 0:
        return theta, 0
    resid = np.abs(beta_next * y[-1, :])
    ok = resid <= tol * np.maximum(1.0, np.abs(theta))
    return theta[ok], int(ok.sum())
