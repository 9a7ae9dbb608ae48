"""Dense symmetric linear algebra for small kernel matrices.

Cyclic Jacobi eigendecomposition, principal-minor determinants via LU with
partial pivoting, and a PSD check. Everything is plain float64 numpy sized
for matrices up to a few dozen rows; no LAPACK driver is involved so the
arithmetic path is fully transparent to the brute-force oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InvalidInput, InvalidMatrix

# Convergence threshold for Jacobi sweeps, relative to the Frobenius norm.
_JACOBI_RTOL = 1e-12
_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SymMatrix:
    """A real square matrix with exact mirror symmetry.

    Construction rejects non-square shapes, non-finite entries, and any
    matrix where ``data[i, j] != data[j, i]`` bit for bit.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidMatrix("matrix entries must be finite")
        if not np.array_equal(a, a.T):
            raise InvalidMatrix("matrix must be exactly symmetric")
        object.__setattr__(self, "data", a)

    @property
    def n(self) -> int:
        return self.data.shape[0]


MatrixLike = Union[SymMatrix, np.ndarray, Sequence[Sequence[float]]]


def as_sym_matrix(a: MatrixLike) -> SymMatrix:
    """Coerce an array-like into a validated :class:`SymMatrix`."""
    if isinstance(a, SymMatrix):
        return a
    return SymMatrix(np.asarray(a, dtype=np.float64))


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues in descending order with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _rotate(m: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    # One two-sided Givens rotation zeroing m[p, q]; the angle comes from
    # atan2 so the degenerate m[p, p] == m[q, q] case is handled.
    theta = 0.5 * math.atan2(2.0 * m[p, q], m[q, q] - m[p, p])
    c, s = math.cos(theta), math.sin(theta)
    cp, cq = m[:, p].copy(), m[:, q].copy()
    m[:, p] = c * cp - s * cq
    m[:, q] = s * cp + c * cq
    rp, rq = m[p, :].copy(), m[q, :].copy()
    m[p, :] = c * rp - s * rq
    m[q, :] = s * rp + c * rq
    m[p, q] = 0.0
    m[q, p] = 0.0
    vp, vq = v[:, p].copy(), v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def sym_eig(a: MatrixLike) -> EigenPair:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Sweeps continue until the largest off-diagonal magnitude drops below
    1e-12 times the Frobenius norm of the input. Returns eigenvalues sorted
    descending with eigenvector columns permuted to match, so that
    ``U @ diag(values) @ U.T`` reconstructs the input.
    """
    m = as_sym_matrix(a).data.copy()
    n = m.shape[0]
    v = np.eye(n)
    tol = _JACOBI_RTOL * np.linalg.norm(m, "fro")
    for _ in range(_MAX_SWEEPS):
        off = np.abs(m - np.diag(np.diag(m))).max() if n > 1 else 0.0
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(m[p, q]) > tol:
                    _rotate(m, v, p, q)
    else:
        raise InvalidMatrix("Jacobi sweeps did not converge")
    vals = np.diag(m).copy()
    order = np.argsort(-vals, kind="stable")
    return EigenPair(values=vals[order], vectors=v[:, order])


def _lu_det(m: np.ndarray) -> float:
    # Determinant via in-place LU with partial pivoting; m is consumed.
    n = m.shape[0]
    det = 1.0
    for k in range(n):
        piv = k + int(np.argmax(np.abs(m[k:, k])))
        if m[piv, k] == 0.0:
            return 0.0
        if piv != k:
            m[[k, piv]] = m[[piv, k]]
            det = -det
        det *= m[k, k]
        if k + 1 < n:
            factors = m[k + 1:, k] / m[k, k]
            m[k + 1:, k + 1:] -= np.outer(factors, m[k, k + 1:])
    return float(det)


def principal_minor_det(a: MatrixLike, subset: Sequence[int]) -> float:
    """Determinant of the principal submatrix indexed by ``subset``.

    The empty subset yields 1.0 (the determinant of the empty matrix).
    Indices must be distinct and inside ``[0, n)``; out-of-range indices
    raise :class:`IndexError`.
    """
    m = as_sym_matrix(a).data
    n = m.shape[0]
    idx = [int(i) for i in subset]
    for i in idx:
        if not 0 <= i < n:
            raise IndexError(f"subset index {i} outside [0, {n})")
    if len(set(idx)) != len(idx):
        raise InvalidInput("subset indices must be distinct")
    if not idx:
        return 1.0
    sub = m[np.ix_(idx, idx)].astype(np.float64, copy=True)
    return _lu_det(sub)


def is_psd(a: MatrixLike, tol: float = 1e-10) -> bool:
    """True when the smallest eigenvalue is at least ``-tol``."""
    if tol < 0:
        raise InvalidInput("tol must be nonnegative")
    eig = sym_eig(a)
    return bool(eig.values.min() >= -tol)
