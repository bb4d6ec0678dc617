"""Dense symmetric / positive-definite matrix kernels.

Everything here works on small dense float64 arrays. Positive definiteness is
judged relative to the scale of the matrix: a Cholesky pivot (or eigenvalue)
below ``PD_RTOL * max(1, max diag)`` is treated as a failure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NotPositiveDefinite, RankDeficient

PD_RTOL = 1e-12
SYM_ATOL = 1e-12


def _as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def _pd_floor(M: np.ndarray) -> float:
    diag = np.diag(M)
    return PD_RTOL * max(1.0, float(np.max(np.abs(diag))) if diag.size else 1.0)


def is_symmetric(M, atol: float = SYM_ATOL) -> bool:
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    return bool(np.all(np.abs(M - M.T) <= atol * scale))


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def cholesky_pd(M) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PD matrix.

    Raises
    ------
    NotPositiveDefinite
        If the factorization breaks down or a pivot is below the PD floor.
    """
    M = _as_square(M)
    if not np.all(np.isfinite(M)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    if not is_symmetric(M, atol=1e-10):
        raise NotPositiveDefinite("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(symmetrize(M))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    # pivots of M are the squared diagonal of L
    if np.any(np.diag(L) ** 2 <= _pd_floor(M)):
        raise NotPositiveDefinite("Cholesky pivot below tolerance")
    return L


def logdet_pd(M) -> float:
    """log det M for symmetric PD ``M``, as twice the log-diagonal of its Cholesky factor."""
    L = cholesky_pd(M)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def inv_pd(M) -> np.ndarray:
    """Inverse of a PD matrix through its Cholesky factorization."""
    L = cholesky_pd(M)
    inv = linalg.cho_solve((L, True), np.eye(L.shape[0]))
    return symmetrize(inv)


def pd_sqrt(M) -> np.ndarray:
    """Unique symmetric PD square root ``S`` with ``S @ S == M``.

    Computed from the symmetric eigendecomposition. Eigenvalues at or below
    the PD floor raise :class:`NotPositiveDefinite`.
    """
    M = _as_square(M)
    if not is_symmetric(M, atol=1e-10):
        raise NotPositiveDefinite("matrix is not symmetric")
    w, V = np.linalg.eigh(symmetrize(M))
    if not np.all(np.isfinite(w)) or np.any(w <= _pd_floor(M)):
        raise NotPositiveDefinite(f"smallest eigenvalue {w.min():.3e} is not positive")
    return symmetrize((V * np.sqrt(w)) @ V.T)


@dataclass(frozen=True)
class QRSplit:
    """``A.T = Q1 @ R1`` with ``[Q1 Q2]`` orthogonal and ``diag(R1) > 0``."""

    Q1: np.ndarray
    Q2: np.ndarray
    R1: np.ndarray

    @property
    def Q(self) -> np.ndarray:
        return np.hstack([self.Q1, self.Q2])


def qr_pos_diag(At, rank_tol: float = 1e-10) -> QRSplit:
    """Complete QR of an ``n x m`` full-column-rank matrix, positive-diagonal convention.

    LAPACK's Householder QR is used for the factorization; columns of ``Q1``
    (and rows of ``R1``) are then sign-flipped so that the diagonal of ``R1``
    is strictly positive. ``Q2`` spans the orthogonal complement of the range
    of ``At``.

    Parameters
    ----------
    At : array_like, shape (n, m)
        Typically the transpose of a surjective map ``A``.
    rank_tol : float
        A diagonal entry of ``R1`` below ``rank_tol`` times the largest one
        signals rank deficiency.

    Raises
    ------
    RankDeficient
        If ``m > n`` or ``At`` does not have full column rank.
    """
    At = np.asarray(At, dtype=float)
    if At.ndim == 1:
        At = At[:, None]
    n, m = At.shape
    if m > n or m == 0:
        raise RankDeficient(f"cannot have full column rank with shape {At.shape}")
    Q, R = np.linalg.qr(At, mode="complete")
    R1 = R[:m, :m]
    d = np.diag(R1)
    if np.max(np.abs(d)) == 0.0 or np.any(np.abs(d) <= rank_tol * np.max(np.abs(d))):
        raise RankDeficient("input does not have full column rank")
    signs = np.where(d < 0, -1.0, 1.0)
    Q1 = Q[:, :m] * signs
    R1 = np.triu(R1 * signs[:, None])
    return QRSplit(Q1=Q1, Q2=Q[:, m:].copy(), R1=R1)


def block_diag(blocks) -> np.ndarray:
    return linalg.block_diag(*[np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks])


def det_inequality_slack(J, Q1) -> float:
    """``det(Q1' J^2 Q1) - det(Q1' J Q1)^2`` for symmetric ``J``.

    Nonnegative whenever ``Q1`` has orthonormal columns; zero iff the range of
    ``Q1`` is invariant under ``J``. Note that the two spectra need not agree:
    ``J = diag(1, 2)``, ``Q1 = (1, 1)/sqrt(2)`` gives 2.5 against 2.25.
    """
    J = np.asarray(J, dtype=float)
    Q1 = np.asarray(Q1, dtype=float)
    if Q1.ndim == 1:
        Q1 = Q1[:, None]
    JQ = J @ Q1
    return float(np.linalg.det(JQ.T @ JQ) - np.linalg.det(Q1.T @ JQ) ** 2)
