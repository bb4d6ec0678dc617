"""The Gaussian objective F(B) and its block-diagonal gradient."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .datum import BLDatum, balance
from .errors import DatumError, NotPositiveDefinite
from .matkernels import block_diag, cholesky_pd, is_symmetric, logdet_pd, symmetrize


def _blocks(blocks) -> tuple[np.ndarray, ...]:
    out = []
    for b in blocks:
        b = np.atleast_2d(np.array(b, dtype=float))
        b.setflags(write=False)
        out.append(b)
    return tuple(out)


@dataclass(frozen=True)
class BlockSymMatrix:
    """Symmetric blocks ``(G_1, ..., G_k)``; used for gradients."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = _blocks(self.blocks)
        for i, b in enumerate(blocks):
            if b.shape[0] != b.shape[1] or not is_symmetric(b):
                raise ValueError(f"block {i} is not symmetric")
        object.__setattr__(self, "blocks", blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.blocks)

    def to_dense(self) -> np.ndarray:
        return block_diag(self.blocks)

    def inner(self, other) -> float:
        return math.fsum(float(np.sum(a * b)) for a, b in zip(self.blocks, other.blocks))

    def norm(self) -> float:
        return math.sqrt(self.inner(self))

    def tolist(self) -> list:
        return [b.tolist() for b in self.blocks]


@dataclass(frozen=True)
class BlockPDMatrix(BlockSymMatrix):
    """``B = diag(B_1, ..., B_k)`` with every block symmetric positive definite."""

    def __post_init__(self):
        super().__post_init__()
        for i, b in enumerate(self.blocks):
            try:
                cholesky_pd(b)
            except NotPositiveDefinite as exc:
                raise NotPositiveDefinite(f"block {i}: {exc}") from None

    @classmethod
    def identity(cls, r) -> "BlockPDMatrix":
        return cls(tuple(np.eye(ri) for ri in r))

    @classmethod
    def from_dense(cls, B, r) -> "BlockPDMatrix":
        B = np.asarray(B, dtype=float)
        off = np.concatenate([[0], np.cumsum(r)])
        return cls(tuple(B[off[i]:off[i + 1], off[i]:off[i + 1]] for i in range(len(r))))

    def scaled(self, t: float) -> "BlockPDMatrix":
        return BlockPDMatrix(tuple(t * b for b in self.blocks))

    def trace(self) -> float:
        return math.fsum(float(np.trace(b)) for b in self.blocks)


def _check_compatible(datum: BLDatum, B: BlockSymMatrix):
    if B.sizes != datum.r:
        raise DatumError(f"block sizes {B.sizes} do not match the partition {datum.r}")


def objective(datum: BLDatum, B: BlockPDMatrix) -> float:
    """``F(B) = 1/2 sum_i c_i log det B_i - 1/2 sum_j d_j log det(A_j B A_j^T)``.

    Terms with a zero coefficient are skipped. Summation order is fixed.
    """
    _check_compatible(datum, B)
    dense = B.to_dense()
    terms = [0.5 * ci * logdet_pd(Bi) for ci, Bi in zip(datum.c, B.blocks) if ci != 0.0]
    for dj, A in zip(datum.d, datum.maps):
        if dj != 0.0:
            terms.append(-0.5 * dj * logdet_pd(A @ dense @ A.T))
    return math.fsum(terms)


def gradient(datum: BLDatum, B: BlockPDMatrix) -> BlockSymMatrix:
    """Euclidean gradient of :func:`objective` restricted to the block diagonal.

    ``1/2 sum_i c_i B_i^{-1} - 1/2 sum_j d_j [A_j^T (A_j B A_j^T)^{-1} A_j]_ii``
    """
    _check_compatible(datum, B)
    dense = B.to_dense()
    n = datum.n
    full = np.zeros((n, n))
    slices = datum.block_slices()
    for ci, Bi, sl in zip(datum.c, B.blocks, slices):
        if ci != 0.0:
            L = cholesky_pd(Bi)
            full[sl, sl] += 0.5 * ci * linalg.cho_solve((L, True), np.eye(Bi.shape[0]))
    for dj, A in zip(datum.d, datum.maps):
        if dj != 0.0:
            L = cholesky_pd(A @ dense @ A.T)
            # A^T M^{-1} A = W^T W with W = L^{-1} A
            W = linalg.solve_triangular(L, A, lower=True)
            full -= 0.5 * dj * (W.T @ W)
    return BlockSymMatrix(tuple(symmetrize(full[sl, sl]) for sl in slices))


def scale_invariance_defect(datum: BLDatum, B: BlockPDMatrix, t: float) -> float:
    """``F(tB) - F(B) - 1/2 * balance * log t``; vanishes identically up to rounding."""
    if not t > 0:
        raise ValueError("t must be positive")
    if t == 1.0:
        return 0.0
    return objective(datum, B.scaled(t)) - objective(datum, B) - 0.5 * balance(datum) * math.log(t)
