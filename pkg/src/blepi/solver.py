"""Maximization of the Gaussian objective F over block-diagonal PD matrices (the constant M_g)."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .datum import BLDatum, balance, is_balanced, validate_datum
from .errors import DatumError, NotPositiveDefinite
from .objective import BlockPDMatrix, BlockSymMatrix, gradient, objective

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    UNBOUNDED = "Unbounded"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 2000
    stat_tol: float = 1e-8
    step_init: float = 1.0
    divergence_threshold: float = 1e8
    seed: int = 0
    restarts: int = 4
    # largest tolerated growth of cond(B) (or of F) before declaring divergence
    growth_limit: float = 1e8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.stat_tol > 0 and self.step_init > 0 and self.divergence_threshold > 0 and self.growth_limit > 1):
            raise ValueError("tolerances and step sizes must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class MgResult:
    status: Status
    value: float
    optimizer: BlockPDMatrix
    stationarity: float
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    witness: BlockPDMatrix | None = None
    run_index: int = 0
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "value": self.value,
            "optimizer": self.optimizer.tolist(),
            "stationarity": self.stationarity,
            "iterations": len(self.trace) - 1,
            "run_index": self.run_index,
            "witness": None if self.witness is None else self.witness.tolist(),
            "message": self.message,
        }


def certify_lower_bound(datum: BLDatum, B: BlockPDMatrix) -> float:
    """``F(B)``. Any feasible ``B`` gives a rigorous lower bound on M_g."""
    return objective(datum, B)


def stationarity_residual(datum: BLDatum, B: BlockPDMatrix) -> float:
    """Frobenius norm of the gradient at ``B``.

    For balanced data F is constant along ``t -> tB``, and the component of the
    gradient along ``B`` is projected out.
    """
    G = gradient(datum, B)
    if is_balanced(datum):
        coef = G.inner(B) / B.inner(B)
        G = BlockSymMatrix(tuple(g - coef * b for g, b in zip(G.blocks, B.blocks)))
    return G.norm()


def normalize_gauge(datum: BLDatum, B: BlockPDMatrix) -> BlockPDMatrix:
    """Rescale so that ``sum_i tr(B_i) = n``."""
    return B.scaled(datum.n / B.trace())


# Cholesky-factor parameterization: B_i = L_i L_i^T with the strictly lower part
# free and the diagonal stored as log L_kk.


class _Param:
    def __init__(self, r):
        self.r = tuple(r)
        self.tril = [np.tril_indices(ri, -1) for ri in self.r]
        self.sizes = [ri * (ri + 1) // 2 for ri in self.r]

    def factors(self, theta):
        out, pos = [], 0
        for ri, (rows, cols), size in zip(self.r, self.tril, self.sizes):
            chunk = theta[pos:pos + size]
            L = np.zeros((ri, ri))
            L[np.diag_indices(ri)] = np.exp(chunk[:ri])
            L[rows, cols] = chunk[ri:]
            out.append(L)
            pos += size
        return out

    def matrix(self, theta) -> BlockPDMatrix:
        return BlockPDMatrix(tuple(L @ L.T for L in self.factors(theta)))

    def pack(self, factors):
        parts = []
        for L, (rows, cols) in zip(factors, self.tril):
            parts.append(np.log(np.diag(L)))
            parts.append(L[rows, cols])
        return np.concatenate(parts)

    def pullback(self, factors, G: BlockSymMatrix):
        # dF/dL = 2 G L (lower part); chain rule through exp on the diagonal
        parts = []
        for L, Gi, (rows, cols) in zip(factors, G.blocks, self.tril):
            dL = 2.0 * Gi @ L
            parts.append(np.diag(dL) * np.diag(L))
            parts.append(dL[rows, cols])
        return np.concatenate(parts)


def _cond(B: BlockPDMatrix) -> float:
    eig = np.concatenate([np.linalg.eigvalsh(b) for b in B.blocks])
    return float(eig.max() / eig.min())


def _initial_theta(param: _Param, rng: np.random.Generator | None):
    factors = []
    for ri in param.r:
        if rng is None:
            factors.append(np.eye(ri))
        else:
            L = np.tril(rng.normal(scale=0.5, size=(ri, ri)), -1)
            L[np.diag_indices(ri)] = np.exp(rng.normal(scale=0.5, size=ri))
            factors.append(L)
    return param.pack(factors)


def _ascend(datum: BLDatum, opts: SolverOptions, theta0, index: int) -> MgResult:
    param = _Param(datum.r)

    def evaluate(theta):
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > 300.0:
            raise NotPositiveDefinite("factor entries out of range")
        B = param.matrix(theta)
        F = objective(datum, B)
        if not math.isfinite(F):
            raise NotPositiveDefinite("objective is not finite")
        return B, F

    def stationarity(B):
        return stationarity_residual(datum, normalize_gauge(datum, B))

    theta = theta0
    B, F = evaluate(theta)
    G = gradient(datum, B)
    g = param.pullback(param.factors(theta), G)
    stat = stationarity(B)
    trace = [(0, F, stat)]
    cond0 = _cond(B)
    F0 = F
    status = Status.MAX_ITERATIONS
    message = "iteration budget exhausted"
    step = opts.step_init / max(1.0, float(np.linalg.norm(g)))
    prev = None
    for it in range(1, opts.max_iters + 1):
        if stat <= opts.stat_tol:
            status, message = Status.CONVERGED, "stationarity below tolerance"
            break
        gg = float(g @ g)
        if prev is not None:
            s, y = theta - prev[0], g - prev[1]
            sy = float(s @ y)
            # Barzilai-Borwein length; F is locally concave near a maximizer so s.y < 0
            step = float(s @ s) / -sy if sy < 0 else 2.0 * step
        alpha = step
        accepted = False
        while alpha * math.sqrt(gg) > 1e-300 and alpha > 1e-30 * step:
            trial = theta + alpha * g
            try:
                Bn, Fn = evaluate(trial)
            except (ValueError, FloatingPointError, OverflowError):
                alpha *= 0.5
                continue
            if Fn >= F + 1e-4 * alpha * gg:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            message = "line search stalled"
            break
        prev = (theta, g)
        theta, B, F = trial, Bn, Fn
        g = param.pullback(param.factors(theta), gradient(datum, B))
        if F > opts.divergence_threshold or F - F0 > opts.divergence_threshold or _cond(B) > opts.growth_limit * cond0:
            trace.append((it, F, float(np.linalg.norm(g))))
            status, message = Status.UNBOUNDED, "objective keeps increasing along a degenerating direction"
            break
        stat = stationarity(B)
        trace.append((it, F, stat))
    else:
        if stat <= opts.stat_tol:
            status, message = Status.CONVERGED, "stationarity below tolerance"

    if status is Status.UNBOUNDED:
        return MgResult(status, F, B, stat, trace, witness=B, run_index=index, message=message)
    if is_balanced(datum):
        B = normalize_gauge(datum, B)
    value = objective(datum, B)
    return MgResult(status, value, B, stationarity_residual(datum, B), trace, run_index=index, message=message)


def _unbalanced_result(datum: BLDatum) -> MgResult:
    bal = balance(datum)
    # F(tB) = F(B) + bal/2 log t: follow the scaling ray in the increasing direction
    exponents = [0, 2, 4, 6, 8] if bal > 0 else [0, -2, -4, -6, -8]
    base = BlockPDMatrix.identity(datum.r)
    trace = []
    for i, e in enumerate(exponents):
        Bt = base.scaled(10.0 ** e)
        trace.append((i, objective(datum, Bt), gradient(datum, Bt).norm()))
    witness = base.scaled(10.0 ** exponents[-1])
    return MgResult(
        Status.UNBOUNDED,
        objective(datum, witness),
        witness,
        gradient(datum, witness).norm(),
        trace,
        witness=witness,
        message=f"dimension balance {bal!r} != 0: F(tB) - F(B) = {0.5 * bal!r} log t",
    )


def solve_mg(datum: BLDatum, opts: SolverOptions | None = None) -> MgResult:
    """Compute M_g = sup_B F(B), or decide that it is infinite.

    Unbalanced data are Unbounded at once (F is linear in log t along t*B).
    Otherwise gradient ascent on the Cholesky factors (Barzilai-Borwein step
    with Armijo backtracking, so the trace is nondecreasing) is run from the
    identity and from ``opts.restarts`` seeded random starts. The best run is
    reported; near-ties go to the lower stationarity, then the lower index.
    A run whose objective or condition number blows up is Unbounded.
    """
    opts = opts or SolverOptions()
    report = validate_datum(datum)
    if not report.ok:
        raise DatumError("invalid datum: " + "; ".join(report.messages))
    if not is_balanced(datum):
        return _unbalanced_result(datum)

    param = _Param(datum.r)
    children = np.random.SeedSequence(opts.seed).spawn(opts.restarts)
    starts = [_initial_theta(param, None)]
    starts += [_initial_theta(param, np.random.default_rng(ss)) for ss in children]
    runs = ordered_map(lambda item: _ascend(datum, opts, item[1], item[0]), list(enumerate(starts)))
    for run in runs:
        log.debug("run %d: %s value=%.17g stationarity=%.3e", run.run_index, run.status.value, run.value, run.stationarity)

    unbounded = [r for r in runs if r.status is Status.UNBOUNDED]
    if unbounded:
        return unbounded[0]
    best = runs[0]
    for run in runs[1:]:
        tie = abs(run.value - best.value) <= 1e-9 * max(1.0, abs(best.value))
        if (not tie and run.value > best.value) or (tie and run.stationarity < best.stationarity):
            best = run
    return best
