"""Numerical replay of the change-of-variables lemma and the entropy inequality.

Monte Carlo quantities carry a standard error, and an inequality passes when
its slack is at least ``-PASS_SIGMAS`` standard errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datum import BLDatum, balance, is_balanced
from .entropy import EntropyEstimate, gaussian_entropy, knn_entropy, plugin_entropy
from .errors import DatumError, NumericalDomain, ParameterError, RankDeficient
from .matkernels import logdet_pd, qr_pos_diag
from .objective import BlockPDMatrix, objective
from .transport import Monotone1D, ProductMap, StdNormalSampler, TransportMap, check_jacobians, target_from_spec

PASS_SIGMAS = 3.0
LOG_2PIE = math.log(2 * math.pi * math.e)
POINTWISE_TOL = 1e-6


@dataclass(frozen=True)
class MCMean:
    """Monte Carlo mean with its standard error."""

    value: float
    stderr: float
    n_samples: int

    @classmethod
    def of(cls, x) -> "MCMean":
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise NumericalDomain("Monte Carlo integrand is not finite")
        se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(float(np.mean(x)), se, int(x.size))

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples}


def _combine(*stderrs) -> float:
    return math.sqrt(math.fsum(s * s for s in stderrs))


def _passes(slack: float, stderr: float) -> bool:
    return slack >= -PASS_SIGMAS * stderr


def _check_surjective(A: np.ndarray, n: int) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != n:
        raise ParameterError(f"map has {A.shape[1]} columns but the transport acts on R^{n}")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0 or np.sum(s > 1e-10 * s[0]) < A.shape[0]:
        raise RankDeficient("A is not surjective")
    return A


def _half_logdet_AJ2At(A: np.ndarray, J: np.ndarray) -> np.ndarray:
    """``1/2 log det(A J^2 A^T)`` for every Jacobian in the stack (J symmetric)."""
    AJ = np.einsum("ij,njk->nik", A, J)
    sign, ld = np.linalg.slogdet(AJ @ AJ.transpose(0, 2, 1))
    if np.any(sign <= 0):
        raise NumericalDomain("A J^2 A^T is singular at some sample")
    return 0.5 * ld


# ---------------------------------------------------------------------------
# lemma


@dataclass
class LemmaReport:
    lhs: EntropyEstimate
    rhs_exact_part: float
    rhs_expect_part: MCMean
    slack: float
    stderr: float
    n_samples: int
    seed: int
    passed: bool

    def to_dict(self):
        return {
            "lhs": self.lhs.to_dict(),
            "rhs_exact_part": self.rhs_exact_part,
            "rhs_expect_part": self.rhs_expect_part.to_dict(),
            "slack": self.slack,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "passed": self.passed,
        }


def lemma1_check(A, map: TransportMap, n_samples: int = 20000, seed: int = 0, k: int = 5, jitter: bool = False) -> LemmaReport:
    """Both sides of ``h(AX) >= h(Z) + 1/2 E log det(A (grad T)^2 A^T)`` with ``X = T(Z~)``.

    The left side is a Kozachenko-Leonenko estimate on ``A T(z_i)``; the
    expectation on the right is a sample mean over the same draws.
    """
    A = _check_surjective(A, map.dim)
    m = A.shape[0]
    Z = StdNormalSampler(map.dim, seed).sample(n_samples)
    Y = map(Z) @ A.T
    lhs = knn_entropy(Y, k, jitter_seed=seed if jitter else None)
    J = check_jacobians(map.jacobian_batch(Z))
    expect = MCMean.of(_half_logdet_AJ2At(A, J))
    exact = 0.5 * m * LOG_2PIE
    slack = lhs.value - exact - expect.value
    se = _combine(lhs.stderr, expect.stderr)
    return LemmaReport(lhs, exact, expect, slack, se, n_samples, seed, _passes(slack, se))


# ---------------------------------------------------------------------------
# theorem


@dataclass
class TheoremReport:
    lhs: float
    lhs_stderr: float
    mg: float
    gap: float
    mode: str
    terms: list[dict] = field(default_factory=list)
    passed: bool = True
    n_samples: int = 0
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "mode": self.mode,
            "lhs": self.lhs,
            "lhs_stderr": self.lhs_stderr,
            "mg": self.mg,
            "gap": self.gap,
            "passed": self.passed,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "terms": self.terms,
        }
        out.update(self.extra)
        return out


def check_entropy_balance(datum: BLDatum) -> float:
    """Difference of the standard-Gaussian entropy sums on both sides.

    ``sum_i c_i h(Z_i) - sum_j d_j h(Z'_j)``, which vanishes for balanced data.
    Raises :class:`DatumError` when it does not.
    """
    left = math.fsum(ci * 0.5 * ri * LOG_2PIE for ci, ri in zip(datum.c, datum.r))
    right = math.fsum(dj * 0.5 * nj * LOG_2PIE for dj, nj in zip(datum.d, datum.nj))
    diff = left - right
    if abs(diff) > 1e-12 * max(1.0, abs(left)):
        raise DatumError(f"standard Gaussian entropies do not balance (difference {diff!r})")
    return diff


def theorem_gap_gaussian(datum: BLDatum, Sigmas, mg: float) -> TheoremReport:
    """Exact left side of the inequality for independent Gaussian blocks ``X_i ~ N(0, Sigma_i)``.

    For balanced data the ``2 pi e`` terms cancel and the left side equals
    ``F(diag(Sigma_1, ..., Sigma_k))``; this identity is checked to 1e-10.
    """
    if not is_balanced(datum):
        raise DatumError(f"Gaussian mode needs a balanced datum (balance {balance(datum)!r})")
    check_entropy_balance(datum)
    B = BlockPDMatrix(tuple(np.atleast_2d(np.asarray(S, dtype=float)) for S in Sigmas))
    if B.sizes != datum.r:
        raise DatumError(f"covariance sizes {B.sizes} do not match the partition {datum.r}")
    dense = B.to_dense()
    terms, parts = [], []
    for i, (ci, Si) in enumerate(zip(datum.c, B.blocks)):
        if ci != 0.0:
            h = gaussian_entropy(Si).value
            parts.append(ci * h)
            terms.append({"side": "block", "index": i, "coef": ci, "entropy": h})
    for j, (dj, A) in enumerate(zip(datum.d, datum.maps)):
        if dj != 0.0:
            h = gaussian_entropy(A @ dense @ A.T).value
            parts.append(-dj * h)
            terms.append({"side": "map", "index": j, "coef": dj, "entropy": h})
    lhs = math.fsum(parts)
    F = objective(datum, B)
    if abs(lhs - F) > 1e-10 * max(1.0, abs(F)):
        raise AssertionError(f"Gaussian left side {lhs!r} differs from F(Sigma) = {F!r}")
    gap = mg - lhs
    return TheoremReport(lhs, 0.0, mg, gap, "GaussianClosedForm", terms, passed=gap >= -1e-10)


def pointwise_bound(datum: BLDatum, J: np.ndarray) -> np.ndarray:
    """``1/2 sum c_i log det(J_i^2) - 1/2 sum d_j log det(A_j J^2 A_j^T)`` per sample.

    ``J`` is a stack of block-diagonal Jacobians; each value equals
    ``F(J^2)`` and so cannot exceed M_g.
    """
    vals = np.zeros(J.shape[0])
    for ci, sl in zip(datum.c, datum.block_slices()):
        if ci != 0.0:
            sign, ld = np.linalg.slogdet(J[:, sl, sl])
            vals += ci * ld
    for dj, A in zip(datum.d, datum.maps):
        if dj != 0.0:
            vals -= dj * _half_logdet_AJ2At(A, J)
    return vals


def theorem_check_sampled(datum: BLDatum, targets, n_samples: int = 20000, seed: int = 0, mg: float = 0.0,
                          k: int = 5, jitter: bool = False, mg_converged: bool = True) -> TheoremReport:
    """Monte Carlo left side for independent scalar coordinates ``X_i = T_i(Z_i)``.

    ``h(X_i)`` uses the plug-in estimator with the known target density and
    ``h(A_j X)`` the Kozachenko-Leonenko estimator. The pointwise bound
    ``F((grad T)^2) <= M_g`` is also evaluated at every draw when ``mg_converged``.
    """
    if any(ri != 1 for ri in datum.r):
        raise ParameterError("sampled mode needs scalar blocks (all r_i = 1)")
    targets = [target_from_spec(t) for t in targets]
    if len(targets) != datum.k:
        raise ParameterError(f"need {datum.k} targets, got {len(targets)}")
    if is_balanced(datum):
        check_entropy_balance(datum)
    T = ProductMap([Monotone1D(t) for t in targets], datum.r)
    Z = StdNormalSampler(datum.n, seed).sample(n_samples)
    X = T(Z)
    terms, parts, ses = [], [], []
    for i, (ci, tgt) in enumerate(zip(datum.c, targets)):
        if ci != 0.0:
            est = plugin_entropy(tgt.logpdf, X[:, i])
            parts.append(ci * est.value)
            ses.append(ci * est.stderr)
            terms.append({"side": "block", "index": i, "coef": ci, "entropy": est.to_dict(), "target": tgt.to_dict()})
    for j, (dj, A) in enumerate(zip(datum.d, datum.maps)):
        if dj != 0.0:
            est = knn_entropy(X @ A.T, k, jitter_seed=seed if jitter else None)
            parts.append(-dj * est.value)
            ses.append(dj * est.stderr)
            terms.append({"side": "map", "index": j, "coef": dj, "entropy": est.to_dict()})
    lhs = math.fsum(parts)
    se = _combine(*ses)
    gap = mg - lhs
    extra = {}
    passed = _passes(gap, se)
    if mg_converged and math.isfinite(mg):
        pw = pointwise_bound(datum, check_jacobians(T.jacobian_batch(Z)))
        pw_max = float(np.max(pw))
        extra["pointwise_max"] = pw_max
        extra["pointwise_ok"] = pw_max <= mg + POINTWISE_TOL
        passed = passed and extra["pointwise_ok"]
    return TheoremReport(lhs, se, mg, gap, "Sampled", terms, passed, n_samples, seed, extra)


# ---------------------------------------------------------------------------
# proof chain


@dataclass
class AuditReport:
    h_AX: EntropyEstimate
    conditional: dict | None
    change_of_variables: dict
    det_slack: dict
    checks: dict
    n_samples: int
    seed: int
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self):
        return {
            "h_AX": self.h_AX.to_dict(),
            "conditional": self.conditional,
            "change_of_variables": self.change_of_variables,
            "det_slack": self.det_slack,
            "checks": self.checks,
            "passed": self.passed,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "notes": self.notes,
        }


def _stratified_entropy(Y: np.ndarray, key: np.ndarray, n_strata: int, k: int) -> tuple[float, float]:
    order = np.argsort(key, kind="stable")
    cells = np.array_split(order, n_strata)
    ests = [knn_entropy(Y[idx], k) for idx in cells]
    weights = np.array([idx.size for idx in cells], dtype=float) / Y.shape[0]
    value = float(np.dot(weights, [e.value for e in ests]))
    se = math.sqrt(float(np.dot(weights ** 2, [e.stderr ** 2 for e in ests])))
    return value, se


def det_slack_integrand(J: np.ndarray, Q1: np.ndarray) -> np.ndarray:
    """``log det(Q1' J^2 Q1) - 2 log det(Q1' J Q1)`` for each Jacobian in the stack."""
    JQ = np.einsum("nij,jk->nik", J, Q1)
    s1, ld_sq = np.linalg.slogdet(JQ.transpose(0, 2, 1) @ JQ)
    s2, ld = np.linalg.slogdet(Q1.T @ JQ)
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise NumericalDomain("compressed Jacobian is not positive definite")
    return ld_sq - 2.0 * ld


def proof_chain_audit(A, map: TransportMap, n_samples: int = 20000, seed: int = 0, n_strata: int = 8, k: int = 5) -> AuditReport:
    """Estimate each intermediate quantity of the lemma's transport argument.

    With ``A^T = Q1 R1`` and ``Z~ = Q1 Z + Q2 Z'``:

    (a) ``h(A T(Z~))``;
    (b) ``h(A T(Z~) | Z')``, approximated by sorting the draws on the first
        coordinate of ``Z'`` into ``n_strata`` equal-count cells and averaging
        the within-cell estimates (conditioning on a coarser variable, so this
        sits between the true conditional entropy and (a));
    (c) ``h(Z) + E log det(Q1' grad T Q1) + log det R1``;
    (d) ``E[log det(Q1' J^2 Q1) - 2 log det(Q1' J Q1)]``, nonnegative pointwise.

    Checks: (a) >= (b) and (b) == (c) within 3 standard errors, (d) >= 0 at
    every draw. Step (b) is skipped when A is square.
    """
    A = _check_surjective(A, map.dim)
    m, n = A.shape
    qr = qr_pos_diag(A.T)
    Zm = StdNormalSampler(m, seed, stream=1).sample(n_samples)
    Zt = Zm @ qr.Q1.T
    Zp = None
    if n > m:
        Zp = StdNormalSampler(n - m, seed, stream=2).sample(n_samples)
        Zt = Zt + Zp @ qr.Q2.T
    Y = map(Zt) @ A.T
    J = check_jacobians(map.jacobian_batch(Zt))
    notes = []
    checks = {}

    h_a = knn_entropy(Y, k)

    cond = None
    if Zp is None:
        notes.append("A is square: Z' is empty and the conditioning step is skipped")
    else:
        val, se = _stratified_entropy(Y, Zp[:, 0], n_strata, k)
        cond = {"value": val, "stderr": se, "n_strata": n_strata}
        checks["a_ge_b"] = _passes(h_a.value - val, _combine(h_a.stderr, se))

    JQ1 = np.einsum("nij,jk->nik", J, qr.Q1)
    sign, ld = np.linalg.slogdet(qr.Q1.T @ JQ1)
    if np.any(sign <= 0):
        raise NumericalDomain("Q1' grad T Q1 is not positive definite")
    ld_mean = MCMean.of(ld)
    logdet_R1 = float(np.sum(np.log(np.diag(qr.R1))))
    cov_value = 0.5 * m * LOG_2PIE + ld_mean.value + logdet_R1
    cov = {
        "value": cov_value,
        "stderr": ld_mean.stderr,
        "h_Z": 0.5 * m * LOG_2PIE,
        "E_logdet_Q1JQ1": ld_mean.to_dict(),
        "logdet_R1": logdet_R1,
    }
    if cond is not None:
        checks["b_eq_c"] = abs(cond["value"] - cov_value) <= PASS_SIGMAS * _combine(cond["stderr"], ld_mean.stderr)
    else:
        # without Z' the conditioning step is an identity and (a) is compared to (c)
        checks["a_eq_c"] = abs(h_a.value - cov_value) <= PASS_SIGMAS * _combine(h_a.stderr, ld_mean.stderr)

    d = det_slack_integrand(J, qr.Q1)
    dmean = MCMean.of(d)
    det_slack = {"mean": dmean.value, "stderr": dmean.stderr, "min": float(np.min(d))}
    checks["d_nonnegative"] = bool(np.min(d) >= -1e-10)
    return AuditReport(h_a, cond, cov, det_slack, checks, n_samples, seed, notes)
