"""Seeded random inputs shared by the test modules."""
import math

import numpy as np

from blepi.datum import BLDatum, is_balanced
from blepi.objective import BlockPDMatrix, objective


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)))
    return Q * np.sign(np.diag(R))


def random_pd(rng, n, cond=1e3):
    """Random SPD matrix with condition number at most ``cond``."""
    if n == 1:
        return np.array([[math.exp(rng.uniform(-1, 1) * math.log(cond) / 2)]])
    logs = rng.uniform(0.0, math.log(cond), size=n)
    logs[0], logs[-1] = 0.0, rng.uniform(0.0, math.log(cond))
    scale = math.exp(rng.uniform(-1.0, 1.0))
    Q = random_orthogonal(rng, n)
    M = (Q * (scale * np.exp(logs))) @ Q.T
    return 0.5 * (M + M.T)


def random_block_pd(rng, r, cond=1e3):
    return BlockPDMatrix(tuple(random_pd(rng, ri, cond) for ri in r))


def random_datum(rng, n_max=5, balanced=None):
    """Arbitrary (not necessarily bounded) datum with surjective maps."""
    k = int(rng.integers(1, 4))
    r = tuple(int(x) for x in rng.integers(1, 3, size=k))
    n = sum(r)
    while n > n_max:
        r = r[:-1] or (1,)
        n = sum(r)
        k = len(r)
    m = int(rng.integers(1, 4))
    maps = [rng.normal(size=(int(rng.integers(1, n + 1)), n)) for _ in range(m)]
    c = rng.uniform(0.1, 2.0, size=k)
    d = rng.uniform(0.1, 2.0, size=m)
    if balanced:
        nj = np.array([A.shape[0] for A in maps])
        d = d * (np.dot(c, r) / np.dot(d, nj))
        datum = BLDatum(r=r, c=c, d=d, maps=maps)
        # rescaling can leave a residual of several ulps; draw again in that case
        return datum if is_balanced(datum) else random_datum(rng, n_max, balanced)
    return BLDatum(r=r, c=c, d=d, maps=maps)


def matrix_epi_datum(rng, r, weights):
    """``A = [P_1, ..., P_k]`` with invertible ``P_i`` (all blocks of size r), ``d = 1``.

    Balanced when the weights sum to one. By concavity of log det,
    ``M_g = sum_i c_i (r/2 log c_i - log |det P_i|)``.
    """
    weights = np.asarray(weights, dtype=float)
    P = [rng.normal(size=(r, r)) + 2.0 * np.eye(r) for _ in weights]
    A = np.hstack(P)
    mg = float(sum(c * (0.5 * r * math.log(c) - math.log(abs(np.linalg.det(Pi)))) for c, Pi in zip(weights, P)))
    return BLDatum(r=(r,) * len(weights), c=weights, d=(1.0,), maps=(A,)), mg


def weighted_epi(lams, a):
    """Scalar blocks, one row map ``a``; ``M_g = 1/2 sum lam_i log(lam_i / a_i^2)``."""
    lams = np.asarray(lams, dtype=float)
    a = np.asarray(a, dtype=float)
    mg = 0.5 * float(np.sum(lams * np.log(lams / a ** 2)))
    return BLDatum(r=(1,) * len(lams), c=lams, d=(1.0,), maps=(a[None, :],)), mg


def fd_gradient(datum, B, h=1e-5):
    """Central differences of F along symmetric unit perturbations of every block entry."""
    out = []
    for i, Bi in enumerate(B.blocks):
        G = np.zeros_like(Bi)
        ri = Bi.shape[0]
        for a in range(ri):
            for b in range(a, ri):
                E = np.zeros((ri, ri))
                E[a, b] = E[b, a] = 1.0
                plus = list(B.blocks)
                minus = list(B.blocks)
                plus[i] = Bi + h * E
                minus[i] = Bi - h * E
                dF = (objective(datum, BlockPDMatrix(tuple(plus))) - objective(datum, BlockPDMatrix(tuple(minus)))) / (2 * h)
                # d/dh F(B + hE) = <G, E> = G_aa or 2 G_ab
                if a == b:
                    G[a, a] = dF
                else:
                    G[a, b] = G[b, a] = dF / 2
        out.append(G)
    return out
