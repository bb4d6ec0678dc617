"""Differential entropy in nats: Gaussian closed form, plug-in Monte Carlo, Kozachenko-Leonenko."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.spatial import cKDTree

from .errors import DegenerateSample, NumericalDomain, ParameterError
from .matkernels import logdet_pd

JITTER_AMPLITUDE = 1e-10


class Method(str, enum.Enum):
    GAUSSIAN = "GaussianClosedForm"
    PLUGIN = "PlugIn"
    KNN = "KNN"


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    stderr: float
    method: Method
    n_samples: int = 0

    def __post_init__(self):
        if self.stderr < 0 or math.isnan(self.stderr):
            raise ValueError("stderr must be nonnegative")

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "method": self.method.value, "n_samples": self.n_samples}


def gaussian_entropy(Sigma) -> EntropyEstimate:
    """``1/2 log((2 pi e)^n det Sigma)``."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    n = Sigma.shape[0]
    value = 0.5 * (n * math.log(2 * math.pi * math.e) + logdet_pd(Sigma))
    return EntropyEstimate(value, 0.0, Method.GAUSSIAN, 0)


def plugin_entropy(log_density, samples) -> EntropyEstimate:
    """``-mean(log f(x_i))`` with the standard error of the mean.

    ``log_density`` is called once on the whole sample array.
    """
    samples = np.asarray(samples, dtype=float)
    lp = np.asarray(log_density(samples), dtype=float).reshape(-1)
    if lp.size == 0:
        raise ParameterError("no samples")
    if not np.all(np.isfinite(lp)):
        raise NumericalDomain("log-density is not finite at some sample")
    N = lp.size
    stderr = float(np.std(lp, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    return EntropyEstimate(float(-np.mean(lp)), stderr, Method.PLUGIN, N)


def log_unit_ball_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1)


def knn_distances(X: np.ndarray, k: int) -> np.ndarray:
    """Euclidean distance from every row of ``X`` to its ``k``-th nearest other row."""
    tree = cKDTree(X)
    dist, _ = tree.query(X, k=k + 1)
    return dist[:, k]


def jitter(samples, seed: int = 0, amplitude: float = JITTER_AMPLITUDE) -> np.ndarray:
    """Deterministic uniform jitter of the given amplitude."""
    samples = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x6A17,)))
    return samples + amplitude * rng.uniform(-1.0, 1.0, size=samples.shape)


def knn_entropy(samples, k: int = 5, *, jitter_seed: int | None = None) -> EntropyEstimate:
    """Kozachenko-Leonenko estimate.

    ``psi(N) - psi(k) + log V_d + (d/N) sum_i log rho_{k,i}``, with ``rho_{k,i}``
    the distance from sample ``i`` to its ``k``-th neighbour. The standard
    error is the standard deviation of the per-sample terms over ``sqrt(N)``.

    Parameters
    ----------
    samples : array_like, shape (N,) or (N, d)
    k : int
        Neighbour order, ``1 <= k < N``.
    jitter_seed : int, optional
        If given, add deterministic jitter of amplitude 1e-10 first, which
        separates repeated points.

    Raises
    ------
    DegenerateSample
        If some k-NN distance is zero.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N, d = X.shape
    if not 1 <= k < N:
        raise ParameterError(f"need 1 <= k < N, got k={k}, N={N}")
    if not np.all(np.isfinite(X)):
        raise NumericalDomain("samples contain non-finite values")
    if jitter_seed is not None:
        X = jitter(X, jitter_seed)
    rho = knn_distances(X, k)
    if np.any(rho <= 0):
        raise DegenerateSample(f"{int(np.sum(rho <= 0))} samples have a zero {k}-NN distance")
    terms = special.digamma(N) - special.digamma(k) + log_unit_ball_volume(d) + d * np.log(rho)
    return EntropyEstimate(float(np.mean(terms)), float(np.std(terms, ddof=1) / math.sqrt(N)), Method.KNN, N)
