"""Brenier maps from the standard Gaussian: linear PD maps, 1-D monotone rearrangements, products.

Maps act on batches: ``T(Z)`` takes an ``(N, dim)`` array of standard normal
draws and returns the pushed-forward points. ``jacobian_batch`` returns the
``(N, dim, dim)`` stack of Jacobians, ``jacobian`` a single one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NumericalDomain, ParameterError
from .matkernels import cholesky_pd, is_symmetric, pd_sqrt

# Phi(8) rounds to 1 in double precision
Z_CLAMP = 8.0
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def std_normal_logpdf(z):
    z = np.asarray(z, dtype=float)
    return -0.5 * z * z - _LOG_SQRT_2PI


# ---------------------------------------------------------------------------
# sampling


class StdNormalSampler:
    """Reproducible standard normal draws in R^dimension.

    Uses the counter-based Philox generator keyed by ``(seed, stream)``;
    uniforms are consumed one 64-bit word per coordinate and mapped through
    the normal quantile, so row ``i`` of ``sample(N)`` does not depend on
    ``N`` (and ``sample(N, start=s)`` returns rows ``s .. s+N-1``).
    """

    def __init__(self, dimension: int, seed: int = 0, stream: int = 0):
        if dimension < 1:
            raise ParameterError("dimension must be >= 1")
        self.dimension = int(dimension)
        self.seed = int(seed)
        self.stream = int(stream)

    def _bitgen(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Philox(ss)

    def uniforms(self, n: int, start: int = 0) -> np.ndarray:
        words = self._bitgen().random_raw(size=(start + n) * self.dimension)[start * self.dimension:]
        # top 53 bits, centred in their cell: strictly inside (0, 1)
        u = ((words >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
        return u.reshape(n, self.dimension)

    def sample(self, n: int, start: int = 0) -> np.ndarray:
        return special.ndtri(self.uniforms(n, start))


# ---------------------------------------------------------------------------
# 1-D targets


class Target1D:
    """A continuous 1-D law with strictly increasing CDF on its support."""

    kind = ""

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def logpdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def quantile(self, p):
        raise NotImplementedError

    def isf(self, q):
        return self.quantile(1.0 - np.asarray(q, dtype=float))

    def entropy(self) -> float | None:
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(Target1D):
    mu: float = 0.0
    sigma: float = 1.0
    kind = "normal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError("normal sigma must be positive")

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def sf(self, x):
        return special.ndtr(-(np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def logpdf(self, x):
        return std_normal_logpdf((np.asarray(x, dtype=float) - self.mu) / self.sigma) - math.log(self.sigma)

    def quantile(self, p):
        return self.mu + self.sigma * special.ndtri(p)

    def isf(self, q):
        return self.mu - self.sigma * special.ndtri(q)

    def entropy(self):
        return 0.5 * math.log(2 * math.pi * math.e) + math.log(self.sigma)

    def to_dict(self):
        return {"kind": "normal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Exponential(Target1D):
    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError("exponential rate must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def quantile(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.rate

    def isf(self, q):
        return -np.log(np.asarray(q, dtype=float)) / self.rate

    def entropy(self):
        return 1.0 - math.log(self.rate)

    def to_dict(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Uniform(Target1D):
    a: float = 0.0
    b: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not self.b > self.a:
            raise ParameterError("uniform needs a < b")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.b - np.asarray(x, dtype=float)) / (self.b - self.a), 0.0, 1.0)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), -math.log(self.b - self.a), -np.inf)

    def quantile(self, p):
        return self.a + (self.b - self.a) * np.asarray(p, dtype=float)

    def isf(self, q):
        return self.b - (self.b - self.a) * np.asarray(q, dtype=float)

    def entropy(self):
        return math.log(self.b - self.a)

    def to_dict(self):
        return {"kind": "uniform", "a": self.a, "b": self.b}


class GaussianMixture(Target1D):
    """Finite mixture of normals; quantiles by bisection followed by Newton polish."""

    kind = "gaussian_mixture"
    QUANTILE_ATOL = 1e-12

    def __init__(self, weights, means, sigmas):
        w = np.asarray(weights, dtype=float)
        mu = np.asarray(means, dtype=float)
        s = np.asarray(sigmas, dtype=float)
        if w.ndim != 1 or not (w.shape == mu.shape == s.shape) or w.size == 0:
            raise ParameterError("mixture weights, means and sigmas must be equal-length lists")
        if np.any(w <= 0) or np.any(s <= 0) or not np.all(np.isfinite(np.concatenate([w, mu, s]))):
            raise ParameterError("mixture weights and sigmas must be positive and finite")
        self.weights = w / w.sum()
        self.means = mu
        self.sigmas = s

    def __eq__(self, other):
        return isinstance(other, GaussianMixture) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"GaussianMixture(weights={self.weights.tolist()}, means={self.means.tolist()}, sigmas={self.sigmas.tolist()})"

    def _std(self, x):
        x = np.asarray(x, dtype=float)
        return (x[..., None] - self.means) / self.sigmas

    def cdf(self, x):
        return special.ndtr(self._std(x)) @ self.weights

    def sf(self, x):
        return special.ndtr(-self._std(x)) @ self.weights

    def logpdf(self, x):
        comp = std_normal_logpdf(self._std(x)) - np.log(self.sigmas) + np.log(self.weights)
        return special.logsumexp(comp, axis=-1)

    def _solve(self, target, upper_tail: bool):
        """Find x with cdf(x) = target (or sf(x) = target when ``upper_tail``)."""
        target = np.asarray(target, dtype=float)
        lo = np.full(target.shape, float(np.min(self.means - 40 * self.sigmas)))
        hi = np.full(target.shape, float(np.max(self.means + 40 * self.sigmas)))
        f = self.sf if upper_tail else self.cdf
        sign = -1.0 if upper_tail else 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            too_big = sign * (f(mid) - target) > 0
            hi = np.where(too_big, mid, hi)
            lo = np.where(too_big, lo, mid)
            if np.all(hi - lo <= self.QUANTILE_ATOL):
                break
        x = 0.5 * (lo + hi)
        for _ in range(3):
            dens = self.pdf(x)
            ok = dens > 0
            step = np.where(ok, sign * (f(x) - target) / np.where(ok, dens, 1.0), 0.0)
            x = np.clip(x - step, lo - self.QUANTILE_ATOL, hi + self.QUANTILE_ATOL)
        return x

    def quantile(self, p):
        return self._solve(p, upper_tail=False)

    def isf(self, q):
        return self._solve(q, upper_tail=True)

    def to_dict(self):
        return {
            "kind": "gaussian_mixture",
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "sigmas": self.sigmas.tolist(),
        }


_PARAMS = {
    "normal": (Normal, {"mu": 0.0, "sigma": 1.0}),
    "exponential": (Exponential, {"rate": 1.0}),
    "uniform": (Uniform, {"a": 0.0, "b": 1.0}),
    "gaussian_mixture": (GaussianMixture, None),
}


def target_from_spec(spec) -> Target1D:
    """Build a 1-D target from ``{"kind": ..., <parameters>}``."""
    if isinstance(spec, Target1D):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError(f"distribution spec must be an object with a 'kind' key, got {spec!r}")
    kind = spec["kind"]
    if kind not in _PARAMS:
        raise ParameterError(f"unsupported distribution kind {kind!r}")
    cls, defaults = _PARAMS[kind]
    params = {k: v for k, v in spec.items() if k != "kind"}
    if defaults is None:
        required = {"weights", "means", "sigmas"}
        if set(params) != required:
            raise ParameterError(f"gaussian_mixture needs exactly {sorted(required)}")
        return cls(**params)
    unknown = set(params) - set(defaults)
    if unknown:
        raise ParameterError(f"unknown parameters {sorted(unknown)} for {kind}")
    return cls(**{k: float(params.get(k, v)) for k, v in defaults.items()})


# ---------------------------------------------------------------------------
# maps


class TransportMap:
    dim: int

    def __call__(self, Z) -> np.ndarray:
        raise NotImplementedError

    def jacobian_batch(self, Z) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, z) -> np.ndarray:
        return jacobian(self, z)


def _as_batch(Z, dim):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(-1, dim) if dim > 1 or Z.size != 1 else Z.reshape(1, 1)
    if Z.ndim != 2 or Z.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {Z.shape}")
    return Z


class LinearPD(TransportMap):
    """``T(z) = S z`` with ``S`` symmetric PD; pushes N(0, I) to N(0, S^2)."""

    def __init__(self, S):
        S = np.atleast_2d(np.array(S, dtype=float))
        if not is_symmetric(S):
            raise ParameterError("LinearPD needs a symmetric matrix")
        cholesky_pd(S)
        S.setflags(write=False)
        self.S = S
        self.dim = S.shape[0]

    def __call__(self, Z):
        return _as_batch(Z, self.dim) @ self.S

    def jacobian_batch(self, Z):
        Z = _as_batch(Z, self.dim)
        return np.broadcast_to(self.S, (Z.shape[0], self.dim, self.dim)).copy()

    def to_dict(self):
        return {"kind": "linear_pd", "S": self.S.tolist()}


class Monotone1D(TransportMap):
    """Monotone rearrangement ``T = F^{-1} o Phi`` of N(0, 1) onto ``target``.

    Inputs are clamped to ``|z| <= 8``; the upper half uses the survival
    function so both tails keep full relative precision.
    """

    dim = 1

    def __init__(self, target: Target1D):
        self.target = target

    def target_cdf(self, x):
        return self.target.cdf(x)

    def target_quantile(self, p):
        return self.target.quantile(p)

    def target_log_density(self, x):
        return self.target.logpdf(x)

    def map1d(self, z):
        z = np.clip(np.asarray(z, dtype=float), -Z_CLAMP, Z_CLAMP)
        lower = z <= 0
        out = np.empty_like(z)
        out[lower] = self.target.quantile(special.ndtr(z[lower]))
        out[~lower] = self.target.isf(special.ndtr(-z[~lower]))
        return out

    def derivative(self, z):
        """``T'(z) = phi(z) / f(T(z))``."""
        zc = np.clip(np.asarray(z, dtype=float), -Z_CLAMP, Z_CLAMP)
        with np.errstate(over="ignore"):
            return np.exp(std_normal_logpdf(zc) - self.target.logpdf(self.map1d(zc)))

    def __call__(self, Z):
        Z = _as_batch(Z, 1)
        return self.map1d(Z[:, 0])[:, None]

    def jacobian_batch(self, Z):
        Z = _as_batch(Z, 1)
        return self.derivative(Z[:, 0])[:, None, None]

    def to_dict(self):
        return {"kind": "monotone_1d", "target": self.target.to_dict()}


class ProductMap(TransportMap):
    """``T = (T_1, ..., T_k)`` acting blockwise; its Jacobian is block diagonal."""

    def __init__(self, components, r=None):
        components = list(components)
        if not components:
            raise ParameterError("product of zero maps")
        dims = tuple(c.dim for c in components)
        if r is not None and tuple(int(x) for x in r) != dims:
            raise ParameterError(f"component dimensions {dims} do not match partition {tuple(r)}")
        self.components = tuple(components)
        self.r = dims
        self.dim = sum(dims)
        self._off = np.concatenate([[0], np.cumsum(dims)]).astype(int)

    def __call__(self, Z):
        Z = _as_batch(Z, self.dim)
        return np.hstack([c(Z[:, a:b]) for c, a, b in zip(self.components, self._off[:-1], self._off[1:])])

    def jacobian_batch(self, Z):
        Z = _as_batch(Z, self.dim)
        J = np.zeros((Z.shape[0], self.dim, self.dim))
        for c, a, b in zip(self.components, self._off[:-1], self._off[1:]):
            J[:, a:b, a:b] = c.jacobian_batch(Z[:, a:b])
        return J

    def is_diagonal(self) -> bool:
        return all(isinstance(c, Monotone1D) or c.dim == 1 for c in self.components)

    def to_dict(self):
        return {"kind": "product", "components": [c.to_dict() for c in self.components]}


def gaussian_brenier(Sigma) -> LinearPD:
    """Brenier map from N(0, I) to N(0, Sigma): multiplication by Sigma^{1/2}."""
    return LinearPD(pd_sqrt(np.atleast_2d(np.asarray(Sigma, dtype=float))))


def monotone_1d_map(target) -> Monotone1D:
    return Monotone1D(target_from_spec(target))


def product_map(components, r=None) -> ProductMap:
    return ProductMap(components, r)


def check_jacobians(J: np.ndarray) -> np.ndarray:
    """Raise :class:`NumericalDomain` unless every Jacobian in the stack is finite and PD."""
    if not np.all(np.isfinite(J)):
        raise NumericalDomain("Jacobian has non-finite entries")
    # all supported maps are either constant PD or diagonal
    if J.shape[-1] == 1 or np.all(J == np.einsum("...ii->...i", J)[..., None] * np.eye(J.shape[-1])):
        if np.any(np.einsum("...ii->...i", J) <= 0):
            raise NumericalDomain("map derivative is not positive")
    else:
        np.linalg.cholesky(J)  # raises LinAlgError if not PD
    return J


def jacobian(map: TransportMap, z) -> np.ndarray:
    """``grad T(z)`` at one point, checked to be symmetric PD."""
    z = np.asarray(z, dtype=float).reshape(1, map.dim)
    try:
        return check_jacobians(map.jacobian_batch(z))[0]
    except np.linalg.LinAlgError:
        raise NumericalDomain("Jacobian is not positive definite") from None


def map_from_spec(spec) -> TransportMap:
    """Map from a JSON-style description.

    * a list of 1-D distribution specs -> product of monotone rearrangements;
    * ``{"kind": "gaussian", "sigma": [[...]]}`` -> Gaussian Brenier map;
    * ``{"kind": "linear_pd", "S": [[...]]}`` -> the linear map itself;
    * any single 1-D distribution spec -> one monotone rearrangement.
    """
    if isinstance(spec, list):
        return ProductMap([map_from_spec(s) for s in spec])
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParameterError(f"cannot build a map from {spec!r}")
    kind = spec["kind"]
    if kind == "gaussian":
        return gaussian_brenier(spec["sigma"])
    if kind == "linear_pd":
        return LinearPD(spec["S"])
    if kind == "product":
        return ProductMap([map_from_spec(s) for s in spec["components"]])
    if kind == "monotone_1d":
        return monotone_1d_map(spec["target"])
    return monotone_1d_map(spec)
