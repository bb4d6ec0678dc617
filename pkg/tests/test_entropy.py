import math

import numpy as np
import pytest
from scipy import stats

from blepi.entropy import Method, gaussian_entropy, knn_entropy, log_unit_ball_volume, plugin_entropy
from blepi.errors import DegenerateSample, NotPositiveDefinite, NumericalDomain, ParameterError
from blepi.transport import Exponential, Normal, StdNormalSampler, monotone_1d_map

H_STD_NORMAL = 0.5 * math.log(2 * math.pi * math.e)


def normal_draws(n, seed, dim=1):
    return StdNormalSampler(dim, seed).sample(n)


class TestGaussian:
    def test_standard(self):
        h = gaussian_entropy([[1.0]])
        assert h.value == pytest.approx(1.4189385, abs=1e-7)
        assert h.stderr == 0.0 and h.method is Method.GAUSSIAN

    def test_variance_four(self):
        assert gaussian_entropy([[4.0]]).value == pytest.approx(H_STD_NORMAL + 0.5 * math.log(4), abs=1e-14)
        assert gaussian_entropy([[4.0]]).value == pytest.approx(2.1120857, abs=1e-7)

    def test_additive(self):
        assert gaussian_entropy(np.eye(2)).value == pytest.approx(math.log(2 * math.pi * math.e), abs=1e-14)
        assert gaussian_entropy(np.eye(2)).value == pytest.approx(2.8378771, abs=1e-7)

    def test_matches_scipy(self):
        S = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 0.5]])
        assert gaussian_entropy(S).value == pytest.approx(stats.multivariate_normal(cov=S).entropy(), abs=1e-12)

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefinite):
            gaussian_entropy([[1.0, 2.0], [2.0, 1.0]])


class TestPlugin:
    def test_normal(self):
        x = normal_draws(100_000, 0)[:, 0]
        h = plugin_entropy(Normal().logpdf, x)
        assert h.method is Method.PLUGIN and h.n_samples == 100_000
        assert abs(h.value - H_STD_NORMAL) <= 3 * h.stderr

    def test_uniform_constant_integrand(self):
        x = StdNormalSampler(1, 0).uniforms(1000)[:, 0]
        h = plugin_entropy(lambda t: np.zeros_like(t), x)
        assert h.value == 0.0 and h.stderr == 0.0

    def test_exponential(self):
        x = monotone_1d_map({"kind": "exponential"})(normal_draws(100_000, 1))[:, 0]
        h = plugin_entropy(Exponential().logpdf, x)
        assert abs(h.value - 1.0) <= 3 * h.stderr

    def test_non_finite(self):
        with pytest.raises(NumericalDomain):
            plugin_entropy(Exponential().logpdf, np.array([1.0, -1.0]))


class TestKNN:
    def test_unit_ball(self):
        assert math.exp(log_unit_ball_volume(1)) == pytest.approx(2.0)
        assert math.exp(log_unit_ball_volume(2)) == pytest.approx(math.pi)
        assert math.exp(log_unit_ball_volume(3)) == pytest.approx(4 * math.pi / 3)

    def test_normal_1d(self):
        h = knn_entropy(normal_draws(20_000, 0), k=5)
        assert h.method is Method.KNN and h.n_samples == 20_000
        assert abs(h.value - 1.4189) <= 0.05

    def test_uniform_1d(self):
        h = knn_entropy(StdNormalSampler(1, 0).uniforms(20_000), k=5)
        assert abs(h.value) <= 0.05

    def test_normal_2d(self):
        h = knn_entropy(normal_draws(20_000, 0, dim=2), k=5)
        assert abs(h.value - 2.8379) <= 0.08

    def test_matches_brute_force(self):
        x = normal_draws(300, 4, dim=2)
        D = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
        np.fill_diagonal(D, np.inf)
        k, N, d = 3, 300, 2
        rho = np.sort(D, axis=1)[:, k - 1]
        from scipy.special import digamma

        expected = digamma(N) - digamma(k) + math.log(math.pi) + d * np.mean(np.log(rho))
        assert knn_entropy(x, k=k).value == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("a,b", [(2.0, 0.0), (0.1, 5.0), (7.5, -3.0)])
    def test_affine_law(self, a, b):
        x = normal_draws(5000, 2)
        h0 = knn_entropy(x)
        h1 = knn_entropy(a * x + b)
        assert abs((h1.value - h0.value) - math.log(a)) <= 2 * math.hypot(h0.stderr, h1.stderr)

    def test_consistency_trend(self):
        med = []
        for N in (1_000, 10_000, 100_000):
            errs = [abs(knn_entropy(normal_draws(N, seed)).value - H_STD_NORMAL) for seed in range(10)]
            med.append(float(np.median(errs)))
        assert med[0] >= med[1] >= med[2]

    def test_agrees_with_plugin_on_exponential(self):
        x = monotone_1d_map({"kind": "exponential"})(normal_draws(100_000, 3))[:, 0]
        hp = plugin_entropy(Exponential().logpdf, x)
        hk = knn_entropy(x)
        assert abs(hp.value - hk.value) <= 3 * math.hypot(hp.stderr, hk.stderr)

    def test_duplicates(self):
        x = np.repeat(normal_draws(100, 0)[:, 0], 2)
        with pytest.raises(DegenerateSample):
            knn_entropy(x, k=1)
        h = knn_entropy(x, k=1, jitter_seed=0)
        assert np.isfinite(h.value)

    def test_jitter_deterministic(self):
        x = np.repeat(normal_draws(50, 0)[:, 0], 3)
        assert knn_entropy(x, k=2, jitter_seed=1) == knn_entropy(x, k=2, jitter_seed=1)

    def test_bad_k(self):
        with pytest.raises(ParameterError):
            knn_entropy(normal_draws(5, 0), k=5)
        with pytest.raises(ParameterError):
            knn_entropy(normal_draws(5, 0), k=0)
