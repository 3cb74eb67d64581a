import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetmfgp.gp import (GpConfig, GpFitError, GpModel, KernelParams, Standardizer, _lml,
                        cross_val_r2, fit_gp, log_marginal_likelihood, matern52,
                        matern52_matrix)

# (1 + sqrt5 + 5/3) exp(-sqrt5), evaluated independently
MATERN_AT_ONE = 0.5239941088318203


def _k(r, s2=1.0):
    return s2 * (1 + math.sqrt(5) * r + 5 * r * r / 3) * math.exp(-math.sqrt(5) * r)


def _model(Z, u, params):
    d = np.asarray(Z).shape[1]
    return GpModel(np.asarray(Z, float), np.asarray(u, float), params, np.zeros(d), np.ones(d),
                   Standardizer(0.0, 1.0))


class TestKernel:
    def test_value_at_unit_distance(self):
        p = KernelParams(1.0, (1.0,))
        assert matern52([0.0], [1.0], p) == pytest.approx(MATERN_AT_ONE, abs=1e-15)

    def test_zero_distance_is_signal_variance(self):
        assert matern52([0.3, 0.2], [0.3, 0.2], KernelParams(2.5, (0.1, 0.4))) == 2.5

    def test_ard_scaling(self):
        p = KernelParams(1.0, (2.0, 0.5))
        assert matern52([0.0, 0.0], [2.0, 0.0], p) == pytest.approx(MATERN_AT_ONE)
        assert matern52([0.0, 0.0], [0.0, 0.5], p) == pytest.approx(MATERN_AT_ONE)

    def test_matrix_matches_scalar(self, rng):
        X = rng.random((5, 3))
        p = KernelParams(1.7, (0.3, 0.8, 1.1))
        K = matern52_matrix(X, X, p.lengthscales, p.signal_variance)
        for i in range(5):
            for j in range(5):
                assert K[i, j] == pytest.approx(matern52(X[i], X[j], p), rel=1e-10, abs=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(2, 15), seed=st.integers(0, 1000))
    def test_matrix_psd(self, n, seed):
        X = np.random.default_rng(seed).random((n, 2))
        K = matern52_matrix(X, X, (0.3, 0.5))
        assert np.allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() > -1e-10

    def test_params_validation(self):
        with pytest.raises(ValueError):
            KernelParams(0.0, (1.0,))
        with pytest.raises(ValueError):
            KernelParams(1.0, (-1.0,))
        assert KernelParams(1.0, (1.0,), 0.0).nugget == 1e-12


class TestPosterior:
    Z = np.array([[0.0], [0.5], [1.0]])
    u = np.array([1.0, -0.5, 0.25])
    params = KernelParams(1.3, (0.4,), 1e-6)

    def test_three_point_oracle(self):
        m = _model(self.Z, self.u, self.params)
        q = np.array([[0.2], [0.75]])
        s2, ls, nug = 1.3, 0.4, 1e-6
        K = np.array([[_k(abs(a - b) / ls, s2) for b in self.Z[:, 0]] for a in self.Z[:, 0]])
        K += nug * np.eye(3)
        Ks = np.array([[_k(abs(a - b) / ls, s2) for b in self.Z[:, 0]] for a in q[:, 0]])
        Kinv = np.linalg.inv(K)
        mean = Ks @ Kinv @ self.u
        var = s2 - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
        got_mean, got_var = m.predict_scaled(q)
        np.testing.assert_allclose(got_mean, mean, atol=1e-10)
        np.testing.assert_allclose(got_var, var, atol=1e-10)

    def test_two_point_lml_oracle(self):
        Z = np.array([[0.0], [0.3]])
        u = np.array([0.7, -0.2])
        p = KernelParams(0.9, (0.5,), 1e-3)
        a = 0.9 + 1e-3
        b = _k(0.3 / 0.5, 0.9)
        det = a * a - b * b
        quad = (a * u[0] ** 2 - 2 * b * u[0] * u[1] + a * u[1] ** 2) / det
        expected = -0.5 * quad - 0.5 * math.log(det) - math.log(2 * math.pi)
        assert log_marginal_likelihood(_model(Z, u, p)) == pytest.approx(expected, abs=1e-12)

    def test_lml_minus_inf_when_not_pd(self):
        # near-duplicate rows with a huge signal variance defeat the jitter ladder
        Z = np.array([[0.0], [1e-9], [2e-9]])
        assert _lml(Z, np.array([1.0, -1.0, 0.5]), KernelParams(1e18, (1.0,), 1e-12)) == -np.inf

    def test_interpolates_training_points(self):
        m = _model(self.Z, self.u, self.params)
        mean, _ = m.predict_scaled(self.Z)
        assert np.all(np.abs(mean - self.u) <= 3 * math.sqrt(self.params.nugget))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_variance_bounded_by_prior(self, seed):
        r = np.random.default_rng(seed)
        m = _model(r.random((6, 2)), r.standard_normal(6), KernelParams(2.0, (0.3, 0.6), 1e-8))
        _, var = m.predict_scaled(r.random((40, 2)))
        assert np.all(var >= 0) and np.all(var <= 2.0 + 1e-8)

    def test_mean_gradient_by_finite_difference(self, rng):
        m = _model(rng.random((8, 2)), rng.standard_normal(8), KernelParams(1.0, (0.3, 0.5)))
        q = rng.random((4, 2))
        _, g = m.mean_and_gradient_scaled(q)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (m.mean_scaled(q + e) - m.mean_scaled(q - e)) / (2 * h)
            np.testing.assert_allclose(g[:, j], fd, rtol=1e-5, atol=1e-7)

    def test_json_round_trip(self):
        m = _model(self.Z, self.u, self.params)
        back = GpModel.from_json(m.to_json())
        q = np.linspace(0, 1, 7)[:, None]
        assert np.array_equal(back.predict(q)[0], m.predict(q)[0])

    def test_wrong_query_dimension(self):
        with pytest.raises(ValueError):
            _model(self.Z, self.u, self.params).predict(np.zeros((2, 2)))


class TestFitting:
    def test_fit_recovers_smooth_function(self, rng):
        X = rng.random((25, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
        m = fit_gp(X, y, GpConfig(seed=1), input_bounds=([0, 0], [1, 1]))
        Xq = rng.random((50, 2))
        mean, _ = m.predict(Xq)
        truth = np.sin(3 * Xq[:, 0]) + Xq[:, 1] ** 2
        assert np.max(np.abs(mean - truth)) < 0.05

    def test_fit_deterministic(self, rng):
        X = rng.random((10, 2))
        y = X.sum(1)
        a = fit_gp(X, y, GpConfig(seed=3))
        b = fit_gp(X, y, GpConfig(seed=3))
        assert a.params == b.params

    def test_duplicates_dropped(self):
        X = np.array([[0.0], [0.5], [0.5], [1.0]])
        with pytest.warns(UserWarning, match="duplicate"):
            m = fit_gp(X, [0.0, 1.0, 1.0, 0.0], GpConfig(restarts=2))
        assert m.n == 3

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_gp([[0.0]], [1.0])

    def test_fixed_params_skip_search(self):
        p = KernelParams(1.0, (0.5,), 1e-6)
        m = fit_gp([[0.0], [1.0]], [0.0, 1.0], params=p)
        assert m.params == p

    def test_bad_params_raise_fit_error(self):
        Z = np.array([[0.0], [1e-9], [2e-9]])
        with pytest.raises(GpFitError, match="condition"):
            GpModel(Z, [1.0, 2.0, 3.0], KernelParams(1e18, (1.0,), 1e-12), [0.0], [1.0],
                    Standardizer(0.0, 1.0))

    def test_cross_validation(self, rng):
        X = rng.random((20, 2))
        assert cross_val_r2(X, X[:, 0] + 2 * X[:, 1], folds=5,
                            config=GpConfig(restarts=3)) > 0.99
