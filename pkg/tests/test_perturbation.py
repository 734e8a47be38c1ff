"""Adversarial point, surrogate gap, and the eigenvector-ball estimator."""

import numpy as np
import pytest

from sharpmin import (
    MlpClassifier,
    PerturbationConfig,
    Quadratic,
    StationarityError,
    adversarial_point,
    gap_at_minimum,
    generate_blobs,
    perturbed_loss,
    sigma_from_gap,
    surrogate_gap,
    two_scale_ridge,
)


class TestAdversarialPoint:
    def test_unit_norm_direction(self):
        w = np.zeros(2)
        g = np.array([3.0, 4.0])
        out = adversarial_point(w, g, PerturbationConfig(rho=1.0))
        np.testing.assert_allclose(out, [0.6, 0.8], rtol=1e-10)

    def test_zero_radius(self):
        w = np.array([1.0, -2.0])
        out = adversarial_point(w, np.array([5.0, 1.0]), PerturbationConfig(rho=0.0))
        np.testing.assert_array_equal(out, w)

    def test_zero_gradient_guard(self):
        w = np.array([1.0, -2.0])
        out = adversarial_point(w, np.zeros(2), PerturbationConfig(rho=3.0))
        np.testing.assert_array_equal(out, w)

    def test_continuous_as_gradient_vanishes(self):
        # offset norm <= rho * ||g|| / epsilon -> 0
        w = np.zeros(2)
        for scale in [1e-10, 1e-13, 1e-16]:
            g = np.array([scale, 0.0])
            out = adversarial_point(w, g, PerturbationConfig(rho=0.5))
            assert np.linalg.norm(out - w) <= 0.5 * scale / 1e-12 + 1e-300


class TestPerturbedLoss:
    def test_quadratic_closed_form(self):
        q = Quadratic(np.array([2.0, 0.5]))
        w = np.array([1.0, 0.0])
        # gradient (2, 0), ascent along +x: f((1.1, 0)) = 1.21
        fp = perturbed_loss(q, w, PerturbationConfig(rho=0.1))
        assert fp == pytest.approx(1.21, rel=1e-9)

    def test_stationary_point_collapses_to_f(self):
        q = Quadratic(np.array([2.0, 0.5]))
        w = np.zeros(2)
        assert perturbed_loss(q, w, PerturbationConfig(rho=0.3)) == q.value(w)

    def test_zero_rho(self):
        q = Quadratic(np.array([2.0, 0.5]))
        w = np.array([0.4, -1.0])
        assert perturbed_loss(q, w, PerturbationConfig(rho=0.0)) == q.value(w)


class TestSurrogateGap:
    def test_quadratic_value(self):
        q = Quadratic(np.array([2.0, 0.5]))
        est = surrogate_gap(q, np.array([1.0, 0.0]), PerturbationConfig(rho=0.1))
        assert est.h == pytest.approx(0.21, rel=1e-9)
        assert est.h == est.f_at_adv - est.f_at_w
        assert est.mode == "ascent_direction"

    def test_zero_rho_gap_is_zero(self):
        q = Quadratic(np.array([2.0, 0.5]))
        est = surrogate_gap(q, np.array([0.3, 0.8]), PerturbationConfig(rho=0.0))
        assert est.h == 0.0

    def test_nonnegative_over_random_sweep(self):
        """Ascent-direction gap stays >= -1e-9 for small rho (100 probes)."""
        rng = np.random.default_rng(123)
        ds = generate_blobs(seed=7, n_per_class=10, d=2, classes=4, spread=1.0)
        mlp = MlpClassifier([2, 8, 4], "tanh", ds)
        surface = two_scale_ridge()
        B = rng.standard_normal((6, 6))
        indefinite = Quadratic((B + B.T) / 2)
        probes = [
            (indefinite, lambda: rng.standard_normal(6)),
            (surface, lambda: rng.uniform(-2.5, 2.5, 2)),
            (mlp, lambda: mlp.init_params(rng) * rng.uniform(0.3, 2.0)),
        ]
        for spec, draw in probes:
            for _ in range(34):
                cfg = PerturbationConfig(rho=rng.uniform(0, 1e-2))
                assert surrogate_gap(spec, draw(), cfg).h >= -1e-9

    def test_monotone_in_rho_on_quadratic(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((5, 5))
        q = Quadratic(A @ A.T / 5)  # convex: gap growth in rho is exact
        w = rng.standard_normal(5)
        gaps = [
            surrogate_gap(q, w, PerturbationConfig(rho=r)).h
            for r in [0.001, 0.003, 0.01, 0.03, 0.1]
        ]
        assert all(a <= b for a, b in zip(gaps, gaps[1:]))


class TestGapAtMinimum:
    def test_quadratic_ball_gap(self):
        q = Quadratic(np.array([2.0, 0.5]))
        est = gap_at_minimum(q, np.zeros(2), PerturbationConfig(rho=0.1))
        assert est.h == pytest.approx(0.01, rel=1e-9)
        assert est.mode == "eigvec_ball"
        assert sigma_from_gap(est.h, 0.1) == pytest.approx(2.0, rel=1e-8)

    def test_isotropic_case(self):
        c = 1.7
        q = Quadratic(c * np.ones(4))
        est = gap_at_minimum(q, np.zeros(4), PerturbationConfig(rho=0.05))
        assert est.h == pytest.approx(0.5 * c * 0.05**2, rel=1e-12)

    def test_rejects_nonstationary_point(self):
        q = Quadratic(np.array([2.0, 0.5]))
        with pytest.raises(StationarityError):
            gap_at_minimum(q, np.array([1.0, 0.0]), PerturbationConfig(rho=0.1))

    def test_lemma_exactness_on_psd_quadratics(self):
        """2h/rho^2 recovers sigma_max to 1e-6 relative with converged power iteration."""
        rng = np.random.default_rng(9)
        for trial in range(10):
            d = int(rng.integers(3, 20))
            eigs = np.sort(rng.uniform(0.5, 4.0, size=d))
            eigs[-1] = max(eigs[-1], 1.2 * eigs[-2])  # enforce spectral gap
            basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
            q = Quadratic(basis @ np.diag(eigs) @ basis.T)
            est = gap_at_minimum(q, np.zeros(d), PerturbationConfig(rho=1e-2), seed=trial)
            sigma = sigma_from_gap(est.h, 1e-2)
            assert abs(sigma - q.sigma_max()) <= 1e-6 * q.sigma_max()


class TestSigmaFromGap:
    def test_values(self):
        assert sigma_from_gap(0.01, 0.1) == pytest.approx(2.0)
        assert sigma_from_gap(0.0, 0.3) == 0.0

    def test_algebraic_inverse(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            sigma, rho = rng.uniform(0.1, 10.0), rng.uniform(0.01, 1.0)
            assert sigma_from_gap(0.5 * sigma * rho**2, rho) == pytest.approx(sigma, rel=1e-12)

    def test_zero_rho_rejected(self):
        with pytest.raises(ValueError):
            sigma_from_gap(0.1, 0.0)
