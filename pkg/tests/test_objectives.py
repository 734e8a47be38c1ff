"""Objective evaluations against closed forms and finite-difference oracles."""

import numpy as np
import pytest

from sharpmin import (
    FULL_BATCH,
    Batch,
    ConfigurationError,
    Landscape2D,
    MlpClassifier,
    Quadratic,
    Well,
    generate_blobs,
    two_scale_ridge,
)


def fd_gradient(spec, w, batch=FULL_BATCH, h=1e-6):
    """Independent central-difference gradient of the value."""
    g = np.zeros_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (spec.value(w + e, batch) - spec.value(w - e, batch)) / (2 * h)
    return g


@pytest.fixture(scope="module")
def blob_mlp():
    ds = generate_blobs(seed=7, n_per_class=10, d=2, classes=4, spread=1.0)
    return MlpClassifier([2, 8, 4], "tanh", ds)


class TestQuadratic:
    def test_value_closed_form(self):
        q = Quadratic(np.array([2.0, 0.5]))
        assert q.value(np.array([1.0, 0.0])) == 1.0
        assert q.value(np.zeros(2)) == 0.0

    def test_gradient_is_hw(self):
        q = Quadratic(np.array([2.0, 0.5]))
        np.testing.assert_array_equal(q.gradient(np.array([1.0, 1.0])), [2.0, 0.5])
        np.testing.assert_array_equal(q.gradient(np.zeros(2)), np.zeros(2))

    def test_hvp_exact(self):
        q = Quadratic(np.array([3.0, 1.0]))
        np.testing.assert_array_equal(
            q.hessian_vector_product(np.zeros(2), np.array([1.0, 0.0])), [3.0, 0.0]
        )
        np.testing.assert_array_equal(
            q.hessian_vector_product(np.zeros(2), np.array([1.0, 1.0])), [3.0, 1.0]
        )

    def test_hvp_rejects_zero_direction(self):
        q = Quadratic(np.array([3.0, 1.0]))
        with pytest.raises(ValueError):
            q.hessian_vector_product(np.zeros(2), np.zeros(2))

    def test_hvp_symmetry(self):
        # <Hu, v> == <u, Hv> for the exact matrix path; floating summation
        # order leaves ulp-level noise, bounded scale-aware.
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = int(rng.integers(2, 30))
            A = rng.standard_normal((d, d))
            q = Quadratic((A + A.T) / 2)
            u, v = rng.standard_normal(d), rng.standard_normal(d)
            a = float(q.hessian_vector_product(np.zeros(d), u) @ v)
            b = float(u @ q.hessian_vector_product(np.zeros(d), v))
            scale = np.abs(q.hessian_matrix()).max() * np.linalg.norm(u) * np.linalg.norm(v)
            assert abs(a - b) <= 1e-13 * scale

    def test_asymmetric_rejected(self):
        with pytest.raises(ConfigurationError):
            Quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_dimension_mismatch(self):
        q = Quadratic(np.array([2.0, 0.5]))
        with pytest.raises(ConfigurationError):
            q.value(np.zeros(3))


class TestLandscape2D:
    def test_default_has_distinct_minima(self):
        surface = two_scale_ridge()
        assert len(surface.minima) >= 2
        sigmas = sorted(s for _, s in surface.minima)
        assert sigmas[-1] / sigmas[0] > 2.0  # clearly sharp vs flat

    def test_needs_two_wells(self):
        with pytest.raises(ConfigurationError):
            Landscape2D([Well((0.0, 0.0), 1.0, 0.5)])

    def test_needs_distinct_widths(self):
        wells = [Well((0.0, 0.0), 1.0, 0.5), Well((2.0, 0.0), 1.0, 0.5)]
        with pytest.raises(ConfigurationError):
            Landscape2D(wells)

    def test_value_matches_formula(self):
        surface = Landscape2D(
            [Well((0.0, 0.0), 1.0, 0.5), Well((2.0, 0.0), 0.5, 1.5)],
            tilt=0.1,
            validate=False,
        )
        w = np.array([0.3, -0.4])
        expected = 0.1 * w[0]
        for c, d, s in [((0.0, 0.0), 1.0, 0.5), ((2.0, 0.0), 0.5, 1.5)]:
            r2 = (w[0] - c[0]) ** 2 + (w[1] - c[1]) ** 2
            expected -= d * np.exp(-r2 / (2 * s * s))
        assert surface.value(w) == pytest.approx(expected, rel=1e-15)

    def test_hessian_matrix_matches_fd(self):
        surface = two_scale_ridge()
        rng = np.random.default_rng(3)
        for _ in range(5):
            w = rng.uniform(-2, 2, size=2)
            H = surface.hessian_matrix(w)
            h = 1e-5
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                col = (surface.gradient(w + e) - surface.gradient(w - e)) / (2 * h)
                np.testing.assert_allclose(H[:, j], col, rtol=1e-5, atol=1e-8)


class TestMlp:
    def test_uniform_softmax_loss(self):
        ds = generate_blobs(seed=3, n_per_class=5, d=3, classes=4, spread=1.0)
        mlp = MlpClassifier([3, 6, 4], "tanh", ds)
        w = mlp.init_params(np.random.default_rng(0))
        # zero out the final layer: logits collapse to 0, softmax is uniform
        n_tail = 6 * 4 + 4
        w[-n_tail:] = 0.0
        assert mlp.value(w) == pytest.approx(np.log(4.0), rel=1e-12)

    def test_layer_dataset_consistency_checked(self):
        ds = generate_blobs(seed=3, n_per_class=5, d=3, classes=4, spread=1.0)
        with pytest.raises(ConfigurationError):
            MlpClassifier([2, 6, 4], "tanh", ds)
        with pytest.raises(ConfigurationError):
            MlpClassifier([3, 6, 5], "tanh", ds)

    def test_batch_indices_validated(self, blob_mlp):
        w = blob_mlp.init_params(np.random.default_rng(1))
        with pytest.raises(ConfigurationError):
            blob_mlp.value(w, Batch((0, 99)))

    def test_value_and_gradient_match_separate_calls(self, blob_mlp):
        w = blob_mlp.init_params(np.random.default_rng(2))
        batch = Batch(tuple(range(0, 20, 2)))
        f, g = blob_mlp.value_and_gradient(w, batch)
        assert f == blob_mlp.value(w, batch)
        np.testing.assert_array_equal(g, blob_mlp.gradient(w, batch))


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_mlp_gradient_against_finite_differences(activation):
    ds = generate_blobs(seed=7, n_per_class=10, d=2, classes=4, spread=1.0)
    mlp = MlpClassifier([2, 8, 4], activation, ds)
    rng = np.random.default_rng(5)
    for _ in range(20):
        w = mlp.init_params(rng) * rng.uniform(0.5, 2.0)
        g = mlp.gradient(w)
        g_fd = fd_gradient(mlp, w)
        assert np.linalg.norm(g - g_fd) <= 1e-5 * np.linalg.norm(g)


def test_landscape_gradient_against_finite_differences():
    surface = two_scale_ridge()
    rng = np.random.default_rng(6)
    for _ in range(20):
        w = rng.uniform(-2.5, 2.5, size=2)
        g = surface.gradient(w)
        g_fd = fd_gradient(surface, w)
        assert np.linalg.norm(g - g_fd) <= 1e-5 * max(np.linalg.norm(g), 1e-9)


def test_quadratic_gradient_against_finite_differences():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((6, 6))
    q = Quadratic((A + A.T) / 2)
    for _ in range(20):
        w = rng.standard_normal(6)
        g = q.gradient(w)
        g_fd = fd_gradient(q, w)
        assert np.linalg.norm(g - g_fd) <= 1e-5 * np.linalg.norm(g)


def test_directional_derivative_consistency(blob_mlp):
    """<grad, u> vs symmetric difference quotient along 50 random (w, u)."""
    rng = np.random.default_rng(8)
    surface = two_scale_ridge()
    eps = 1e-6
    for spec, draw in [
        (blob_mlp, lambda: blob_mlp.init_params(rng)),
        (surface, lambda: rng.uniform(-2, 2, size=2)),
    ]:
        for _ in range(25):
            w = draw()
            u = rng.standard_normal(spec.dim)
            u /= np.linalg.norm(u)
            lhs = (spec.value(w + eps * u) - spec.value(w - eps * u)) / (2 * eps)
            rhs = float(spec.gradient(w) @ u)
            assert lhs == pytest.approx(rhs, rel=1e-4, abs=1e-9)


def test_mlp_hvp_two_step_richardson(blob_mlp):
    """FD Hessian-vector products at step h and h/2 agree to 1e-3."""
    rng = np.random.default_rng(9)
    w = blob_mlp.init_params(rng)
    for _ in range(5):
        v = rng.standard_normal(blob_mlp.dim)
        hv1 = blob_mlp.hessian_vector_product(w, v, fd_step=1e-5)
        hv2 = blob_mlp.hessian_vector_product(w, v, fd_step=5e-6)
        assert np.linalg.norm(hv1 - hv2) <= 1e-3 * np.linalg.norm(hv2)


def test_evaluation_is_deterministic(blob_mlp):
    w = blob_mlp.init_params(np.random.default_rng(10))
    batch = Batch(tuple(range(7)))
    assert blob_mlp.value(w, batch) == blob_mlp.value(w, batch)
    np.testing.assert_array_equal(blob_mlp.gradient(w, batch), blob_mlp.gradient(w, batch))
    surface = two_scale_ridge()
    p = np.array([0.3, 0.7])
    assert surface.value(p) == surface.value(p)
