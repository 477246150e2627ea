import math

import numpy as np
import pytest

from lfiengine import gp
from lfiengine.errors import DimensionMismatchError
from lfiengine.rng import rng_stream

HYP = gp.GpHyper(signal_var=2.0, lengthscales=(0.7, 1.3), noise_var=0.05,
                 mean_const=0.4)


def _training_set(n=20, d=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, d))
    y = np.sin(X[:, 0]) + 0.3 * X[:, min(1, d - 1)] + 0.05 * rng.normal(size=n)
    return X, y


# -- kernel -------------------------------------------------------------------

def test_kernel_diagonal_and_symmetry():
    x = np.array([0.3, -1.0])
    z = np.array([1.1, 0.4])
    assert gp.kernel(x, x, HYP) == pytest.approx(2.0)
    assert gp.kernel(x, z, HYP) == gp.kernel(z, x, HYP)
    assert 0 < gp.kernel(x, z, HYP) < 2.0


def test_kernel_hand_value():
    h = gp.GpHyper(1.5, (2.0,), 0.0)
    # k = 1.5 * exp(-0.5 * (1/2)^2)
    assert gp.kernel([0.0], [1.0], h) == pytest.approx(1.5 * math.exp(-0.125))


def test_kernel_anisotropy():
    # moving one unit along the short lengthscale decays faster
    near = gp.kernel([0, 0], [1, 0], HYP)      # lengthscale 0.7
    far = gp.kernel([0, 0], [0, 1], HYP)       # lengthscale 1.3
    assert near < far


def test_kernel_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        gp.kernel([0.0], [0.0, 1.0], HYP)
    with pytest.raises(DimensionMismatchError):
        gp.kernel([0.0], [1.0], HYP)           # 1d point, 2 lengthscales


# -- fit ----------------------------------------------------------------------

def test_fit_factorization_reconstructs_kernel():
    X, y = _training_set()
    model = gp.gp_fit(X, y, HYP)
    K = gp._kernel_matrix(X, X, HYP) + HYP.noise_var * np.eye(20)
    assert np.allclose(model.chol @ model.chol.T, K, atol=1e-10)
    assert np.allclose(K @ model.alpha, y - HYP.mean_const, atol=1e-9)


def test_fit_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        gp.gp_fit(np.zeros((3, 2)), np.zeros(4), HYP)


def test_fit_duplicate_inputs_survive_via_jitter():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    h = gp.GpHyper(1.0, (1.0, 1.0), 0.0)
    model = gp.gp_fit(X, [1.0, 1.0, 2.0], h)
    mu, _ = gp.gp_predict(model, [1.0, 1.0])
    assert mu == pytest.approx(2.0, abs=1e-3)


def test_cholesky_pivot_reported():
    L, pivot = gp._cholesky_with_pivot(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert L is None and pivot == 1
    L, pivot = gp._cholesky_with_pivot(np.array([[-1.0]]))
    assert L is None and pivot == 0


# -- prediction against a dense-solve oracle ---------------------------------

def test_predict_matches_dense_oracle():
    X, y = _training_set(25)
    model = gp.gp_fit(X, y, HYP)
    K = gp._kernel_matrix(X, X, HYP) + HYP.noise_var * np.eye(25)
    Kinv = np.linalg.inv(K)
    rng = np.random.default_rng(9)
    Xs = rng.uniform(-3, 3, size=(100, 2))
    mu, var = gp.gp_predict_many(model, Xs)
    for i in range(100):
        ks = np.array([gp.kernel(xr, Xs[i], HYP) for xr in X])
        mu_o = HYP.mean_const + ks @ Kinv @ (y - HYP.mean_const)
        var_o = HYP.signal_var - ks @ Kinv @ ks
        assert mu[i] == pytest.approx(mu_o, abs=1e-8)
        assert var[i] == pytest.approx(var_o, abs=1e-8)


def test_noise_free_gp_interpolates():
    X, y = _training_set(12)
    h = gp.GpHyper(2.0, (0.7, 1.3), 1e-10, mean_const=float(np.mean(y)))
    model = gp.gp_fit(X, y, h)
    mu, var = gp.gp_predict_many(model, X)
    assert np.allclose(mu, y, atol=1e-4)
    assert np.all(var < 1e-4)


def test_empty_model_prior_predictive():
    model = gp.gp_fit(np.zeros((0, 2)), [], HYP)
    mu, var = gp.gp_predict(model, [5.0, -3.0])
    assert mu == HYP.mean_const
    assert var == HYP.signal_var


def test_variance_never_negative():
    X, y = _training_set(30)
    model = gp.gp_fit(X, y, HYP)
    _, var = gp.gp_predict_many(model, X)
    assert np.all(var >= 0.0)


def test_translation_equivariance():
    X, y = _training_set(15)
    shift = np.array([3.7, -2.2])
    a = gp.gp_predict_many(gp.gp_fit(X, y, HYP), X[:5] + 0.1)
    b = gp.gp_predict_many(gp.gp_fit(X + shift, y, HYP), X[:5] + 0.1 + shift)
    assert np.allclose(a[0], b[0], atol=1e-10)
    assert np.allclose(a[1], b[1], atol=1e-10)


def test_predict_gradient_matches_finite_differences():
    X, y = _training_set(18)
    model = gp.gp_fit(X, y, HYP)
    xs = np.array([0.4, -0.9])
    mu, var, dmu, dvar = gp.gp_predict_gradient(model, xs)
    mu0, var0 = gp.gp_predict(model, xs)
    assert mu == pytest.approx(mu0, abs=1e-12)
    assert var == pytest.approx(var0, abs=1e-12)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        mp, vp = gp.gp_predict(model, xs + e)
        mm, vm = gp.gp_predict(model, xs - e)
        assert dmu[d] == pytest.approx((mp - mm) / (2 * h), rel=1e-4, abs=1e-6)
        assert dvar[d] == pytest.approx((vp - vm) / (2 * h), rel=1e-4, abs=1e-6)


# -- marginal likelihood ------------------------------------------------------

def test_log_marginal_single_point_closed_form():
    h = gp.GpHyper(1.3, (0.8,), 0.2, mean_const=0.5)
    model = gp.gp_fit([[0.0]], [2.0], h)
    v, _ = gp.log_marginal(model)
    s2 = 1.3 + 0.2
    expect = -0.5 * (2.0 - 0.5) ** 2 / s2 - 0.5 * math.log(s2) \
        - 0.5 * math.log(2 * math.pi)
    assert v == pytest.approx(expect, rel=1e-12)


def test_log_marginal_gradient_matches_finite_differences():
    X, y = _training_set(14)
    m = float(np.mean(y))
    v0 = HYP.log_vector()
    _, grad = gp.log_marginal(gp.gp_fit(X, y, gp.GpHyper.from_log_vector(v0, m)))
    h = 1e-5
    for k in range(v0.size):
        e = np.zeros(v0.size)
        e[k] = h
        fp, _ = gp.log_marginal(gp.gp_fit(X, y, gp.GpHyper.from_log_vector(v0 + e, m)))
        fm, _ = gp.log_marginal(gp.gp_fit(X, y, gp.GpHyper.from_log_vector(v0 - e, m)))
        assert grad[k] == pytest.approx((fp - fm) / (2 * h), rel=1e-4, abs=1e-7)


# -- optimizer ----------------------------------------------------------------

def test_maximize_box_quadratic():
    fg = lambda x: (-(x[0] - 2.0) ** 2, np.array([-2.0 * (x[0] - 2.0)]))
    x, f = gp.maximize_box(fg, np.array([0.0]), np.array([-5.0]), np.array([5.0]))
    assert x[0] == pytest.approx(2.0, abs=1e-6)
    x, _ = gp.maximize_box(fg, np.array([0.0]), np.array([-5.0]), np.array([1.0]))
    assert x[0] == pytest.approx(1.0)   # clamps at the active bound


def test_optimize_hyper_deterministic():
    X, y = _training_set(20)
    a = gp.optimize_hyper(X, y, stream=rng_stream(3, 0, "h"))
    b = gp.optimize_hyper(X, y, stream=rng_stream(3, 0, "h"))
    assert a == b


def test_optimize_hyper_recovers_scales_within_factor_two():
    truth = gp.GpHyper(1.0, (0.5, 2.0), 0.01)
    rng = np.random.default_rng(11)
    X = rng.uniform(-3, 3, size=(120, 2))
    K = gp._kernel_matrix(X, X, truth) + truth.noise_var * np.eye(120)
    y = np.linalg.cholesky(K) @ rng.normal(size=120)
    est = gp.optimize_hyper(X, y, stream=rng_stream(5, 0, "h"), restarts=8)
    for got, want in zip(est.lengthscales, truth.lengthscales):
        assert want / 2 <= got <= want * 2
