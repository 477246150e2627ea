import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lfiengine import components as comp
from lfiengine.errors import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidParamsError,
    LagTooLargeError,
)
from lfiengine.rng import rng_stream


# -- MA(2) ------------------------------------------------------------------

def test_ma2_zero_coefficients_is_white_noise():
    s = rng_stream(1, 0, "w")
    w = s.normal(12)
    y = comp.simulate_ma2(0.0, 0.0, 10, rng_stream(1, 0, "w"))
    assert np.array_equal(y, w[2:])


def test_ma2_deterministic():
    a = comp.simulate_ma2(0.6, 0.2, 50, rng_stream(4, 2, "sim"))
    b = comp.simulate_ma2(0.6, 0.2, 50, rng_stream(4, 2, "sim"))
    assert a.tobytes() == b.tobytes()


def test_ma2_lag1_autocovariance_analytic():
    # gamma_1 = t1 + t1*t2 for the standard MA(2) with unit innovations
    y = comp.simulate_ma2(0.6, 0.2, 10**5, rng_stream(7, 0, "sim"))
    gamma1 = comp.summary_autocov(y, 1)
    assert gamma1 == pytest.approx(0.6 + 0.6 * 0.2, abs=0.03)


def test_ma2_too_short():
    with pytest.raises(InvalidParamsError):
        comp.simulate_ma2(0.5, 0.5, 2, rng_stream(1, 0, "s"))


def test_ma2_batch_matches_elementwise():
    t1 = np.array([0.1, 0.9, 1.5])
    t2 = np.array([-0.5, 0.0, 0.7])
    batch = comp._simulate_ma2_batch(t1, t2, 20, rng_stream(3, 5, "sim"), 3)
    s = rng_stream(3, 5, "sim")
    for i in range(3):
        assert np.array_equal(batch[i], comp.simulate_ma2(t1[i], t2[i], 20, s))


# -- Gaussian ---------------------------------------------------------------

def test_gaussian_affine_in_parameters():
    z = comp.simulate_gaussian(0.0, 1.0, 40, rng_stream(2, 0, "g"))
    y = comp.simulate_gaussian(3.0, 2.0, 40, rng_stream(2, 0, "g"))
    assert np.allclose(y, 3.0 + 2.0 * z, rtol=1e-12)


def test_gaussian_sample_variance():
    y = comp.simulate_gaussian(0.0, 1.0, 10**5, rng_stream(5, 0, "g"))
    assert np.var(y, ddof=1) == pytest.approx(1.0, rel=0.02)


def test_gaussian_invalid_sigma():
    with pytest.raises(InvalidParamsError):
        comp.simulate_gaussian(0.0, 0.0, 10, rng_stream(1, 0, "g"))


# -- summaries --------------------------------------------------------------

def test_mean_and_variance_basics():
    assert comp.summary_mean([1, 2, 3]) == 2.0
    assert comp.summary_variance([4.0, 4.0, 4.0]) == 0.0
    with pytest.raises(EmptyInputError):
        comp.summary_mean([])
    with pytest.raises(EmptyInputError):
        comp.summary_variance([1.0])


def test_variance_against_two_pass_oracle():
    rng = np.random.default_rng(0)
    y = rng.normal(5, 3, size=1000)
    m = sum(y) / len(y)
    two_pass = sum((v - m) ** 2 for v in y) / (len(y) - 1)
    assert comp.summary_variance(y) == pytest.approx(two_pass, rel=1e-12)


def test_autocov_fixed_values():
    assert comp.summary_autocov(np.zeros(10), 1) == 0.0
    assert comp.summary_autocov([1, 1, 1, 1], 1) == pytest.approx(3 / 4)
    assert comp.summary_autocov([1, -1, 1, -1], 1) == pytest.approx(-3 / 4)


def test_autocov_lag_too_large():
    with pytest.raises(LagTooLargeError):
        comp.summary_autocov([1.0, 2.0], 2)


def test_autocov_lag0_of_standardized_series():
    z = rng_stream(8, 0, "z").normal(10**5)
    assert comp.summary_autocov(z, 0) == pytest.approx(1.0, abs=0.03)


def test_summaries_are_pure():
    y = rng_stream(1, 0, "y").normal(100)
    assert comp.summary_autocov(y, 3) == comp.summary_autocov(y.copy(), 3)


# -- distances --------------------------------------------------------------

def test_distance_fixed_values():
    assert comp.minkowski_distance([0, 0], [3, 4], 2) == pytest.approx(5.0)
    assert comp.minkowski_distance([1, 2], [1, 2], 2) == 0.0
    assert comp.minkowski_distance([1, 2], [2, 4], 1) == pytest.approx(3.0)


def test_distance_errors():
    with pytest.raises(DimensionMismatchError):
        comp.minkowski_distance([1], [1, 2], 2)
    with pytest.raises(InvalidParamsError):
        comp.minkowski_distance([1], [2], 0.5)
    with pytest.raises(DimensionMismatchError):
        comp.weighted_euclidean_distance([1, 2], [1, 2], [1.0])


def test_weighted_euclidean_value():
    assert comp.weighted_euclidean_distance([0, 0], [1, 2], [4, 1]) == pytest.approx(
        np.sqrt(4 * 1 + 1 * 4))


_vec = arrays(np.float64, 4, elements=st.floats(-100, 100))


@settings(max_examples=100, deadline=None)
@given(_vec, _vec, _vec, st.floats(1.0, 5.0))
def test_minkowski_metric_properties(x, y, z, p):
    d = lambda a, b: comp.minkowski_distance(a, b, p)
    assert d(x, y) == pytest.approx(d(y, x), rel=1e-9, abs=1e-12)
    assert d(x, y) >= 0
    assert d(x, x) == 0
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-9
