import math

import numpy as np
import pytest

from lfiengine import distributions as dist
from lfiengine.errors import DimensionMismatchError, InvalidParamsError
from lfiengine.rng import rng_stream


def test_uniform_support():
    u = dist.sample(dist.uniform(0, 2), rng_stream(1, 0, "u"), 1000)
    assert np.all((u >= 0) & (u < 2))


def test_uniform_invalid():
    with pytest.raises(InvalidParamsError):
        dist.sample(dist.uniform(1, 1), rng_stream(1, 0, "u"), 1)


def test_normal_clt_bound():
    z = dist.sample(dist.normal(0, 1), rng_stream(2, 0, "z"), 10**5)
    assert abs(z.mean()) < 0.02        # 4 / sqrt(n) with n = 1e5 gives 0.0126


def test_normal_invalid_sigma():
    with pytest.raises(InvalidParamsError):
        dist.sample(dist.normal(0, 0), rng_stream(1, 0, "z"), 1)


def test_mvn_shapes_and_moments():
    mean = [1.0, -2.0]
    cov = [[2.0, 0.6], [0.6, 1.0]]
    x = dist.sample(dist.multivariate_normal(mean, cov), rng_stream(3, 0, "m"), 50_000)
    assert x.shape == (50_000, 2)
    assert np.allclose(x.mean(axis=0), mean, atol=0.05)
    assert np.allclose(np.cov(x.T), cov, atol=0.05)


def test_mvn_not_pd():
    with pytest.raises(InvalidParamsError):
        dist.sample(dist.multivariate_normal([0, 0], [[1, 2], [2, 1]]),
                    rng_stream(1, 0, "m"), 1)


def test_log_density_uniform_values():
    spec = dist.uniform(0, 2)
    assert dist.log_density(spec, 1.0) == pytest.approx(math.log(0.5))
    assert dist.log_density(spec, 3.0) == -math.inf
    assert dist.log_density(spec, 0.0) == pytest.approx(math.log(0.5))  # half-open [a, b)
    assert dist.log_density(spec, 2.0) == -math.inf


def test_log_density_normal_at_zero():
    assert dist.log_density(dist.normal(0, 1), 0.0) == pytest.approx(
        -0.5 * math.log(2 * math.pi))


def test_log_density_mvn_dimension_mismatch():
    spec = dist.multivariate_normal([0, 0], [[1, 0], [0, 1]])
    with pytest.raises(DimensionMismatchError):
        dist.log_density(spec, [0, 0, 0])


@pytest.mark.parametrize("spec,lo,hi", [
    (dist.uniform(-1, 3), -1.5, 3.5),
    (dist.normal(0.5, 2.0), -20, 21),
])
def test_density_integrates_to_one(spec, lo, hi):
    xs = np.linspace(lo, hi, 400_001)
    pdf = np.array([math.exp(dist.log_density(spec, x)) for x in xs[::100]])
    xs = xs[::100]
    integral = np.trapezoid(pdf, xs)
    assert integral == pytest.approx(1.0, abs=1e-6)


def test_sample_counter_budget_matches_documentation():
    s = rng_stream(5, 0, "b")
    dist.sample(dist.uniform(0, 1), s, 7)
    assert s.counter == 7
    dist.sample(dist.normal(0, 1), s, 7)
    assert s.counter == 14
    dist.sample(dist.multivariate_normal([0, 0, 0], np.eye(3)), s, 5)
    assert s.counter == 14 + 15        # d blocks per MVN draw


def test_sample_determinism():
    a = dist.sample(dist.normal(1, 2), rng_stream(6, 1, "x"), 50)
    b = dist.sample(dist.normal(1, 2), rng_stream(6, 1, "x"), 50)
    assert a.tobytes() == b.tobytes()
