import os

import numpy as np
import pytest

import lfiengine as lfi
from lfiengine.components import simulate_gaussian, simulate_ma2
from lfiengine.rng import rng_stream

MODELS_DIR = os.path.join(os.path.dirname(__file__), "..", "models")


def build_ma2_graph(n_obs=100, observed_seed=20170817, true_params=(0.6, 0.2)):
    g = lfi.GraphSpec()
    g = lfi.add_node(g, lfi.NodeSpec("t1", "prior", "uniform", args=(0, 2)))
    g = lfi.add_node(g, lfi.NodeSpec("t2", "prior", "uniform", args=(-1, 1)))
    g = lfi.add_node(g, lfi.NodeSpec("sim", "simulator", "ma2", parents=("t1", "t2"),
                                     args=(n_obs,), vectorized=True))
    g = lfi.add_node(g, lfi.NodeSpec("s1", "summary", "autocov", parents=("sim",), args=(1,)))
    g = lfi.add_node(g, lfi.NodeSpec("s2", "summary", "autocov", parents=("sim",), args=(2,)))
    g = lfi.add_node(g, lfi.NodeSpec("d", "distance", "minkowski", parents=("s1", "s2"),
                                     args=(2,)))
    obs = simulate_ma2(*true_params, n_obs, rng_stream(observed_seed, 0, "observed"))
    return g.with_observed("sim", obs)


def build_gauss_graph(n_obs=30, observed_seed=777, true_mu=2.0, prior_sd=10.0):
    g = lfi.GraphSpec()
    g = lfi.add_node(g, lfi.NodeSpec("mu", "prior", "normal", args=(0, prior_sd)))
    g = lfi.add_node(g, lfi.NodeSpec("sim", "simulator", "gaussian", parents=("mu",),
                                     args=(1.0, n_obs), vectorized=True))
    g = lfi.add_node(g, lfi.NodeSpec("m", "summary", "mean", parents=("sim",)))
    g = lfi.add_node(g, lfi.NodeSpec("d", "distance", "minkowski", parents=("m",), args=(2,)))
    obs = simulate_gaussian(true_mu, 1.0, n_obs, rng_stream(observed_seed, 0, "obs"))
    return g.with_observed("sim", obs)


def conjugate_posterior(observed, sigma=1.0, prior_mean=0.0, prior_sd=10.0):
    """Exact normal-normal posterior of the mean given n i.i.d. observations."""
    y = np.asarray(observed)
    n = y.size
    prec = n / sigma**2 + 1.0 / prior_sd**2
    mean = (y.mean() * n / sigma**2 + prior_mean / prior_sd**2) / prec
    return mean, np.sqrt(1.0 / prec)


@pytest.fixture(scope="session")
def ma2_graph():
    return build_ma2_graph()


@pytest.fixture(scope="session")
def ma2_cg(ma2_graph):
    return lfi.compile_graph(ma2_graph)


@pytest.fixture(scope="session")
def gauss_graph():
    return build_gauss_graph()


@pytest.fixture(scope="session")
def gauss_cg(gauss_graph):
    return lfi.compile_graph(gauss_graph)
