"""Likelihood-free inference engine: declarative DAGs of priors,
simulators, summaries and distances, evaluated in deterministic parallel
batches, with rejection ABC, SMC-ABC and GP-surrogate Bayesian
optimization on top."""

__version__ = "0.1.0"

from .graph import (               # noqa: F401
    CompiledGraph,
    GraphSpec,
    NodeSpec,
    add_node,
    compile_graph,
    replace_node,
    subgraph_digest,
    topo_order,
    validate,
)
from .executor import Batch, generate, parallel_run, run_batch     # noqa: F401
from .rng import RngStream, rng_stream                             # noqa: F401
from .results import InferenceResult                               # noqa: F401
from .rejection import sample_rejection, threshold_from_quantile   # noqa: F401
from .smc import Population, sample_smc                            # noqa: F401
from .bolfi import BolfiPosterior, fit_bolfi, posterior_logpdf, sample_posterior  # noqa: F401
from .store import Store, StoreKey                                 # noqa: F401
from .external import ExternalCommand, invoke_external             # noqa: F401
from .modelfile import parse_model                                 # noqa: F401
