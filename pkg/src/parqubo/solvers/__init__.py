"""Sampler backends: exhaustive enumeration, simulated annealing, remote service."""

import numba

# skip the TBB probe (too old on many hosts); OpenMP is thread-safe for
# concurrent kernel launches from server threads
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

from .exact import MAX_DIMENSION, solve_exact
from .remote import make_server, solve_remote
from .sa import SaSchedule, solve_sa, warmup
from .sampleset import Backend, SampleSet, Timing

__all__ = [
    "Backend",
    "MAX_DIMENSION",
    "SaSchedule",
    "SampleSet",
    "Timing",
    "make_server",
    "solve_exact",
    "solve_remote",
    "solve_sa",
    "warmup",
]
