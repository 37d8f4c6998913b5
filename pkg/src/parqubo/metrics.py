"""Solution quality, violation error, time-to-solution and run-to-run spread."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import InvalidInputError
from .problems import ViolationReport, count_violations
from .qubo import CompositeQubo, Qubo, decompose, energy
from .solvers.sampleset import Backend, SampleSet


@dataclass(frozen=True)
class RunMetrics:
    sqv: float
    per_block_sqv: tuple[float, ...]
    violations: tuple[ViolationReport, ...]
    tts_us: int
    backend: Backend
    t_pre_us: int = 0
    t_anneal_us: int = 0
    t_post_us: int = 0

    def __post_init__(self) -> None:
        if self.tts_us != self.t_pre_us + self.t_anneal_us + self.t_post_us:
            raise InvalidInputError("tts_us must equal the sum of its parts")


@dataclass(frozen=True)
class AggregateMetrics:
    n_runs: int
    mean_sqv: float
    sqv_stddev: float
    mean_violations_per_block: tuple[float, ...]
    violation_error_per_block: tuple[float, ...] | None
    mean_tts_us: float


def sqv(q: Qubo, best: Any) -> float:
    """Raw quadratic-form value of the best assignment (no sign flip)."""
    return energy(q, best)


def _mean_count(runs: Sequence[ViolationReport]) -> float:
    return math.fsum(r.count for r in runs) / len(runs)


def violation_error(
    parallel_runs: Sequence[ViolationReport], sequential_runs: Sequence[ViolationReport]
) -> float:
    """Mean parallel violation count minus mean sequential violation count."""
    if not parallel_runs or not sequential_runs:
        raise InvalidInputError("violation_error needs at least one run on each side")
    kinds = {r.problem_kind for r in parallel_runs} | {r.problem_kind for r in sequential_runs}
    if len(kinds) != 1:
        raise InvalidInputError(f"violation reports mix problem kinds: {sorted(k.value for k in kinds)}")
    return _mean_count(parallel_runs) - _mean_count(sequential_runs)


def sqv_stddev(sqvs: Sequence[float]) -> float:
    """Population standard deviation (divisor N)."""
    if len(sqvs) == 0:
        raise InvalidInputError("sqv_stddev needs at least one value")
    vals = [float(v) for v in sqvs]
    if all(v == vals[0] for v in vals):
        return 0.0
    mean = math.fsum(vals) / len(vals)
    dev = [v - mean for v in vals]
    # scale before squaring so tiny spreads do not underflow to 0 (or huge ones overflow)
    m = max(abs(d) for d in dev)
    if m == 0.0:
        return 0.0
    return m * math.sqrt(math.fsum((d / m) ** 2 for d in dev) / len(vals))


def tts(sample_set: SampleSet) -> int:
    """Time-to-solution in integer microseconds: pre + anneal + post."""
    t = sample_set.timing
    return t.pre_us + t.anneal_us + t.post_us


def run_metrics(
    composite: CompositeQubo,
    instances: Sequence[Any],
    best: Any,
    timing_parts: tuple[int, int, int],
    backend: Backend,
) -> RunMetrics:
    """Per-block SQV and violations of one composite assignment.

    ``instances[k]`` is the problem behind block ``k`` (an ALM/TFO instance or
    a plain :class:`Qubo`); SQV is evaluated on the instances' own QUBOs, so a
    normalized composite is still scored on the original coefficients.
    """
    if len(instances) != len(composite.blocks):
        raise InvalidInputError("need one instance per block")
    parts = decompose(composite, best)
    per_block = tuple(sqv(_qubo_of(inst), x) for inst, x in zip(instances, parts))
    reports = tuple(count_violations(inst, x) for inst, x in zip(instances, parts))
    pre, anneal, post = (int(t) for t in timing_parts)
    return RunMetrics(math.fsum(per_block), per_block, reports, pre + anneal + post,
                      backend, pre, anneal, post)


def _qubo_of(inst: Any) -> Qubo:
    return inst if isinstance(inst, Qubo) else inst.qubo


def aggregate_runs(
    runs: Sequence[RunMetrics], reference: Sequence[RunMetrics] | None = None
) -> AggregateMetrics:
    """Summarize repeated runs; ``reference`` (sequential runs) enables violation error."""
    if not runs:
        raise InvalidInputError("aggregate_runs needs at least one run")
    n_blocks = len(runs[0].violations)
    sqvs = [r.sqv for r in runs]
    mean_v = tuple(_mean_count([r.violations[k] for r in runs]) for k in range(n_blocks))
    err = None
    if reference:
        err = tuple(
            violation_error([r.violations[k] for r in runs], [r.violations[k] for r in reference])
            for k in range(n_blocks)
        )
    return AggregateMetrics(
        n_runs=len(runs),
        mean_sqv=math.fsum(sqvs) / len(sqvs),
        sqv_stddev=sqv_stddev(sqvs),
        mean_violations_per_block=mean_v,
        violation_error_per_block=err,
        mean_tts_us=float(np.mean([r.tts_us for r in runs])),
    )
