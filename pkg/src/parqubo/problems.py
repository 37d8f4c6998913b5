"""Desk-scale asset-allocation (ALM) and traffic-flow (TFO) QUBO generators.

These are reproducible stand-ins: they match the variable counts and the
coefficient magnitudes of the original experiments (ALM around 1e5, TFO
around 1e4) and are built so that for the default scales every minimum
energy assignment is feasible.

ALM
    One variable per asset, ``x_a = 1`` meaning "allocate asset a". Diagonal
    ``-(P + return_a)`` rewards allocation, pairwise ``+risk_ab`` penalizes
    holding correlated assets. ``risk`` is bounded so that the sum of risks
    touching any asset stays below ``P``, which makes all-ones the unique
    optimum.

TFO
    ``n_vehicles * 3`` variables, index ``v * 3 + r`` meaning "vehicle v takes
    route r". A one-hot penalty ``lam * (sum_r x_{v,r} - 1)**2`` per vehicle
    plus positive congestion terms between vehicles whose routes share a road
    segment. Vehicles only congest with vehicles of the same departure cohort
    (at most :data:`COHORT_SIZE` vehicles), which keeps every congestion term
    in ``[0.2 lam, 0.4 lam]`` while the penalty still dominates at any fleet
    size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import InvalidInputError
from .qubo import Assignment, ProblemKind, Qubo, as_assignment, qubo_from_dict, qubo_to_dict

ALM_PENALTY_SCALE = 5.0e5
TFO_PENALTY_SCALE = 5.0e3
N_ROUTES = 3
COHORT_SIZE = 9

#: Road segments used by each global route. Routes are segment-disjoint, so two
#: variables share a segment exactly when they pick the same route.
ROUTE_SEGMENTS: tuple[frozenset[int], ...] = (
    frozenset({0, 1, 2}),
    frozenset({3, 4, 5}),
    frozenset({6, 7, 8}),
)


@dataclass(frozen=True)
class ViolationReport:
    problem_kind: ProblemKind
    count: int
    breakdown: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.count != sum(self.breakdown.values()):
            raise InvalidInputError("violation count must equal the sum of its breakdown")


@dataclass(frozen=True)
class AlmInstance:
    n_assets: int
    penalty_scale: float
    returns: np.ndarray
    risk: Mapping[tuple[int, int], float]
    qubo: Qubo
    rng_seed: int
    kind: ProblemKind = ProblemKind.ALM

    @property
    def size(self) -> int:
        return self.n_assets


@dataclass(frozen=True)
class TfoInstance:
    n_vehicles: int
    n_routes: int
    penalty_scale: float
    congestion: Mapping[tuple[int, int], float]
    qubo: Qubo
    rng_seed: int
    kind: ProblemKind = ProblemKind.TFO

    @property
    def size(self) -> int:
        return self.n_vehicles * self.n_routes


def _risk_bounds(n_assets: int, penalty_scale: float) -> tuple[float, float]:
    # sum of risks touching one asset must stay below penalty_scale
    hi = min(0.22, 0.88 / max(n_assets - 1, 1)) * penalty_scale
    return hi / 1.1, hi


def gen_alm(n_assets: int = 5, seed: int = 0, penalty_scale: float = ALM_PENALTY_SCALE) -> AlmInstance:
    """Generate an asset-allocation QUBO whose unique optimum is all-ones."""
    if n_assets < 1:
        raise InvalidInputError(f"n_assets must be >= 1, got {n_assets}")
    if penalty_scale <= 0:
        raise InvalidInputError("penalty_scale must be positive")
    rng = np.random.default_rng(seed)
    returns = rng.uniform(0.0, 0.2 * penalty_scale, size=n_assets)
    lo, hi = _risk_bounds(n_assets, penalty_scale)
    risk: dict[tuple[int, int], float] = {}
    for a in range(n_assets):
        for b in range(a + 1, n_assets):
            risk[(a, b)] = float(rng.uniform(lo, hi))
    terms = {(a, a): -(penalty_scale + float(returns[a])) for a in range(n_assets)}
    terms.update(risk)
    qubo = Qubo.from_terms(n_assets, terms, label=f"alm{n_assets}")
    returns.flags.writeable = False
    return AlmInstance(n_assets, penalty_scale, returns, risk, qubo, seed)


def _cohorts(n_vehicles: int) -> list[np.ndarray]:
    n = -(-n_vehicles // COHORT_SIZE)
    return np.array_split(np.arange(n_vehicles), n)


def gen_tfo(n_vehicles: int = 7, seed: int = 0, penalty_scale: float = TFO_PENALTY_SCALE) -> TfoInstance:
    """Generate a traffic-flow QUBO with ``n_vehicles * 3`` variables."""
    if n_vehicles < 1:
        raise InvalidInputError(f"n_vehicles must be >= 1, got {n_vehicles}")
    if penalty_scale <= 0:
        raise InvalidInputError("penalty_scale must be positive")
    rng = np.random.default_rng(seed)
    lam = penalty_scale
    terms: dict[tuple[int, int], float] = {}
    for v in range(n_vehicles):
        base = v * N_ROUTES
        for r in range(N_ROUTES):
            terms[(base + r, base + r)] = -lam
            for s in range(r + 1, N_ROUTES):
                terms[(base + r, base + s)] = 2.0 * lam
    congestion: dict[tuple[int, int], float] = {}
    for cohort in _cohorts(n_vehicles):
        for ai, v in enumerate(cohort):
            for w in cohort[ai + 1:]:
                for r in range(N_ROUTES):
                    for s in range(N_ROUTES):
                        if ROUTE_SEGMENTS[r] & ROUTE_SEGMENTS[s]:
                            key = (int(v) * N_ROUTES + r, int(w) * N_ROUTES + s)
                            congestion[key] = float(rng.uniform(0.2 * lam, 0.4 * lam))
    terms.update(congestion)
    qubo = Qubo.from_terms(n_vehicles * N_ROUTES, terms, label=f"tfo{n_vehicles * N_ROUTES}")
    return TfoInstance(n_vehicles, N_ROUTES, penalty_scale, congestion, qubo, seed)


def gen_generic(n: int, seed: int = 0) -> Qubo:
    """Dense QUBO with coefficients uniform in ``[-1, 1]``."""
    if n < 1:
        raise InvalidInputError(f"generic problem size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1.0, 1.0, size=(n, n))
    return Qubo.from_terms(n, {(i, j): vals[i, j] for i in range(n) for j in range(i, n)},
                           label=f"generic{n}")


def generate(kind: str | ProblemKind, size: int, seed: int = 0) -> AlmInstance | TfoInstance | Qubo:
    """Generate by variable count: ``size`` assets for ALM, ``size / 3`` vehicles for TFO."""
    try:
        kind = ProblemKind(str(getattr(kind, "value", kind)).upper())
    except ValueError:
        raise InvalidInputError(f"unknown problem kind {kind!r}") from None
    if kind is ProblemKind.GENERIC:
        return gen_generic(size, seed)
    if kind is ProblemKind.ALM:
        return gen_alm(size, seed)
    if kind is ProblemKind.TFO:
        if size % N_ROUTES:
            raise InvalidInputError(f"TFO size must be a multiple of {N_ROUTES}, got {size}")
        return gen_tfo(size // N_ROUTES, seed)


def count_violations_alm(inst: AlmInstance, x: Any) -> ViolationReport:
    """One violation per unallocated asset."""
    x = as_assignment(x, inst.n_assets)
    n = int(inst.n_assets - x.sum())
    return ViolationReport(ProblemKind.ALM, n, {"unallocated_asset": n})


def count_violations_tfo(inst: TfoInstance, x: Any) -> ViolationReport:
    """Routeless vehicles + multi-routed vehicles + routes nobody drives."""
    x = as_assignment(x, inst.n_vehicles * inst.n_routes)
    grid = x.reshape(inst.n_vehicles, inst.n_routes).astype(np.int64)
    per_vehicle = grid.sum(axis=1)
    per_route = grid.sum(axis=0)
    breakdown = {
        "vehicle_no_route": int((per_vehicle == 0).sum()),
        "vehicle_multi_route": int((per_vehicle > 1).sum()),
        "route_unused": int((per_route == 0).sum()),
    }
    return ViolationReport(ProblemKind.TFO, sum(breakdown.values()), breakdown)


def count_violations(inst: Any, x: Assignment) -> ViolationReport:
    """Dispatch on instance type; plain QUBOs have no constraints to violate."""
    if isinstance(inst, AlmInstance):
        return count_violations_alm(inst, x)
    if isinstance(inst, TfoInstance):
        return count_violations_tfo(inst, x)
    if isinstance(inst, Qubo):
        as_assignment(x, inst.dimension)
        return ViolationReport(ProblemKind.GENERIC, 0, {})
    raise InvalidInputError(f"cannot count violations for {type(inst).__name__}")


# -- serialization ------------------------------------------------------


def instance_to_dict(inst: AlmInstance | TfoInstance) -> dict[str, Any]:
    d = qubo_to_dict(inst.qubo)
    d["meta"] = {
        "kind": inst.kind.value,
        "seed": inst.rng_seed,
        "penalty_scale": inst.penalty_scale,
        "size": inst.size,
    }
    return d


def instance_from_dict(d: Mapping[str, Any]) -> AlmInstance | TfoInstance | Qubo:
    """Rebuild an instance; documents without ``meta`` load as plain QUBOs."""
    qubo = qubo_from_dict(d)
    meta = d.get("meta")
    if not meta:
        return qubo
    try:
        kind = ProblemKind(meta["kind"])
        seed, scale = int(meta["seed"]), float(meta["penalty_scale"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed instance meta: {exc}") from exc
    if kind is ProblemKind.ALM:
        inst = gen_alm(qubo.dimension, seed, scale)
    elif kind is ProblemKind.TFO:
        if qubo.dimension % N_ROUTES:
            raise InvalidInputError("TFO instance dimension is not a multiple of 3")
        inst = gen_tfo(qubo.dimension // N_ROUTES, seed, scale)
    else:
        return qubo
    # the stored coefficients are authoritative
    return type(inst)(**{**inst.__dict__, "qubo": qubo})
