"""Acceptance criteria, one test each. A summary line per criterion is printed
at the end of the pytest run (see ``conftest.pytest_terminal_summary``)."""

import itertools
import math
import time

import mpmath
import numpy as np
import pytest

from parqubo import ProblemKind, Qubo, compose, decompose, energy
from parqubo.bench import (
    COMPOSITE_LABEL,
    HYBRID_SIZES,
    GRID_SIZES,
    ExperimentConfig,
    ProblemSpec,
    run_experiment,
    sweep_normalizations,
    sweep_sizes,
)
from parqubo.metrics import sqv_stddev, tts
from parqubo.normalize import NormalizationSpec, NormKind, ScalarOp, all_techniques, normalize, transform_term
from parqubo.problems import count_violations_alm, count_violations_tfo, gen_alm, gen_tfo
from parqubo.solvers import Backend, SampleSet, SaSchedule, Timing, solve_exact, solve_sa

from test_normalize import oracle

ALM5 = ProblemSpec(ProblemKind.ALM, 5, 0)
TFO21 = ProblemSpec(ProblemKind.TFO, 21, 1)


def _random_qubo(rng, n, dyadic=False):
    terms = {}
    for i in range(n):
        for j in range(i, n):
            if rng.random() < 0.7:
                terms[(i, j)] = float(rng.integers(-8, 9)) / 4 if dyadic else float(rng.uniform(-1e3, 1e3))
    return Qubo.from_terms(n, terms)


def test_additivity():
    rng = np.random.default_rng(100)
    t0 = time.perf_counter()
    for _ in range(1000):
        q1 = _random_qubo(rng, int(rng.integers(1, 13)))
        q2 = _random_qubo(rng, int(rng.integers(1, 13)))
        x1 = rng.integers(0, 2, q1.dimension)
        x2 = rng.integers(0, 2, q2.dimension)
        lhs = energy(compose([q1, q2]).qubo, np.concatenate([x1, x2]))
        rhs = energy(q1, x1) + energy(q2, x2)
        assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12 * max(1.0, abs(rhs)))
    assert time.perf_counter() - t0 < 5.0


def _argmins(q):
    """Independent exhaustive oracle: every assignment, vectorised energies."""
    n = q.dimension
    states = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8).reshape(-1, n)
    e = np.array([energy(q, s) for s in states])
    best = e.min()
    return best, {tuple(s) for s in states[e == best]}


def test_separability_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    for _ in range(50):
        k = int(rng.integers(2, 4))
        sizes = rng.multinomial(int(rng.integers(k * 2, 21)) - 2 * k, [1 / k] * k) + 2
        blocks = [_random_qubo(rng, int(s), dyadic=True) for s in sizes]
        c = compose(blocks)
        ss = solve_exact(c.qubo)
        per_block = [_argmins(b) for b in blocks]
        assert ss.best_energy == sum(e for e, _ in per_block)
        expected = {sum(p, ()) for p in itertools.product(*(a for _, a in per_block))}
        assert {tuple(s) for s in ss.states} == expected
        for s in ss.states:
            for part, (_, arg) in zip(decompose(c, s), per_block):
                assert tuple(part) in arg
    assert time.perf_counter() - t0 < 60.0


# at least 8 probes in each region: zero, (0,1), [1,inf), (-1,0), (-inf,-1]
REGION_PROBES = {
    "zero": [0.0] * 8,
    "(0,1)": [0.1, 1e-5, 0.5, 0.999, 1e-12, 0.25, 0.75, 0.01],
    "[1,inf)": [1.0, 10.0, 1e5, 1.001, 2.0, 123.456, 6.5e5, 1e12],
    "(-1,0)": [-0.1, -1e-5, -0.5, -0.999, -1e-12, -0.25, -0.75, -0.01],
    "(-inf,-1]": [-1.0, -10.0, -1e5, -1.001, -2.0, -123.456, -6.5e5, -1e12],
}


def test_normalization_conformance():
    mpmath.mp.dps = 50
    specs = [NormalizationSpec(k) for k in NormKind if k is not NormKind.SCALAR]
    specs += [NormalizationSpec(NormKind.SCALAR, 10.0, op) for op in ScalarOp]
    rng = np.random.default_rng(102)
    for spec in specs:
        for region, probes in REGION_PROBES.items():
            assert len(probes) >= 8
            for x in probes:
                if spec.kind is NormKind.SCALAR:
                    want = mpmath.mpf(x) * 10 if spec.scalar_op is ScalarOp.MULTIPLY else mpmath.mpf(x) / 10
                else:
                    want = oracle(spec.kind, x)
                got = transform_term(spec, x)
                if want == 0:
                    assert got == 0.0, (spec.label, x)
                else:
                    assert abs(mpmath.mpf(got) - want) <= mpmath.mpf("1e-12") * abs(want), (spec.label, region, x)
        xs = 10.0 ** rng.uniform(-12, 12, 100_000) * rng.choice([-1.0, 1.0], 100_000)
        assert all(transform_term(spec, x) * x >= 0 for x in xs), spec.label


def test_scalar_argmin_invariance():
    rng = np.random.default_rng(103)
    scalars = [s for s in all_techniques() if s.kind is NormKind.SCALAR]
    assert len(scalars) == 12
    for _ in range(20):
        n1 = int(rng.integers(2, 9))
        n2 = int(rng.integers(2, 17 - n1))
        c = compose([_random_qubo(rng, n1), _random_qubo(rng, n2)])
        base = {tuple(s) for s in solve_exact(c.qubo).states}
        for spec in scalars:
            assert {tuple(s) for s in solve_exact(normalize(c, spec).qubo).states} == base, spec.label


def test_grid_structure():
    fast = {"num_reads": 2, "sweeps": 2}
    cfg = ExperimentConfig(problems=(ALM5, ProblemSpec(ProblemKind.TFO, 9, 1)), mode="parallel",
                           backend="sa", repeats=1, backend_params=fast)
    sizes = sweep_sizes(cfg, GRID_SIZES)
    assert sorted({r.composite_size for r in sizes if r.is_aggregate and r.block_label == COMPOSITE_LABEL}) \
        == [14, 17, 20, 23, 26, 29]
    hybrid = sweep_sizes(cfg, HYBRID_SIZES)
    assert sorted({r.composite_size for r in hybrid if r.is_aggregate and r.block_label == COMPOSITE_LABEL}) \
        == [26, 35, 95, 905]
    norm = sweep_normalizations(cfg)
    assert len({r.cell_id for r in norm}) == 21
    assert len([r for r in norm if r.is_aggregate and r.block_label == COMPOSITE_LABEL]) == 21


def test_exact_backend_parity():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(problems=(ALM5, TFO21), mode="both", backend="exact", repeats=1)
    records = run_experiment(cfg)
    for block in ("alm5", "tfo21"):
        (agg,) = [r for r in records if r.is_aggregate and r.mode == "parallel" and r.block_label == block]
        assert agg.violation_error == 0
        par = [r.block_sqv for r in records if not r.is_aggregate and r.mode == "parallel" and r.block_label == block]
        seq = [r.block_sqv for r in records if not r.is_aggregate and r.mode == "sequential" and r.block_label == block]
        assert par == seq
    assert time.perf_counter() - t0 < 120.0


def test_sa_calibration():
    q = compose([gen_alm(5, 0), gen_tfo(7, 1)]).qubo
    opt = solve_exact(q).best_energy
    hits = sum(
        math.isclose(solve_sa(q, SaSchedule(seed=s)).best_energy, opt, rel_tol=1e-12)
        for s in range(20)
    )
    assert hits >= 18, f"{hits}/20"


def test_tts_direction():
    cfg = ExperimentConfig(problems=(ALM5, TFO21), mode="both", backend="sa", repeats=10,
                           backend_params={"fixed_temperatures": True})
    records = run_experiment(cfg)
    wins = 0
    for r in range(10):
        par = {x.tts_us for x in records if x.repeat == r and x.mode == "parallel"}
        seq = sum(x.tts_us for x in records if x.repeat == r and x.mode == "sequential")
        (par_tts,) = par
        wins += par_tts < seq
    assert wins >= 9, f"{wins}/10"


def test_violation_counters():
    tfo, alm = gen_tfo(3), gen_alm(5)
    assert count_violations_tfo(tfo, [1, 0, 0, 0, 1, 0, 0, 0, 1]).count == 0
    assert count_violations_tfo(tfo, [0] * 9).count == 6
    assert count_violations_tfo(tfo, [1, 1, 0, 0, 1, 0, 0, 0, 1]).count == 1
    assert count_violations_alm(alm, [1] * 5).count == 0
    for k in range(6):
        x = [0] * k + [1] * (5 - k)
        assert count_violations_alm(alm, x).count == k


def test_metrics_formulas():
    rng = np.random.default_rng(104)
    for _ in range(100):
        vals = list(rng.normal(0, 1e5, int(rng.integers(2, 40))))
        mean = sum(vals) / len(vals)
        two_pass = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))
        assert math.isclose(sqv_stddev(vals), two_pass, rel_tol=1e-12)
    assert sqv_stddev([1.0, 3.0]) == 1.0
    ss = SampleSet(np.zeros((1, 1), np.uint8), np.zeros(1), np.ones(1, np.int64),
                   Timing(10, 200, 5), Backend.SA, 1)
    assert tts(ss) == 215 and isinstance(tts(ss), int)
