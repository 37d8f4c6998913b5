import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parqubo import InvalidInputError, Qubo, compose
from parqubo.normalize import (
    SCALAR_VALUES,
    NormalizationSpec,
    NormKind,
    ScalarOp,
    all_techniques,
    normalize,
    parse_normalization,
    transform_term,
)

from conftest import brute_force, random_qubo

mpmath.mp.dps = 50
NON_SCALAR = [k for k in NormKind if k is not NormKind.SCALAR]


def oracle(kind: NormKind, x: float) -> mpmath.mpf:
    """High-precision reference written directly from the piecewise definitions."""
    v = mpmath.mpf(x)
    if kind in (NormKind.SQRT, NormKind.SQRT_FIRST_BLOCK, NormKind.SQRT_SECOND_BLOCK):
        return mpmath.sqrt(v) if v >= 0 else -mpmath.sqrt(-v)
    if kind is NormKind.FOURTH_ROOT:
        r = mpmath.sqrt(v) if v >= 0 else -mpmath.sqrt(-v)
        return mpmath.sqrt(r) if r >= 0 else -mpmath.sqrt(-r)
    if kind is NormKind.SQUARE:
        return v * v if v >= 0 else -(v * v)
    if v == 0:
        return mpmath.mpf(0)
    if kind is NormKind.LOG10:
        if v >= 1:
            return mpmath.log10(v)
        if v > 0:
            return -mpmath.log10(v)
        if v > -1:
            return mpmath.log10(-v)
        return -mpmath.log10(-v)
    if kind is NormKind.SQUARE_THEN_LOG:
        sq = mpmath.log10(v * v)
        return sq if (-1 < v < 0 or v >= 1) else -sq
    if kind is NormKind.LOG_THEN_SQUARE:
        s = mpmath.log10(abs(v)) ** 2
        return s if v > 0 else -s
    raise AssertionError(kind)


# at least 8 probes per sign region, including the boundary values
PROBES = [0.0, 1.0, -1.0, 0.1, -0.1, 10.0, -10.0, 1e5, -1e5,
          0.5, -0.5, 2.0, -2.0, 1e-3, -1e-3, 0.999, -0.999, 1.001, -1.001,
          3.7, -3.7, 123.456, -123.456, 6.5e5, -6.5e5, 1e-12, -1e-12, 1e12, -1e12]


def _close(got: float, want: mpmath.mpf) -> bool:
    if want == 0:
        return got == 0.0
    return abs(mpmath.mpf(got) - want) <= mpmath.mpf("1e-12") * abs(want)


@pytest.mark.parametrize("kind", NON_SCALAR, ids=lambda k: k.value)
def test_probe_table_against_high_precision(kind):
    spec = NormalizationSpec(kind)
    for x in PROBES:
        assert _close(transform_term(spec, x), oracle(kind, x)), (kind, x)


@pytest.mark.parametrize("spec", [s for s in all_techniques() if s.kind is NormKind.SCALAR],
                         ids=lambda s: s.label)
def test_scalar_probes(spec):
    k = mpmath.mpf(spec.scalar_value)
    for x in PROBES:
        want = mpmath.mpf(x) * k if spec.scalar_op is ScalarOp.MULTIPLY else mpmath.mpf(x) / k
        assert _close(transform_term(spec, x), want), (spec.label, x)


@pytest.mark.parametrize("spec", all_techniques(), ids=lambda s: s.label)
def test_sign_preservation_bulk(spec):
    rng = np.random.default_rng(7)
    mags = 10.0 ** rng.uniform(-8, 8, 100_000)
    xs = mags * rng.choice([-1.0, 1.0], mags.size)
    for x in xs:
        assert transform_term(spec, x) * x >= 0


@pytest.mark.parametrize("spec", all_techniques(), ids=lambda s: s.label)
def test_zero_is_fixed(spec):
    assert transform_term(spec, 0.0) == 0.0


def test_known_values():
    assert transform_term(NormalizationSpec(NormKind.SQRT), -16.0) == -4.0
    assert transform_term(NormalizationSpec(NormKind.FOURTH_ROOT), 16.0) == 2.0
    assert transform_term(NormalizationSpec(NormKind.SQUARE), -3.0) == -9.0
    assert transform_term(NormalizationSpec(NormKind.LOG10), 1000.0) == pytest.approx(3.0, rel=1e-15)
    assert transform_term(NormalizationSpec(NormKind.LOG10), -0.01) == pytest.approx(-2.0, rel=1e-15)
    assert transform_term(NormalizationSpec(NormKind.LOG_THEN_SQUARE), -100.0) == pytest.approx(-4.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-300, 1e300), st.floats(1e-300, 1e300))
def test_magnitude_order_kept_by_roots_and_square(a, b):
    lo, hi = sorted((a, b))
    for kind in (NormKind.SQRT, NormKind.FOURTH_ROOT, NormKind.SQUARE):
        spec = NormalizationSpec(kind)
        if kind is NormKind.SQUARE and hi > 1e150:
            continue
        assert transform_term(spec, lo) <= transform_term(spec, hi)
        assert transform_term(spec, -hi) <= transform_term(spec, -lo)


def test_all_techniques_count_and_labels():
    specs = all_techniques()
    assert len(specs) == 20
    assert len({s.label for s in specs}) == 20
    assert sum(s.kind is NormKind.SCALAR for s in specs) == 12
    assert {s.scalar_value for s in specs if s.kind is NormKind.SCALAR} == set(SCALAR_VALUES)


@pytest.mark.parametrize("spec", all_techniques(), ids=lambda s: s.label)
def test_labels_parse_back(spec):
    assert parse_normalization(spec.label) == spec
    assert NormalizationSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("text", ["scalar", "scalar:x3", "cube", "scalar:+10"])
def test_bad_specs(text):
    with pytest.raises(InvalidInputError):
        parse_normalization(text)


def test_parse_aliases():
    assert parse_normalization("SCALAR:*10") == parse_normalization("scalar:x10")
    assert parse_normalization("scalar:÷2.5").scalar_op is ScalarOp.DIVIDE


def _pair(rng):
    a = random_qubo(rng, 4, density=1.0, scale=1e4, label="a")
    b = random_qubo(rng, 5, density=1.0, scale=10, label="b")
    return compose([a, b])


def test_block_selective_scope():
    rng = np.random.default_rng(8)
    c = _pair(rng)
    first = normalize(c, NormalizationSpec(NormKind.SQRT_FIRST_BLOCK))
    second = normalize(c, NormalizationSpec(NormKind.SQRT_SECOND_BLOCK))
    assert first.block_qubo(1) == c.block_qubo(1)
    assert second.block_qubo(0) == c.block_qubo(0)
    for (i, j), v in c.block_qubo(0).coefficients.items():
        assert first.block_qubo(0).coefficients[(i, j)] == transform_term(NormalizationSpec(NormKind.SQRT), v)
    with pytest.raises(InvalidInputError):
        normalize(compose([c.block_qubo(0)]), NormalizationSpec(NormKind.SQRT_SECOND_BLOCK))


@pytest.mark.parametrize("spec", all_techniques(), ids=lambda s: s.label)
def test_structure_preserved(spec):
    rng = np.random.default_rng(9)
    c = _pair(rng)
    n = normalize(c, spec)
    assert n.blocks == c.blocks and n.dimension == c.dimension
    # pairs survive unless mapped to exactly zero (|x| == 1 under a logarithm)
    assert set(n.qubo.coefficients) == {k for k, v in c.qubo.coefficients.items() if abs(v) != 1.0}
    for k, v in n.qubo.coefficients.items():
        assert v * c.qubo.coefficients[k] > 0


def test_unit_magnitude_terms_vanish_under_log():
    c = compose([Qubo.from_terms(2, {(0, 0): 1.0, (0, 1): -1.0, (1, 1): 5.0})])
    n = normalize(c, NormalizationSpec(NormKind.LOG10))
    assert dict(n.qubo.coefficients) == {(1, 1): math.log10(5.0)}


@pytest.mark.parametrize("value", SCALAR_VALUES)
def test_scalar_multiply_divide_round_trip(value):
    rng = np.random.default_rng(10)
    c = _pair(rng)
    up = normalize(c, NormalizationSpec(NormKind.SCALAR, value, ScalarOp.MULTIPLY))
    back = normalize(up, NormalizationSpec(NormKind.SCALAR, value, ScalarOp.DIVIDE))
    for k, v in c.qubo.coefficients.items():
        assert back.qubo.coefficients[k] == pytest.approx(v, rel=1e-15)


@pytest.mark.parametrize("spec", [s for s in all_techniques() if s.kind is NormKind.SCALAR],
                         ids=lambda s: s.label)
def test_scalar_keeps_argmins(spec):
    rng = np.random.default_rng(11)
    for _ in range(3):
        c = compose([random_qubo(rng, 4), random_qubo(rng, 4)])
        assert brute_force(normalize(c, spec).qubo)[1] == brute_force(c.qubo)[1]
