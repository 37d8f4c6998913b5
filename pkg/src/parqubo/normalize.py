"""Sign-preserving coefficient transforms for composite QUBOs.

Each technique maps every stored coefficient ``x`` to ``T(x)`` with
``T(x) * x >= 0`` and ``T(0) == 0``. Logarithms are base 10.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import InvalidInputError
from .qubo import CompositeQubo, Qubo

SCALAR_VALUES: tuple[float, ...] = (2.5, 5.0, 10.0, 20.0, 50.0, 500.0)


class NormKind(str, enum.Enum):
    SQRT = "sqrt"
    FOURTH_ROOT = "fourth_root"
    SQRT_FIRST_BLOCK = "sqrt_first_block"
    SQRT_SECOND_BLOCK = "sqrt_second_block"
    LOG10 = "log10"
    SQUARE = "square"
    SQUARE_THEN_LOG = "square_then_log"
    LOG_THEN_SQUARE = "log_then_square"
    SCALAR = "scalar"


class ScalarOp(str, enum.Enum):
    MULTIPLY = "multiply"
    DIVIDE = "divide"


_BLOCK_SCOPE = {NormKind.SQRT_FIRST_BLOCK: 0, NormKind.SQRT_SECOND_BLOCK: 1}


@dataclass(frozen=True)
class NormalizationSpec:
    kind: NormKind
    scalar_value: float | None = None
    scalar_op: ScalarOp | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NormKind(self.kind))
        if self.kind is NormKind.SCALAR:
            if self.scalar_value not in SCALAR_VALUES:
                raise InvalidInputError(
                    f"scalar value must be one of {SCALAR_VALUES}, got {self.scalar_value!r}"
                )
            if self.scalar_op is None:
                raise InvalidInputError("scalar normalization needs an operation")
            object.__setattr__(self, "scalar_value", float(self.scalar_value))
            object.__setattr__(self, "scalar_op", ScalarOp(self.scalar_op))
        elif self.scalar_value is not None or self.scalar_op is not None:
            raise InvalidInputError(f"{self.kind.value} takes no scalar parameters")

    @property
    def label(self) -> str:
        """Short form used by the CLI and in reports, e.g. ``scalar:x10``."""
        if self.kind is NormKind.SCALAR:
            sym = "x" if self.scalar_op is ScalarOp.MULTIPLY else "/"
            return f"scalar:{sym}{self.scalar_value:g}"
        return self.kind.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "scalar_value": self.scalar_value,
            "scalar_op": None if self.scalar_op is None else self.scalar_op.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NormalizationSpec":
        try:
            return cls(NormKind(d["kind"]), d.get("scalar_value"),
                       None if d.get("scalar_op") is None else ScalarOp(d["scalar_op"]))
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"malformed normalization spec: {exc}") from exc


_SCALAR_RE = re.compile(r"^scalar:(x|\*|/|d|÷)\s*([0-9.]+)$")


def parse_normalization(text: str) -> NormalizationSpec:
    """Parse ``sqrt``, ``log10``, ``scalar:x10``, ``scalar:/2.5`` and friends."""
    t = text.strip().lower()
    m = _SCALAR_RE.match(t)
    if m:
        op = ScalarOp.MULTIPLY if m.group(1) in ("x", "*") else ScalarOp.DIVIDE
        try:
            value = float(m.group(2))
        except ValueError as exc:
            raise InvalidInputError(f"bad scalar value in {text!r}") from exc
        return NormalizationSpec(NormKind.SCALAR, value, op)
    try:
        kind = NormKind(t)
    except ValueError:
        raise InvalidInputError(f"unknown normalization {text!r}") from None
    if kind is NormKind.SCALAR:
        raise InvalidInputError("scalar normalization needs an operand, e.g. scalar:x10")
    return NormalizationSpec(kind)


def all_techniques() -> list[NormalizationSpec]:
    """The 8 non-scalar techniques followed by the 12 scalar variants."""
    specs = [NormalizationSpec(k) for k in NormKind if k is not NormKind.SCALAR]
    for op in ScalarOp:
        specs.extend(NormalizationSpec(NormKind.SCALAR, k, op) for k in SCALAR_VALUES)
    return specs


def _signed_root(x: float, power: float) -> float:
    return x ** power if x >= 0 else -((-x) ** power)


def transform_term(spec: NormalizationSpec, x: float) -> float:
    """Apply one technique to a single coefficient."""
    kind = spec.kind
    if kind in (NormKind.SQRT, NormKind.SQRT_FIRST_BLOCK, NormKind.SQRT_SECOND_BLOCK):
        return _signed_root(x, 0.5)
    if kind is NormKind.FOURTH_ROOT:
        # two successive signed square roots
        return _signed_root(_signed_root(x, 0.5), 0.5)
    if kind is NormKind.SQUARE:
        return x * x if x >= 0 else -(x * x)
    if kind is NormKind.SCALAR:
        if spec.scalar_op is ScalarOp.MULTIPLY:
            return x * spec.scalar_value
        return x * (1.0 / spec.scalar_value)
    if x == 0:
        return 0.0
    if kind is NormKind.LOG10:
        if x >= 1:
            return math.log10(x)
        if x > 0:
            return -math.log10(x)
        if x > -1:
            return math.log10(-x)
        return -math.log10(-x)
    if kind is NormKind.SQUARE_THEN_LOG:
        # log10(x**2) == 2*log10|x|; the squared form overflows for |x| > 1e154
        v = 2.0 * math.log10(abs(x))
        if -1 < x < 0 or x >= 1:
            return v
        return -v
    if kind is NormKind.LOG_THEN_SQUARE:
        v = math.log10(abs(x)) ** 2
        return v if x > 0 else -v
    raise InvalidInputError(f"unsupported normalization {kind!r}")


def normalize(c: CompositeQubo, spec: NormalizationSpec) -> CompositeQubo:
    """Return a composite with every (in-scope) coefficient transformed.

    Block-selective square roots only touch block 0 or block 1; all other
    techniques transform the whole composite. Dimension, blocks and the set of
    stored pairs are preserved. Should a transform map a term to exactly zero
    (``|x| == 1`` under the logarithmic kinds), the pair is dropped since
    absent and zero pairs are the same thing.
    """
    scope = _BLOCK_SCOPE.get(spec.kind)
    lo, hi = 0, c.dimension
    if scope is not None:
        if len(c.blocks) < 2:
            raise InvalidInputError(f"{spec.kind.value} needs a composite with at least 2 blocks")
        lo, hi = c.blocks[scope].offset, c.blocks[scope].stop
    terms = {}
    for (i, j), v in c.qubo.coefficients.items():
        terms[(i, j)] = transform_term(spec, v) if lo <= i < hi else v
    q = Qubo(c.dimension, {k: v for k, v in terms.items() if v != 0.0}, c.qubo.label)
    return CompositeQubo(q, c.blocks)
