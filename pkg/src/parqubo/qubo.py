"""QUBO data model, energy evaluation and block-diagonal composition.

Coefficients are stored as an upper-triangular sparse map ``(i, j) -> value``
with ``i <= j``. Diagonal entries are linear terms (``x_i**2 == x_i``), so the
energy of an assignment ``x`` is::

    E(x) = sum_{(i, j)} Q[i, j] * x[i] * x[j]

Several independent problems are solved together by stacking their matrices
along the diagonal. Variables of different problems never interact, so the
composite energy is the sum of the per-problem energies.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import InvalidInputError

#: A candidate solution: read-only ``uint8`` vector of 0/1 values.
Assignment = np.ndarray

TermsLike = Union[Mapping[tuple[int, int], float], Iterable[Sequence[float]]]


class ProblemKind(str, enum.Enum):
    ALM = "ALM"
    TFO = "TFO"
    GENERIC = "GENERIC"


def as_assignment(bits: Any, dimension: int | None = None) -> Assignment:
    """Validate ``bits`` and return it as a read-only ``uint8`` vector."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise InvalidInputError(f"assignment must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise InvalidInputError("assignment entries must be exactly 0 or 1")
    if dimension is not None and arr.size != dimension:
        raise InvalidInputError(
            f"assignment length {arr.size} does not match dimension {dimension}"
        )
    out = arr.astype(np.uint8, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Qubo:
    """Sparse upper-triangular QUBO over ``dimension`` binary variables.

    Build instances with :meth:`from_terms` or :meth:`from_dense`; both fold
    lower-triangular entries onto the upper triangle and drop zeros, so two
    equal problems always have equal coefficient maps.
    """

    dimension: int
    coefficients: Mapping[tuple[int, int], float]
    label: str = ""

    def __post_init__(self) -> None:
        if isinstance(self.dimension, bool) or int(self.dimension) != self.dimension:
            raise InvalidInputError(f"dimension must be an integer, got {self.dimension!r}")
        if self.dimension < 0:
            raise InvalidInputError(f"dimension must be non-negative, got {self.dimension}")
        for (i, j), v in self.coefficients.items():
            if not (0 <= i <= j < self.dimension):
                raise InvalidInputError(
                    f"term ({i}, {j}) violates 0 <= i <= j < {self.dimension}"
                )
            if not math.isfinite(v):
                raise InvalidInputError(f"term ({i}, {j}) has non-finite value {v!r}")
            if v == 0.0:
                raise InvalidInputError(f"term ({i}, {j}) stores an explicit zero")
        if not isinstance(self.coefficients, MappingProxyType):
            object.__setattr__(self, "coefficients", MappingProxyType(dict(self.coefficients)))

    @classmethod
    def from_terms(cls, dimension: int, terms: TermsLike, label: str = "") -> "Qubo":
        """Build from a ``{(i, j): v}`` map or an iterable of ``(i, j, v)``.

        Entries with ``i > j`` are folded onto ``(j, i)``; repeated pairs add up.
        """
        items = terms.items() if isinstance(terms, Mapping) else (
            ((t[0], t[1]), t[2]) for t in terms
        )
        acc: dict[tuple[int, int], float] = {}
        for (i, j), v in items:
            if int(i) != i or int(j) != j:
                raise InvalidInputError(f"term indices must be integers, got ({i}, {j})")
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            if i < 0 or j >= dimension:
                raise InvalidInputError(f"term ({i}, {j}) out of range for dimension {dimension}")
            v = float(v)
            if not math.isfinite(v):
                raise InvalidInputError(f"term ({i}, {j}) has non-finite value {v!r}")
            acc[(i, j)] = acc.get((i, j), 0.0) + v
        clean = {k: acc[k] for k in sorted(acc) if acc[k] != 0.0}
        return cls(int(dimension), clean, label)

    @classmethod
    def from_dense(cls, matrix: Any, label: str = "") -> "Qubo":
        """Build from a square matrix, folding ``Q[i, j] + Q[j, i]`` into ``i <= j``."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"matrix must be square, got shape {m.shape}")
        rows, cols = np.nonzero(m)
        return cls.from_terms(
            m.shape[0], ((int(i), int(j), m[i, j]) for i, j in zip(rows, cols)), label
        )

    # -- derived arrays -------------------------------------------------

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        keys = sorted(self.coefficients)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        vals = np.fromiter((self.coefficients[k] for k in keys), dtype=np.float64, count=len(keys))
        return rows, cols, vals

    @property
    def num_terms(self) -> int:
        return len(self.coefficients)

    def terms(self) -> list[tuple[int, int, float]]:
        """Stored terms as sorted ``(i, j, value)`` triples."""
        return [(i, j, self.coefficients[(i, j)]) for i, j in sorted(self.coefficients)]

    def to_dense(self) -> np.ndarray:
        """Upper-triangular dense matrix."""
        m = np.zeros((self.dimension, self.dimension))
        rows, cols, vals = self._arrays
        m[rows, cols] = vals
        return m

    def symmetric_offdiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(diag, W)`` with ``W`` the symmetric coupling matrix.

        ``E(x) = diag @ x + x @ W @ x / 2``; samplers use this form for
        incremental flip updates.
        """
        diag = np.zeros(self.dimension)
        w = np.zeros((self.dimension, self.dimension))
        for (i, j), v in self.coefficients.items():
            if i == j:
                diag[i] = v
            else:
                w[i, j] = v
                w[j, i] = v
        return diag, w

    def abs_sum(self) -> float:
        return math.fsum(abs(v) for v in self.coefficients.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Qubo):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.label == other.label
            and dict(self.coefficients) == dict(other.coefficients)
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.label, tuple(sorted(self.coefficients.items()))))

    def __repr__(self) -> str:
        return f"Qubo(dimension={self.dimension}, terms={self.num_terms}, label={self.label!r})"


def energy(q: Qubo, x: Any) -> float:
    """Energy ``x^T Q x``, summed with :func:`math.fsum` (order independent)."""
    x = as_assignment(x, q.dimension)
    return math.fsum(v for (i, j), v in q.coefficients.items() if x[i] and x[j])


def energies(q: Qubo, states: Any) -> np.ndarray:
    """Energies for a ``(k, dimension)`` batch; each equals :func:`energy` exactly."""
    states = np.asarray(states, dtype=np.uint8)
    if states.ndim != 2 or states.shape[1] != q.dimension:
        raise InvalidInputError(
            f"states must have shape (k, {q.dimension}), got {states.shape}"
        )
    rows, cols, vals = q._arrays
    out = np.zeros(states.shape[0])
    if not vals.size:
        return out
    # fsum per row: correctly rounded, so the result equals energy() exactly and
    # never depends on batch size (matrix products and axis reductions do)
    step = max(1, (1 << 22) // vals.size)
    for lo in range(0, states.shape[0], step):
        chunk = states[lo:lo + step]
        active = (chunk[:, rows] & chunk[:, cols]).astype(bool)
        for k, mask in enumerate(active):
            out[lo + k] = math.fsum(vals[mask])
    return out


# -- composition --------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """One sub-problem's slice ``[offset, offset + length)`` of a composite."""

    offset: int
    length: int
    label: str = ""
    kind: ProblemKind = ProblemKind.GENERIC

    @property
    def stop(self) -> int:
        return self.offset + self.length


@dataclass(frozen=True)
class CompositeQubo:
    """Block-diagonal stacking of independent problems."""

    qubo: Qubo
    blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.blocks:
            raise InvalidInputError("a composite needs at least one block")
        pos = 0
        for b in self.blocks:
            if b.offset != pos or b.length < 0:
                raise InvalidInputError(
                    f"blocks must be contiguous from 0; block {b.label!r} starts at {b.offset}, "
                    f"expected {pos}"
                )
            pos = b.stop
        if pos != self.qubo.dimension:
            raise InvalidInputError(
                f"blocks cover [0, {pos}) but dimension is {self.qubo.dimension}"
            )
        owner = self.block_index()
        for i, j in self.qubo.coefficients:
            if owner[i] != owner[j]:
                raise InvalidInputError(f"term ({i}, {j}) spans two blocks")

    @property
    def dimension(self) -> int:
        return self.qubo.dimension

    def block_index(self) -> np.ndarray:
        """Array mapping each variable to the index of its block."""
        return np.repeat(np.arange(len(self.blocks)), [b.length for b in self.blocks])

    def block_qubo(self, k: int) -> Qubo:
        """Extract block ``k`` as a standalone problem with indices shifted to 0."""
        b = self.blocks[k]
        terms = {
            (i - b.offset, j - b.offset): v
            for (i, j), v in self.qubo.coefficients.items()
            if b.offset <= i < b.stop
        }
        return Qubo(b.length, dict(sorted(terms.items())), b.label)


def _problem_parts(p: Any) -> tuple[Qubo, ProblemKind]:
    if isinstance(p, Qubo):
        return p, ProblemKind.GENERIC
    qubo = getattr(p, "qubo", None)
    if isinstance(qubo, Qubo):
        return qubo, ProblemKind(getattr(p, "kind", ProblemKind.GENERIC))
    raise InvalidInputError(f"cannot compose object of type {type(p).__name__}")


def compose(problems: Sequence[Any], label: str | None = None) -> CompositeQubo:
    """Stack problems along the diagonal in list order.

    Items may be :class:`Qubo` objects or problem instances exposing ``qubo``
    and ``kind`` attributes. Coefficients of problem ``k`` are shifted by the
    block offset; no cross-block coefficient is ever created.
    """
    if not problems:
        raise InvalidInputError("compose needs at least one problem")
    blocks: list[Block] = []
    terms: dict[tuple[int, int], float] = {}
    offset = 0
    for p in problems:
        q, kind = _problem_parts(p)
        for (i, j), v in q.coefficients.items():
            terms[(i + offset, j + offset)] = v
        blocks.append(Block(offset, q.dimension, q.label, kind))
        offset += q.dimension
    if label is None:
        label = "+".join(b.label for b in blocks)
    return CompositeQubo(Qubo(offset, terms, label), tuple(blocks))


def decompose(c: CompositeQubo, x: Any) -> list[Assignment]:
    """Split a composite assignment into per-block assignments."""
    x = as_assignment(x, c.dimension)
    return [as_assignment(x[b.offset:b.stop]) for b in c.blocks]


# -- JSON ---------------------------------------------------------------


def qubo_to_dict(q: Qubo) -> dict[str, Any]:
    return {
        "dimension": q.dimension,
        "label": q.label,
        "terms": [[i, j, v] for i, j, v in q.terms()],
    }


def qubo_from_dict(d: Mapping[str, Any]) -> Qubo:
    try:
        return Qubo.from_terms(int(d["dimension"]), d.get("terms", []), str(d.get("label", "")))
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidInputError(f"malformed QUBO document: {exc}") from exc


def composite_to_dict(c: CompositeQubo) -> dict[str, Any]:
    d = qubo_to_dict(c.qubo)
    d["blocks"] = [
        {"offset": b.offset, "length": b.length, "label": b.label, "kind": b.kind.value}
        for b in c.blocks
    ]
    return d


def composite_from_dict(d: Mapping[str, Any]) -> CompositeQubo:
    q = qubo_from_dict(d)
    raw = d.get("blocks")
    if raw is None:
        return CompositeQubo(q, (Block(0, q.dimension, q.label),))
    try:
        blocks = tuple(
            Block(int(b["offset"]), int(b["length"]), str(b.get("label", "")),
                  ProblemKind(b.get("kind", "GENERIC")))
            for b in raw
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed block list: {exc}") from exc
    return CompositeQubo(q, blocks)


def dumps(obj: dict[str, Any]) -> str:
    """Canonical JSON text (fixed key order, shortest float repr)."""
    return json.dumps(obj, separators=(",", ":"))


def save_json(obj: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load_json(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())
