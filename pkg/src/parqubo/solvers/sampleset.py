from __future__ import annotations

import enum
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Iterator

import numpy as np

from ..errors import InvalidInputError
from ..qubo import Qubo, energies


class Backend(str, enum.Enum):
    EXACT = "exact"
    SA = "sa"
    REMOTE = "remote"


@dataclass(frozen=True)
class Timing:
    """Pre-processing, sampling and post-processing time in microseconds."""

    pre_us: int = 0
    anneal_us: int = 0
    post_us: int = 0

    def __post_init__(self) -> None:
        for name in ("pre_us", "anneal_us", "post_us"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise InvalidInputError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total_us(self) -> int:
        return self.pre_us + self.anneal_us + self.post_us

    def plus(self, pre_us: int = 0, anneal_us: int = 0, post_us: int = 0) -> "Timing":
        return Timing(self.pre_us + pre_us, self.anneal_us + anneal_us, self.post_us + post_us)


class Stopwatch:
    """Monotonic microsecond laps for the pre/anneal/post split."""

    def __init__(self) -> None:
        self.laps: dict[str, int] = {}

    @contextmanager
    def lap(self, name: str) -> Iterator[None]:
        t0 = time.perf_counter_ns()
        try:
            yield
        finally:
            self.laps[name] = self.laps.get(name, 0) + (time.perf_counter_ns() - t0) // 1000

    def timing(self) -> Timing:
        return Timing(self.laps.get("pre", 0), self.laps.get("anneal", 0), self.laps.get("post", 0))


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Distinct assignments sorted by ascending energy.

    ``states`` is a ``(k, n)`` uint8 array; ``energies`` and ``counts`` are
    aligned with its rows. ``energy_mismatch`` is set when a remote service
    reported energies that disagreed with local recomputation.
    """

    states: np.ndarray
    energies: np.ndarray
    counts: np.ndarray
    timing: Timing
    backend: Backend
    num_reads: int
    energy_mismatch: bool = False

    def __post_init__(self) -> None:
        for arr in (self.states, self.energies, self.counts):
            arr.flags.writeable = False

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def best_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def best_energy(self) -> float:
        return float(self.energies[0])

    def samples(self) -> list[tuple[np.ndarray, float, int]]:
        return [(s, float(e), int(c)) for s, e, c in zip(self.states, self.energies, self.counts)]

    def truncated(self, k: int) -> "SampleSet":
        """Keep the ``k`` lowest-energy distinct samples (counts are unchanged)."""
        return SampleSet(self.states[:k].copy(), self.energies[:k].copy(), self.counts[:k].copy(),
                         self.timing, self.backend, self.num_reads, self.energy_mismatch)

    def to_dict(self) -> dict[str, Any]:
        return {
            "backend": self.backend.value,
            "num_reads": self.num_reads,
            "energy_mismatch": self.energy_mismatch,
            "timing": {
                "pre_us": self.timing.pre_us,
                "anneal_us": self.timing.anneal_us,
                "post_us": self.timing.post_us,
            },
            "samples": [
                {"bits": [int(b) for b in s], "energy": e, "count": c}
                for s, e, c in self.samples()
            ],
        }


def aggregate(
    q: Qubo,
    states: np.ndarray,
    counts: np.ndarray | None,
    timing: Timing,
    backend: Backend,
    num_reads: int,
    energy_mismatch: bool = False,
) -> SampleSet:
    """Merge duplicate rows, recompute energies locally, sort ascending.

    Ties in energy are broken by the bit pattern so the order is canonical.
    """
    states = np.ascontiguousarray(states, dtype=np.uint8)
    if counts is None:
        counts = np.ones(states.shape[0], dtype=np.int64)
    if states.shape[0] == 0:
        raise InvalidInputError("cannot build a SampleSet without samples")
    uniq, inverse = np.unique(states, axis=0, return_inverse=True)
    merged = np.zeros(uniq.shape[0], dtype=np.int64)
    np.add.at(merged, inverse.ravel(), counts)
    e = energies(q, uniq)
    # np.unique sorts rows lexicographically; a stable sort keeps that as tie-break
    order = np.argsort(e, kind="stable")
    return SampleSet(uniq[order], e[order], merged[order], timing, backend, num_reads, energy_mismatch)
