"""Exhaustive ground-state search by Gray-code enumeration.

The assignment space is cut into ``2**p`` chunks by fixing the top ``p``
bits. Inside a chunk the low bits follow a reflected Gray code, so each step
flips one variable and the energy changes by ``(1 - 2 x_k) * field_k``, where
``field_k = Q_kk + sum_j W_kj x_j``. Fields and energy are recomputed from
scratch every :data:`RESYNC_STEPS` steps to bound floating-point drift.

Candidates within a loose tolerance of the running minimum are kept as
integer codes (bit ``i`` of the code is ``x_i``); the final optimum set is
decided on exactly recomputed energies.
"""

from __future__ import annotations

import numba
import numpy as np

from ..errors import CapacityError, InvalidInputError
from ..qubo import Qubo, energies
from .sampleset import Backend, SampleSet, Stopwatch, aggregate

MAX_DIMENSION = 30
RESYNC_STEPS = 1 << 14
CHUNK_BUFFER = 1 << 14
MAX_OPTIMA = 1 << 16
# candidate window during enumeration, relative to sum |Q|
SCAN_RTOL = 1e-10
# final optimum window on recomputed energies, relative to sum |Q|
OPTIMUM_RTOL = 1e-12


@numba.njit(cache=True)
def _full_state(code, n, diag, w, x, field):
    e = 0.0
    for i in range(n):
        x[i] = (code >> i) & 1
    for i in range(n):
        f = diag[i]
        for j in range(n):
            if x[j]:
                f += w[i, j]
        field[i] = f
        if x[i]:
            e += diag[i]
            for j in range(i + 1, n):
                if x[j]:
                    e += w[i, j]
    return e


@numba.njit(cache=True, parallel=True)
def _enumerate(diag, w, top_bits, tol, buf_size):
    n = diag.shape[0]
    low = n - top_bits
    n_chunks = 1 << top_bits
    steps = 1 << low
    best = np.empty(n_chunks)
    found = np.zeros(n_chunks, dtype=np.int64)
    overflow = np.zeros(n_chunks, dtype=np.bool_)
    codes = np.empty((n_chunks, buf_size), dtype=np.int64)
    vals = np.empty((n_chunks, buf_size))
    for c in numba.prange(n_chunks):
        x = np.empty(n, dtype=np.uint8)
        field = np.empty(n)
        code = np.int64(c) << np.int64(low)
        e = _full_state(code, n, diag, w, x, field)
        b = e
        codes[c, 0] = code
        vals[c, 0] = e
        cnt = 1
        for t in range(1, steps):
            k = 0
            while not (t >> k) & 1:
                k += 1
            if x[k]:
                e -= field[k]
                x[k] = 0
                for j in range(n):
                    field[j] -= w[j, k]
            else:
                e += field[k]
                x[k] = 1
                for j in range(n):
                    field[j] += w[j, k]
            code ^= np.int64(1) << np.int64(k)
            if t % RESYNC_STEPS == 0:
                e = _full_state(code, n, diag, w, x, field)
            if e < b - tol:
                b = e
                keep = 0
                for m in range(cnt):
                    if vals[c, m] <= b + tol:
                        codes[c, keep] = codes[c, m]
                        vals[c, keep] = vals[c, m]
                        keep += 1
                cnt = keep
            elif e < b:
                b = e
            if e <= b + tol:
                if cnt < buf_size:
                    codes[c, cnt] = code
                    vals[c, cnt] = e
                    cnt += 1
                else:
                    overflow[c] = True
        best[c] = b
        found[c] = cnt
    return best, found, overflow, codes, vals


def _decode(codes: np.ndarray, n: int) -> np.ndarray:
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _check_capacity(q: Qubo) -> None:
    if q.dimension > MAX_DIMENSION:
        raise CapacityError(
            f"exact solver is capped at {MAX_DIMENSION} variables, got {q.dimension}"
        )


def _optimal_states(q: Qubo, scale: float, scan) -> np.ndarray:
    best, found, overflow, codes, vals = scan
    window = SCAN_RTOL * scale
    gmin = best.min()
    keep = []
    for c in range(best.shape[0]):
        if overflow[c] and best[c] <= gmin + window:
            raise CapacityError(
                f"optimum set exceeds the candidate buffer of {CHUNK_BUFFER} per chunk"
            )
        sel = vals[c, : found[c]] <= gmin + window
        keep.append(codes[c, : found[c]][sel])
    states = _decode(np.unique(np.concatenate(keep)), q.dimension)
    e = energies(q, states)
    opt = states[e <= e.min() + OPTIMUM_RTOL * scale]
    if opt.shape[0] > MAX_OPTIMA:
        raise CapacityError(f"more than {MAX_OPTIMA} optimal assignments")
    return opt


def solve_exact(q: Qubo) -> SampleSet:
    """Return every assignment attaining the global minimum.

    Each optimal assignment appears once with count 1 and ``num_reads`` is 1.
    Raises :class:`CapacityError` above :data:`MAX_DIMENSION` variables.
    """
    if not isinstance(q, Qubo):
        raise InvalidInputError("solve_exact expects a Qubo")
    _check_capacity(q)
    sw = Stopwatch()
    with sw.lap("pre"):
        diag, w = q.symmetric_offdiagonal()
        scale = max(1.0, q.abs_sum())
        top = min(6, max(0, q.dimension - 10))
    if q.dimension == 0:
        opt = np.zeros((1, 0), dtype=np.uint8)
    else:
        with sw.lap("anneal"):
            scan = _enumerate(diag, w, top, SCAN_RTOL * scale, CHUNK_BUFFER)
        with sw.lap("post"):
            opt = _optimal_states(q, scale, scan)
    with sw.lap("post"):
        ss = aggregate(q, opt, None, sw.timing(), Backend.EXACT, 1)
    return SampleSet(ss.states, ss.energies, ss.counts, sw.timing(), Backend.EXACT, 1)


def exact_minimum(q: Qubo) -> tuple[float, np.ndarray]:
    """Global minimum energy and the ``(k, n)`` array of all optimal states."""
    ss = solve_exact(q)
    return ss.best_energy, np.array(ss.states)
