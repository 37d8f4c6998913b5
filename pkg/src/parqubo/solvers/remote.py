"""JSON-over-HTTP sampler client, and a small reference server.

Request (``POST /v1/sample``): the QUBO document (``dimension``, ``label``,
``terms``) with an extra ``params`` object.

Response::

    {"samples": [{"bits": [0, 1, ...], "energy": -3.0, "count": 1}, ...],
     "timing": {"pre_us": 10, "anneal_us": 200, "post_us": 5}}
"""

from __future__ import annotations

import json
import logging
import math
import threading
import urllib.error
import urllib.parse
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable, Mapping

import numpy as np

from ..errors import ParquboError, ProtocolError, TransportError
from ..qubo import Qubo, qubo_from_dict, qubo_to_dict
from .sampleset import Backend, SampleSet, Timing, aggregate

log = logging.getLogger(__name__)

SAMPLE_PATH = "/v1/sample"
MISMATCH_RTOL = 1e-9


def _endpoint_url(endpoint: str) -> str:
    parts = urllib.parse.urlsplit(endpoint)
    if parts.path in ("", "/"):
        parts = parts._replace(path=SAMPLE_PATH)
    return urllib.parse.urlunsplit(parts)


def _parse_response(q: Qubo, payload: Any) -> tuple[np.ndarray, np.ndarray, np.ndarray, Timing]:
    if not isinstance(payload, dict):
        raise ProtocolError("response is not a JSON object")
    samples, timing = payload.get("samples"), payload.get("timing")
    if not isinstance(samples, list) or not samples:
        raise ProtocolError("response has no samples")
    if not isinstance(timing, dict):
        raise ProtocolError("response has no timing object")
    states = np.empty((len(samples), q.dimension), dtype=np.uint8)
    reported = np.empty(len(samples))
    counts = np.empty(len(samples), dtype=np.int64)
    for k, s in enumerate(samples):
        try:
            bits, e, c = s["bits"], float(s["energy"]), s.get("count", 1)
        except (TypeError, KeyError, ValueError) as exc:
            raise ProtocolError(f"sample {k} is malformed: {exc}") from exc
        if not isinstance(bits, list) or len(bits) != q.dimension:
            raise ProtocolError(
                f"sample {k} has {len(bits) if isinstance(bits, list) else '?'} bits, "
                f"expected {q.dimension}"
            )
        if any(b not in (0, 1) or isinstance(b, bool) for b in bits):
            raise ProtocolError(f"sample {k} has non-binary bits")
        if not isinstance(c, int) or isinstance(c, bool) or c < 1:
            raise ProtocolError(f"sample {k} has invalid count {c!r}")
        if not math.isfinite(e):
            raise ProtocolError(f"sample {k} has non-finite energy")
        states[k], reported[k], counts[k] = bits, e, c
    try:
        t = Timing(timing["pre_us"], timing["anneal_us"], timing["post_us"])
    except (KeyError, TypeError, ValueError, ParquboError) as exc:
        raise ProtocolError(f"malformed timing: {exc}") from exc
    return states, reported, counts, t


def solve_remote(
    q: Qubo,
    endpoint: str,
    params: Mapping[str, Any] | None = None,
    timeout: float = 60.0,
) -> SampleSet:
    """Sample ``q`` on a remote service.

    Energies are recomputed locally; on a disagreement beyond a relative
    ``1e-9`` the local value wins and ``energy_mismatch`` is set.
    """
    body = qubo_to_dict(q)
    body["params"] = dict(params or {})
    req = urllib.request.Request(
        _endpoint_url(endpoint),
        data=json.dumps(body).encode(),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        raise ProtocolError(f"server answered HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"cannot reach {endpoint}: {exc}") from exc
    try:
        payload = json.loads(raw)
    except ValueError as exc:
        raise ProtocolError(f"response is not valid JSON: {exc}") from exc
    states, reported, counts, timing = _parse_response(q, payload)
    ss = aggregate(q, states, counts, timing, Backend.REMOTE, int(counts.sum()))
    # compare per distinct state; aggregate() already replaced energies
    local = dict(zip(map(bytes, ss.states), ss.energies))
    mismatch = any(
        abs(local[bytes(s)] - e) > MISMATCH_RTOL * max(abs(local[bytes(s)]), abs(e), 1.0)
        for s, e in zip(states, reported)
    )
    if mismatch:
        log.warning("remote energies disagree with local recomputation; using local values")
    return SampleSet(ss.states, ss.energies, ss.counts, timing, Backend.REMOTE,
                     ss.num_reads, mismatch)


# -- reference server ----------------------------------------------------

Solver = Callable[[Qubo, Mapping[str, Any]], SampleSet]


def _default_solver(q: Qubo, params: Mapping[str, Any]) -> SampleSet:
    from .exact import solve_exact
    from .sa import SaSchedule, solve_sa

    if params.get("backend", "exact") == "exact":
        return solve_exact(q)
    keys = ("num_reads", "sweeps", "beta_start", "beta_end", "seed")
    return solve_sa(q, SaSchedule(**{k: params[k] for k in keys if k in params}))


def make_server(host: str = "127.0.0.1", port: int = 0,
                solver: Solver = _default_solver) -> ThreadingHTTPServer:
    """HTTP server answering ``POST /v1/sample`` with ``solver``'s output."""

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802
            if self.path != SAMPLE_PATH:
                self.send_error(404)
                return
            try:
                doc = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))))
                ss = solver(qubo_from_dict(doc), doc.get("params") or {})
            except (ValueError, ParquboError) as exc:
                self.send_error(400, str(exc))
                return
            d = ss.to_dict()
            out = json.dumps({"samples": d["samples"], "timing": d["timing"]}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def log_message(self, fmt: str, *args: Any) -> None:
            log.debug(fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    return t
