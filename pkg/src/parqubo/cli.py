"""``parqubo`` command line: generate, compose, normalize, solve, bench, serve.

Exit codes: 0 success, 2 configuration or input error, 3 capacity error,
4 I/O error (files, network, protocol).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import Any, Sequence

from .bench import (
    HYBRID_SIZES,
    GRID_SIZES,
    ExperimentConfig,
    Mode,
    config_from_dict,
    emit_report,
    run_config,
    sweep_normalizations,
    sweep_sizes,
)
from .errors import CapacityError, ConfigError, InvalidInputError, ProtocolError, TransportError
from .normalize import normalize, parse_normalization
from .problems import generate, instance_from_dict, instance_to_dict
from .qubo import ProblemKind, Qubo, compose, composite_from_dict, composite_to_dict, load_json, qubo_to_dict, save_json
from .solvers import SaSchedule, make_server, solve_exact, solve_remote, solve_sa

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("parqubo")


def _load(path: str) -> dict[str, Any]:
    try:
        return load_json(path)
    except ValueError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc


def cmd_generate(args: argparse.Namespace) -> None:
    inst = generate(args.problem, args.size, args.seed)
    save_json(qubo_to_dict(inst) if isinstance(inst, Qubo) else instance_to_dict(inst), args.out)


def cmd_compose(args: argparse.Namespace) -> None:
    parts = [instance_from_dict(_load(p)) for p in args.inputs]
    save_json(composite_to_dict(compose(parts, label=args.label)), args.out)


def cmd_normalize(args: argparse.Namespace) -> None:
    c = composite_from_dict(_load(args.inputs))
    save_json(composite_to_dict(normalize(c, parse_normalization(args.normalize))), args.out)


def cmd_solve(args: argparse.Namespace) -> None:
    q = composite_from_dict(_load(args.inputs)).qubo
    if args.backend == "exact":
        ss = solve_exact(q)
    elif args.backend == "sa":
        sched = SaSchedule()
        sched = replace(sched, num_reads=args.reads or sched.num_reads,
                        sweeps=args.sweeps or sched.sweeps, seed=args.seed)
        ss = solve_sa(q, sched)
    else:
        if not args.endpoint:
            raise ConfigError("--backend remote needs --endpoint")
        params: dict[str, Any] = {"seed": args.seed}
        if args.reads:
            params["num_reads"] = args.reads
        if args.sweeps:
            params["sweeps"] = args.sweeps
        ss = solve_remote(q, args.endpoint, params)
    d = ss.to_dict()
    if args.top:
        d["samples"] = d["samples"][: args.top]
    save_json(d, args.out)
    print(f"best energy {ss.best_energy!r} ({len(ss)} distinct samples, tts {ss.timing.total_us} us)")


def _bench_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict[str, Any] = _load(args.config) if args.config else {}
    if args.problem:
        raw["problems"] = [
            {"kind": k, "size": int(n), "seed": i} for i, (k, n) in
            enumerate(p.split(":", 1) for p in args.problem)
        ]
    for name in ("mode", "backend", "repeats", "seed", "normalization", "queue_penalty_us"):
        value = getattr(args, name)
        if value is not None:
            raw[name] = value
    if args.out:
        raw["output_path"] = args.out
    params = dict(raw.get("backend_params", {}))
    if args.reads:
        params["num_reads"] = args.reads
    if args.sweeps:
        params["sweeps"] = args.sweeps
    if args.endpoint:
        params["endpoint"] = args.endpoint
    raw["backend_params"] = params
    if args.sizes:
        raw["sizes"] = [int(s) for s in args.sizes.split(",")]
    if "problems" not in raw:
        raise ConfigError("bench needs --config or at least one --problem")
    return config_from_dict(raw)


def cmd_bench(args: argparse.Namespace) -> None:
    cfg = _bench_config(args)
    if not cfg.output_path:
        raise ConfigError("bench needs an output path (--out or output_path in the config)")
    if args.sweep == "sizes":
        records = sweep_sizes(cfg, cfg.sizes or GRID_SIZES)
    elif args.sweep == "hybrid":
        records = sweep_sizes(cfg, cfg.sizes or HYBRID_SIZES)
    elif args.sweep == "normalization":
        records = sweep_normalizations(replace(cfg, normalization="all"))
    else:
        records = run_config(cfg)
    csv_path, plot_path = emit_report(records, cfg.output_path)
    failed = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} rows to {csv_path} and {plot_path}" + (f" ({failed} failed)" if failed else ""))


def cmd_serve(args: argparse.Namespace) -> None:
    server = make_server(args.host, args.port)
    print(f"listening on http://{server.server_address[0]}:{server.server_address[1]}/v1/sample", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parqubo", description="Compose, normalize and solve QUBO problems in parallel.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate an ALM, TFO or generic problem")
    g.add_argument("--problem", required=True, type=str.upper, choices=[k.value for k in ProblemKind])
    g.add_argument("--size", required=True, type=int, help="number of variables")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compose", help="compose problem files into one block-diagonal QUBO")
    c.add_argument("inputs", nargs="+")
    c.add_argument("--label")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compose)

    n = sub.add_parser("normalize", help="apply a normalization technique to a composite")
    n.add_argument("--in", dest="inputs", required=True)
    n.add_argument("--normalize", required=True, help="e.g. sqrt, log10, scalar:x10, scalar:/2.5")
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_normalize)

    s = sub.add_parser("solve", help="sample a QUBO or composite")
    s.add_argument("--backend", choices=["exact", "sa", "remote"], default="sa")
    s.add_argument("--reads", type=int)
    s.add_argument("--sweeps", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--endpoint")
    s.add_argument("--top", type=int, help="keep only the lowest-energy N samples")
    s.add_argument("--in", dest="inputs", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a parallel-vs-sequential experiment")
    b.add_argument("--config")
    b.add_argument("--problem", action="append", metavar="KIND:SIZE")
    b.add_argument("--mode", choices=[m.value for m in Mode])
    b.add_argument("--backend", choices=["exact", "sa", "remote"])
    b.add_argument("--repeats", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--normalization", help='technique label or "all"')
    b.add_argument("--queue-penalty-us", type=int)
    b.add_argument("--reads", type=int)
    b.add_argument("--sweeps", type=int)
    b.add_argument("--endpoint")
    b.add_argument("--sizes", help="comma-separated composite sizes")
    b.add_argument("--sweep", choices=["sizes", "hybrid", "normalization"])
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("serve", help="run the reference sampling server")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8765)
    v.set_defaults(func=cmd_serve)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CapacityError as exc:
        print(f"parqubo: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, InvalidInputError) as exc:
        print(f"parqubo: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TransportError, ProtocolError) as exc:
        print(f"parqubo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
