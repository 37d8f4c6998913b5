"""Parallel-vs-sequential experiment runner and CSV/plot-data reporting.

A *cell* is one point of an experiment grid (a composite size, a
normalization technique, or just ``base``). Each cell is solved ``repeats``
times in parallel mode (one composite solve), sequential mode (one solve per
problem) or both, and produces:

* run rows: one per (mode, repeat, block);
* aggregate rows (``repeat == "agg"``): one per (mode, block) plus a
  composite row with ``block_label == "*"`` per mode.

SQV is always evaluated on the original, un-normalized problem coefficients.
Sequential mode is the reference and is never normalized.
"""

from __future__ import annotations

import csv
import contextlib
import enum
import gc
import io
import json
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, InvalidInputError, ParquboError
from .metrics import RunMetrics, aggregate_runs, run_metrics, sqv_stddev
from .normalize import NormalizationSpec, all_techniques, normalize, parse_normalization
from .problems import generate
from .qubo import ProblemKind, Qubo, compose, composite_to_dict, dumps
from .solvers import MAX_DIMENSION, Backend, SaSchedule, solve_exact, solve_remote, solve_sa, warmup
from .solvers.sampleset import SampleSet, Stopwatch

log = logging.getLogger(__name__)

CSV_HEADER = (
    "cell_id,mode,backend,normalization,composite_size,repeat,block_label,block_sqv,"
    "block_violations,violation_error,t_pre_us,t_anneal_us,t_post_us,tts_us,sqv_mean,"
    "sqv_stddev,error"
).split(",")

GRID_SIZES = (14, 17, 20, 23, 26, 29)
HYBRID_SIZES = (26, 35, 95, 905)
DEFAULT_REPEATS = 20
AGG = "agg"
COMPOSITE_LABEL = "*"


class Mode(str, enum.Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"
    BOTH = "both"


@dataclass(frozen=True)
class ProblemSpec:
    kind: ProblemKind
    size: int
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple[ProblemSpec, ...]
    mode: Mode = Mode.BOTH
    backend: Backend = Backend.SA
    backend_params: Mapping[str, Any] = field(default_factory=dict)
    # None, a single technique, or "all" for the full sweep
    normalization: NormalizationSpec | str | None = None
    repeats: int = DEFAULT_REPEATS
    output_path: str | None = None
    seed: int = 0
    queue_penalty_us: int = 0
    sizes: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "backend", Backend(self.backend))
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if not self.problems:
            raise ConfigError("an experiment needs at least one problem")
        if self.mode in (Mode.PARALLEL, Mode.BOTH) and len(self.problems) < 2:
            raise ConfigError(f"{self.mode.value} mode needs at least 2 problems")
        if self.queue_penalty_us < 0:
            raise ConfigError("queue_penalty_us must be non-negative")
        if isinstance(self.normalization, str) and self.normalization != "all":
            try:
                object.__setattr__(self, "normalization", parse_normalization(self.normalization))
            except InvalidInputError as exc:
                raise ConfigError(str(exc)) from exc
        if self.mode is Mode.SEQUENTIAL and self.normalization is not None:
            raise ConfigError("normalization applies to the composite; sequential mode has none")
        if self.backend is Backend.REMOTE and "endpoint" not in self.backend_params:
            raise ConfigError("remote backend needs backend_params.endpoint")

    @property
    def composite_size(self) -> int:
        return sum(p.size for p in self.problems)


@dataclass(frozen=True)
class ExperimentRecord:
    """One CSV row. ``bits`` (the best assignment of a block) is kept in memory only."""

    cell_id: str
    mode: str
    backend: str
    normalization: str
    composite_size: int
    repeat: int | str
    block_label: str
    block_sqv: float | None = None
    block_violations: float | None = None
    violation_error: float | None = None
    t_pre_us: float | None = None
    t_anneal_us: float | None = None
    t_post_us: float | None = None
    tts_us: float | None = None
    sqv_mean: float | None = None
    sqv_stddev: float | None = None
    error: str = ""
    bits: tuple[int, ...] | None = None

    @property
    def is_aggregate(self) -> bool:
        return self.repeat == AGG

    def row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- config I/O -----------------------------------------------------------


def config_from_dict(d: Mapping[str, Any]) -> ExperimentConfig:
    try:
        problems = tuple(
            ProblemSpec(ProblemKind(str(p["kind"]).upper()), int(p["size"]), int(p.get("seed", 0)))
            for p in d["problems"]
        )
        norm = d.get("normalization")
        if isinstance(norm, Mapping):
            norm = NormalizationSpec.from_dict(norm)
        sizes = d.get("sizes")
        return ExperimentConfig(
            problems=problems,
            mode=Mode(str(d.get("mode", "both")).lower()),
            backend=Backend(str(d.get("backend", "sa")).lower()),
            backend_params=dict(d.get("backend_params", {})),
            normalization=norm,
            repeats=int(d.get("repeats", DEFAULT_REPEATS)),
            output_path=d.get("output_path"),
            seed=int(d.get("seed", 0)),
            queue_penalty_us=int(d.get("queue_penalty_us", 0)),
            sizes=None if sizes is None else tuple(int(s) for s in sizes),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, InvalidInputError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


# -- solving ----------------------------------------------------------------


def _set_workers() -> None:
    raw = os.environ.get("PARQUBO_WORKERS")
    if not raw:
        return
    import numba

    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PARQUBO_WORKERS must be an integer, got {raw!r}") from None
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _check_capacity(cfg: ExperimentConfig, problems: Sequence[ProblemSpec]) -> None:
    if cfg.backend is not Backend.EXACT:
        return
    sizes = [p.size for p in problems]
    if cfg.mode in (Mode.PARALLEL, Mode.BOTH) and sum(sizes) > MAX_DIMENSION:
        raise CapacityError(
            f"exact backend is capped at {MAX_DIMENSION} variables; composite has {sum(sizes)}"
        )
    if max(sizes) > MAX_DIMENSION:
        raise CapacityError(f"exact backend is capped at {MAX_DIMENSION} variables")


def _repeat_seed(seed: int, repeat: int) -> int:
    return int(np.random.SeedSequence([seed, repeat]).generate_state(1)[0])


def _schedule(cfg: ExperimentConfig, pin: Qubo | None) -> SaSchedule:
    keys = ("num_reads", "sweeps", "beta_start", "beta_end", "relative")
    sched = SaSchedule(**{k: cfg.backend_params[k] for k in keys if k in cfg.backend_params})
    return sched.fixed_for(pin) if pin is not None else sched


def _solve(cfg: ExperimentConfig, q: Qubo, seed: int, pin: Qubo | None = None) -> SampleSet:
    """Solve with the configured backend; ``pin`` fixes SA temperatures to that QUBO's."""
    if cfg.backend is Backend.EXACT:
        return solve_exact(q)
    if cfg.backend is Backend.SA:
        return solve_sa(q, replace(_schedule(cfg, pin), seed=seed))
    params = dict(cfg.backend_params)
    endpoint = params.pop("endpoint")
    params.pop("fixed_temperatures", None)
    params.setdefault("seed", seed)
    return solve_remote(q, endpoint, params)


@dataclass
class _Cell:
    cell_id: str
    problems: tuple[ProblemSpec, ...]
    normalization: NormalizationSpec | None


def _norm_label(spec: NormalizationSpec | None) -> str:
    return "none" if spec is None else spec.label


def _timed(m: RunMetrics, ss: SampleSet, sw: Stopwatch, penalty_us: int) -> RunMetrics:
    t = ss.timing.plus(sw.laps["pre"] + penalty_us, 0, sw.laps["post"])
    return replace(m, tts_us=t.total_us, t_pre_us=t.pre_us, t_anneal_us=t.anneal_us,
                   t_post_us=t.post_us)


def _run_parallel(cfg: ExperimentConfig, cell: _Cell, instances: list[Any], repeat: int,
                  pin: Qubo | None) -> tuple[RunMetrics, np.ndarray]:
    sw = Stopwatch()
    with sw.lap("pre"):
        comp = compose(instances)
        if cell.normalization is not None:
            comp = normalize(comp, cell.normalization)
        dumps(composite_to_dict(comp))
    ss = _solve(cfg, comp.qubo, _repeat_seed(cfg.seed, repeat), pin)
    with sw.lap("post"):
        m = run_metrics(comp, instances, ss.best_state, (0, 0, 0), ss.backend)
    return _timed(m, ss, sw, cfg.queue_penalty_us), ss.best_state


def _run_sequential(cfg: ExperimentConfig, instances: list[Any], repeat: int,
                    pin: Qubo | None) -> list[tuple[RunMetrics, np.ndarray]]:
    out = []
    for inst in instances:
        sw = Stopwatch()
        with sw.lap("pre"):
            single = compose([inst])
            dumps(composite_to_dict(single))
        ss = _solve(cfg, single.qubo, _repeat_seed(cfg.seed, repeat), pin)
        with sw.lap("post"):
            m = run_metrics(single, [inst], ss.best_state, (0, 0, 0), ss.backend)
        out.append((_timed(m, ss, sw, cfg.queue_penalty_us), ss.best_state))
    return out


def _combine_sequential(parts: list[tuple[RunMetrics, np.ndarray]]) -> RunMetrics:
    ms = [m for m, _ in parts]
    pre = sum(m.t_pre_us for m in ms)
    anneal = sum(m.t_anneal_us for m in ms)
    post = sum(m.t_post_us for m in ms)
    per_block = tuple(m.per_block_sqv[0] for m in ms)
    return RunMetrics(math.fsum(per_block), per_block, tuple(m.violations[0] for m in ms),
                      pre + anneal + post, ms[0].backend, pre, anneal, post)


def _run_rows(base: dict[str, Any], mode: Mode, repeat: int, m: RunMetrics,
              labels: Sequence[str], bits: Sequence[np.ndarray],
              timings: Sequence[RunMetrics]) -> list[ExperimentRecord]:
    rows = []
    for k, label in enumerate(labels):
        t = timings[k]
        rows.append(ExperimentRecord(
            **base, mode=mode.value, repeat=repeat, block_label=label,
            block_sqv=m.per_block_sqv[k], block_violations=m.violations[k].count,
            t_pre_us=t.t_pre_us, t_anneal_us=t.t_anneal_us, t_post_us=t.t_post_us,
            tts_us=t.tts_us, bits=tuple(int(b) for b in bits[k]),
        ))
    return rows


def _agg_rows(base: dict[str, Any], mode: Mode, labels: Sequence[str], runs: Sequence[RunMetrics],
              reference: Sequence[RunMetrics] | None) -> list[ExperimentRecord]:
    agg = aggregate_runs(runs, reference)
    rows = []
    for k, label in enumerate(labels):
        vals = [r.per_block_sqv[k] for r in runs]
        rows.append(ExperimentRecord(
            **base, mode=mode.value, repeat=AGG, block_label=label,
            block_sqv=math.fsum(vals) / len(vals),
            block_violations=agg.mean_violations_per_block[k],
            violation_error=None if agg.violation_error_per_block is None
            else agg.violation_error_per_block[k],
            sqv_mean=math.fsum(vals) / len(vals), sqv_stddev=sqv_stddev(vals),
        ))
    mean = lambda xs: math.fsum(xs) / len(xs)  # noqa: E731
    rows.append(ExperimentRecord(
        **base, mode=mode.value, repeat=AGG, block_label=COMPOSITE_LABEL,
        block_sqv=agg.mean_sqv,
        block_violations=math.fsum(agg.mean_violations_per_block),
        violation_error=None if agg.violation_error_per_block is None
        else math.fsum(agg.violation_error_per_block),
        t_pre_us=mean([r.t_pre_us for r in runs]),
        t_anneal_us=mean([r.t_anneal_us for r in runs]),
        t_post_us=mean([r.t_post_us for r in runs]),
        tts_us=mean([r.tts_us for r in runs]),
        sqv_mean=agg.mean_sqv, sqv_stddev=agg.sqv_stddev,
    ))
    return rows


def _failure_row(base: dict[str, Any], mode: Mode, repeat: int, exc: Exception) -> ExperimentRecord:
    return ExperimentRecord(**base, mode=mode.value, repeat=repeat, block_label=COMPOSITE_LABEL,
                            error=f"{type(exc).__name__}: {exc}")


def _run_cell(
    cfg: ExperimentConfig, cell: _Cell, sequential_reference: list[RunMetrics] | None = None,
) -> tuple[list[ExperimentRecord], list[RunMetrics]]:
    """Run one grid cell; returns its records and its sequential runs."""
    _check_capacity(cfg, cell.problems)
    instances = [generate(p.kind, p.size, p.seed) for p in cell.problems]
    labels = [(i if isinstance(i, Qubo) else i.qubo).label for i in instances]
    base = dict(cell_id=cell.cell_id, backend=cfg.backend.value,
                normalization=_norm_label(cell.normalization),
                composite_size=sum(p.size for p in cell.problems))
    records: list[ExperimentRecord] = []
    seq_runs: list[RunMetrics] = []
    par_runs: list[RunMetrics] = []
    run_seq = cfg.mode in (Mode.SEQUENTIAL, Mode.BOTH) and sequential_reference is None
    run_par = cfg.mode in (Mode.PARALLEL, Mode.BOTH)
    blocks = compose(instances).blocks
    pin = None
    if cfg.backend is Backend.SA and cfg.backend_params.get("fixed_temperatures"):
        # one absolute temperature ramp for every solve in the cell
        pin = compose(instances).qubo
        if cell.normalization is not None:
            pin = normalize(compose(instances), cell.normalization).qubo
    for r in range(cfg.repeats):
        if run_par:
            try:
                with _gc_paused():
                    m, best = _run_parallel(cfg, cell, instances, r, pin)
            except (ParquboError, OSError) as exc:
                if isinstance(exc, CapacityError):
                    raise
                log.warning("cell %s repeat %d (parallel) failed: %s", cell.cell_id, r, exc)
                records.append(_failure_row(base, Mode.PARALLEL, r, exc))
            else:
                par_runs.append(m)
                bits = [best[b.offset:b.stop] for b in blocks]
                records.extend(_run_rows(base, Mode.PARALLEL, r, m, labels, bits, [m] * len(labels)))
        if run_seq:
            try:
                with _gc_paused():
                    parts = _run_sequential(cfg, instances, r, pin)
            except (ParquboError, OSError) as exc:
                if isinstance(exc, CapacityError):
                    raise
                log.warning("cell %s repeat %d (sequential) failed: %s", cell.cell_id, r, exc)
                records.append(_failure_row(base, Mode.SEQUENTIAL, r, exc))
            else:
                m = _combine_sequential(parts)
                seq_runs.append(m)
                records.extend(_run_rows(base, Mode.SEQUENTIAL, r, m, labels,
                                         [b for _, b in parts], [p for p, _ in parts]))
    reference = sequential_reference if sequential_reference is not None else seq_runs
    if cfg.mode is not Mode.BOTH:
        reference = None
    if par_runs:
        records.extend(_agg_rows(base, Mode.PARALLEL, labels, par_runs, reference or None))
    if seq_runs:
        records.extend(_agg_rows(base, Mode.SEQUENTIAL, labels, seq_runs, None))
    return records, seq_runs


@contextlib.contextmanager
def _gc_paused():
    """Collect up front and keep the collector off while a repeat is timed, as timeit does."""
    was_enabled = gc.isenabled()
    gc.collect()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def _prepare(cfg: ExperimentConfig) -> None:
    _set_workers()
    if cfg.backend is not Backend.REMOTE:
        warmup()


def run_experiment(cfg: ExperimentConfig, cell_id: str = "base") -> list[ExperimentRecord]:
    """Run a single cell with the config's normalization (which must not be ``"all"``)."""
    if cfg.normalization == "all":
        raise ConfigError('use sweep_normalizations for normalization="all"')
    _check_capacity(cfg, cfg.problems)
    _prepare(cfg)
    records, _ = _run_cell(cfg, _Cell(cell_id, cfg.problems, cfg.normalization))
    return records


def sweep_normalizations(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """Baseline plus all 20 techniques; sequential runs (if any) are shared."""
    if len(cfg.problems) < 2:
        raise ConfigError("a normalization sweep needs at least 2 problems")
    _check_capacity(cfg, cfg.problems)
    _prepare(cfg)
    records, seq_runs = _run_cell(cfg, _Cell("norm:none", cfg.problems, None))
    for spec in all_techniques():
        cell = _Cell(f"norm:{spec.label}", cfg.problems, spec)
        reference = seq_runs if cfg.mode is Mode.BOTH else None
        recs, _ = _run_cell(cfg, cell, sequential_reference=reference)
        records.extend(recs)
    return records


def _resized(problems: Sequence[ProblemSpec], composite_size: int) -> tuple[ProblemSpec, ...]:
    fixed = sum(p.size for p in problems[:-1])
    last = composite_size - fixed
    if last < 1:
        raise ConfigError(f"composite size {composite_size} leaves no room for the last problem")
    return tuple(problems[:-1]) + (replace(problems[-1], size=last),)


def sweep_sizes(cfg: ExperimentConfig, sizes: Iterable[int] | None = None) -> list[ExperimentRecord]:
    """Vary the last problem so the composite takes each size in turn."""
    sizes = tuple(sizes if sizes is not None else (cfg.sizes or GRID_SIZES))
    cells = []
    for n in sizes:
        problems = _resized(cfg.problems, n)
        for p in problems:
            if p.kind is ProblemKind.TFO and p.size % 3:
                raise ConfigError(f"composite size {n} gives a TFO block of {p.size} variables, "
                                  "not a multiple of 3")
        _check_capacity(cfg, problems)
        cells.append(_Cell(f"size{n}", problems, None if cfg.normalization == "all"
                           else cfg.normalization))
    _prepare(cfg)
    records: list[ExperimentRecord] = []
    for cell in cells:
        records.extend(_run_cell(cfg, cell)[0])
    return records


def run_config(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """Dispatch on the config: size sweep, normalization sweep, or a single cell."""
    if cfg.sizes:
        if cfg.normalization == "all":
            raise ConfigError("combine either a size sweep or a normalization sweep, not both")
        return sweep_sizes(cfg)
    if cfg.normalization == "all":
        return sweep_normalizations(cfg)
    return run_experiment(cfg)


# -- reporting --------------------------------------------------------------


def render_csv(records: Sequence[ExperimentRecord]) -> str:
    if not records:
        raise InvalidInputError("emit_report needs at least one record")
    buf = io.StringIO()
    cells = len({r.cell_id for r in records})
    buf.write(f"# parqubo report: {len(records)} rows, {cells} cells\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def plot_data(records: Sequence[ExperimentRecord]) -> dict[str, Any]:
    """Aggregate metrics grouped by x (composite size or technique), per mode and block."""
    aggs = [r for r in records if r.is_aggregate]
    by_size = len({r.composite_size for r in aggs}) > 1
    x_axis = "composite_size" if by_size else "normalization"
    series: dict[str, dict[str, dict[str, list[Any]]]] = {}
    for r in aggs:
        s = series.setdefault(r.mode, {}).setdefault(r.block_label, defaultdict(list))
        s["x"].append(r.composite_size if by_size else r.normalization)
        for key in ("sqv_mean", "sqv_stddev", "block_violations", "violation_error", "tts_us"):
            s[key].append(getattr(r, key))
    return {"x_axis": x_axis,
            "series": {m: {b: dict(v) for b, v in blocks.items()} for m, blocks in series.items()}}


def emit_report(records: Sequence[ExperimentRecord], path: str | Path) -> tuple[Path, Path]:
    """Write ``path`` (CSV) and ``<path>.plot.json``; returns both paths."""
    path = Path(path)
    text = render_csv(records)
    plot_path = path.with_name(path.stem + ".plot.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    plot_path.write_text(json.dumps(plot_data(records), indent=1) + "\n")
    return path, plot_path


def parse_report(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def reaggregate(rows: Sequence[Mapping[str, str]]) -> dict[tuple[str, str, str], dict[str, float]]:
    """Recompute aggregate values from parsed run rows.

    Keys are ``(cell_id, mode, block_label)``; the composite entry uses ``"*"``.
    """
    runs = [r for r in rows if r["repeat"] != AGG and not r["error"]]
    grouped: dict[tuple[str, str], dict[int, list[Mapping[str, str]]]] = defaultdict(lambda: defaultdict(list))
    for r in runs:
        grouped[(r["cell_id"], r["mode"])][int(r["repeat"])].append(r)
    out: dict[tuple[str, str, str], dict[str, float]] = {}
    for (cell, mode), reps in grouped.items():
        blocks = [r["block_label"] for r in next(iter(reps.values()))]
        composite_sqv, tts = [], []
        for rep_rows in reps.values():
            composite_sqv.append(math.fsum(float(r["block_sqv"]) for r in rep_rows))
            if mode == Mode.PARALLEL.value:
                tts.append(float(rep_rows[0]["tts_us"]))
            else:
                tts.append(sum(float(r["tts_us"]) for r in rep_rows))
        for b in blocks:
            vals = [float(r["block_sqv"]) for rr in reps.values() for r in rr if r["block_label"] == b]
            viol = [float(r["block_violations"]) for rr in reps.values() for r in rr if r["block_label"] == b]
            out[(cell, mode, b)] = {
                "sqv_mean": math.fsum(vals) / len(vals),
                "sqv_stddev": sqv_stddev(vals),
                "block_violations": math.fsum(viol) / len(viol),
            }
        out[(cell, mode, COMPOSITE_LABEL)] = {
            "sqv_mean": math.fsum(composite_sqv) / len(composite_sqv),
            "sqv_stddev": sqv_stddev(composite_sqv),
            "block_violations": math.fsum(out[(cell, mode, b)]["block_violations"] for b in blocks),
            "tts_us": math.fsum(tts) / len(tts),
        }
    return out
