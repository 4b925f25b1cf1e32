"""Batch experiments: relative errors against exact minima, summaries and timing fits.

Output layout of a batch directory::

    records.csv    one row per (instance, method, iterations); deterministic
    timings.csv    wall-clock columns for the same keys (not reproducible bit-for-bit)
    summary.csv    median / quartiles of the relative error per (method, N, iterations)
    plot_long.csv  long-format table for error-vs-N, error-vs-iterations and time-vs-N plots

Quartiles use linear interpolation between order statistics (numpy's default rule).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, gcs
from .anneal import AnnealConfig, OptimizerState, adam_step, init_params, run
from .baselines import SaConfig, sa_run
from .qubo import QuboInstance, SpinConfiguration, fold_bias, gen_ea_lattice, unfold_spins
from .statevector import MAX_BRUTE_FORCE, brute_force_min

logger = logging.getLogger(__name__)

__all__ = [
    "BatchSummary",
    "BenchRecord",
    "ExperimentSpec",
    "ScalingFit",
    "config_digest",
    "emit_report",
    "fit_scaling",
    "parse_spec",
    "read_records",
    "read_summary",
    "run_batch",
    "solve",
    "summarize",
    "time_per_iteration",
]

METHODS = ("gcs", "product", "sa")
_FMT = "%.17g"


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        return _FMT % v
    return str(v)


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# --- solving ----------------------------------------------------------------------


def method_config(method: str, iterations: int, seed: int, overrides: dict | None = None):
    """Resolved solver configuration for ``method`` (``iterations`` = n_t or SA sweeps)."""
    overrides = dict(overrides or {})
    if method in ("gcs", "product"):
        keys = {f.name for f in fields(AnnealConfig)}
        kw = {k: v for k, v in overrides.items() if k in keys}
        return AnnealConfig(n_t=iterations, mode=method, seed=seed, **kw)
    if method == "sa":
        kw = {k: v for k, v in overrides.items() if k in ("beta_start", "beta_end")}
        if "sa_schedule" in overrides:
            kw["schedule"] = overrides["sa_schedule"]
        return SaConfig(sweeps=iterations, seed=seed, **kw)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def solve(inst: QuboInstance, method: str, config) -> tuple[SpinConfiguration, dict]:
    """Solve with any method. Biased instances are folded for the annealers and unfolded after.

    Returns the solution on ``inst`` and a timing dict with ``setup_s``, ``loop_s`` and
    ``per_iter_s`` (warm-up step excluded from the per-iteration average).
    """
    if method == "sa":
        res = sa_run(inst, config)
        times = res.sweep_times
        timing = {"setup_s": 0.0, "loop_s": float(times.sum())}
        sol = res.solution
    else:
        t0 = time.perf_counter()
        work = fold_bias(inst) if inst.has_bias else inst
        fold_time = time.perf_counter() - t0
        res = run(work, config)
        times = res.step_times
        timing = {"setup_s": fold_time + res.setup_time, "loop_s": float(times.sum())}
        s = res.solution.s
        sol = SpinConfiguration.of(inst, unfold_spins(s) if work is not inst else s)
    timing["per_iter_s"] = float(times[1:].mean()) if times.size > 1 else float(times.mean())
    return sol, timing


# --- experiment spec ----------------------------------------------------------------


def _shape(tok: str) -> tuple[int, int, int]:
    parts = [int(p) for p in tok.lower().split("x")]
    if len(parts) == 1:
        return (parts[0],) * 3
    if len(parts) != 3:
        raise ValueError(f"bad lattice shape {tok!r}")
    return tuple(parts)


def _bool(tok: str) -> bool:
    if tok.lower() in ("1", "true", "yes", "on"):
        return True
    if tok.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {tok!r}")


_OVERRIDES = {
    "learning_rate": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "init_scale": float,
    "rescale": _bool,
    "sparse_m": _bool,
    "beta_start": float,
    "beta_end": float,
    "sa_schedule": str,
}


@dataclass
class ExperimentSpec:
    """Batch description; see ``parse_spec`` for the file syntax."""

    shapes: list = field(default_factory=lambda: [(2, 3, 4)])
    methods: list = field(default_factory=lambda: list(METHODS))
    instances: int = 10
    seed: int = 0
    iterations: list = field(default_factory=lambda: [1000])
    boundary: str = "periodic"
    output: str = "results"
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.instances < 0:
            raise ValueError("instances must be >= 0")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"bad boundary {self.boundary!r}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("output")
        return d

    @property
    def digest(self) -> str:
        return config_digest(self.as_dict())


def parse_spec(path) -> ExperimentSpec:
    """Read ``key = value`` lines (``#`` comments allowed).

    Keys: ``shapes`` (comma list of ``L`` or ``AxBxC``), ``methods``, ``instances``,
    ``seed``, ``iterations`` (comma list), ``boundary``, ``output`` (directory, relative
    to the experiment file) and optimizer overrides such as ``learning_rate`` or ``beta_end``.
    """
    path = Path(path)
    kw: dict = {"overrides": {}}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        items = [t.strip() for t in val.split(",") if t.strip()]
        try:
            if key == "shapes":
                kw[key] = [_shape(t) for t in items]
            elif key == "methods":
                kw[key] = items
            elif key == "iterations":
                kw[key] = [int(t) for t in items]
            elif key in ("instances", "seed"):
                kw[key] = int(val)
            elif key in ("boundary", "output"):
                kw[key] = val
            elif key in _OVERRIDES:
                kw["overrides"][key] = _OVERRIDES[key](val)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    spec = ExperimentSpec(**kw)
    spec.output = str((path.parent / spec.output).resolve())
    return spec


# --- records ------------------------------------------------------------------------


@dataclass
class BenchRecord:
    instance_id: str
    n: int
    method: str
    iterations: int
    seed: int
    config_digest: str
    energy: float
    e0: float | None
    eps: float | None
    wall_total: float = float("nan")
    wall_per_iter: float = float("nan")

    @property
    def key(self) -> tuple:
        return (self.instance_id, self.method, self.iterations)


RECORD_COLUMNS = ["instance_id", "n", "method", "iterations", "seed", "config_digest", "energy", "e0", "eps"]
TIMING_COLUMNS = ["instance_id", "method", "iterations", "setup_s", "loop_s", "per_iter_s"]


def relative_error(E: float, E0: float | None) -> float | None:
    if E0 is None or E0 == 0:
        return None
    return (E - E0) / abs(E0)


def _instance_id(shape, seed: int, boundary: str) -> str:
    return f"ea{'x'.join(map(str, shape))}-{boundary[0]}-s{seed}"


def _solve_instance(task):
    shape, inst_seed, boundary, jobs, overrides = task
    inst = gen_ea_lattice(shape, inst_seed, boundary)
    e0 = brute_force_min(inst)[0] if inst.n <= MAX_BRUTE_FORCE else None
    iid = _instance_id(shape, inst_seed, boundary)
    out = []
    for method, iters in jobs:
        cfg = method_config(method, iters, inst_seed, overrides)
        sol, timing = solve(inst, method, cfg)
        rec = BenchRecord(
            iid, inst.n, method, iters, inst_seed, config_digest(cfg.as_dict()),
            sol.energy, e0, relative_error(sol.energy, e0),
            timing["setup_s"] + timing["loop_s"], timing["per_iter_s"],
        )
        out.append((rec, timing))
    return out


def _csv_header(columns, digest: str) -> str:
    return f"# gcsanneal {__version__} digest={digest}\n" + ",".join(columns) + "\n"


def _record_row(r: BenchRecord) -> str:
    return ",".join(_fmt(getattr(r, c)) for c in RECORD_COLUMNS) + "\n"


def _timing_row(r: BenchRecord, t: dict) -> str:
    vals = [r.instance_id, r.method, r.iterations, t["setup_s"], t["loop_s"], t["per_iter_s"]]
    return ",".join(_fmt(v) for v in vals) + "\n"


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("".join(lines))))


def _opt_float(tok: str):
    return None if tok == "" else float(tok)


def read_records(path) -> list[BenchRecord]:
    out = []
    for row in _read_csv(Path(path)):
        out.append(
            BenchRecord(
                row["instance_id"], int(row["n"]), row["method"], int(row["iterations"]), int(row["seed"]),
                row["config_digest"], float(row["energy"]), _opt_float(row["e0"]), _opt_float(row["eps"]),
            )
        )
    return out


def run_batch(spec: ExperimentSpec, threads: int = 1) -> list[BenchRecord]:
    """Run (or resume) a batch; returns all records sorted by key.

    Completed ``(instance, method, iterations)`` rows already in ``records.csv`` are skipped.
    New rows are appended as instances finish, and the file is rewritten in sorted order at
    the end so its bytes do not depend on scheduling.
    """
    out_dir = Path(spec.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    rec_path, tim_path = out_dir / "records.csv", out_dir / "timings.csv"
    done = {r.key: r for r in read_records(rec_path)}
    timings = {(row["instance_id"], row["method"], int(row["iterations"])): row for row in _read_csv(tim_path)}

    tasks = []
    for shape in spec.shapes:
        for k in range(spec.instances):
            seed = spec.seed + k
            iid = _instance_id(shape, seed, spec.boundary)
            jobs = [(m, it) for m in spec.methods for it in spec.iterations if (iid, m, it) not in done]
            if jobs:
                tasks.append((shape, seed, spec.boundary, jobs, spec.overrides))
    if tasks:
        if not rec_path.exists():
            rec_path.write_text(_csv_header(RECORD_COLUMNS, spec.digest), encoding="utf-8")
        if not tim_path.exists():
            tim_path.write_text(_csv_header(TIMING_COLUMNS, spec.digest), encoding="utf-8")
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = pool.map(_solve_instance, tasks)
                _append_all(results, rec_path, tim_path, done, timings)
        else:
            _append_all(map(_solve_instance, tasks), rec_path, tim_path, done, timings)

    records = [done[k] for k in sorted(done)]
    with open(rec_path, "w", encoding="utf-8") as fh:
        fh.write(_csv_header(RECORD_COLUMNS, spec.digest))
        fh.writelines(_record_row(r) for r in records)
    with open(tim_path, "w", encoding="utf-8") as fh:
        fh.write(_csv_header(TIMING_COLUMNS, spec.digest))
        for k in sorted(timings):
            row = timings[k]
            fh.write(",".join(_fmt(row[c]) if not isinstance(row[c], str) else row[c] for c in TIMING_COLUMNS) + "\n")
    for r in records:
        t = timings.get(r.key)
        if t is not None:
            r.wall_total = float(t["setup_s"]) + float(t["loop_s"])
            r.wall_per_iter = float(t["per_iter_s"])
    return records


def _append_all(results, rec_path, tim_path, done, timings):
    for batch in results:
        with open(rec_path, "a", encoding="utf-8") as fr, open(tim_path, "a", encoding="utf-8") as ft:
            for rec, timing in batch:
                fr.write(_record_row(rec))
                ft.write(_timing_row(rec, timing))
                done[rec.key] = rec
                timings[rec.key] = {"instance_id": rec.instance_id, "method": rec.method, "iterations": rec.iterations, **timing}


# --- summaries ------------------------------------------------------------------------


@dataclass
class SummaryRow:
    method: str
    n: int
    iterations: int
    count: int
    median: float
    q25: float
    q75: float


@dataclass
class BatchSummary:
    rows: list = field(default_factory=list)
    digest: str = ""

    def get(self, method: str, n: int, iterations: int) -> SummaryRow | None:
        for r in self.rows:
            if (r.method, r.n, r.iterations) == (method, n, iterations):
                return r
        return None


def _quartiles(vals) -> tuple[float, float, float]:
    q25, med, q75 = np.percentile(np.sort(np.asarray(vals, dtype=float)), [25, 50, 75], method="linear")
    return float(med), float(q25), float(q75)


def summarize(records, digest: str = "") -> BatchSummary:
    """Median and quartiles of the relative error per ``(method, N, iterations)`` group."""
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.method, r.n, r.iterations), []).append(r.eps)
    rows = []
    for key in sorted(groups):
        vals = [v for v in groups[key] if v is not None]
        if not vals:
            logger.warning("no relative errors for group %s; omitted", key)
            continue
        med, q25, q75 = _quartiles(vals)
        rows.append(SummaryRow(*key, len(vals), med, q25, q75))
    return BatchSummary(rows, digest)


def summarize_timing(records) -> list[tuple[str, int, int, float]]:
    """Median per-iteration wall time per ``(method, N, iterations)``."""
    groups: dict[tuple, list] = {}
    for r in records:
        if np.isfinite(r.wall_per_iter):
            groups.setdefault((r.method, r.n, r.iterations), []).append(r.wall_per_iter)
    return [(*k, float(np.median(v))) for k, v in sorted(groups.items())]


SUMMARY_COLUMNS = ["method", "n", "iterations", "count", "median", "q25", "q75"]
LONG_COLUMNS = ["plot", "method", "n", "iterations", "stat", "value"]


def emit_report(summary: BatchSummary, out_dir, timing=None) -> list[Path]:
    """Write ``summary.csv`` and ``plot_long.csv``; timing rows go to ``timing_summary.csv``.

    ``plot`` in the long table is ``eps_vs_n`` or ``eps_vs_iterations``; each summary row
    appears once under each. Column order is fixed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spath, lpath = out_dir / "summary.csv", out_dir / "plot_long.csv"
    with open(spath, "w", encoding="utf-8") as fh:
        fh.write(_csv_header(SUMMARY_COLUMNS, summary.digest))
        for r in summary.rows:
            fh.write(",".join(_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS) + "\n")
    with open(lpath, "w", encoding="utf-8") as fh:
        fh.write(_csv_header(LONG_COLUMNS, summary.digest))
        for plot in ("eps_vs_n", "eps_vs_iterations"):
            for r in summary.rows:
                for stat in ("median", "q25", "q75"):
                    fh.write(",".join(_fmt(v) for v in (plot, r.method, r.n, r.iterations, stat, getattr(r, stat))) + "\n")
    paths = [spath, lpath]
    if timing is not None:
        tpath = out_dir / "timing_summary.csv"
        with open(tpath, "w", encoding="utf-8") as fh:
            fh.write(_csv_header(["plot", "method", "n", "iterations", "stat", "value"], summary.digest))
            for method, n, it, t in timing:
                fh.write(",".join(_fmt(v) for v in ("time_vs_n", method, n, it, "median_per_iter_s", t)) + "\n")
        paths.append(tpath)
    return paths


def read_summary(path) -> BatchSummary:
    rows = []
    for row in _read_csv(Path(path)):
        rows.append(
            SummaryRow(
                row["method"], int(row["n"]), int(row["iterations"]), int(row["count"]),
                float(row["median"]), float(row["q25"]), float(row["q75"]),
            )
        )
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    digest = first.split("digest=", 1)[1].strip() if "digest=" in first else ""
    return BatchSummary(rows, digest)


# --- scaling fits -----------------------------------------------------------------------


@dataclass
class ScalingFit:
    exponent: float
    intercept: float
    stderr: float


def fit_scaling(ns, ts, n_boot: int = 1000, seed: int = 0) -> ScalingFit:
    """Least-squares fit of ``log t = intercept + exponent * log N`` with a bootstrap error.

    The standard error is the spread of exponents refitted on ``n_boot`` resamples of the
    points (with replacement); resamples with a single distinct ``N`` are redrawn.
    """
    ns = np.asarray(ns, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if ns.shape != ts.shape or ns.size < 3:
        raise ValueError("need at least three (N, time) points")
    if np.any(ns <= 0) or np.any(ts <= 0):
        raise ValueError("N and times must be positive")
    if np.unique(ns).size < 2:
        raise ValueError("degenerate fit: all N are equal")
    lx, ly = np.log(ns), np.log(ts)
    exponent, intercept = np.polyfit(lx, ly, 1)
    rng = np.random.default_rng(seed)
    boots = []
    while len(boots) < n_boot:
        idx = rng.integers(0, ns.size, ns.size)
        if np.unique(lx[idx]).size < 2:
            continue
        boots.append(np.polyfit(lx[idx], ly[idx], 1)[0])
    return ScalingFit(float(exponent), float(intercept), float(np.std(boots, ddof=1)))


def time_per_iteration(inst: QuboInstance, config: AnnealConfig, iterations: int = 3, warmup: int = 1) -> float:
    """Median wall time of one gradient evaluation plus ADAM update, excluding warm-up steps.

    Starts from random parameters so that every coupling in ``M`` is nonzero (dense regime).
    """
    work = fold_bias(inst) if inst.has_bias else inst
    mask = None
    if config.sparse_m:
        mask = np.zeros((work.n, work.n), dtype=bool)
        mask[work.rows, work.cols] = mask[work.cols, work.rows] = True
    plan = gcs.loss_plan(work, mask)
    rng = np.random.default_rng(config.seed)
    params = gcs.GcsParams.random(work.n, rng, scale=0.1)
    if mask is not None:
        params = gcs.GcsParams(work.n, params.x, np.where(mask, params.m, 0.0), params.y)
    state = OptimizerState.like(params)
    times = []
    for k in range(warmup + iterations):
        t = time.perf_counter()
        grads = gcs.gradient(params, 0.5, work, plan)
        params = adam_step(params, grads, state, config)
        if k >= warmup:
            times.append(time.perf_counter() - t)
    return float(np.median(times))


def default_threads() -> int:
    return max(1, int(os.environ.get("GCSANNEAL_THREADS", "1")))
