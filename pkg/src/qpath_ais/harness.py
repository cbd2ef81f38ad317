"""Config-driven experiment runner emitting machine-readable result rows.

A config is a nested key/value document (YAML).  Validation is fail-fast
and every diagnostic names the offending field.  Runs are deterministic
given ``base_seed``: the stream for work item (q-index, T-index, seed)
is derived with a seed sequence, so thread fan-out never changes values,
and rows are sorted before emission so it never changes bytes either
(wall-clock columns aside).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .densities import GaussianSpec, StudentTSpec, make_gaussian, make_student_t
from .errors import ConfigError, PreconditionError
from .hmc import HmcConfig, RngStream
from .paths import QPath, Schedule, estimate_partition, linear_schedule, log_density_at
from .ais import run_ais, run_bdmc

__all__ = [
    "MODES",
    "ExperimentConfig",
    "ResultRow",
    "GridRow",
    "AggregateRow",
    "run_experiment",
    "aggregate",
    "write_csv",
    "read_csv",
    "write_jsonl",
    "table1_config",
    "bdmc_curve_config",
    "density_grid_config",
    "CSV_HEADER",
    "GRID_HEADER",
]

MODES = ("ais", "bdmc", "density-grid", "partition-mc")

CSV_HEADER = "mode,q,T,seed,log_lower,log_upper,z_estimate,ess,n_invalid,wall_ms"
GRID_HEADER = "q,beta,z,log_density"

GAUSSIAN_PAIR = {
    "base": {"kind": "gaussian", "mean": -4.0, "variance": 3.0},
    "target": {"kind": "gaussian", "mean": 4.0, "variance": 1.0},
}


@dataclass(frozen=True)
class ResultRow:
    mode: str
    q: float
    T: int
    seed: int
    log_lower: float
    log_upper: Optional[float]
    z_estimate: float
    ess: Optional[float]
    n_invalid: int
    wall_ms: float


@dataclass(frozen=True)
class GridRow:
    q: float
    beta: float
    z: float
    log_density: float


@dataclass(frozen=True)
class AggregateRow:
    q: float
    T: int
    n_seeds: int
    mean_z: float
    std_z: Optional[float]
    abs_error: Optional[float]


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{field}: {message}")


def _parse_density(raw, field: str):
    _require(isinstance(raw, dict), field, "must be a mapping")
    kind = raw.get("kind")
    _require(kind in ("gaussian", "student_t"), f"{field}.kind",
             f"unknown density kind {kind!r} (expected gaussian or student_t)")
    _require("mean" in raw, f"{field}.mean", "is required")
    if kind == "gaussian":
        has_var = "variance" in raw
        has_std = "std" in raw
        _require(has_var != has_std, f"{field}.variance",
                 "give exactly one of variance or std")
        if has_std:
            std = np.asarray(raw["std"], dtype=float)
            _require(np.all(std > 0), f"{field}.std", "must be positive")
            variance = std**2 if std.ndim else float(std) ** 2
        else:
            variance = raw["variance"]
        spec = GaussianSpec(raw["mean"], variance)
        try:
            handle = make_gaussian(spec)
        except Exception as exc:
            raise ConfigError(f"{field}: {exc}") from exc
        return kind, spec, handle
    _require("scale" in raw or "scale_matrix" in raw, f"{field}.scale", "is required")
    _require("dof" in raw, f"{field}.dof", "is required")
    spec = StudentTSpec(raw["mean"], raw.get("scale", raw.get("scale_matrix")), raw["dof"])
    try:
        handle = make_student_t(spec)
    except Exception as exc:
        raise ConfigError(f"{field}: {exc}") from exc
    return kind, spec, handle


def _parse_schedules(raw) -> list[tuple[int, Schedule]]:
    _require(isinstance(raw, dict), "schedule", "must be a mapping")
    if "betas" in raw:
        try:
            sched = Schedule(tuple(float(b) for b in raw["betas"]))
        except (PreconditionError, TypeError, ValueError) as exc:
            raise ConfigError(f"schedule.betas: {exc}") from exc
        return [(sched.n_temperatures, sched)]
    _require(raw.get("type") == "linear", "schedule.type", "must be 'linear'")
    ts = raw.get("T")
    _require(ts is not None, "schedule.T", "is required")
    if not isinstance(ts, (list, tuple)):
        ts = [ts]
    out = []
    for t in ts:
        _require(isinstance(t, int) and t >= 1, "schedule.T",
                 f"must be a positive integer, got {t!r}")
        out.append((t, linear_schedule(t)))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see :func:`ExperimentConfig.from_dict`."""

    mode: str
    base_kind: str
    base_spec: object
    target_kind: str
    target_spec: object
    q_values: tuple
    schedules: tuple
    n_chains: int
    n_seeds: int
    base_seed: int
    hmc: HmcConfig
    z_true: Optional[float]
    beta: Optional[float]
    n_samples: Optional[int]
    grid: Optional[dict]

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a mapping")
        mode = d.get("mode")
        _require(mode in MODES, "mode", f"must be one of {MODES}, got {mode!r}")

        endpoints = d.get("endpoints")
        _require(isinstance(endpoints, dict), "endpoints", "must be a mapping")
        base_kind, base_spec, base_handle = _parse_density(
            endpoints.get("base"), "endpoints.base"
        )
        target_kind, target_spec, target_handle = _parse_density(
            endpoints.get("target"), "endpoints.target"
        )
        _require(base_handle.dim == target_handle.dim, "endpoints",
                 "base and target dimensions differ")

        qs = d.get("q_values")
        _require(isinstance(qs, (list, tuple)) and len(qs) >= 1, "q_values",
                 "must be a non-empty list")
        q_values = []
        for i, q in enumerate(qs):
            _require(isinstance(q, (int, float)) and math.isfinite(q),
                     f"q_values[{i}]", f"must be a finite number, got {q!r}")
            q_values.append(float(q))
        if base_kind == "student_t" and target_kind == "student_t":
            # The family order of a Student-t endpoint bounds usable q > 1
            # orders; at the boundary the implied dof degenerates to 0.
            dim = base_handle.dim
            hi = (dim + 2.0) / dim
            for i, q in enumerate(q_values):
                _require(q <= 1.0 or q < hi, f"q_values[{i}]",
                         f"q={q} is at or beyond the student-t family boundary {hi}")

        if mode == "density-grid":
            schedules = ((0, None),)
        else:
            schedules = tuple(_parse_schedules(d.get("schedule")))

        def _pos_int(key, default=None, required=True):
            v = d.get(key, default)
            if not required and v is None:
                return None
            _require(isinstance(v, int) and v >= 1, key,
                     f"must be a positive integer, got {v!r}")
            return v

        needs_chains = mode in ("ais", "bdmc")
        n_chains = _pos_int("n_chains", required=needs_chains) if needs_chains else 1
        n_seeds = _pos_int("n_seeds", 1, required=False) or 1
        base_seed = d.get("base_seed", 0)
        _require(isinstance(base_seed, int) and 0 <= base_seed < 2**64,
                 "base_seed", f"must be a 64-bit unsigned integer, got {base_seed!r}")

        hmc_raw = d.get("hmc", {})
        _require(isinstance(hmc_raw, dict), "hmc", "must be a mapping")
        try:
            hmc = HmcConfig(**hmc_raw)
        except (PreconditionError, TypeError) as exc:
            raise ConfigError(f"hmc: {exc}") from exc

        z_true = d.get("z_true")
        if z_true is not None:
            _require(isinstance(z_true, (int, float)) and z_true > 0, "z_true",
                     f"must be positive, got {z_true!r}")
            z_true = float(z_true)

        beta = d.get("beta")
        n_samples = None
        if mode == "partition-mc":
            _require(isinstance(beta, (int, float)) and 0.0 <= beta <= 1.0,
                     "beta", f"must lie in [0, 1], got {beta!r}")
            beta = float(beta)
            n_samples = _pos_int("n_samples")

        grid = None
        if mode == "density-grid":
            grid = dict(d.get("grid", {}))
            grid.setdefault("lo", -10.0)
            grid.setdefault("hi", 10.0)
            grid.setdefault("n_points", 201)
            grid.setdefault("n_betas", 10)
            _require(grid["lo"] < grid["hi"], "grid.lo", "must be below grid.hi")
            _require(isinstance(grid["n_points"], int) and grid["n_points"] >= 2,
                     "grid.n_points", "must be an integer >= 2")
            _require(isinstance(grid["n_betas"], int) and grid["n_betas"] >= 2,
                     "grid.n_betas", "must be an integer >= 2")

        return ExperimentConfig(
            mode=mode,
            base_kind=base_kind,
            base_spec=base_spec,
            target_kind=target_kind,
            target_spec=target_spec,
            q_values=tuple(q_values),
            schedules=schedules,
            n_chains=n_chains,
            n_seeds=n_seeds,
            base_seed=base_seed,
            hmc=hmc,
            z_true=z_true,
            beta=beta,
            n_samples=n_samples,
            grid=grid,
        )

    def build_handles(self):
        make = {"gaussian": make_gaussian, "student_t": make_student_t}
        return make[self.base_kind](self.base_spec), make[self.target_kind](self.target_spec)


def derive_stream(base_seed: int, q_index: int, t_index: int, seed_index: int) -> RngStream:
    """Stable per-work-item stream from (base_seed, q-index, T-index, seed)."""
    words = np.random.SeedSequence(
        (base_seed, q_index, t_index, seed_index)
    ).generate_state(2, np.uint64)
    return RngStream(int(words[0]), int(words[1]))


def _run_item(config, base, target, qi, q, ti, t_label, sched, seed_index) -> ResultRow:
    stream = derive_stream(config.base_seed, qi, ti, seed_index)
    path = QPath(base, target, q)
    start = time.perf_counter()
    if config.mode == "ais":
        res = run_ais(path, sched, config.hmc, config.n_chains, stream)
        wall = (time.perf_counter() - start) * 1e3
        return ResultRow("ais", q, t_label, seed_index, res.log_ratio_estimate, None,
                         math.exp(res.log_ratio_estimate), res.ess, res.n_invalid, wall)
    if config.mode == "bdmc":
        res = run_bdmc(path, sched, config.hmc, config.n_chains, stream)
        wall = (time.perf_counter() - start) * 1e3
        return ResultRow("bdmc", q, t_label, seed_index, res.lower, res.upper,
                         math.exp(res.lower), res.forward.ess,
                         res.forward.n_invalid + res.reverse.n_invalid, wall)
    if config.mode == "partition-mc":
        est = estimate_partition(path, config.beta, config.n_samples, stream)
        wall = (time.perf_counter() - start) * 1e3
        return ResultRow("partition-mc", q, t_label, seed_index, est.log_z, None,
                         math.exp(est.log_z), None, 0, wall)
    raise ConfigError(f"mode: unsupported mode {config.mode!r}")


def _density_grid_rows(config) -> list[GridRow]:
    base, target = config.build_handles()
    g = config.grid
    zs = np.linspace(g["lo"], g["hi"], g["n_points"])
    betas = np.linspace(0.0, 1.0, g["n_betas"])
    rows = []
    for q in config.q_values:
        path = QPath(base, target, q)
        for beta in betas:
            ld = np.asarray(log_density_at(path, float(beta), zs), dtype=float)
            rows.extend(
                GridRow(q, float(beta), float(z), float(v)) for z, v in zip(zs, ld)
            )
    return rows


def run_experiment(config: ExperimentConfig, threads: int = 1):
    """Run every (q, T, seed) work item; rows come back sorted by that key.

    ``threads`` = 0 picks the machine's core count.  Values never depend
    on the thread layout because each item derives its own stream.
    """
    if config.mode == "density-grid":
        return _density_grid_rows(config)
    base, target = config.build_handles()
    items = [
        (qi, q, ti, t_label, sched, s)
        for qi, q in enumerate(config.q_values)
        for ti, (t_label, sched) in enumerate(config.schedules)
        for s in range(config.n_seeds)
    ]

    def work(item):
        qi, q, ti, t_label, sched, s = item
        return _run_item(config, base, target, qi, q, ti, t_label, sched, s)

    if threads == 0:
        import os

        threads = os.cpu_count() or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, items))
    else:
        rows = [work(item) for item in items]
    rows.sort(key=lambda r: (r.q, r.T, r.seed))
    return rows


def aggregate(rows, z_true: Optional[float] = None) -> list[AggregateRow]:
    """Per-(q, T) mean and sample std of z_estimate across seeds.

    All rows must share one mode.  The std needs at least two seeds and
    is omitted otherwise; abs_error is reported against z_true when
    given.
    """
    rows = list(rows)
    if not rows:
        return []
    modes = {r.mode for r in rows}
    if len(modes) > 1:
        raise PreconditionError(f"cannot aggregate mixed modes {sorted(modes)}")
    keys = sorted({(r.q, r.T) for r in rows})
    out = []
    for q, t in keys:
        zs = np.array([r.z_estimate for r in rows if (r.q, r.T) == (q, t)])
        mean = float(np.mean(zs))
        std = float(np.std(zs, ddof=1)) if zs.size >= 2 else None
        err = abs(mean - z_true) if z_true is not None else None
        out.append(AggregateRow(q, t, int(zs.size), mean, std, err))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_csv(rows))


def format_csv(rows) -> str:
    rows = list(rows)
    if rows and isinstance(rows[0], GridRow):
        lines = [GRID_HEADER]
        lines += [
            ",".join(_fmt(v) for v in (r.q, r.beta, r.z, r.log_density)) for r in rows
        ]
        return "\n".join(lines) + "\n"
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in (
            r.mode, r.q, r.T, r.seed, r.log_lower, r.log_upper,
            r.z_estimate, r.ess, r.n_invalid, r.wall_ms,
        )))
    return "\n".join(lines) + "\n"


def read_csv(path) -> list:
    """Parse a result CSV back into rows (field-for-field round trip)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        return []
    header = lines[0]
    out = []
    if header == GRID_HEADER:
        for ln in lines[1:]:
            q, beta, z, ld = ln.split(",")
            out.append(GridRow(float(q), float(beta), float(z), float(ld)))
        return out
    if header != CSV_HEADER:
        raise PreconditionError(f"unexpected CSV header {header!r}")
    for ln in lines[1:]:
        f = ln.split(",")
        out.append(ResultRow(
            f[0], float(f[1]), int(f[2]), int(f[3]), float(f[4]),
            float(f[5]) if f[5] else None, float(f[6]),
            float(f[7]) if f[7] else None, int(f[8]), float(f[9]),
        ))
    return out


def write_jsonl(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(asdict(r)) + "\n")


def table1_config() -> dict:
    """Built-in partition estimate sweep over the two-Gaussian testbed."""
    return {
        "mode": "ais",
        "endpoints": dict(GAUSSIAN_PAIR),
        "q_values": [0.0, 0.05, 0.1, 0.9, 0.95, 1.0],
        "schedule": {"type": "linear", "T": 100},
        "n_chains": 2000,
        "n_seeds": 10,
        "base_seed": 20201001,
        "z_true": 1.0,
    }


def bdmc_curve_config() -> dict:
    """Built-in two-sided bound sweep over schedule lengths."""
    return {
        "mode": "bdmc",
        "endpoints": dict(GAUSSIAN_PAIR),
        "q_values": [0.5, 0.9, 1.0],
        "schedule": {"type": "linear", "T": [2, 5, 10, 25, 50, 100, 200]},
        "n_chains": 1000,
        "n_seeds": 10,
        "base_seed": 20201002,
        "z_true": 1.0,
    }


def density_grid_config() -> dict:
    """Built-in ridge-plot data: intermediate log densities on a z grid."""
    return {
        "mode": "density-grid",
        "endpoints": dict(GAUSSIAN_PAIR),
        "q_values": [0.0, 0.5, 0.9, 1.0, 2.0],
        "grid": {"lo": -10.0, "hi": 10.0, "n_points": 201, "n_betas": 10},
    }
