"""Experiment driver: configs, metric collection, and CSV emission.

A run crosses every configured method with every accuracy target in
``eps_grid``, drives the same generated stream through the method and an
exact-window oracle, and records the relative correlation error
``||Xw @ Yw.T - A @ B.T||_2 / (||Xw||_F * ||Yw||_F)`` at a fixed query
stride, along with the peak number of column pairs the method held.

Methods see the stream in the input model they are defined for: the
normalized-model methods (socod, sampling, oracle) consume column-
normalized streams, while mlsocod consumes the stream rescaled so the
smallest column norm is 1, with config field ``R`` bounding the squared
norms.  Cells are deterministic functions of (config, seed).
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import ExactWindowOracle, PrioritySampler
from .linalg import frobenius_norm, spectral_norm
from .mlsocod import LayeredSketch
from .socod import SlidingSketch
from .streams import gen_random_noisy, gen_uniform_random, normalize_columns

GENERATORS = ("uniform_random", "random_noisy", "file")
METHODS = ("socod", "mlsocod", "sampling", "oracle")

ROW_HEADER = ("method", "eps", "t", "rel_err", "max_sketch_cols", "update_ns")
SUMMARY_HEADER = (
    "method", "eps", "max_rel_err", "mean_rel_err",
    "max_sketch_cols", "mean_update_ns",
)


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


class ExperimentError(RuntimeError):
    """A cell failed mid-run; rows finished so far ride along."""

    def __init__(self, message: str, partial_rows: list):
        super().__init__(message)
        self.partial_rows = partial_rows


@dataclass
class ExperimentConfig:
    """Knobs for one experiment; JSON configs mirror these field names."""

    generator: str = "uniform_random"
    d_x: int = 200
    d_y: int = 100
    n: int = 4000
    N: int = 1000  # window length
    eps_grid: list[float] = field(
        default_factory=lambda: [0.5, 0.25, 0.125, 0.0625, 0.03125]
    )
    R: float = 1024.0  # squared-norm bound for unnormalized runs
    zeta: float = 100.0  # noise ratio for the random_noisy generator
    signal_dim: int = 40  # m for the random_noisy generator
    seed: int = 0
    methods: list[str] = field(default_factory=lambda: ["socod", "sampling"])
    query_stride: int = 0  # 0 means N // 10


@dataclass
class MetricRow:
    method: str
    eps: float
    t: int
    rel_err: float
    max_sketch_cols: int
    update_ns: int


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.generator not in GENERATORS:
        raise ConfigError(f"unknown generator {cfg.generator!r}")
    for name in ("d_x", "d_y", "n", "N"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or value < 1:
            raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    if cfg.N > cfg.n:
        raise ConfigError(f"window N={cfg.N} exceeds stream length n={cfg.n}")
    if not cfg.eps_grid:
        raise ConfigError("eps_grid must not be empty")
    for eps in cfg.eps_grid:
        if not (0.0 < eps <= 1.0):
            raise ConfigError(f"eps values must lie in (0, 1], got {eps}")
    if not cfg.methods:
        raise ConfigError("methods must not be empty")
    for method in cfg.methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}")
    if cfg.R < 1.0:
        raise ConfigError(f"R must be >= 1, got {cfg.R}")
    if cfg.zeta <= 0:
        raise ConfigError(f"zeta must be positive, got {cfg.zeta}")
    if cfg.signal_dim < 1:
        raise ConfigError(f"signal_dim must be >= 1, got {cfg.signal_dim}")
    if cfg.generator == "random_noisy" and cfg.signal_dim > min(cfg.d_x, cfg.d_y):
        raise ConfigError("signal_dim must not exceed min(d_x, d_y)")
    if not (0 <= cfg.seed < 2 ** 64):
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if cfg.query_stride < 0:
        raise ConfigError("query_stride must be >= 0")


def load_config(path) -> ExperimentConfig:
    """Read a JSON config, rejecting unknown keys."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    cfg = ExperimentConfig(**raw)
    validate_config(cfg)
    return cfg


def generate_stream(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Produce the raw (X, Y) stream for a non-file generator."""
    if cfg.generator == "uniform_random":
        return gen_uniform_random(cfg.d_x, cfg.d_y, cfg.n, cfg.seed)
    if cfg.generator == "random_noisy":
        return gen_random_noisy(
            cfg.d_x, cfg.d_y, cfg.n, cfg.signal_dim, cfg.zeta, cfg.seed
        )
    raise ConfigError("generator 'file' needs an explicit stream")


def run_experiment(cfg: ExperimentConfig,
                   stream: tuple[np.ndarray, np.ndarray] | None = None,
                   measure_time: bool = False) -> list[MetricRow]:
    """Drive every (method, eps) cell and collect metric rows.

    ``stream`` supplies the raw (X, Y) pair when the generator is "file".
    Timing is off by default so identical configs reproduce identical rows;
    pass ``measure_time=True`` to fill ``update_ns`` with wall-clock
    measurements instead of zeros.
    """
    validate_config(cfg)
    if cfg.generator == "file":
        if stream is None:
            raise ConfigError("generator 'file' requires a stream argument")
        x_raw, y_raw = stream
        if x_raw.shape != (cfg.d_x, cfg.n) or y_raw.shape != (cfg.d_y, cfg.n):
            raise ConfigError(
                f"stream shapes {x_raw.shape}/{y_raw.shape} do not match config "
                f"({cfg.d_x}x{cfg.n} and {cfg.d_y}x{cfg.n})"
            )
    else:
        x_raw, y_raw = generate_stream(cfg)
    rows: list[MetricRow] = []
    for method in cfg.methods:
        for eps in cfg.eps_grid:
            try:
                rows.extend(
                    _run_cell(cfg, method, eps, x_raw, y_raw, measure_time)
                )
            except Exception as exc:
                raise ExperimentError(
                    f"cell (method={method}, eps={eps}) failed: {exc}",
                    partial_rows=_sorted_rows(rows),
                ) from exc
    return _sorted_rows(rows)


def _sorted_rows(rows: list[MetricRow]) -> list[MetricRow]:
    return sorted(rows, key=lambda r: (r.method, r.eps, r.t))


def _prepare_stream(cfg: ExperimentConfig, method: str,
                    x_raw: np.ndarray, y_raw: np.ndarray):
    """Per-method preprocessing plus the method-specific sketch factory."""
    if method in ("socod", "sampling", "oracle"):
        return normalize_columns(x_raw), normalize_columns(y_raw)
    # mlsocod: anchor the smallest column norm at 1, then check the
    # declared squared-norm bound R actually covers the stream.
    x_norms = np.linalg.norm(x_raw, axis=0)
    y_norms = np.linalg.norm(y_raw, axis=0)
    if np.any(x_norms == 0.0) or np.any(y_norms == 0.0):
        raise ConfigError("mlsocod cannot consume zero columns")
    x = x_raw / x_norms.min()
    y = y_raw / y_norms.min()
    worst = max(
        (x_norms.max() / x_norms.min()) ** 2,
        (y_norms.max() / y_norms.min()) ** 2,
    )
    if worst > cfg.R * (1.0 + 1e-12):
        raise ConfigError(
            f"stream squared norms reach {worst:.3g} after rescaling, "
            f"above configured R={cfg.R}"
        )
    return x, y


def _build_sketch(cfg: ExperimentConfig, method: str, eps: float):
    if method == "socod":
        return SlidingSketch(cfg.d_x, cfg.d_y, eps, cfg.N)
    if method == "mlsocod":
        return LayeredSketch(cfg.d_x, cfg.d_y, eps, cfg.N, cfg.R)
    if method == "sampling":
        k = math.ceil(1.0 / (eps * eps))
        # Key the RNG on the cell itself (method and eps value, not grid
        # position) so a cell run alone matches the same cell in a sweep.
        eps_bits = int(np.float64(eps).view(np.uint64))
        seq = np.random.SeedSequence(
            entropy=cfg.seed, spawn_key=(METHODS.index(method), eps_bits)
        )
        return PrioritySampler(cfg.d_x, cfg.d_y, k, cfg.N, seed=seq)
    if method == "oracle":
        return ExactWindowOracle(cfg.d_x, cfg.d_y, cfg.N)
    raise ConfigError(f"unknown method {method!r}")


def _run_cell(cfg: ExperimentConfig, method: str, eps: float,
              x_raw: np.ndarray, y_raw: np.ndarray,
              measure_time: bool) -> list[MetricRow]:
    x, y = _prepare_stream(cfg, method, x_raw, y_raw)
    sketch = _build_sketch(cfg, method, eps)
    oracle = ExactWindowOracle(cfg.d_x, cfg.d_y, cfg.N)
    stride = cfg.query_stride if cfg.query_stride > 0 else max(1, cfg.N // 10)
    update = sketch.fast_update if method == "socod" else sketch.update
    rows: list[MetricRow] = []
    peak_cols = 0
    spent_ns = 0
    for t in range(1, cfg.n + 1):
        xt = x[:, t - 1]
        yt = y[:, t - 1]
        oracle.update(xt, yt)
        if measure_time:
            t0 = time.perf_counter_ns()
            update(xt, yt)
            spent_ns += time.perf_counter_ns() - t0
        else:
            update(xt, yt)
        peak_cols = max(peak_cols, sketch.column_count)
        if t >= cfg.N and (t - cfg.N) % stride == 0:
            est = _estimate(sketch, method)
            xw, yw = oracle.window()
            err = spectral_norm(xw @ yw.T - est)
            denom = frobenius_norm(xw) * frobenius_norm(yw)
            rows.append(MetricRow(
                method=method,
                eps=eps,
                t=t,
                rel_err=err / denom,
                max_sketch_cols=peak_cols,
                update_ns=spent_ns // t if measure_time else 0,
            ))
    return rows


def _estimate(sketch, method: str) -> np.ndarray:
    if method == "sampling":
        a, b = sketch.estimate()
    elif method == "oracle":
        return sketch.product()
    else:
        a, b = sketch.query()
    return a @ b.T


def emit_results(rows: list[MetricRow], path) -> Path:
    """Write the row CSV at ``path`` and a per-cell summary CSV next to it.

    Returns the summary path (``<stem>_summary.csv``).  Floats are written
    with ``repr`` so identical rows always produce identical bytes.
    """
    path = Path(path)
    summary_path = path.with_name(path.stem + "_summary" + path.suffix)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(ROW_HEADER) + "\n")
            for row in rows:
                fh.write(
                    f"{row.method},{row.eps!r},{row.t},{row.rel_err!r},"
                    f"{row.max_sketch_cols},{row.update_ns}\n"
                )
        with open(summary_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(SUMMARY_HEADER) + "\n")
            for (method, eps), group in _grouped(rows):
                errs = [r.rel_err for r in group]
                fh.write(
                    f"{method},{eps!r},{max(errs)!r},"
                    f"{(sum(errs) / len(errs))!r},"
                    f"{max(r.max_sketch_cols for r in group)},"
                    f"{(sum(r.update_ns for r in group) / len(group))!r}\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return summary_path


def _grouped(rows: list[MetricRow]):
    groups: dict[tuple[str, float], list[MetricRow]] = {}
    for row in rows:
        groups.setdefault((row.method, row.eps), []).append(row)
    return sorted(groups.items(), key=lambda kv: kv[0])


def read_results(path) -> list[MetricRow]:
    """Parse a row CSV produced by :func:`emit_results`."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(ROW_HEADER):
            raise ValueError(f"{path}: unexpected results header {header!r}")
        for line in fh:
            method, eps, t, rel_err, cols, ns = line.rstrip("\n").split(",")
            rows.append(MetricRow(method, float(eps), int(t), float(rel_err),
                                  int(cols), int(ns)))
    return rows
