"""Property suites behind the ``verify`` CLI subcommand.

Each check exercises one advertised guarantee end to end: counter
sandwich bounds, sketch error bounds, the rank-one removal identity,
path agreement, space growth, the error/space trade-off, update speed,
and harness determinism.  Checks return a :class:`CheckResult` instead
of raising so the CLI can print one pass/fail line per suite.
"""

from __future__ import annotations

import math
import tempfile
import time
from collections import deque
from functools import lru_cache
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .cod import CodSketch
from .experiment import ExperimentConfig, emit_results, run_experiment
from .lambda_snapshot import LambdaCounter
from .linalg import spectral_norm
from .mlsocod import LayeredSketch
from .socod import SlidingSketch


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str


def _unit_directions(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    g = rng.standard_normal((d, n))
    return g / np.linalg.norm(g, axis=0)


def _planted_pair(rng: np.random.Generator, d_x: int, d_y: int, n: int,
                  strength: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit-column streams sharing one persistent heavy direction."""
    u0 = rng.standard_normal(d_x)
    u0 /= np.linalg.norm(u0)
    v0 = rng.standard_normal(d_y)
    v0 /= np.linalg.norm(v0)
    x = rng.standard_normal((d_x, n)) + strength * u0[:, None]
    y = rng.standard_normal((d_y, n)) + strength * v0[:, None]
    x /= np.linalg.norm(x, axis=0)
    y /= np.linalg.norm(y, axis=0)
    return x, y


def check_counter() -> CheckResult:
    """Golden stream plus the two-sided estimate sandwich."""
    bits = [1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 0]
    counter = LambdaCounter(3, 5)
    for bit in bits:
        counter.push_bit(bit)
    golden_est = counter.estimate()
    golden_true = sum(bits[-5:])
    golden_ok = golden_est == 4 and golden_true == 3

    rng = np.random.default_rng(0xB175)
    stream = rng.integers(0, 2, size=100_000).tolist()
    violations = 0
    checked = 0
    for lam in (1, 3, 7):
        for window in (5, 50, 500):
            counter = LambdaCounter(lam, window)
            recent: deque[int] = deque()
            live = 0
            for bit in stream:
                counter.push_bit(bit)
                recent.append(bit)
                live += bit
                if len(recent) > window:
                    live -= recent.popleft()
                estimate = counter.estimate()
                checked += 1
                if not (live <= estimate <= live + 2 * lam):
                    violations += 1
    ok = golden_ok and violations == 0
    detail = (
        f"golden estimate {golden_est} (want 4) true {golden_true} (want 3); "
        f"sandwich violations {violations} over {checked} checks"
    )
    return CheckResult("counter", ok, detail)


def check_cod_bound() -> CheckResult:
    """Compression error within 2 * ||X||_F * ||Y||_F / l at every prefix."""
    d_x, d_y, n = 40, 30, 500
    widths = (4, 8, 16)
    violations = 0
    worst_gap = -math.inf
    for i in range(100):
        l = widths[i % len(widths)]
        rng = np.random.default_rng(3000 + i)
        xs = rng.standard_normal((d_x, n))
        ys = rng.standard_normal((d_y, n))
        sketch = CodSketch(d_x, d_y, l)
        exact = np.zeros((d_x, d_y))
        fx2 = 0.0
        fy2 = 0.0
        for t in range(n):
            x = xs[:, t]
            y = ys[:, t]
            sketch.insert(x, y)
            exact += np.outer(x, y)
            fx2 += float(x @ x)
            fy2 += float(y @ y)
            err = spectral_norm(exact - sketch.product())
            bound = 2.0 * math.sqrt(fx2 * fy2) / l
            worst_gap = max(worst_gap, err - bound)
            if err > bound + 1e-9:
                violations += 1
    ok = violations == 0
    detail = (
        f"100 streams x {n} prefixes, widths {widths}; "
        f"worst error minus bound {worst_gap:.3e} (allowed 1e-9)"
    )
    return CheckResult("cod-bound", ok, detail)


def check_window_bound() -> CheckResult:
    """Sliding-window query error within 8 * eps * N, snapshots within 2/eps."""
    d_x, d_y, n_window, steps = 32, 24, 400, 1600
    pieces = []
    ok = True
    for eps in (0.5, 0.25, 0.125):
        started = time.perf_counter()
        rng = np.random.default_rng(40_000 + int(1 / eps))
        xs, ys = _planted_pair(rng, d_x, d_y, steps, strength=4.0)
        sketch = SlidingSketch(d_x, d_y, eps, n_window)
        window: deque[tuple[np.ndarray, np.ndarray]] = deque()
        exact = np.zeros((d_x, d_y))
        max_err = 0.0
        peak_queue = 0
        violations = 0
        for t in range(1, steps + 1):
            x = xs[:, t - 1]
            y = ys[:, t - 1]
            sketch.fast_update(x, y)
            window.append((x, y))
            exact += np.outer(x, y)
            if len(window) > n_window:
                ox, oy = window.popleft()
                exact -= np.outer(ox, oy)
            peak_queue = max(peak_queue, len(sketch.primary.queue))
            if t >= n_window:
                a, b = sketch.query()
                err = spectral_norm(exact - a @ b.T)
                max_err = max(max_err, err)
                if err > 8.0 * eps * n_window:
                    violations += 1
        elapsed = time.perf_counter() - started
        cap = 2.0 / eps
        eps_ok = (
            violations == 0 and peak_queue <= cap and elapsed < 60.0
        )
        ok = ok and eps_ok
        pieces.append(
            f"eps={eps}: max err {max_err:.1f} of {8.0 * eps * n_window:.0f}, "
            f"peak queue {peak_queue} of {cap:.0f}, {elapsed:.1f}s"
        )
    return CheckResult("window-bound", ok, "; ".join(pieces))


def check_removal_identity() -> CheckResult:
    """Every snapshot extraction is an exact rank-one product removal."""
    d_x, d_y, n_window, steps = 32, 24, 250, 2000
    rng = np.random.default_rng(0xC0D)
    xs, ys = _planted_pair(rng, d_x, d_y, steps, strength=4.0)
    sketch = SlidingSketch(d_x, d_y, 0.125, n_window, validate=True)
    try:
        for t in range(steps):
            sketch.fast_update(xs[:, t], ys[:, t])
    except AssertionError as exc:
        return CheckResult("removal-identity", False, f"violated: {exc}")
    ok = sketch.extraction_count >= 10
    detail = (
        f"{sketch.extraction_count} extractions over {steps} steps, "
        f"{sketch.validated_checks} identity/orthogonality checks passed"
    )
    return CheckResult("removal-identity", ok, detail)


def check_path_equivalence() -> CheckResult:
    """Incremental and recomputing updates give matching query products."""
    d_x, d_y, n_window, steps = 32, 24, 300, 900
    tol = 1e-6
    worst = 0.0
    violations = 0
    for s in range(5):
        rng = np.random.default_rng(900 + s)
        xs = _unit_directions(rng, d_x, steps)
        ys = _unit_directions(rng, d_y, steps)
        fast = SlidingSketch(d_x, d_y, 0.25, n_window)
        simple = SlidingSketch(d_x, d_y, 0.25, n_window)
        for t in range(steps):
            fast.fast_update(xs[:, t], ys[:, t])
            simple.update(xs[:, t], ys[:, t])
            fa, fb = fast.query()
            sa, sb = simple.query()
            gap = spectral_norm(fa @ fb.T - sa @ sb.T)
            worst = max(worst, gap)
            if gap > tol:
                violations += 1
    ok = violations == 0
    detail = (
        f"5 streams x {steps} timestamps, worst product gap {worst:.2e} "
        f"(allowed {tol})"
    )
    return CheckResult("path-equivalence", ok, detail)


def check_layered_bound() -> CheckResult:
    """Unnormalized-model error within 4 * eps * ||Xw||_F * ||Yw||_F."""
    d_x, d_y, n_window, steps = 32, 24, 400, 1600
    pieces = []
    ok = True
    for r_bound, want_depth in ((4.0, 2), (64.0, 6)):
        for eps in (0.25, 0.125):
            rng = np.random.default_rng(int(r_bound) * 1000 + int(1 / eps))
            xs = _unit_directions(rng, d_x, steps)
            ys = _unit_directions(rng, d_y, steps)
            xs = xs * np.sqrt(rng.uniform(1.0, r_bound, size=steps))
            ys = ys * np.sqrt(rng.uniform(1.0, r_bound, size=steps))
            sketch = LayeredSketch(d_x, d_y, eps, n_window, r_bound)
            thresholds = sketch.thresholds
            structure_ok = sketch.depth == want_depth and all(
                thresholds[j + 1] == 2.0 * thresholds[j]
                for j in range(sketch.depth - 1)
            )
            window: deque[tuple[np.ndarray, np.ndarray]] = deque()
            exact = np.zeros((d_x, d_y))
            fx2 = 0.0
            fy2 = 0.0
            cap = 6.0 / eps
            peak_queue = 0
            violations = 0
            max_ratio = 0.0
            for t in range(1, steps + 1):
                x = xs[:, t - 1]
                y = ys[:, t - 1]
                sketch.update(x, y)
                window.append((x, y))
                exact += np.outer(x, y)
                fx2 += float(x @ x)
                fy2 += float(y @ y)
                if len(window) > n_window:
                    ox, oy = window.popleft()
                    exact -= np.outer(ox, oy)
                    fx2 -= float(ox @ ox)
                    fy2 -= float(oy @ oy)
                for layer in sketch.layers:
                    peak_queue = max(
                        peak_queue,
                        len(layer.primary.queue),
                        len(layer.aux.queue),
                    )
                if t >= n_window:
                    a, b = sketch.query()
                    err = spectral_norm(exact - a @ b.T)
                    bound = 4.0 * eps * math.sqrt(fx2 * fy2)
                    max_ratio = max(max_ratio, err / bound)
                    if err > bound + 1e-9:
                        violations += 1
            combo_ok = structure_ok and violations == 0 and peak_queue <= cap
            ok = ok and combo_ok
            pieces.append(
                f"R={r_bound:g} eps={eps}: depth {sketch.depth} "
                f"(want {want_depth}), worst err/bound {max_ratio:.2f}, "
                f"peak queue {peak_queue} of {cap:.0f}"
            )
    return CheckResult("layered-bound", ok, "; ".join(pieces))


@lru_cache(maxsize=None)
def _desk_rows(generator: str):
    cfg = ExperimentConfig(generator=generator, seed=0xD35C)
    return tuple(run_experiment(cfg))


def _cell_table(rows):
    cells: dict[tuple[str, float], dict[str, float]] = {}
    for row in rows:
        cell = cells.setdefault(
            (row.method, row.eps),
            {"cols": 0, "max_err": 0.0, "sum": 0.0, "count": 0},
        )
        cell["cols"] = max(cell["cols"], row.max_sketch_cols)
        cell["max_err"] = max(cell["max_err"], row.rel_err)
        cell["sum"] += row.rel_err
        cell["count"] += 1
    for cell in cells.values():
        cell["mean_err"] = cell["sum"] / cell["count"]
    return cells


def check_space_trend() -> CheckResult:
    """Halving eps roughly doubles sketch columns; sampling grows >= 3x.

    The growth rate is the per-halving geometric mean across the grid.  A
    pointwise ratio is meaningless at the eps=0.5 endpoint, where the
    two-column sketch shrinks everything it compresses to zero and so
    never accumulates enough weight to register snapshots.
    """
    cells = _cell_table(_desk_rows("uniform_random"))
    grid = sorted({eps for (_, eps) in cells}, reverse=True)
    halvings = len(grid) - 1
    socod = [cells[("socod", eps)]["cols"] for eps in grid]
    sampling = [cells[("sampling", eps)]["cols"] for eps in grid]
    socod_rate = (socod[-1] / socod[0]) ** (1.0 / halvings)
    sampling_rate = (sampling[-1] / sampling[0]) ** (1.0 / halvings)
    sampling_ratios = [
        sampling[i + 1] / sampling[i] for i in range(halvings)
    ]
    ok = (
        1.5 <= socod_rate <= 3.0
        and sampling_rate >= 3.0
        and all(r >= 3.0 for r in sampling_ratios)
    )
    detail = (
        f"socod cols {socod}, per-halving rate {socod_rate:.2f} "
        f"(want within [1.5, 3]); sampling cols {sampling}, per-halving "
        f"rate {sampling_rate:.2f} and step ratios "
        f"{['%.2f' % r for r in sampling_ratios]} (want >= 3)"
    )
    return CheckResult("space-trend", ok, detail)


def check_dominance() -> CheckResult:
    """At matched space, sketching beats sampling on >= 4 of 5 grid points."""
    pieces = []
    ok = True
    for generator in ("uniform_random", "random_noisy"):
        cells = _cell_table(_desk_rows(generator))
        grid = sorted({eps for (_, eps) in cells}, reverse=True)
        samp_cols = np.array(
            [cells[("sampling", eps)]["cols"] for eps in grid], dtype=float
        )
        fits = {}
        for key in ("max_err", "mean_err"):
            errs = np.array(
                [cells[("sampling", eps)][key] for eps in grid], dtype=float
            )
            fits[key] = np.polyfit(np.log(samp_cols), np.log(errs), 1)
        wins = 0
        for eps in grid:
            socod = cells[("socod", eps)]
            size = math.log(socod["cols"])
            below = all(
                socod[key] < math.exp(np.polyval(fits[key], size))
                for key in ("max_err", "mean_err")
            )
            wins += below
        ok = ok and wins >= 4
        pieces.append(f"{generator}: {wins} of {len(grid)} grid points")
    return CheckResult("dominance", ok, "; ".join(pieces))


def check_update_speed() -> CheckResult:
    """Incremental updates amortize at least 1.5x faster than recomputing."""
    d, cols = 512, 5000
    eps = 1.0 / 64.0
    rng = np.random.default_rng(0xFA57)
    xs = _unit_directions(rng, d, cols)
    ys = _unit_directions(rng, d, cols)
    fast = SlidingSketch(d, d, eps, cols)
    started = time.perf_counter()
    for t in range(cols):
        fast.fast_update(xs[:, t], ys[:, t])
    fast_elapsed = time.perf_counter() - started
    simple = SlidingSketch(d, d, eps, cols)
    started = time.perf_counter()
    for t in range(cols):
        simple.update(xs[:, t], ys[:, t])
    simple_elapsed = time.perf_counter() - started
    ratio = simple_elapsed / fast_elapsed
    ok = ratio >= 1.5
    detail = (
        f"amortized per column: fast {1e6 * fast_elapsed / cols:.0f}us, "
        f"recomputing {1e6 * simple_elapsed / cols:.0f}us, "
        f"ratio {ratio:.2f} (want >= 1.5)"
    )
    return CheckResult("fast-speed", ok, detail)


def check_determinism() -> CheckResult:
    """Same config and seed produce byte-identical result files."""
    cfg = ExperimentConfig(
        d_x=24, d_y=16, n=360, N=120,
        eps_grid=[0.5, 0.25], R=16.0, seed=99,
        methods=["socod", "mlsocod", "sampling", "oracle"],
        query_stride=30,
    )
    first = run_experiment(cfg)
    second = run_experiment(cfg)
    with tempfile.TemporaryDirectory() as tmp:
        path_a = Path(tmp) / "a.csv"
        path_b = Path(tmp) / "b.csv"
        summary_a = emit_results(first, path_a)
        summary_b = emit_results(second, path_b)
        rows_same = path_a.read_bytes() == path_b.read_bytes()
        summary_same = summary_a.read_bytes() == summary_b.read_bytes()
    ok = rows_same and summary_same
    detail = (
        f"{len(first)} rows; row files identical: {rows_same}, "
        f"summary files identical: {summary_same}"
    )
    return CheckResult("determinism", ok, detail)


ALL_CHECKS: list[tuple[str, Callable[[], CheckResult]]] = [
    ("counter", check_counter),
    ("cod-bound", check_cod_bound),
    ("window-bound", check_window_bound),
    ("removal-identity", check_removal_identity),
    ("path-equivalence", check_path_equivalence),
    ("layered-bound", check_layered_bound),
    ("space-trend", check_space_trend),
    ("dominance", check_dominance),
    ("fast-speed", check_update_speed),
    ("determinism", check_determinism),
]


def run_all(names: list[str] | None = None) -> list[CheckResult]:
    wanted = set(names) if names else None
    if wanted:
        unknown = wanted - {name for name, _ in ALL_CHECKS}
        if unknown:
            raise ValueError(f"unknown check names {sorted(unknown)}")
    results = []
    for name, fn in ALL_CHECKS:
        if wanted and name not in wanted:
            continue
        try:
            results.append(fn())
        except Exception as exc:  # a crashed suite is a failed suite
            results.append(CheckResult(name, False, f"crashed: {exc!r}"))
    return results
