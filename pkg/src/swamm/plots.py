"""Figure rendering for experiment results.

The report path writes PNG figures next to the delimited output so a sweep
leaves both machine-readable rows and something a human can look at.  All
figures are derived from the same MetricRow lists the CSVs are built from.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .experiment import MetricRow, _grouped  # noqa: E402


def cell_stats(rows: list[MetricRow]) -> list[dict]:
    """Collapse rows to one record per (method, eps) cell."""
    stats = []
    for (method, eps), group in _grouped(rows):
        errs = [r.rel_err for r in group]
        stats.append({
            "method": method,
            "eps": eps,
            "max_err": max(errs),
            "mean_err": sum(errs) / len(errs),
            "cols": max(r.max_sketch_cols for r in group),
        })
    return stats


def _methods(stats):
    seen = []
    for s in stats:
        if s["method"] not in seen:
            seen.append(s["method"])
    return seen


def render_error_vs_size(rows: list[MetricRow], path) -> Path:
    """Peak column pairs against relative error, one curve per method."""
    stats = cell_stats(rows)
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0), sharey=True)
    for key, ax, title in (
        ("max_err", axes[0], "worst query"),
        ("mean_err", axes[1], "mean query"),
    ):
        for method in _methods(stats):
            pts = sorted(
                (s["cols"], s[key]) for s in stats if s["method"] == method
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", label=method)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("peak column pairs")
        ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
    axes[0].set_ylabel("relative error")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_size_vs_eps(rows: list[MetricRow], path) -> Path:
    """Accuracy target against the space each method actually used."""
    stats = cell_stats(rows)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for method in _methods(stats):
        pts = sorted(
            (s["eps"], s["cols"]) for s in stats if s["method"] == method
        )
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="s", label=method)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("accuracy target eps")
    ax.set_ylabel("peak column pairs")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_report(rows: list[MetricRow], out_csv) -> list[Path]:
    """Render the standard figures next to an emitted results CSV."""
    out_csv = Path(out_csv)
    stem = out_csv.stem
    parent = out_csv.parent
    written = [
        render_error_vs_size(rows, parent / f"{stem}_err_vs_size.png"),
        render_size_vs_eps(rows, parent / f"{stem}_size_vs_eps.png"),
    ]
    return written
