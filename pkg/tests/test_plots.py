from swamm.experiment import ExperimentConfig, run_experiment
from swamm.plots import cell_stats, render_report


def _rows():
    cfg = ExperimentConfig(
        d_x=10, d_y=8, n=120, N=40, eps_grid=[0.5, 0.25],
        seed=2, methods=["socod", "sampling"],
    )
    return run_experiment(cfg)


def test_cell_stats_collapses_cells():
    rows = _rows()
    stats = cell_stats(rows)
    assert len(stats) == 4
    for s in stats:
        group = [r for r in rows if (r.method, r.eps) == (s["method"], s["eps"])]
        assert s["max_err"] == max(r.rel_err for r in group)
        assert s["cols"] == max(r.max_sketch_cols for r in group)
        assert s["max_err"] >= s["mean_err"]


def test_render_report_writes_png_files(tmp_path):
    rows = _rows()
    anchor = tmp_path / "results.csv"
    written = render_report(rows, anchor)
    assert [p.name for p in written] == [
        "results_err_vs_size.png", "results_size_vs_eps.png",
    ]
    for p in written:
        assert p.exists()
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
