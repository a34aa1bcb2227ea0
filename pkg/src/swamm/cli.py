"""Command line interface.

Subcommands
-----------
gen     materialize a generated stream to a binary file
run     drive one experiment config, writing metric rows and a summary CSV
sweep   run the accuracy grid one value at a time, then combine and plot
verify  run the property suites, printing one pass/fail line per suite
report  re-render figures from an existing results CSV

Exit codes: 0 on success, 1 for invalid configuration or arguments,
2 when a property suite fails, 3 for I/O failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .experiment import (
    ConfigError,
    ExperimentError,
    emit_results,
    generate_stream,
    load_config,
    read_results,
    run_experiment,
    validate_config,
)
from .streams import StreamFormatError, read_stream, write_stream


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; keep that code for suite
    failures and report bad usage as invalid configuration instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="swamm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a generated stream to a file")
    gen.add_argument("--config", required=True, help="experiment config JSON")
    gen.add_argument("--out", required=True, help="output stream file")
    gen.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    gen.set_defaults(handler=_cmd_gen)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True, help="experiment config JSON")
    run.add_argument("--out", required=True, help="output results CSV")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    run.add_argument("--stride", type=int, default=None,
                     help="override the query stride")
    run.add_argument("--stream", default=None,
                     help="stream file for the 'file' generator")
    run.add_argument("--timing", action="store_true",
                     help="fill update_ns with wall-clock timings")
    run.add_argument("--figures", action="store_true",
                     help="also render figures next to the CSV")
    run.set_defaults(handler=_cmd_run)

    sweep = sub.add_parser("sweep", help="run the eps grid cell by cell")
    sweep.add_argument("--config", required=True, help="experiment config JSON")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    sweep.add_argument("--stride", type=int, default=None,
                       help="override the query stride")
    sweep.add_argument("--stream", default=None,
                       help="stream file for the 'file' generator")
    sweep.add_argument("--timing", action="store_true",
                       help="fill update_ns with wall-clock timings")
    sweep.set_defaults(handler=_cmd_sweep)

    verify = sub.add_parser("verify", help="run the property suites")
    verify.add_argument("--only", default=None,
                        help="comma-separated subset of suite names")
    verify.set_defaults(handler=_cmd_verify)

    report = sub.add_parser("report", help="render figures from results")
    report.add_argument("--results", required=True, help="results CSV path")
    report.add_argument("--out", default=None,
                        help="directory for the figures (default: alongside)")
    report.set_defaults(handler=_cmd_report)
    return parser


def _load(args) -> "ExperimentConfig":
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "stride", None) is not None:
        cfg = dataclasses.replace(cfg, query_stride=args.stride)
    validate_config(cfg)
    return cfg


def _stream_arg(cfg, args):
    if cfg.generator != "file":
        if getattr(args, "stream", None):
            raise ConfigError(
                "--stream only applies when the generator is 'file'"
            )
        return None
    if not getattr(args, "stream", None):
        raise ConfigError("generator 'file' requires --stream")
    return read_stream(args.stream)


def _cmd_gen(args) -> int:
    cfg = _load(args)
    if cfg.generator == "file":
        raise ConfigError("cannot generate a stream from a 'file' config")
    x, y = generate_stream(cfg)
    write_stream(args.out, x, y)
    print(f"wrote {cfg.n} column pairs ({cfg.d_x}x{cfg.d_y}) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load(args)
    stream = _stream_arg(cfg, args)
    try:
        rows = run_experiment(cfg, stream=stream, measure_time=args.timing)
    except ExperimentError as exc:
        if exc.partial_rows:
            summary = emit_results(exc.partial_rows, args.out)
            print(f"partial results ({len(exc.partial_rows)} rows) at "
                  f"{args.out} and {summary}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = emit_results(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    print(f"wrote summary to {summary}")
    if args.figures:
        from .plots import render_report

        for figure in render_report(rows, args.out):
            print(f"wrote figure {figure}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    stream = _stream_arg(cfg, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    combined = []
    for eps in cfg.eps_grid:
        cell_cfg = dataclasses.replace(cfg, eps_grid=[eps])
        rows = run_experiment(cell_cfg, stream=stream,
                              measure_time=args.timing)
        combined.extend(rows)
        cell_path = out_dir / f"eps_{eps:g}.csv"
        emit_results(rows, cell_path)
        print(f"eps={eps:g}: wrote {len(rows)} rows to {cell_path}")
    combined.sort(key=lambda r: (r.method, r.eps, r.t))
    combined_path = out_dir / "combined.csv"
    summary = emit_results(combined, combined_path)
    print(f"wrote {len(combined)} combined rows to {combined_path}")
    print(f"wrote summary to {summary}")
    from .plots import render_report

    for figure in render_report(combined, combined_path):
        print(f"wrote figure {figure}")
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_all

    names = args.only.split(",") if args.only else None
    results = run_all(names)
    failures = 0
    for result in results:
        status = "PASS" if result.ok else "FAIL"
        failures += not result.ok
        print(f"{status} {result.name}: {result.detail}")
    if failures:
        print(f"{failures} of {len(results)} suites failed", file=sys.stderr)
        return 2
    print(f"all {len(results)} suites passed")
    return 0


def _cmd_report(args) -> int:
    rows = read_results(args.results)
    results_path = Path(args.results)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        anchor = out_dir / results_path.name
    else:
        anchor = results_path
    from .plots import render_report

    for figure in render_report(rows, anchor):
        print(f"wrote figure {figure}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StreamFormatError as exc:
        print(f"stream error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
