"""Sliding-window approximate matrix multiplication sketches.

The package maintains small column factors (A, B) over the most recent N
column pairs of two correlated streams so that ``A @ B.T`` approximates
the exact window product ``Xw @ Yw.T``.  The main pieces:

- :class:`~swamm.cod.CodSketch`: paired-stream compression for whole
  streams (no windowing).
- :class:`~swamm.socod.SlidingSketch`: the windowed sketch for unit-norm
  columns, with a simple recomputing update and a faster incremental one.
- :class:`~swamm.mlsocod.LayeredSketch`: windowed sketching for columns
  whose squared norms range over [1, R].
- :class:`~swamm.baselines.PrioritySampler` and
  :class:`~swamm.baselines.ExactWindowOracle`: the comparison points.
- :mod:`~swamm.experiment`: config-driven benchmark harness with CSV
  output, plus figure rendering in :mod:`~swamm.plots`.
"""

from .baselines import ExactWindowOracle, PrioritySampler
from .cod import CodSketch
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    MetricRow,
    emit_results,
    generate_stream,
    load_config,
    read_results,
    run_experiment,
    validate_config,
)
from .lambda_snapshot import LambdaCounter
from .mlsocod import LayeredSketch
from .socod import SlidingSketch, Snapshot, SnapshotQueue
from .streams import (
    StreamFormatError,
    gen_random_noisy,
    gen_uniform_random,
    normalize_columns,
    read_stream,
    write_stream,
)

__version__ = "0.1.0"

__all__ = [
    "CodSketch",
    "ConfigError",
    "ExactWindowOracle",
    "ExperimentConfig",
    "ExperimentError",
    "LambdaCounter",
    "LayeredSketch",
    "MetricRow",
    "PrioritySampler",
    "SlidingSketch",
    "Snapshot",
    "SnapshotQueue",
    "StreamFormatError",
    "emit_results",
    "gen_random_noisy",
    "gen_uniform_random",
    "generate_stream",
    "load_config",
    "normalize_columns",
    "read_results",
    "read_stream",
    "run_experiment",
    "validate_config",
    "write_stream",
    "__version__",
]
