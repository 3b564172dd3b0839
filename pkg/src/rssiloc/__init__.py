"""RSSI fingerprint localization toolkit.

Trains multilayer perceptrons that map anchor RSSI readings to 2D
positions, reproduces the anchor-configuration and training-algorithm
experiments on a synthetic desk-scale testbed, and exports trained
models as firmware-embeddable source.
"""

from .channel import (AnchorConfig, ChannelModel, Deployment,
                      MeasurementInstance, generate_dataset, measure,
                      reference_deployment, rssi_at)
from .data import (Dataset, GridSpec, SplitSpec, grid_points,
                   normalization_stats, read_csv, reference_grid, split,
                   write_csv)
from .errors import (CorruptModel, DegenerateData, DimensionMismatch,
                     FormatError, OutOfRange, ParseError, RssilocError,
                     SolveFailure)
from .evaluation import (EvalReport, ExperimentOptions, ExperimentReport,
                         algorithm_comparison, anchor_sweep, evaluate,
                         localization_error, run_cell)
from .mlp import (Activation, MlpModel, Position, forward, forward_batch,
                  gradient, jacobian, purelin, tansig)
from .modelio import load_model, save_model
from .training import (StopReason, TrainConfig, TrainReport,
                       TrainingAlgorithm, train)

__version__ = "0.1.0"
