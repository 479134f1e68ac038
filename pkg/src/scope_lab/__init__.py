"""Scalar-autodiff laboratory for a family of classification and RL losses.

The package is organized bottom-up: `autodiff` (reverse-mode scalars),
`nets`/`optim` (tiny MLPs and their updates), `losses` (the loss family),
`advantage` (GAE and normalization), `training` (A2C, clipped-ratio policy
optimization, supervised loops), `envs`/`metrics` (testbeds and scoring),
`verification` (analytic self-checks), and `experiment`/`cli` (seeded trial
grids with CSV artifacts).
"""

from .advantage import (
    AdvantageBatch,
    RolloutSegment,
    compute_gae,
    normalize_advantages,
)
from .autodiff import DiffNode, backward, finite_difference_gradient, softmax, softmax_values
from .envs import (
    BinaryMaze,
    ClassificationMdp,
    Dataset,
    DatasetSpec,
    EnvState,
    SparseChain,
    Transition,
    buffer_class_histogram,
    export_dataset_csv,
    generate_dataset,
    make_binary_maze,
    make_sparse_chain,
)
from .exceptions import (
    ConfigError,
    EnvUsageError,
    GraphError,
    NumericError,
    ScopeLabError,
    ShapeError,
)
from .experiment import (
    ExperimentConfig,
    RunResult,
    default_config,
    parse_config_file,
    run_experiment,
)
from .losses import LossConfig
from .metrics import PrecisionReport, precision_report
from .nets import MlpParams, forward_mlp, forward_values, grad_norm, zero_grads
from .optim import Adam, Sgd, clip_gradient_norm, make_optimizer
from .training import (
    MetricsRow,
    TrainConfig,
    TrainResult,
    collect_rollout,
    load_checkpoint,
    save_checkpoint,
    train_a2c,
    train_ppo,
    train_supervised,
)
from .verification import CheckResult, run_all_checks

__all__ = [
    "AdvantageBatch",
    "Adam",
    "BinaryMaze",
    "CheckResult",
    "ClassificationMdp",
    "ConfigError",
    "Dataset",
    "DatasetSpec",
    "DiffNode",
    "EnvState",
    "EnvUsageError",
    "ExperimentConfig",
    "GraphError",
    "LossConfig",
    "MetricsRow",
    "MlpParams",
    "NumericError",
    "PrecisionReport",
    "RolloutSegment",
    "RunResult",
    "ScopeLabError",
    "Sgd",
    "ShapeError",
    "SparseChain",
    "TrainConfig",
    "TrainResult",
    "Transition",
    "backward",
    "buffer_class_histogram",
    "clip_gradient_norm",
    "collect_rollout",
    "compute_gae",
    "default_config",
    "export_dataset_csv",
    "finite_difference_gradient",
    "forward_mlp",
    "forward_values",
    "generate_dataset",
    "grad_norm",
    "load_checkpoint",
    "make_binary_maze",
    "make_optimizer",
    "make_sparse_chain",
    "normalize_advantages",
    "parse_config_file",
    "precision_report",
    "run_all_checks",
    "run_experiment",
    "save_checkpoint",
    "softmax",
    "softmax_values",
    "train_a2c",
    "train_ppo",
    "train_supervised",
    "zero_grads",
]
