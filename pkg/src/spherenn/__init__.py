"""Feedforward ReLU/binary networks on a reduced parameter space.

Any network of this family can be rewritten, without changing the function
it computes on a bounded input region, so that every hidden unit has a
unit-norm weight vector and a threshold inside a box sized by the region.
This package provides those exact rewrites, projected first-order training
that never leaves the reduced space, a scikit-learn estimator facade, and an
experiment harness comparing constrained and unconstrained fits.
"""

from .canonicalize import (
    CanonReport,
    ConstraintSpec,
    bound_thresholds,
    canonicalize,
    compute_xb,
    threshold_box,
    tight_1d_box,
    normalize_weights,
)
from .estimator import ConstrainedNetRegressor
from .harness import (
    ExperimentReport,
    ExperimentSpec,
    GridEval,
    RunResult,
    TARGETS,
    eval_curve,
    eval_cut,
    eval_grid,
    gen_dataset,
    parse_experiment_spec,
    run_experiment,
    target_franke,
    target_sine,
    write_curve_csv,
    write_cut_csv,
    write_grid_csv,
    write_history_csv,
)
from .modelio import (
    dumps_model,
    format_float,
    load_model,
    parse_model,
    save_model,
)
from .network import (
    Activation,
    Domain,
    Layer,
    Network,
    activation_apply,
    binary_constant_gadget,
    eval_batch,
    eval_network,
    forward_batch,
    network_from_arrays,
    relu_constant_gadget,
)
from .training import (
    Dataset,
    TrainConfig,
    TrainReport,
    grad_mse,
    init_random,
    load_dataset_csv,
    mse,
    project,
    save_dataset_csv,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "CanonReport",
    "ConstrainedNetRegressor",
    "ConstraintSpec",
    "Dataset",
    "Domain",
    "ExperimentReport",
    "ExperimentSpec",
    "GridEval",
    "Layer",
    "Network",
    "RunResult",
    "TARGETS",
    "TrainConfig",
    "TrainReport",
    "activation_apply",
    "binary_constant_gadget",
    "bound_thresholds",
    "canonicalize",
    "compute_xb",
    "dumps_model",
    "eval_batch",
    "eval_curve",
    "eval_cut",
    "eval_grid",
    "eval_network",
    "format_float",
    "forward_batch",
    "gen_dataset",
    "grad_mse",
    "init_random",
    "load_dataset_csv",
    "load_model",
    "mse",
    "network_from_arrays",
    "normalize_weights",
    "parse_experiment_spec",
    "parse_model",
    "project",
    "relu_constant_gadget",
    "run_experiment",
    "save_dataset_csv",
    "save_model",
    "target_franke",
    "target_sine",
    "threshold_box",
    "tight_1d_box",
    "train",
    "write_curve_csv",
    "write_cut_csv",
    "write_grid_csv",
    "write_history_csv",
    "__version__",
]
