"""First-order training with projection onto the reduced parameter space.

After every optimizer update the hidden weights are renormalized to the unit
sphere and the thresholds clipped into their boxes, so every iterate is
feasible.  The projection is exactly idempotent: reprojecting a projected
network changes nothing, bitwise.

Only ReLU networks are trainable here; the binary step has a zero derivative
almost everywhere, so its gradient is rejected rather than silently zeroed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .canonicalize import ConstraintSpec
from .modelio import atomic_write_text, format_float
from .network import Activation, Network, _act_vector, network_from_arrays

__all__ = [
    "Dataset",
    "TrainConfig",
    "TrainReport",
    "mse",
    "grad_mse",
    "init_random",
    "project",
    "train",
    "save_dataset_csv",
    "load_dataset_csv",
]

_OPTIMIZERS = ("gd", "adam", "lbfgs")

# skip renormalizing when the norm is already this close to 1, so that
# projecting twice is bitwise the same as projecting once
_NORM_SKIP_TOL = 1e-12
_TINY_NORM = 1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable supervised sample: inputs (n, d), targets (n,)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.array(self.inputs, dtype=np.float64, order="C")
        y = np.array(self.targets, dtype=np.float64, order="C")
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or y.ndim != 1:
            raise ValueError("inputs must be (n, d), targets (n,)")
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"{x.shape[0]} inputs but {y.shape[0]} targets"
            )
        if x.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    ``seed`` is recorded for callers that derive the initial network from it;
    the training loop itself is deterministic.  ``step_size`` is the learning
    rate for gd/adam and the initial trial step for lbfgs line search.
    ``step_size == 0`` is allowed and leaves parameters unchanged, which is
    occasionally useful to record losses without moving.
    """

    max_iters: int = 5000
    step_size: float = 0.01
    tolerance: float = 1e-8
    optimizer: str = "adam"
    seed: int = 0
    constrained: bool = True
    tight_1d: bool = False

    def __post_init__(self):
        if not isinstance(self.max_iters, int) or self.max_iters < 1:
            raise ValueError("max_iters must be an integer >= 1")
        if not math.isfinite(self.step_size) or self.step_size < 0.0:
            raise ValueError("step_size must be finite and >= 0")
        if not math.isfinite(self.tolerance) or self.tolerance < 0.0:
            raise ValueError("tolerance must be finite and >= 0")
        if self.optimizer not in _OPTIMIZERS:
            raise ValueError(
                f"optimizer must be one of {_OPTIMIZERS}, got "
                f"{self.optimizer!r}"
            )
        if self.tight_1d and not self.constrained:
            raise ValueError("tight_1d requires constrained training")


@dataclass(frozen=True)
class TrainReport:
    """Training outcome.

    ``mse_history[0]`` is the loss after the initial projection (if any) and
    before any update; ``initial_mse`` is the loss of the raw initial network
    before projection, so runs that share an initialization report identical
    values there regardless of constraint mode.
    """

    final_train_mse: float
    final_validation_mse: float
    mse_history: tuple
    iters_used: int
    constraint_violation: float
    initial_mse: float


def _mse_arrays(act, weights, thresholds, offset, x, y) -> float:
    # Diverging parameters overflow to inf here; callers detect the
    # non-finite result, so the transient IEEE warnings are suppressed.
    with np.errstate(over="ignore", invalid="ignore"):
        a = x
        for k in range(len(weights) - 1):
            a = _act_vector(act, a @ weights[k] + thresholds[k])
        diff = (a @ weights[-1])[:, 0] + offset - y
        return float(diff @ diff / y.shape[0])


def _backprop_arrays(act, weights, thresholds, offset, x, y):
    # Reverse-mode gradient of the mean squared error in all weights and
    # hidden thresholds.  relu'(0) is taken as 0.  As in _mse_arrays,
    # overflow is allowed to propagate as inf/nan for the caller to detect.
    n_layers = len(weights)
    with np.errstate(over="ignore", invalid="ignore"):
        activations = [x]
        preacts = []
        a = x
        for k in range(n_layers - 1):
            z = a @ weights[k] + thresholds[k]
            preacts.append(z)
            a = np.maximum(z, 0.0)
            activations.append(a)
        diff = (a @ weights[-1])[:, 0] + offset - y
        n = y.shape[0]
        d_out = (2.0 / n) * diff
        grad_w = [None] * n_layers
        grad_b = [None] * n_layers
        grad_w[n_layers - 1] = activations[-1].T @ d_out[:, None]
        grad_b[n_layers - 1] = np.zeros(1)
        backflow = d_out[:, None] @ weights[-1].T
        for k in range(n_layers - 2, -1, -1):
            backflow = backflow * (preacts[k] > 0.0)
            grad_w[k] = activations[k].T @ backflow
            grad_b[k] = backflow.sum(axis=0)
            if k > 0:
                backflow = backflow @ weights[k].T
    return grad_w, grad_b


def mse(net: Network, data: Dataset) -> float:
    """Mean squared error of the network on the dataset."""
    if data.input_dim != net.input_dim:
        raise ValueError(
            f"dataset dimension {data.input_dim} does not match network "
            f"input dimension {net.input_dim}"
        )
    return _mse_arrays(
        net.activation,
        [l.weights for l in net.layers],
        [l.thresholds for l in net.layers],
        net.offset,
        data.inputs,
        data.targets,
    )


def grad_mse(net: Network, data: Dataset) -> list:
    """Gradient of the mean squared error, one ``(d_weights, d_thresholds)``
    pair per layer.  Output thresholds are fixed at zero, so their gradient
    entries are zero.  The offset is not a trainable parameter."""
    if net.activation is not Activation.RELU:
        raise ValueError(
            "gradient is undefined for the binary step activation"
        )
    if data.input_dim != net.input_dim:
        raise ValueError(
            f"dataset dimension {data.input_dim} does not match network "
            f"input dimension {net.input_dim}"
        )
    grad_w, grad_b = _backprop_arrays(
        net.activation,
        [l.weights for l in net.layers],
        [l.thresholds for l in net.layers],
        net.offset,
        data.inputs,
        data.targets,
    )
    return list(zip(grad_w, grad_b))


def init_random(structure, kind: Activation, seed: int) -> Network:
    """Random network with parameters uniform in [-1, 1].

    Draw order is fixed: for each layer from the input side, first the
    weight matrix (row-major), then the thresholds; output thresholds are
    zero and never drawn, so the same seed gives the same parameters across
    runs and platforms.
    """
    structure = tuple(int(w) for w in structure)
    if len(structure) < 3 or any(w < 1 for w in structure):
        raise ValueError(
            "structure must list >= 3 positive widths (input, hidden..., output)"
        )
    if structure[-1] != 1:
        raise ValueError("output width must be 1")
    rng = np.random.default_rng(seed)
    weights = []
    thresholds = []
    n_layers = len(structure) - 1
    for k in range(n_layers):
        weights.append(rng.uniform(-1.0, 1.0, size=(structure[k], structure[k + 1])))
        if k < n_layers - 1:
            thresholds.append(rng.uniform(-1.0, 1.0, size=structure[k + 1]))
        else:
            thresholds.append(np.zeros(1))
    return network_from_arrays(kind, weights, thresholds, 0.0)


def _project_arrays(weights, thresholds, spec: ConstraintSpec):
    # In-place projection: unit-sphere weights, box-clipped thresholds.
    for k in range(len(weights) - 1):
        w = weights[k]
        b = thresholds[k]
        if k == 0 and spec.tight_first_layer:
            # scalar weights snap to the nearer sign; sign(0) -> +1
            signs = np.where(w[0, :] >= 0.0, 1.0, -1.0)
            w[0, :] = signs
            lo = np.where(signs > 0.0, -1.0, 0.0)
            hi = np.where(signs > 0.0, 0.0, 1.0)
            np.clip(b, lo, hi, out=b)
            continue
        norms = np.linalg.norm(w, axis=0)
        tiny = norms < _TINY_NORM
        if np.any(tiny):
            w[:, tiny] = 0.0
            w[0, tiny] = 1.0
            norms = np.where(tiny, 1.0, norms)
        fix = np.abs(norms - 1.0) > _NORM_SKIP_TOL
        if np.any(fix):
            w[:, fix] /= norms[fix]
        lo, hi = spec.threshold_boxes[k]
        np.clip(b, lo, hi, out=b)


def _check_spec(net_or_dims, spec: ConstraintSpec):
    hidden, input_dim = net_or_dims
    if len(spec.threshold_boxes) != hidden:
        raise ValueError(
            f"constraint spec has {len(spec.threshold_boxes)} threshold "
            f"boxes but the network has {hidden} hidden layers"
        )
    if spec.tight_first_layer and input_dim != 1:
        raise ValueError("tight first-layer constraints require 1D input")


def project(net: Network, spec: ConstraintSpec) -> Network:
    """Project a network onto the feasible set of ``spec``.

    Each hidden weight vector is scaled to unit norm (vectors with norm below
    1e-12 are replaced by the first basis vector), thresholds are clipped
    into their boxes, and with ``tight_first_layer`` the scalar first-layer
    weights snap to ``+-1``.  Already-feasible parameters pass through
    bitwise unchanged, so the projection is exactly idempotent.
    """
    _check_spec((net.hidden_layer_count, net.input_dim), spec)
    weights = [np.array(l.weights) for l in net.layers]
    thresholds = [np.array(l.thresholds) for l in net.layers]
    _project_arrays(weights, thresholds, spec)
    return network_from_arrays(net.activation, weights, thresholds, net.offset)


def _violation_arrays(weights, thresholds, spec: ConstraintSpec) -> float:
    worst = 0.0
    for k in range(len(weights) - 1):
        w = weights[k]
        b = thresholds[k]
        norms = np.linalg.norm(w, axis=0)
        worst = max(worst, float(np.max(np.abs(norms - 1.0))))
        if k == 0 and spec.tight_first_layer:
            signs = w[0, :]
            lo = np.where(signs > 0.0, -1.0, 0.0)
            hi = np.where(signs > 0.0, 0.0, 1.0)
        else:
            lo, hi = spec.threshold_boxes[k]
        worst = max(worst, float(np.max(np.maximum(lo - b, 0.0))))
        worst = max(worst, float(np.max(np.maximum(b - hi, 0.0))))
    return worst


def _flatten(arrays) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def _grad_norm(grad_w, grad_b) -> float:
    total = 0.0
    for g in grad_w:
        total += float(np.sum(g * g))
    for g in grad_b:
        total += float(np.sum(g * g))
    return math.sqrt(total)


def _two_loop(grad_flat, pairs) -> np.ndarray:
    # Standard limited-memory inverse-Hessian application.
    q = grad_flat.copy()
    alphas = []
    for s, yv, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    if pairs:
        s, yv, _ = pairs[-1]
        q *= float(s @ yv) / float(yv @ yv)
    for (s, yv, rho), a in zip(pairs, reversed(alphas)):
        beta = rho * float(yv @ q)
        q += (a - beta) * s
    return q


def train(net: Network, data: Dataset, validation: Dataset,
          config: TrainConfig, constraint: ConstraintSpec = None):
    """Train with gd, adam, or lbfgs; project after every update when
    constrained.

    Every iterate after the projection is feasible, so the trajectory never
    leaves the reduced parameter space.  Stops early when the gradient norm
    falls below ``config.tolerance``.  Raises if the loss becomes non-finite,
    naming the iteration.

    Returns ``(trained_network, TrainReport)``.
    """
    if net.activation is not Activation.RELU:
        raise ValueError("training requires the relu activation")
    if data.input_dim != net.input_dim or validation.input_dim != net.input_dim:
        raise ValueError("dataset dimensions must match the network input")
    if config.constrained:
        if constraint is None:
            raise ValueError("constrained training requires a ConstraintSpec")
        _check_spec((net.hidden_layer_count, net.input_dim), constraint)
        if constraint.tight_first_layer != config.tight_1d:
            raise ValueError(
                "config.tight_1d does not match the constraint spec"
            )

    act = net.activation
    weights = [np.array(l.weights) for l in net.layers]
    thresholds = [np.array(l.thresholds) for l in net.layers]
    offset = net.offset
    x, y = data.inputs, data.targets

    initial = _mse_arrays(act, weights, thresholds, offset, x, y)
    if config.constrained:
        _project_arrays(weights, thresholds, constraint)
        current = _mse_arrays(act, weights, thresholds, offset, x, y)
    else:
        current = initial
    history = [current]

    if config.optimizer == "lbfgs":
        _run_lbfgs(act, weights, thresholds, offset, x, y, config,
                   constraint, history)
    else:
        _run_sgd_like(act, weights, thresholds, offset, x, y, config,
                      constraint, history)

    trained = network_from_arrays(act, weights, thresholds, offset)
    violation = (
        _violation_arrays(weights, thresholds, constraint)
        if config.constrained
        else 0.0
    )
    report = TrainReport(
        final_train_mse=history[-1],
        final_validation_mse=_mse_arrays(
            act, weights, thresholds, offset,
            validation.inputs, validation.targets,
        ),
        mse_history=tuple(history),
        iters_used=len(history) - 1,
        constraint_violation=violation,
        initial_mse=initial,
    )
    return trained, report


def _run_sgd_like(act, weights, thresholds, offset, x, y, config,
                  constraint, history):
    adam = config.optimizer == "adam"
    if adam:
        m_w = [np.zeros_like(w) for w in weights]
        v_w = [np.zeros_like(w) for w in weights]
        m_b = [np.zeros_like(b) for b in thresholds]
        v_b = [np.zeros_like(b) for b in thresholds]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
    lr = config.step_size
    n_layers = len(weights)

    for it in range(1, config.max_iters + 1):
        grad_w, grad_b = _backprop_arrays(act, weights, thresholds,
                                          offset, x, y)
        if _grad_norm(grad_w, grad_b) < config.tolerance:
            break
        if adam:
            correct1 = 1.0 - 0.9 ** it
            correct2 = 1.0 - 0.999 ** it
            for k in range(n_layers):
                m_w[k] = beta1 * m_w[k] + (1.0 - beta1) * grad_w[k]
                v_w[k] = beta2 * v_w[k] + (1.0 - beta2) * grad_w[k] ** 2
                weights[k] -= lr * (m_w[k] / correct1) / (
                    np.sqrt(v_w[k] / correct2) + eps
                )
                if k < n_layers - 1:
                    m_b[k] = beta1 * m_b[k] + (1.0 - beta1) * grad_b[k]
                    v_b[k] = beta2 * v_b[k] + (1.0 - beta2) * grad_b[k] ** 2
                    thresholds[k] -= lr * (m_b[k] / correct1) / (
                        np.sqrt(v_b[k] / correct2) + eps
                    )
        else:
            for k in range(n_layers):
                weights[k] -= lr * grad_w[k]
                if k < n_layers - 1:
                    thresholds[k] -= lr * grad_b[k]
        if config.constrained:
            _project_arrays(weights, thresholds, constraint)
        current = _mse_arrays(act, weights, thresholds, offset, x, y)
        if not math.isfinite(current):
            raise ValueError(
                f"training diverged: non-finite loss at iteration {it}"
            )
        history.append(current)


def _run_lbfgs(act, weights, thresholds, offset, x, y, config,
               constraint, history):
    # Limited-memory BFGS with Armijo backtracking; curvature pairs that are
    # not positive enough are skipped, which keeps the direction a descent
    # direction even with the projection interleaved.
    shapes_w = [w.shape for w in weights]
    shapes_b = [b.shape for b in thresholds]

    def _unflatten(vec):
        out_w, out_b = [], []
        pos = 0
        for shape in shapes_w:
            size = shape[0] * shape[1]
            out_w.append(vec[pos:pos + size].reshape(shape))
            pos += size
        for shape in shapes_b:
            size = shape[0]
            out_b.append(vec[pos:pos + size].copy())
            pos += size
        return out_w, out_b

    def _value(vec):
        w_list, b_list = _unflatten(vec)
        return _mse_arrays(act, w_list, b_list, offset, x, y)

    def _value_grad(vec):
        w_list, b_list = _unflatten(vec)
        f = _mse_arrays(act, w_list, b_list, offset, x, y)
        gw, gb = _backprop_arrays(act, w_list, b_list, offset, x, y)
        return f, _flatten(gw + gb)

    xk = _flatten(weights + thresholds)
    fk, gk = _value_grad(xk)
    pairs = []
    memory = 10

    for it in range(1, config.max_iters + 1):
        if float(np.linalg.norm(gk)) < config.tolerance:
            break
        direction = -_two_loop(gk, pairs)
        descent = float(gk @ direction)
        if descent >= 0.0:
            direction = -gk
            descent = float(gk @ direction)
            if descent >= 0.0:
                break
        step = config.step_size if not pairs else 1.0
        accepted = False
        for _ in range(30):
            trial = xk + step * direction
            if _value(trial) <= fk + 1e-4 * step * descent:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        x_new = xk + step * direction
        if config.constrained:
            w_list, b_list = _unflatten(x_new)
            _project_arrays(w_list, b_list, constraint)
            x_new = _flatten(w_list + b_list)
        f_new, g_new = _value_grad(x_new)
        if not math.isfinite(f_new):
            raise ValueError(
                f"training diverged: non-finite loss at iteration {it}"
            )
        s = x_new - xk
        yv = g_new - gk
        curvature = float(s @ yv)
        if curvature > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            pairs.append((s, yv, 1.0 / curvature))
            if len(pairs) > memory:
                pairs.pop(0)
        xk, fk, gk = x_new, f_new, g_new
        history.append(f_new)

    w_list, b_list = _unflatten(xk)
    for k in range(len(weights)):
        weights[k][...] = w_list[k]
    for k in range(len(thresholds)):
        thresholds[k][...] = b_list[k]


def save_dataset_csv(data: Dataset, path: str):
    """Write a dataset as CSV with header ``x1,...,xd,y`` and 17 significant
    digits per value."""
    dim = data.input_dim
    header = ",".join([f"x{i + 1}" for i in range(dim)] + ["y"])
    lines = [header]
    for row, target in zip(data.inputs, data.targets):
        lines.append(
            ",".join([format_float(v) for v in row] + [format_float(target)])
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_dataset_csv(path: str) -> Dataset:
    """Read a dataset written by :func:`save_dataset_csv`."""
    try:
        with open(path, "r") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise ValueError(f"cannot read dataset {path}: {exc}") from exc
    if not lines:
        raise ValueError(f"dataset {path}: empty file")
    header = lines[0].split(",")
    if len(header) < 2 or header[-1] != "y" or any(
        name != f"x{i + 1}" for i, name in enumerate(header[:-1])
    ):
        raise ValueError(
            f"dataset {path}: header must be x1,...,xd,y, got {lines[0]!r}"
        )
    dim = len(header) - 1
    inputs = []
    targets = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != dim + 1:
            raise ValueError(
                f"dataset {path}: line {lineno} has {len(fields)} fields, "
                f"expected {dim + 1}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ValueError(
                f"dataset {path}: line {lineno}: {exc}"
            ) from exc
        inputs.append(values[:-1])
        targets.append(values[-1])
    if not inputs:
        raise ValueError(f"dataset {path}: no data rows")
    return Dataset(np.array(inputs), np.array(targets))
