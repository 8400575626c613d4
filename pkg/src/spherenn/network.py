"""Feedforward networks with scalar output and explicit thresholds.

A network with layer widths ``(J_1, ..., J_M)`` maps ``R^{J_1} -> R``.  Hidden
layers apply an activation elementwise, ``y = act(W.T x + b)``; the output
layer is purely linear (its thresholds are fixed at zero) plus an optional
constant offset.  Two activations are supported: ReLU and a binary step.

Networks are immutable: all arrays are copied on construction and marked
read-only, so evaluation is safe from concurrent threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Activation",
    "Layer",
    "Network",
    "Domain",
    "activation_apply",
    "eval_network",
    "eval_batch",
    "forward_batch",
    "network_from_arrays",
    "binary_constant_gadget",
    "relu_constant_gadget",
]


class Activation(enum.Enum):
    """Supported elementwise activations."""

    RELU = "relu"
    BINARY = "binary"

    def scale_factor(self, alpha: float) -> float:
        """Return ``g(alpha)`` such that ``act(alpha * z) == g(alpha) * act(z)``
        for all ``z``, valid for ``alpha > 0``."""
        if alpha <= 0.0:
            raise ValueError("scale_factor requires alpha > 0")
        return alpha if self is Activation.RELU else 1.0


def activation_apply(kind: Activation, z: float) -> float:
    """Apply the activation to a scalar.

    The binary step maps ``z > 0`` to 1, ``z < 0`` to 0, and ``z == 0`` to 1/2;
    the midpoint value at zero makes ``step(z) + step(-z) == 1`` hold exactly
    for every ``z``, including ``z == 0``.
    """
    z = float(z)
    if math.isnan(z):
        raise ValueError("activation input must not be NaN")
    if kind is Activation.RELU:
        return z if z > 0.0 else 0.0
    if z > 0.0:
        return 1.0
    if z < 0.0:
        return 0.0
    return 0.5


def _act_vector(kind: Activation, z: np.ndarray) -> np.ndarray:
    # Elementwise activation on an array; matches activation_apply pointwise.
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    return np.where(z > 0.0, 1.0, np.where(z < 0.0, 0.0, 0.5))


def _frozen_array(values, shape_hint: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, order="C")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{shape_hint} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine layer: ``weights`` has shape (fan_in, fan_out), column j is
    the incoming weight vector of unit j; ``thresholds`` has shape (fan_out,)."""

    weights: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        w = _frozen_array(self.weights, "layer weights")
        b = _frozen_array(self.thresholds, "layer thresholds")
        if w.ndim != 2:
            raise ValueError("layer weights must be a 2D array")
        if b.ndim != 1:
            raise ValueError("layer thresholds must be a 1D array")
        if w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("layer fan_in and fan_out must be >= 1")
        if w.shape[1] != b.shape[0]:
            raise ValueError(
                f"layer has {w.shape[1]} output units but "
                f"{b.shape[0]} thresholds"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "thresholds", b)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class Network:
    """An immutable feedforward network with scalar output.

    ``layers[k]`` maps width ``structure[k]`` to ``structure[k+1]``.  Every
    layer except the last is followed by the activation; the last layer is
    linear with all thresholds exactly zero, and ``offset`` is added to its
    output.  At least one hidden layer is required and the output width must
    be 1.
    """

    activation: Activation
    layers: tuple
    offset: float = 0.0

    def __post_init__(self):
        if not isinstance(self.activation, Activation):
            raise ValueError("activation must be an Activation")
        layers = tuple(self.layers)
        if len(layers) < 2:
            raise ValueError("network needs at least one hidden layer")
        for k, layer in enumerate(layers):
            if not isinstance(layer, Layer):
                raise ValueError("layers must contain Layer instances")
            if k > 0 and layer.fan_in != layers[k - 1].fan_out:
                raise ValueError(
                    f"layer {k} fan_in {layer.fan_in} does not match "
                    f"previous fan_out {layers[k - 1].fan_out}"
                )
        out = layers[-1]
        if out.fan_out != 1:
            raise ValueError("output width must be 1")
        if np.any(out.thresholds != 0.0):
            raise ValueError("output layer thresholds must all be zero")
        offset = float(self.offset)
        if not math.isfinite(offset):
            raise ValueError("offset must be finite")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "offset", offset)

    @property
    def structure(self) -> tuple:
        """Layer widths ``(J_1, ..., J_M)`` including input and output."""
        widths = [self.layers[0].fan_in]
        widths.extend(layer.fan_out for layer in self.layers)
        return tuple(widths)

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def hidden_layer_count(self) -> int:
        return len(self.layers) - 1


def network_from_arrays(activation: Activation, weight_arrays, threshold_arrays,
                        offset: float = 0.0) -> Network:
    """Build a Network from parallel lists of weight and threshold arrays."""
    if len(weight_arrays) != len(threshold_arrays):
        raise ValueError("weights and thresholds lists differ in length")
    layers = tuple(
        Layer(w, b) for w, b in zip(weight_arrays, threshold_arrays)
    )
    return Network(activation, layers, offset)


@dataclass(frozen=True, eq=False)
class Domain:
    """Input region: an axis-aligned box or an origin-centered ball.

    Box domains store per-coordinate lower/upper bounds; ball domains store a
    radius.  ``x_bound`` is the largest Euclidean norm any point of the region
    can attain, which is what the threshold boxes are scaled by.
    """

    kind: str
    lower: np.ndarray = None
    upper: np.ndarray = None
    radius: float = None
    dim: int = field(default=None)

    def __post_init__(self):
        if self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ValueError("box domain requires lower and upper bounds")
            lo = _frozen_array(np.atleast_1d(self.lower), "box lower bounds")
            up = _frozen_array(np.atleast_1d(self.upper), "box upper bounds")
            if lo.shape != up.shape or lo.ndim != 1:
                raise ValueError("box bounds must be 1D arrays of equal length")
            if np.any(lo > up):
                raise ValueError("box lower bounds must not exceed upper bounds")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", up)
            object.__setattr__(self, "radius", None)
            object.__setattr__(self, "dim", int(lo.shape[0]))
        elif self.kind == "ball":
            if self.radius is None or self.dim is None:
                raise ValueError("ball domain requires radius and dim")
            r = float(self.radius)
            if not math.isfinite(r) or r < 0.0:
                raise ValueError("ball radius must be finite and >= 0")
            if int(self.dim) < 1:
                raise ValueError("ball dim must be >= 1")
            object.__setattr__(self, "lower", None)
            object.__setattr__(self, "upper", None)
            object.__setattr__(self, "radius", r)
            object.__setattr__(self, "dim", int(self.dim))
        else:
            raise ValueError(f"unknown domain kind: {self.kind!r}")

    @staticmethod
    def box(lower, upper) -> "Domain":
        return Domain(kind="box", lower=lower, upper=upper)

    @staticmethod
    def unit_box(dim: int) -> "Domain":
        return Domain.box(np.zeros(dim), np.ones(dim))

    @staticmethod
    def ball(radius: float, dim: int) -> "Domain":
        return Domain(kind="ball", radius=radius, dim=dim)

    def x_bound(self) -> float:
        """Largest Euclidean norm over the region."""
        if self.kind == "ball":
            return self.radius
        extreme = np.maximum(np.abs(self.lower), np.abs(self.upper))
        return float(np.sqrt(np.sum(extreme * extreme)))

    def contains(self, x, tol: float = 0.0) -> bool:
        pt = np.asarray(x, dtype=np.float64)
        if pt.shape != (self.dim,):
            raise ValueError(f"point has shape {pt.shape}, expected ({self.dim},)")
        if self.kind == "ball":
            return bool(np.linalg.norm(pt) <= self.radius + tol)
        return bool(
            np.all(pt >= self.lower - tol) and np.all(pt <= self.upper + tol)
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` uniform points, shape (n, dim)."""
        if n < 1:
            raise ValueError("sample size must be >= 1")
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper, size=(n, self.dim))
        # Uniform in the ball: gaussian direction, radius ~ r * U^(1/d).
        direction = rng.standard_normal((n, self.dim))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        radii = self.radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / self.dim)
        return direction / norms * radii


def eval_network(net: Network, x) -> float:
    """Evaluate the network at a single point."""
    y = np.asarray(x, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != net.input_dim:
        raise ValueError(
            f"input has shape {np.shape(x)}, expected ({net.input_dim},)"
        )
    if not np.all(np.isfinite(y)):
        raise ValueError("input must be finite")
    for layer in net.layers[:-1]:
        y = _act_vector(net.activation, y @ layer.weights + layer.thresholds)
    out = y @ net.layers[-1].weights
    return float(out[0]) + net.offset


def eval_batch(net: Network, points) -> np.ndarray:
    """Evaluate the network at each row of ``points``; shape (n,).

    Each row goes through the exact single-point code path, so the result is
    bitwise identical to calling :func:`eval_network` per row.  (Batched BLAS
    matmul does not guarantee that rowwise.)
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != net.input_dim:
        raise ValueError(
            f"points have shape {np.shape(points)}, expected (n, {net.input_dim})"
        )
    return np.array([eval_network(net, row) for row in pts], dtype=np.float64)


def forward_batch(net: Network, points: np.ndarray) -> np.ndarray:
    """Vectorized batch evaluation (one matmul per layer).

    Fast path used by training and probe statistics.  Values agree with
    :func:`eval_network` to rounding error but not necessarily bitwise.
    """
    a = np.asarray(points, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise ValueError(
            f"points have shape {np.shape(points)}, expected (n, {net.input_dim})"
        )
    for layer in net.layers[:-1]:
        a = _act_vector(net.activation, a @ layer.weights + layer.thresholds)
    return (a @ net.layers[-1].weights)[:, 0] + net.offset


def _unit_direction(dim: int, direction) -> np.ndarray:
    if direction is None:
        v = np.zeros(dim)
        v[0] = 1.0
        return v
    v = np.asarray(direction, dtype=np.float64)
    if v.shape != (dim,):
        raise ValueError(f"direction has shape {v.shape}, expected ({dim},)")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    return v.copy()


def binary_constant_gadget(c: float, dim: int = 1, direction=None) -> list:
    """Two binary-step units whose contributions sum to the constant ``c``.

    Returns ``[(out_weight, unit_weight_vector, threshold), ...]``.  With the
    step valued 1/2 at zero, ``step(v.x) + step(-v.x) == 1`` for every x, so
    the pair contributes exactly ``c`` everywhere, with thresholds 0 inside
    any threshold box.
    """
    c = float(c)
    if not math.isfinite(c):
        raise ValueError("constant must be finite")
    v = _unit_direction(dim, direction)
    return [(c, v, 0.0), (c, -v, 0.0)]


def relu_constant_gadget(b_star: float, alpha: float, w_hat) -> list:
    """Four ReLU units whose contributions sum to the constant ``b_star``.

    Uses the identity
    ``relu(z + a/2) - relu(z - a/2) + relu(-z + a/2) - relu(-z - a/2) == a``
    for every z and every a > 0, applied to ``z = w_hat . x`` and scaled by
    ``b_star / alpha``.  All four thresholds are ``+-alpha/2``, so they stay
    inside a threshold box ``[-X, X]`` whenever ``alpha <= 2X``.
    """
    b_star = float(b_star)
    alpha = float(alpha)
    if not math.isfinite(b_star):
        raise ValueError("constant must be finite")
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise ValueError("alpha must be finite and > 0")
    w = np.asarray(w_hat, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError("w_hat must be a 1D unit vector")
    norm = float(np.linalg.norm(w))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError("w_hat must be a unit vector")
    scale = b_star / alpha
    half = alpha / 2.0
    return [
        (scale, w.copy(), half),
        (-scale, w.copy(), -half),
        (scale, -w, half),
        (-scale, -w, -half),
    ]
