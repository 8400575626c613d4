"""Exact rewrites onto the reduced parameter space.

Two transforms, both preserving the computed function:

* weight normalization: every hidden unit's incoming weight vector is scaled
  to unit norm, compensating in its threshold and (for ReLU) its outgoing
  weights; zero-weight units compute a constant and are deleted, folded into
  the next layer, or replaced by constant gadgets.
* threshold bounding (single hidden layer only): once weights are unit norm,
  a unit with threshold below ``-X_B`` is identically zero on the domain and
  is deleted; one with threshold above ``X_B`` is affine on the domain, and
  the affine part is rebuilt from units whose thresholds lie in
  ``[-X_B, X_B]``.  ``X_B`` is the largest input norm over the domain.

For deeper networks the threshold boxes grow with depth and are enforced
during constrained training rather than by rewriting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import (
    Activation,
    Domain,
    Network,
    activation_apply,
    binary_constant_gadget,
    forward_batch,
    network_from_arrays,
    relu_constant_gadget,
)

__all__ = [
    "ConstraintSpec",
    "CanonReport",
    "compute_xb",
    "threshold_box",
    "tight_1d_box",
    "normalize_weights",
    "bound_thresholds",
    "canonicalize",
]

PROBE_SEED = 1729
PROBE_COUNT = 1000

_UNIT_TOL = 1e-9


def compute_xb(domain: Domain) -> float:
    """Largest Euclidean norm an input from the domain can have."""
    return domain.x_bound()


def threshold_box(m: int, x_b: float, kind: Activation) -> tuple:
    """Threshold interval for hidden layer ``m`` (first hidden layer is 2).

    ReLU boxes double with each layer: ``X_B * [-2**(m-2), 2**(m-2)]``.
    Binary thresholds compare against unit-norm inputs only, so the box is
    ``[-X_B, X_B]`` for the first hidden layer and ``[-1, 1]`` after that
    (deeper layers see inputs in {0, 1/2, 1}^J before the unit-norm weights).
    """
    if not isinstance(m, int) or m < 2:
        raise ValueError("layer index m must be an integer >= 2")
    x_b = float(x_b)
    if not math.isfinite(x_b) or x_b < 0.0:
        raise ValueError("x_b must be finite and >= 0")
    if kind is Activation.RELU:
        half = x_b * (2.0 ** (m - 2))
        return (-half, half)
    if m == 2:
        return (-x_b, x_b)
    return (-1.0, 1.0)


def tight_1d_box(sign) -> tuple:
    """Threshold interval for a 1D first layer with weight fixed to a sign.

    On inputs in [0, 1]: weight +1 pairs with thresholds in [-1, 0], weight
    -1 with thresholds in [0, 1]; anything outside is dead or affine there.
    """
    s = float(sign)
    if s == 1.0:
        return (-1.0, 0.0)
    if s == -1.0:
        return (0.0, 1.0)
    raise ValueError("sign must be +1 or -1")


@dataclass(frozen=True)
class ConstraintSpec:
    """Feasible set for constrained training.

    ``threshold_boxes`` holds one ``(lo, hi)`` interval per hidden layer, in
    order.  Weight vectors of hidden units are constrained to norm
    ``weight_norm`` (always 1 here).  With ``tight_first_layer`` the first
    hidden layer of a 1D network additionally has its scalar weights fixed to
    ``+-1`` with the per-sign boxes of :func:`tight_1d_box`.
    """

    threshold_boxes: tuple
    weight_norm: float = 1.0
    tight_first_layer: bool = False

    def __post_init__(self):
        boxes = tuple((float(lo), float(hi)) for lo, hi in self.threshold_boxes)
        if not boxes:
            raise ValueError("need at least one threshold box")
        for lo, hi in boxes:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("threshold box bounds must be finite")
            if lo > hi:
                raise ValueError("threshold box lower bound exceeds upper bound")
        if float(self.weight_norm) != 1.0:
            raise ValueError("only unit weight norm is supported")
        object.__setattr__(self, "threshold_boxes", boxes)
        object.__setattr__(self, "weight_norm", 1.0)

    @classmethod
    def for_structure(cls, structure, kind: Activation, x_b: float,
                      tight_1d: bool = False) -> "ConstraintSpec":
        """Boxes for every hidden layer of the given structure."""
        structure = tuple(int(w) for w in structure)
        if len(structure) < 3:
            raise ValueError("structure needs at least one hidden layer")
        if tight_1d and structure[0] != 1:
            raise ValueError("tight first-layer boxes require 1D input")
        hidden = len(structure) - 2
        boxes = tuple(threshold_box(m, x_b, kind) for m in range(2, hidden + 2))
        return cls(threshold_boxes=boxes, tight_first_layer=tight_1d)


@dataclass(frozen=True)
class CanonReport:
    """What a rewrite did and how far the probe values moved."""

    removed_dead: int
    absorbed_saturated: int
    gadget_neurons_added: int
    max_pointwise_deviation: float

    def __post_init__(self):
        if min(self.removed_dead, self.absorbed_saturated,
               self.gadget_neurons_added) < 0:
            raise ValueError("report counts must be >= 0")
        if not (self.max_pointwise_deviation >= 0.0):
            raise ValueError("max_pointwise_deviation must be >= 0")


def _probe_deviation(net_a: Network, net_b: Network, domain=None) -> float:
    # Fixed-seed probe sample; [-1, 1]^d when no domain is given.
    rng = np.random.default_rng(PROBE_SEED)
    if domain is None:
        pts = rng.uniform(-1.0, 1.0, size=(PROBE_COUNT, net_a.input_dim))
    else:
        pts = domain.sample(PROBE_COUNT, rng)
    va = forward_batch(net_a, pts)
    vb = forward_batch(net_b, pts)
    return float(np.max(np.abs(va - vb)))


def _basis(dim: int) -> np.ndarray:
    v = np.zeros(dim)
    v[0] = 1.0
    return v


def normalize_weights(net: Network, use_offset: bool = False,
                      gadget_alpha: float = 1.0):
    """Rescale every hidden unit to a unit-norm weight vector.

    Exact for both activations: ReLU commutes with positive scaling (the
    factor moves to the outgoing weights) and the binary step ignores it.  A
    unit with an exactly zero weight vector computes the constant
    ``act(threshold)``; it is deleted when the constant is zero or its
    outgoing weights are zero, folded into the next hidden layer's
    thresholds otherwise, and at the last hidden layer either added to the
    network offset (``use_offset=True``) or rebuilt from constant gadget
    units with thresholds ``+-gadget_alpha/2``.

    Returns ``(new_net, CanonReport)``.  The report's deviation is measured
    on a fixed probe sample of ``[-1, 1]^d``.
    """
    gadget_alpha = float(gadget_alpha)
    if not math.isfinite(gadget_alpha) or gadget_alpha <= 0.0:
        raise ValueError("gadget_alpha must be finite and > 0")
    weight_arrays = [np.array(l.weights) for l in net.layers]
    threshold_arrays = [np.array(l.thresholds) for l in net.layers]
    offset = net.offset
    n_layers = len(weight_arrays)
    removed = absorbed = added = 0

    for k in range(n_layers - 1):
        w = weight_arrays[k]
        b = threshold_arrays[k]
        w_next = weight_arrays[k + 1]
        norms = np.linalg.norm(w, axis=0)
        if not np.all(np.isfinite(norms)):
            raise ValueError("weight norms overflow; cannot normalize")
        zero_units = []
        for j in range(w.shape[1]):
            n = float(norms[j])
            if n == 0.0:
                zero_units.append(j)
                continue
            if n != 1.0:
                w[:, j] /= n
                b[j] /= n
                if net.activation is Activation.RELU:
                    # relu(n*z) == n*relu(z): the factor moves downstream
                    w_next[j, :] *= n

        extra_units = []  # (weight_col, threshold, out_weight) at last hidden
        if zero_units:
            keep = [j for j in range(w.shape[1]) if j not in zero_units]
            for j in zero_units:
                constant = activation_apply(net.activation, b[j])
                out_row = w_next[j, :]
                if constant == 0.0 or not np.any(out_row):
                    removed += 1
                    continue
                absorbed += 1
                if k + 1 < n_layers - 1:
                    # next layer is hidden: the constant input folds into
                    # its thresholds
                    threshold_arrays[k + 1] += constant * out_row
                else:
                    value = constant * float(out_row[0])
                    if use_offset:
                        offset += value
                    elif net.activation is Activation.BINARY:
                        for ow, wv, th in binary_constant_gadget(
                                value, dim=w.shape[0]):
                            extra_units.append((wv, th, ow))
                        added += 2
                    else:
                        for ow, wv, th in relu_constant_gadget(
                                value, gadget_alpha, _basis(w.shape[0])):
                            extra_units.append((wv, th, ow))
                        added += 4
            w = w[:, keep]
            b = b[keep]
            w_next = w_next[keep, :]
            for wv, th, ow in extra_units:
                w = np.column_stack([w, wv])
                b = np.append(b, th)
                w_next = np.vstack([w_next, [[ow]]])
        if w.shape[1] == 0:
            # a layer must keep at least one unit; this one contributes 0
            w = _basis(w.shape[0]).reshape(-1, 1)
            b = np.zeros(1)
            w_next = np.zeros((1, weight_arrays[k + 1].shape[1]))
            added += 1
        weight_arrays[k] = w
        threshold_arrays[k] = b
        weight_arrays[k + 1] = w_next

    result = network_from_arrays(net.activation, weight_arrays,
                                 threshold_arrays, offset)
    report = CanonReport(
        removed_dead=removed,
        absorbed_saturated=absorbed,
        gadget_neurons_added=added,
        max_pointwise_deviation=_probe_deviation(net, result),
    )
    return result, report


def bound_thresholds(net: Network, domain: Domain, use_offset: bool = False):
    """Move every hidden threshold of a single-hidden-layer net into
    ``[-X_B, X_B]`` without changing the function on the domain.

    Requires unit-norm hidden weights.  Units with ``threshold < -X_B`` never
    activate on the domain and are removed.  Units with ``threshold > X_B``
    are always active; for ReLU their combined affine contribution
    ``w*.x + b*`` is rebuilt from a pair of zero-threshold units along
    ``w*/|w*|`` plus a four-unit constant gadget (thresholds ``+-X_B/4``);
    for the binary step their combined constant is rebuilt from a two-unit
    gadget.  With ``use_offset=True`` the constant part goes to the network
    offset instead of gadget units.

    Returns ``(new_net, CanonReport)`` with the deviation measured on a fixed
    probe sample of the domain.
    """
    if net.hidden_layer_count != 1:
        raise ValueError(
            "threshold bounding applies to single-hidden-layer networks; "
            "deeper networks use growing boxes during training"
        )
    if domain.dim != net.input_dim:
        raise ValueError(
            f"domain dimension {domain.dim} does not match network input "
            f"dimension {net.input_dim}"
        )
    x_b = domain.x_bound()
    if x_b <= 0.0:
        raise ValueError("domain has zero extent; thresholds cannot be bounded")

    w1 = np.array(net.layers[0].weights)
    b1 = np.array(net.layers[0].thresholds)
    out = np.array(net.layers[1].weights)  # (width, 1)
    norms = np.linalg.norm(w1, axis=0)
    if np.max(np.abs(norms - 1.0)) > _UNIT_TOL:
        raise ValueError(
            "hidden weights must be unit norm; run normalize_weights first"
        )

    dead = b1 < -x_b
    saturated = b1 > x_b
    keep = ~dead & ~saturated
    offset = net.offset
    added = 0

    cols = [w1[:, keep]]
    thresholds = [b1[keep]]
    out_rows = [out[keep, :]]

    def _append(weight_col, threshold, out_weight):
        cols.append(np.asarray(weight_col, dtype=np.float64).reshape(-1, 1))
        thresholds.append(np.array([threshold], dtype=np.float64))
        out_rows.append(np.array([[out_weight]], dtype=np.float64))

    if np.any(saturated):
        c_sat = out[saturated, 0]
        if net.activation is Activation.BINARY:
            # each saturated step outputs 1 on the domain
            c_star = float(np.sum(c_sat))
            if use_offset:
                offset += c_star
            elif c_star != 0.0:
                for ow, wv, th in binary_constant_gadget(c_star, dim=domain.dim):
                    _append(wv, th, ow)
                added += 2
        else:
            # each saturated relu is affine on the domain; aggregate first
            w_star = w1[:, saturated] @ c_sat
            b_star = float(b1[saturated] @ c_sat)
            norm_w = float(np.linalg.norm(w_star))
            if norm_w > 0.0:
                w_hat = w_star / norm_w
                # relu(z) - relu(-z) == z recovers the linear part
                _append(w_hat, 0.0, norm_w)
                _append(-w_hat, 0.0, -norm_w)
                added += 2
            if use_offset:
                offset += b_star
            elif b_star != 0.0:
                for ow, wv, th in relu_constant_gadget(
                        b_star, x_b / 2.0, _basis(domain.dim)):
                    _append(wv, th, ow)
                added += 4

    width = sum(c.shape[1] for c in cols)
    if width == 0:
        _append(_basis(domain.dim), 0.0, 0.0)
        added += 1

    new_w1 = np.hstack(cols)
    new_b1 = np.concatenate(thresholds)
    new_out = np.vstack(out_rows)
    result = network_from_arrays(
        net.activation,
        [new_w1, new_out],
        [new_b1, np.zeros(1)],
        offset,
    )
    report = CanonReport(
        removed_dead=int(np.sum(dead)),
        absorbed_saturated=int(np.sum(saturated)),
        gadget_neurons_added=added,
        max_pointwise_deviation=_probe_deviation(net, result, domain),
    )
    return result, report


def canonicalize(net: Network, domain: Domain, use_offset: bool = False):
    """Normalize weights, then (for single-hidden-layer nets) bound
    thresholds into ``[-X_B, X_B]``.

    Returns ``(new_net, CanonReport)`` aggregating both steps; the deviation
    compares the input and final networks on a fixed probe sample of the
    domain.  Deeper networks are only normalized, since their threshold
    boxes are training-time constraints, not rewrites.
    """
    if domain.dim != net.input_dim:
        raise ValueError(
            f"domain dimension {domain.dim} does not match network input "
            f"dimension {net.input_dim}"
        )
    x_b = domain.x_bound()
    alpha = x_b / 2.0 if x_b > 0.0 else 1.0
    normalized, rep1 = normalize_weights(net, use_offset=use_offset,
                                         gadget_alpha=alpha)
    if net.hidden_layer_count == 1:
        bounded, rep2 = bound_thresholds(normalized, domain,
                                         use_offset=use_offset)
    else:
        bounded = normalized
        rep2 = CanonReport(0, 0, 0, 0.0)
    report = CanonReport(
        removed_dead=rep1.removed_dead + rep2.removed_dead,
        absorbed_saturated=rep1.absorbed_saturated + rep2.absorbed_saturated,
        gadget_neurons_added=rep1.gadget_neurons_added
        + rep2.gadget_neurons_added,
        max_pointwise_deviation=_probe_deviation(net, bounded, domain),
    )
    return bounded, report
