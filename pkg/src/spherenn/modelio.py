"""Model file reading and writing.

The on-disk format is JSON with a fixed key order and floats printed with 17
significant digits, which is enough to reproduce any double exactly.  Because
the emitter is deterministic, serialize -> parse -> serialize is byte
identical for finite values.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .network import Activation, Network, network_from_arrays

__all__ = [
    "dumps_model",
    "parse_model",
    "save_model",
    "load_model",
    "format_float",
    "atomic_write_text",
]


def format_float(v: float) -> str:
    """Render a finite double with 17 significant digits."""
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("cannot format non-finite value")
    return format(v, ".17g")


def _float_list(values) -> str:
    return "[" + ", ".join(format_float(v) for v in values) + "]"


def dumps_model(net: Network) -> str:
    """Serialize a network to the model JSON text."""
    lines = ["{"]
    lines.append(f'  "activation": "{net.activation.value}",')
    lines.append(
        '  "structure": [' + ", ".join(str(w) for w in net.structure) + "],"
    )
    lines.append('  "layers": [')
    for k, layer in enumerate(net.layers):
        rows = ",\n".join(
            "        " + _float_list(row) for row in layer.weights
        )
        sep = "," if k < len(net.layers) - 1 else ""
        lines.append("    {")
        lines.append('      "weights": [')
        lines.append(rows)
        lines.append("      ],")
        lines.append(f'      "thresholds": {_float_list(layer.thresholds)}')
        lines.append("    }" + sep)
    lines.append("  ],")
    lines.append(f'  "offset": {format_float(net.offset)}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _fail(where: str, message: str):
    raise ValueError(f"model {where}: {message}")


def _number_matrix(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        _fail(where, "expected a non-empty 2D array")
    width = None
    for i, row in enumerate(raw):
        if not isinstance(row, list) or not row:
            _fail(where, f"row {i} is not a non-empty array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            _fail(where, f"row {i} has length {len(row)}, expected {width}")
        for j, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                _fail(where, f"entry [{i}][{j}] is not a number")
    return np.array(raw, dtype=np.float64)


def _number_vector(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        _fail(where, "expected a non-empty array")
    for i, v in enumerate(raw):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            _fail(where, f"entry [{i}] is not a number")
    return np.array(raw, dtype=np.float64)


def parse_model(text: str, source: str = "<string>") -> Network:
    """Parse model JSON text into a Network.

    Diagnostics name the offending field and the source (file name or
    "<string>").
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"model {source}: invalid JSON: {exc}") from exc

    where = source
    if not isinstance(doc, dict):
        _fail(where, "top level must be an object")
    for key in ("activation", "structure", "layers", "offset"):
        if key not in doc:
            _fail(where, f"missing field '{key}'")
    extra = set(doc) - {"activation", "structure", "layers", "offset"}
    if extra:
        _fail(where, f"unknown fields: {sorted(extra)}")

    act_raw = doc["activation"]
    try:
        activation = Activation(act_raw)
    except ValueError:
        _fail(where, f"field 'activation': unknown value {act_raw!r}")

    structure = doc["structure"]
    if (
        not isinstance(structure, list)
        or len(structure) < 3
        or not all(isinstance(w, int) and not isinstance(w, bool) and w >= 1
                   for w in structure)
    ):
        _fail(
            where,
            "field 'structure': expected a list of >= 3 positive integers",
        )

    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list):
        _fail(where, "field 'layers': expected an array")
    if len(raw_layers) != len(structure) - 1:
        _fail(
            where,
            f"field 'layers': {len(raw_layers)} layers but structure "
            f"implies {len(structure) - 1}",
        )

    weight_arrays = []
    threshold_arrays = []
    for k, raw in enumerate(raw_layers):
        loc = f"{where} field 'layers[{k}]'"
        if not isinstance(raw, dict):
            _fail(loc, "expected an object")
        for key in ("weights", "thresholds"):
            if key not in raw:
                _fail(loc, f"missing field '{key}'")
        w = _number_matrix(raw["weights"], f"{loc}.weights")
        b = _number_vector(raw["thresholds"], f"{loc}.thresholds")
        if w.shape != (structure[k], structure[k + 1]):
            _fail(
                loc,
                f"weights shape {w.shape} does not match structure "
                f"({structure[k]}, {structure[k + 1]})",
            )
        if b.shape[0] != structure[k + 1]:
            _fail(
                loc,
                f"{b.shape[0]} thresholds do not match width "
                f"{structure[k + 1]}",
            )
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
            _fail(loc, "parameters must be finite")
        weight_arrays.append(w)
        threshold_arrays.append(b)

    offset = doc["offset"]
    if not isinstance(offset, (int, float)) or isinstance(offset, bool):
        _fail(where, "field 'offset': expected a number")
    if not math.isfinite(float(offset)):
        _fail(where, "field 'offset': must be finite")

    try:
        return network_from_arrays(
            activation, weight_arrays, threshold_arrays, float(offset)
        )
    except ValueError as exc:
        raise ValueError(f"model {where}: {exc}") from exc


def atomic_write_text(path: str, text: str):
    """Write a text file atomically (temp file + rename in the same dir)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(net: Network, path: str):
    atomic_write_text(path, dumps_model(net))


def load_model(path: str) -> Network:
    try:
        with open(path, "r") as handle:
            text = handle.read()
    except OSError as exc:
        raise ValueError(f"cannot read model {path}: {exc}") from exc
    return parse_model(text, source=path)
