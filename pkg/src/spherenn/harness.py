"""Experiment harness: benchmark targets, data generation, and multi-seed
training runs comparing constraint modes.

The 1D benchmark fits ``sin(4*pi*x)`` on [0, 1]; the 2D benchmark fits
Franke's surface on [0, 1]^2.  Every run of an experiment shares the same
train and validation datasets; the seeds vary only the network
initialization, and within one seed every constraint mode starts from the
bit-identical initial network.
"""

from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .canonicalize import ConstraintSpec
from .modelio import atomic_write_text, format_float
from .network import Activation, Domain, Network, eval_network
from .training import Dataset, TrainConfig, TrainReport, init_random, train

__all__ = [
    "target_sine",
    "target_franke",
    "TARGETS",
    "gen_dataset",
    "ExperimentSpec",
    "RunResult",
    "ExperimentReport",
    "run_experiment",
    "eval_grid",
    "eval_cut",
    "eval_curve",
    "GridEval",
    "write_grid_csv",
    "write_cut_csv",
    "write_curve_csv",
    "write_history_csv",
    "parse_experiment_spec",
]

MODES = ("unconstrained", "general", "tight1d")


def target_sine(x: float) -> float:
    """One-dimensional benchmark target ``sin(4*pi*x)``."""
    return math.sin(4.0 * math.pi * float(x))


def target_franke(x: float, y: float) -> float:
    """Franke's bivariate test surface: three gaussian bumps and one dip."""
    x = float(x)
    y = float(y)
    term1 = 0.75 * math.exp(-((9.0 * x - 2.0) ** 2) / 4.0
                            - ((9.0 * y - 2.0) ** 2) / 4.0)
    term2 = 0.75 * math.exp(-((9.0 * x + 1.0) ** 2) / 49.0
                            - (9.0 * y + 1.0) / 10.0)
    term3 = 0.5 * math.exp(-((9.0 * x - 7.0) ** 2) / 4.0
                           - ((9.0 * y - 3.0) ** 2) / 4.0)
    term4 = -0.2 * math.exp(-((9.0 * x - 4.0) ** 2)
                            - ((9.0 * y - 7.0) ** 2))
    return term1 + term2 + term3 + term4


@dataclass(frozen=True)
class _Target:
    name: str
    dim: int
    row_fn: object  # maps a length-dim point to a float

    def domain(self) -> Domain:
        return Domain.unit_box(self.dim)


TARGETS = {
    "sine1d": _Target("sine1d", 1, lambda row: target_sine(row[0])),
    "franke2d": _Target("franke2d", 2,
                        lambda row: target_franke(row[0], row[1])),
}


def _resolve_target(target):
    if isinstance(target, str):
        if target not in TARGETS:
            raise ValueError(
                f"unknown target {target!r}; known: {sorted(TARGETS)}"
            )
        return TARGETS[target]
    raise ValueError("target must be a known target name")


def gen_dataset(target, domain: Domain, n: int, seed: int) -> Dataset:
    """Sample ``n`` uniform points from the domain and label them.

    ``target`` is a known target name or a callable mapping a point (1D
    array) to a float.  Labels are computed point by point in scalar
    arithmetic, so the same inputs always give bitwise identical labels.
    """
    if callable(target):
        row_fn = target
    else:
        info = _resolve_target(target)
        if domain.dim != info.dim:
            raise ValueError(
                f"target {info.name} is {info.dim}D but domain is "
                f"{domain.dim}D"
            )
        row_fn = info.row_fn
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    points = domain.sample(n, np.random.default_rng(seed))
    labels = np.array([row_fn(row) for row in points], dtype=np.float64)
    return Dataset(points, labels)


@dataclass(frozen=True)
class ExperimentSpec:
    """A multi-seed, multi-mode training comparison.

    ``seeds`` vary only the network initialization; the datasets are fixed
    by ``train_data_seed``/``val_data_seed``.  ``train_config`` supplies the
    optimizer settings; its ``constrained``/``tight_1d`` flags are derived
    per mode and ignored here.
    """

    target: str
    structure: tuple
    n_train: int
    n_val: int
    seeds: tuple
    modes: tuple = ("unconstrained", "general")
    train_config: TrainConfig = TrainConfig()
    train_data_seed: int = 101
    val_data_seed: int = 202
    grid_resolution: int = 101
    cut_points: int = 101

    def __post_init__(self):
        info = _resolve_target(self.target)
        structure = tuple(int(w) for w in self.structure)
        if len(structure) < 3 or structure[-1] != 1:
            raise ValueError("structure must be (d, hidden..., 1)")
        if structure[0] != info.dim:
            raise ValueError(
                f"structure input width {structure[0]} does not match "
                f"target dimension {info.dim}"
            )
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds or len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be non-empty and distinct")
        modes = tuple(self.modes)
        if not modes or len(set(modes)) != len(modes):
            raise ValueError("modes must be non-empty and distinct")
        for mode in modes:
            if mode not in MODES:
                raise ValueError(
                    f"unknown mode {mode!r}; known: {MODES}"
                )
        if "tight1d" in modes and info.dim != 1:
            raise ValueError("tight1d mode requires a 1D target")
        if self.n_train < 1 or self.n_val < 1:
            raise ValueError("n_train and n_val must be >= 1")
        if self.train_data_seed == self.val_data_seed:
            raise ValueError(
                "train and validation data seeds must differ"
            )
        if self.grid_resolution < 2 or self.cut_points < 2:
            raise ValueError("grid_resolution and cut_points must be >= 2")
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "modes", modes)

    @property
    def input_dim(self) -> int:
        return self.structure[0]


@dataclass(frozen=True, eq=False)
class RunResult:
    seed: int
    mode: str
    network: Network
    report: TrainReport


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    spec: ExperimentSpec
    train_data: Dataset
    val_data: Dataset
    runs: tuple
    summary: dict


def _mode_config(spec: ExperimentSpec, mode: str):
    base = spec.train_config
    domain = TARGETS[spec.target].domain()
    if mode == "unconstrained":
        return replace(base, constrained=False, tight_1d=False), None
    tight = mode == "tight1d"
    constraint = ConstraintSpec.for_structure(
        spec.structure, Activation.RELU, domain.x_bound(), tight_1d=tight
    )
    return replace(base, constrained=True, tight_1d=tight), constraint


def _run_one(spec: ExperimentSpec, train_data: Dataset, val_data: Dataset,
             seed: int, mode: str) -> RunResult:
    net0 = init_random(spec.structure, Activation.RELU, seed)
    config, constraint = _mode_config(spec, mode)
    config = replace(config, seed=seed)
    net, report = train(net0, train_data, val_data, config, constraint)
    return RunResult(seed=seed, mode=mode, network=net, report=report)


def _worker(args):
    spec, seed, mode = args
    domain = TARGETS[spec.target].domain()
    train_data = gen_dataset(spec.target, domain, spec.n_train,
                             spec.train_data_seed)
    val_data = gen_dataset(spec.target, domain, spec.n_val,
                           spec.val_data_seed)
    return _run_one(spec, train_data, val_data, seed, mode)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentReport:
    """Train every (seed, mode) pair and summarize validation errors.

    Results are ordered seed-major, mode-minor, exactly as listed in the
    spec, regardless of ``jobs``.  Raises if any training point coincides
    exactly with a validation point.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    domain = TARGETS[spec.target].domain()
    train_data = gen_dataset(spec.target, domain, spec.n_train,
                             spec.train_data_seed)
    val_data = gen_dataset(spec.target, domain, spec.n_val,
                           spec.val_data_seed)
    seen = {tuple(row) for row in train_data.inputs}
    for row in val_data.inputs:
        if tuple(row) in seen:
            raise ValueError(
                "validation data shares a point with the training data; "
                "choose different data seeds"
            )

    tasks = [(spec, seed, mode) for seed in spec.seeds for mode in spec.modes]
    if jobs == 1:
        runs = [
            _run_one(spec, train_data, val_data, seed, mode)
            for (_, seed, mode) in tasks
        ]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_worker, tasks))

    summary = {}
    for mode in spec.modes:
        values = [
            r.report.final_validation_mse for r in runs if r.mode == mode
        ]
        summary[mode] = {
            "median": float(statistics.median(values)),
            "min": float(min(values)),
            "max": float(max(values)),
        }
    return ExperimentReport(
        spec=spec,
        train_data=train_data,
        val_data=val_data,
        runs=tuple(runs),
        summary=summary,
    )


@dataclass(frozen=True, eq=False)
class GridEval:
    """Network values on a uniform 2D grid, ``values[i, j]`` at
    ``(xs[i], ys[j])``; ``contour_levels`` are the conventional plot levels."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    contour_levels: tuple = tuple(i / 10.0 for i in range(11))


def eval_grid(net: Network, resolution: int = 101) -> GridEval:
    """Evaluate a 2D network on a uniform grid over [0, 1]^2.

    Every grid value comes from the single-point evaluation path, so it is
    bitwise identical to :func:`eval_network` at the same coordinates.
    """
    if net.input_dim != 2:
        raise ValueError("grid evaluation requires a 2D network")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    xs = np.linspace(0.0, 1.0, resolution)
    ys = np.linspace(0.0, 1.0, resolution)
    values = np.empty((resolution, resolution))
    point = np.empty(2)
    for i in range(resolution):
        point[0] = xs[i]
        for j in range(resolution):
            point[1] = ys[j]
            values[i, j] = eval_network(net, point)
    return GridEval(xs=xs, ys=ys, values=values)


def eval_cut(net: Network, n_points: int = 101) -> list:
    """Evaluate a 2D network along the diagonal cut ``y = 0.2*x`` for x in
    [0, 1]; returns ``[(x, value), ...]`` via the single-point path."""
    if net.input_dim != 2:
        raise ValueError("cut evaluation requires a 2D network")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    xs = np.linspace(0.0, 1.0, n_points)
    return [
        (float(x), eval_network(net, np.array([x, 0.2 * x]))) for x in xs
    ]


def eval_curve(net: Network, n_points: int = 101) -> list:
    """Evaluate a 1D network at uniform points of [0, 1]; returns
    ``[(x, value), ...]`` via the single-point path."""
    if net.input_dim != 1:
        raise ValueError("curve evaluation requires a 1D network")
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    xs = np.linspace(0.0, 1.0, n_points)
    return [(float(x), eval_network(net, np.array([x]))) for x in xs]


def write_grid_csv(grid: GridEval, path: str):
    """Write grid values as CSV ``x,y,value`` in row-major order (x outer)."""
    lines = ["x,y,value"]
    resolution = grid.xs.shape[0]
    for i in range(resolution):
        for j in range(resolution):
            lines.append(
                f"{format_float(grid.xs[i])},{format_float(grid.ys[j])},"
                f"{format_float(grid.values[i, j])}"
            )
    atomic_write_text(path, "\n".join(lines) + "\n")


def _write_pairs_csv(pairs, header: str, path: str):
    lines = [header]
    for x, v in pairs:
        lines.append(f"{format_float(x)},{format_float(v)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_cut_csv(cut, path: str):
    """Write cut values as CSV ``x,value`` (the cut is y = 0.2*x)."""
    _write_pairs_csv(cut, "x,value", path)


def write_curve_csv(curve, path: str):
    """Write 1D curve values as CSV ``x,value``."""
    _write_pairs_csv(curve, "x,value", path)


def write_history_csv(history, path: str):
    """Write a loss history as CSV ``iter,train_mse``; row 0 is the loss
    before the first update."""
    lines = ["iter,train_mse"]
    for i, value in enumerate(history):
        lines.append(f"{i},{format_float(value)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def parse_experiment_spec(text: str, source: str = "<string>") -> ExperimentSpec:
    """Parse an experiment spec from JSON.

    Required fields: target, structure, n_train, n_val, seeds.  Optional:
    modes, train (optimizer settings), train_data_seed, val_data_seed,
    grid_resolution, cut_points.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"experiment spec {source}: invalid JSON: {exc}"
        ) from exc
    if not isinstance(doc, dict):
        raise ValueError(f"experiment spec {source}: top level must be an object")
    for key in ("target", "structure", "n_train", "n_val", "seeds"):
        if key not in doc:
            raise ValueError(
                f"experiment spec {source}: missing field '{key}'"
            )
    known = {
        "target", "structure", "n_train", "n_val", "seeds", "modes",
        "train", "train_data_seed", "val_data_seed", "grid_resolution",
        "cut_points",
    }
    extra = set(doc) - known
    if extra:
        raise ValueError(
            f"experiment spec {source}: unknown fields: {sorted(extra)}"
        )
    train_doc = doc.get("train", {})
    if not isinstance(train_doc, dict):
        raise ValueError(
            f"experiment spec {source}: field 'train' must be an object"
        )
    train_known = {"optimizer", "step_size", "max_iters", "tolerance"}
    train_extra = set(train_doc) - train_known
    if train_extra:
        raise ValueError(
            f"experiment spec {source}: unknown train fields: "
            f"{sorted(train_extra)}"
        )
    try:
        config = TrainConfig(
            max_iters=int(train_doc.get("max_iters", 5000)),
            step_size=float(train_doc.get("step_size", 0.01)),
            tolerance=float(train_doc.get("tolerance", 1e-8)),
            optimizer=str(train_doc.get("optimizer", "adam")),
        )
        kwargs = {}
        for key in ("modes",):
            if key in doc:
                kwargs[key] = tuple(doc[key])
        for key in ("train_data_seed", "val_data_seed", "grid_resolution",
                    "cut_points"):
            if key in doc:
                kwargs[key] = int(doc[key])
        return ExperimentSpec(
            target=str(doc["target"]),
            structure=tuple(doc["structure"]),
            n_train=int(doc["n_train"]),
            n_val=int(doc["n_val"]),
            seeds=tuple(doc["seeds"]),
            train_config=config,
            **kwargs,
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"experiment spec {source}: {exc}") from exc
