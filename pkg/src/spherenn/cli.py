"""Command line interface.

Subcommands: canonicalize, train, experiment, eval, gen-data.  All file
outputs are written atomically; failures print a message to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .canonicalize import ConstraintSpec, canonicalize
from .harness import (
    TARGETS,
    eval_curve,
    eval_cut,
    eval_grid,
    gen_dataset,
    parse_experiment_spec,
    run_experiment,
    write_curve_csv,
    write_cut_csv,
    write_grid_csv,
    write_history_csv,
)
from .modelio import atomic_write_text, format_float, load_model, save_model
from .network import Activation, Domain, eval_network
from .training import (
    TrainConfig,
    init_random,
    load_dataset_csv,
    save_dataset_csv,
    train,
)

__all__ = ["main", "parse_domain", "parse_structure", "parse_point"]


def parse_domain(text: str, dim: int = None) -> Domain:
    """Parse a domain flag: ``box:lo,hi`` (one pair per dimension, separated
    by ';') or ``ball:radius`` (dimension taken from context)."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ValueError(
            f"invalid domain {text!r}: expected box:lo,hi[;lo,hi...] or ball:r"
        )
    if kind == "box":
        lows, highs = [], []
        for part in rest.split(";"):
            pieces = part.split(",")
            if len(pieces) != 2:
                raise ValueError(
                    f"invalid domain {text!r}: each box interval is lo,hi"
                )
            try:
                lo, hi = float(pieces[0]), float(pieces[1])
            except ValueError:
                raise ValueError(
                    f"invalid domain {text!r}: bounds must be numbers"
                ) from None
            lows.append(lo)
            highs.append(hi)
        if dim is not None and len(lows) != dim:
            raise ValueError(
                f"domain {text!r} is {len(lows)}D but {dim}D is required"
            )
        return Domain.box(lows, highs)
    if kind == "ball":
        try:
            radius = float(rest)
        except ValueError:
            raise ValueError(
                f"invalid domain {text!r}: radius must be a number"
            ) from None
        if dim is None:
            raise ValueError(
                "ball domain needs a dimension from context (a model or target)"
            )
        return Domain.ball(radius, dim)
    raise ValueError(f"invalid domain {text!r}: unknown kind {kind!r}")


def parse_structure(text: str) -> tuple:
    """Parse a structure flag like ``1,20,1``."""
    try:
        widths = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValueError(
            f"invalid structure {text!r}: expected comma-separated integers"
        ) from None
    if len(widths) < 3:
        raise ValueError(
            f"invalid structure {text!r}: need input, hidden..., output widths"
        )
    return widths


def parse_point(text: str) -> list:
    """Parse an evaluation point like ``0.5`` or ``0.3,0.4``."""
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise ValueError(
            f"invalid point {text!r}: expected comma-separated numbers"
        ) from None


def _report_dict(report) -> dict:
    return {
        "removed_dead": report.removed_dead,
        "absorbed_saturated": report.absorbed_saturated,
        "gadget_neurons_added": report.gadget_neurons_added,
        "max_pointwise_deviation": report.max_pointwise_deviation,
    }


def _cmd_canonicalize(args) -> int:
    net = load_model(args.model)
    domain = parse_domain(args.domain, net.input_dim)
    result, report = canonicalize(net, domain, use_offset=args.use_offset)
    save_model(result, args.out)
    if args.report:
        atomic_write_text(
            args.report, json.dumps(_report_dict(report), indent=2) + "\n"
        )
    print(
        f"canonicalized: {net.structure} -> {result.structure}; "
        f"removed {report.removed_dead} dead, absorbed "
        f"{report.absorbed_saturated} saturated, added "
        f"{report.gadget_neurons_added} gadget units; max probe deviation "
        f"{format_float(report.max_pointwise_deviation)}"
    )
    return 0


def _cmd_train(args) -> int:
    if (args.model is None) == (args.structure is None):
        raise ValueError("pass exactly one of --model or --structure")
    if args.model is not None:
        net0 = load_model(args.model)
    else:
        net0 = init_random(
            parse_structure(args.structure), Activation.RELU, args.seed
        )
    data = load_dataset_csv(args.data)
    val = load_dataset_csv(args.val)
    config = TrainConfig(
        max_iters=args.iters,
        step_size=args.step,
        tolerance=args.tolerance,
        optimizer=args.optimizer,
        seed=args.seed,
        constrained=args.constrained,
        tight_1d=args.tight_1d,
    )
    constraint = None
    if config.constrained:
        if args.domain is None:
            raise ValueError("constrained training requires --domain")
        domain = parse_domain(args.domain, net0.input_dim)
        for name, part in (("training", data), ("validation", val)):
            for row in part.inputs:
                if not domain.contains(row):
                    raise ValueError(
                        f"{name} data contains a point outside the domain; "
                        "the threshold boxes would not cover it"
                    )
        constraint = ConstraintSpec.for_structure(
            net0.structure, net0.activation, domain.x_bound(),
            tight_1d=config.tight_1d,
        )
    net, report = train(net0, data, val, config, constraint)
    save_model(net, args.out)
    if args.history:
        write_history_csv(report.mse_history, args.history)
    print(
        f"trained {report.iters_used} iterations; train mse "
        f"{format_float(report.final_train_mse)}, validation mse "
        f"{format_float(report.final_validation_mse)}"
    )
    return 0


def _cmd_experiment(args) -> int:
    try:
        with open(args.spec, "r") as handle:
            text = handle.read()
    except OSError as exc:
        raise ValueError(f"cannot read experiment spec {args.spec}: {exc}")
    spec = parse_experiment_spec(text, source=args.spec)
    report = run_experiment(spec, jobs=args.jobs)
    os.makedirs(args.out_dir, exist_ok=True)

    run_rows = []
    for run in report.runs:
        run_dir = os.path.join(args.out_dir, f"{run.mode}_seed{run.seed}")
        os.makedirs(run_dir, exist_ok=True)
        save_model(run.network, os.path.join(run_dir, "model.json"))
        write_history_csv(
            run.report.mse_history, os.path.join(run_dir, "history.csv")
        )
        if spec.input_dim == 1:
            write_curve_csv(
                eval_curve(run.network, spec.grid_resolution),
                os.path.join(run_dir, "curve.csv"),
            )
        else:
            write_grid_csv(
                eval_grid(run.network, spec.grid_resolution),
                os.path.join(run_dir, "grid.csv"),
            )
            write_cut_csv(
                eval_cut(run.network, spec.cut_points),
                os.path.join(run_dir, "cut.csv"),
            )
        run_rows.append({
            "seed": run.seed,
            "mode": run.mode,
            "initial_mse": run.report.initial_mse,
            "final_train_mse": run.report.final_train_mse,
            "final_validation_mse": run.report.final_validation_mse,
            "iters_used": run.report.iters_used,
            "constraint_violation": run.report.constraint_violation,
        })

    summary_doc = {
        "target": spec.target,
        "structure": list(spec.structure),
        "n_train": spec.n_train,
        "n_val": spec.n_val,
        "seeds": list(spec.seeds),
        "modes": report.summary,
        "runs": run_rows,
    }
    atomic_write_text(
        os.path.join(args.out_dir, "summary.json"),
        json.dumps(summary_doc, indent=2) + "\n",
    )
    for mode in spec.modes:
        stats = report.summary[mode]
        print(
            f"{mode}: median validation mse {format_float(stats['median'])} "
            f"(min {format_float(stats['min'])}, max "
            f"{format_float(stats['max'])})"
        )
    return 0


def _cmd_eval(args) -> int:
    net = load_model(args.model)
    point = parse_point(args.point)
    print(format_float(eval_network(net, point)))
    return 0


def _cmd_gen_data(args) -> int:
    info = TARGETS.get(args.target)
    if info is None:
        raise ValueError(
            f"unknown target {args.target!r}; known: {sorted(TARGETS)}"
        )
    if args.domain is None:
        domain = info.domain()
    else:
        domain = parse_domain(args.domain, info.dim)
    data = gen_dataset(args.target, domain, args.n, args.seed)
    save_dataset_csv(data, args.out)
    print(f"wrote {data.n_samples} samples to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spherenn",
        description=(
            "Train and rewrite feedforward relu/binary networks on the "
            "reduced parameter space (unit-sphere weights, box-bounded "
            "thresholds)."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "canonicalize",
        help="rewrite a model onto the reduced space without changing it "
             "as a function",
    )
    p.add_argument("--model", required=True, help="input model JSON")
    p.add_argument("--domain", required=True,
                   help="input region, box:lo,hi[;lo,hi...] or ball:r")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--report", help="optional rewrite report JSON")
    p.add_argument("--use-offset", action="store_true",
                   help="absorb constants into the network offset instead "
                        "of gadget units")
    p.set_defaults(func=_cmd_canonicalize)

    p = sub.add_parser("train", help="fit a model to a CSV dataset")
    p.add_argument("--model", help="initial model JSON")
    p.add_argument("--structure",
                   help="alternative to --model: random init of this "
                        "structure, e.g. 1,20,1")
    p.add_argument("--data", required=True, help="training CSV (x1..xd,y)")
    p.add_argument("--val", required=True, help="validation CSV")
    p.add_argument("--out", required=True, help="trained model JSON")
    p.add_argument("--history", help="optional loss history CSV")
    p.add_argument("--constrained", action="store_true",
                   help="project onto the reduced space after every update")
    p.add_argument("--tight-1d", action="store_true",
                   help="1D only: fix first-layer weights to +-1 with "
                        "per-sign threshold intervals")
    p.add_argument("--domain",
                   help="input region (required with --constrained)")
    p.add_argument("--optimizer", choices=("gd", "adam", "lbfgs"),
                   default="adam")
    p.add_argument("--step", type=float, default=0.01,
                   help="learning rate (gd/adam) or initial line-search "
                        "step (lbfgs)")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--tolerance", type=float, default=1e-8,
                   help="stop when the gradient norm falls below this")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --structure initialization")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "experiment",
        help="run a multi-seed constraint-mode comparison from a JSON spec",
    )
    p.add_argument("--spec", required=True, help="experiment spec JSON")
    p.add_argument("--out-dir", required=True,
                   help="directory for per-run models, histories, and "
                        "summary.json")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("eval", help="print a model's value at one point")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--point", required=True,
                   help="input point, e.g. 0.5 or 0.3,0.4")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gen-data", help="sample a labeled dataset CSV")
    p.add_argument("--target", required=True,
                   help=f"target name, one of {sorted(TARGETS)}")
    p.add_argument("--n", type=int, required=True, help="sample count")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--domain",
                   help="sampling region (default: the target's unit box)")
    p.set_defaults(func=_cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
