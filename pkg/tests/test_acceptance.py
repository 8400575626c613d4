"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines; the
timed criteria measure wall-clock on this machine.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from spherenn import (
    Activation,
    ConstraintSpec,
    Dataset,
    Domain,
    ExperimentSpec,
    TrainConfig,
    activation_apply,
    canonicalize,
    eval_batch,
    grad_mse,
    init_random,
    mse,
    network_from_arrays,
    run_experiment,
    threshold_box,
    tight_1d_box,
    train,
)

RELU = Activation.RELU
BINARY = Activation.BINARY


@contextmanager
def _criterion(number, label):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE CRITERION {number} ({label}): FAIL")
        raise
    print(f"ACCEPTANCE CRITERION {number} ({label}): PASS")


def _random_corpus(kind, seed):
    # 100 single-hidden-layer nets, dims cycling 1/2/5, width up to 50,
    # parameters uniform in [-5, 5]
    rng = np.random.default_rng(seed)
    dims = (1, 2, 5)
    nets = []
    for i in range(100):
        d = dims[i % 3]
        width = int(rng.integers(1, 51))
        nets.append(network_from_arrays(
            kind,
            [rng.uniform(-5, 5, (d, width)), rng.uniform(-5, 5, (width, 1))],
            [rng.uniform(-5, 5, width), np.zeros(1)],
        ))
    return nets


def _probes(dim, count, seed):
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(count, dim))


def test_criterion_01_relu_reduction_equivalent():
    with _criterion(1, "relu reduction exact on the domain"):
        start = time.perf_counter()
        for i, net in enumerate(_random_corpus(RELU, 20250819)):
            dim = net.input_dim
            domain = Domain.unit_box(dim)
            canon, report = canonicalize(net, domain)
            pts = _probes(dim, 1000, 1000 + i)
            original = eval_batch(net, pts)
            reduced = eval_batch(canon, pts)
            np.testing.assert_allclose(reduced, original,
                                       rtol=1e-9, atol=1e-12)
            # the reduced net is feasible: unit norms, bounded thresholds
            norms = np.linalg.norm(canon.layers[0].weights, axis=0)
            assert np.max(np.abs(norms - 1.0)) <= 1e-9
            x_b = domain.x_bound()
            thresholds = canon.layers[0].thresholds
            assert np.all(thresholds >= -x_b)
            assert np.all(thresholds <= x_b)
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.1f}s, budget 10s"


def test_criterion_02_binary_reduction_equivalent():
    with _criterion(2, "binary reduction exact away from switch surfaces"):
        for i, net in enumerate(_random_corpus(BINARY, 917)):
            dim = net.input_dim
            domain = Domain.unit_box(dim)
            canon, _ = canonicalize(net, domain)
            pts = _probes(dim, 1000, 5000 + i)
            # exclude probes within 1e-12 of an original switching surface,
            # where rescaled float preactivations may flip the step
            w = net.layers[0].weights
            b = net.layers[0].thresholds
            margin = np.min(np.abs(pts @ w + b), axis=1)
            keep = margin > 1e-12
            assert int(np.sum(keep)) > 900
            original = eval_batch(net, pts[keep])
            reduced = eval_batch(canon, pts[keep])
            np.testing.assert_allclose(reduced, original,
                                       rtol=1e-9, atol=1e-12)
            x_b = domain.x_bound()
            thresholds = canon.layers[0].thresholds
            assert np.all(thresholds >= -x_b)
            assert np.all(thresholds <= x_b)


def test_criterion_03_constant_identities():
    with _criterion(3, "step partition and relu window identities"):
        rng = np.random.default_rng(31)
        # step(x) + step(-x) == 1 exactly, including x == 0
        xs = np.concatenate([rng.uniform(-50, 50, 10_000), [0.0, -0.0]])
        for x in xs:
            total = (activation_apply(BINARY, x)
                     + activation_apply(BINARY, -x))
            assert total == 1.0
        # relu(x+a/2) - relu(x-a/2) + relu(-x+a/2) - relu(-x-a/2) == a
        for _ in range(10_000):
            x = float(rng.uniform(-10.0, 10.0))
            a = float(rng.uniform(1e-12, 2.0))  # a in (0, 2]
            half = a / 2.0
            window = (activation_apply(RELU, x + half)
                      - activation_apply(RELU, x - half)
                      + activation_apply(RELU, -x + half)
                      - activation_apply(RELU, -x - half))
            assert abs(window - a) <= 1e-12


def test_criterion_04_threshold_boxes_exact():
    with _criterion(4, "threshold boxes match the closed forms exactly"):
        for x_b in (1.0, math.sqrt(2.0), 3.7):
            assert threshold_box(2, x_b, RELU) == (-x_b, x_b)
            assert threshold_box(3, x_b, RELU) == (-2.0 * x_b, 2.0 * x_b)
            assert threshold_box(4, x_b, RELU) == (-4.0 * x_b, 4.0 * x_b)
            assert threshold_box(2, x_b, BINARY) == (-x_b, x_b)
            assert threshold_box(3, x_b, BINARY) == (-1.0, 1.0)
            assert threshold_box(4, x_b, BINARY) == (-1.0, 1.0)
        assert tight_1d_box(+1) == (-1.0, 0.0)
        assert tight_1d_box(-1) == (0.0, 1.0)
        # spot check through the spec builder too
        spec = ConstraintSpec.for_structure((2, 20, 10, 1), RELU,
                                            math.sqrt(2.0))
        assert spec.threshold_boxes[0] == (-math.sqrt(2.0), math.sqrt(2.0))
        assert spec.threshold_boxes[1] == (-2.0 * math.sqrt(2.0),
                                           2.0 * math.sqrt(2.0))


def test_criterion_05_gradient_matches_finite_differences():
    with _criterion(5, "backprop matches central differences"):
        for structure in [(1, 8, 1), (2, 8, 4, 1)]:
            rng = np.random.default_rng(sum(structure))
            checked = 0
            attempts = 0
            while checked < 20 and attempts < 60:
                attempts += 1
                seed = int(rng.integers(0, 1_000_000))
                net = init_random(structure, RELU, seed)
                x = rng.uniform(0, 1, (40, structure[0]))
                y = rng.uniform(-1, 1, 40)
                data = Dataset(x, y)
                # kink guard: skip nets with any hidden preactivation within
                # 1e-4 of zero, where the finite difference straddles the
                # relu corner
                a = x
                min_abs = np.inf
                for layer in net.layers[:-1]:
                    z = a @ layer.weights + layer.thresholds
                    min_abs = min(min_abs, float(np.min(np.abs(z))))
                    a = np.maximum(z, 0.0)
                if min_abs < 1e-4:
                    continue
                checked += 1
                grads = grad_mse(net, data)
                h = 1e-6
                weights = [np.array(l.weights) for l in net.layers]
                thresholds = [np.array(l.thresholds) for l in net.layers]

                def loss():
                    return mse(
                        network_from_arrays(RELU, weights, thresholds, 0.0),
                        data,
                    )

                for k in range(len(weights)):
                    it = np.nditer(weights[k], flags=["multi_index"])
                    for _ in it:
                        idx = it.multi_index
                        orig = weights[k][idx]
                        weights[k][idx] = orig + h
                        f_plus = loss()
                        weights[k][idx] = orig - h
                        f_minus = loss()
                        weights[k][idx] = orig
                        fd = (f_plus - f_minus) / (2.0 * h)
                        assert abs(fd - grads[k][0][idx]) <= 1e-5 * max(
                            1.0, abs(fd)
                        )
                    if k < len(weights) - 1:
                        for j in range(thresholds[k].shape[0]):
                            orig = thresholds[k][j]
                            thresholds[k][j] = orig + h
                            f_plus = loss()
                            thresholds[k][j] = orig - h
                            f_minus = loss()
                            thresholds[k][j] = orig
                            fd = (f_plus - f_minus) / (2.0 * h)
                            assert abs(fd - grads[k][1][j]) <= 1e-5 * max(
                                1.0, abs(fd)
                            )
            assert checked == 20, (
                f"only {checked} nets of structure {structure} passed the "
                f"kink guard in {attempts} attempts"
            )


def _sine_dataset(n, seed):
    domain = Domain.unit_box(1)
    rng = np.random.default_rng(seed)
    x = domain.sample(n, rng)
    y = np.array([math.sin(4.0 * math.pi * v) for v in x[:, 0]])
    return Dataset(x, y)


def test_criterion_06_constrained_iterates_feasible():
    with _criterion(6, "constrained training stays on the reduced space"):
        data = _sine_dataset(64, 11)
        val = _sine_dataset(64, 12)
        for optimizer in ("gd", "adam", "lbfgs"):
            for tight in (False, True):
                structure = (1, 20, 1)
                spec = ConstraintSpec.for_structure(structure, RELU, 1.0,
                                                    tight_1d=tight)
                config = TrainConfig(max_iters=150, optimizer=optimizer,
                                     constrained=True, tight_1d=tight)
                net0 = init_random(structure, RELU, 21)
                net, report = train(net0, data, val, config, spec)
                assert report.constraint_violation <= 1e-10
                norms = np.linalg.norm(net.layers[0].weights, axis=0)
                assert np.max(np.abs(norms - 1.0)) <= 1e-10
                if tight:
                    assert set(np.unique(net.layers[0].weights[0])) <= {
                        -1.0, 1.0
                    }
                    for w_sign, b in zip(net.layers[0].weights[0],
                                         net.layers[0].thresholds):
                        lo, hi = tight_1d_box(w_sign)
                        assert lo <= b <= hi
                else:
                    lo, hi = spec.threshold_boxes[0]
                    b = net.layers[0].thresholds
                    assert np.all(b >= lo) and np.all(b <= hi)
        # deeper net: per-layer boxes grow with depth
        structure = (1, 5, 5, 1)
        spec = ConstraintSpec.for_structure(structure, RELU, 1.0)
        config = TrainConfig(max_iters=100, optimizer="adam",
                             constrained=True)
        net0 = init_random(structure, RELU, 22)
        net, report = train(net0, data, val, config, spec)
        assert report.constraint_violation <= 1e-10
        for k, layer in enumerate(net.layers[:-1]):
            norms = np.linalg.norm(layer.weights, axis=0)
            assert np.max(np.abs(norms - 1.0)) <= 1e-10
            lo, hi = spec.threshold_boxes[k]
            assert np.all(layer.thresholds >= lo)
            assert np.all(layer.thresholds <= hi)


@pytest.fixture(scope="module")
def sine_benchmark():
    spec = ExperimentSpec(
        target="sine1d",
        structure=(1, 20, 1),
        n_train=200,
        n_val=1000,
        seeds=tuple(range(1, 11)),
        modes=("unconstrained", "general", "tight1d"),
        train_config=TrainConfig(max_iters=5000, step_size=0.01,
                                 tolerance=1e-8, optimizer="adam"),
    )
    start = time.perf_counter()
    report = run_experiment(spec)
    elapsed = time.perf_counter() - start
    return report, elapsed


def test_criterion_07_constrained_generalizes_better(sine_benchmark):
    with _criterion(7, "median validation error improves under constraints"):
        report, elapsed = sine_benchmark
        by_mode_seed = {
            (r.mode, r.seed): r.report.final_validation_mse
            for r in report.runs
        }
        print("\nseed  unconstrained       general             tight1d")
        for seed in report.spec.seeds:
            print(f"{seed:>4}  "
                  f"{by_mode_seed[('unconstrained', seed)]:<18.12g}  "
                  f"{by_mode_seed[('general', seed)]:<18.12g}  "
                  f"{by_mode_seed[('tight1d', seed)]:<18.12g}")
        medians = {m: report.summary[m]["median"] for m in report.spec.modes}
        print(f"medians: unconstrained {medians['unconstrained']:.6g}, "
              f"general {medians['general']:.6g}, "
              f"tight1d {medians['tight1d']:.6g}; {elapsed:.1f}s")
        assert medians["general"] <= medians["unconstrained"]
        assert medians["tight1d"] <= medians["general"]
        assert elapsed < 300.0, f"took {elapsed:.1f}s, budget 300s"


def test_criterion_08_shared_initialization(sine_benchmark):
    with _criterion(8, "pre-projection loss identical across modes per seed"):
        report, _ = sine_benchmark
        for seed in report.spec.seeds:
            initials = [
                r.report.initial_mse for r in report.runs if r.seed == seed
            ]
            assert len(initials) == 3
            assert initials[0] == initials[1] == initials[2]


def test_criterion_09_reduction_idempotent():
    with _criterion(9, "second reduction pass is a no-op"):
        for i, net in enumerate(_random_corpus(RELU, 20250819)):
            domain = Domain.unit_box(net.input_dim)
            canon, _ = canonicalize(net, domain)
            again, report = canonicalize(canon, domain)
            assert report.removed_dead == 0
            assert report.absorbed_saturated == 0
            assert report.gadget_neurons_added == 0
