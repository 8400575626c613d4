"""Scikit-learn estimator facade over constrained network training."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .canonicalize import ConstraintSpec, canonicalize
from .network import Activation, Domain, forward_batch
from .training import Dataset, TrainConfig, init_random, train

__all__ = ["ConstrainedNetRegressor"]


class ConstrainedNetRegressor(RegressorMixin, BaseEstimator):
    """ReLU network regressor trained on the reduced parameter space.

    Hidden weight vectors live on the unit sphere and thresholds in boxes
    sized by the largest input norm of the training domain; projection after
    every optimizer step keeps iterates feasible.  With
    ``constrained=False`` this is plain unconstrained training of the same
    architecture.

    Parameters
    ----------
    hidden_layers : tuple of int, default (20,)
        Widths of the hidden layers.
    constrained : bool, default True
        Train on the reduced space (projection after every update).
    tight_1d : bool, default False
        For 1D inputs on [0, 1]: fix first-layer weights to +-1 with
        per-sign threshold intervals.
    optimizer : str, one of "gd", "adam", "lbfgs", default "adam"
    step_size : float, default 0.01
    max_iters : int, default 5000
    tol : float, default 1e-8
        Stop when the gradient norm falls below this.
    domain : Domain or None, default None
        Input region used to size the threshold boxes.  None infers the
        bounding box of the training inputs.
    random_state : int, default 0
        Seed for the initial parameters.

    Attributes
    ----------
    network_ : Network
        The trained network.
    report_ : TrainReport
        Loss history and feasibility of the final iterate.
    domain_ : Domain
        The domain actually used.
    n_features_in_ : int
    """

    def __init__(self, hidden_layers=(20,), constrained=True,
                 tight_1d=False, optimizer="adam", step_size=0.01,
                 max_iters=5000, tol=1e-8, domain=None, random_state=0):
        self.hidden_layers = hidden_layers
        self.constrained = constrained
        self.tight_1d = tight_1d
        self.optimizer = optimizer
        self.step_size = step_size
        self.max_iters = max_iters
        self.tol = tol
        self.domain = domain
        self.random_state = random_state

    def fit(self, X, y):
        """Train the network on (X, y); y is a 1D real target."""
        X, y = check_X_y(X, y, y_numeric=True)
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 1:
            raise ValueError("y must be one-dimensional")
        dim = X.shape[1]
        hidden = tuple(int(w) for w in self.hidden_layers)
        if not hidden or any(w < 1 for w in hidden):
            raise ValueError("hidden_layers must be positive widths")
        structure = (dim,) + hidden + (1,)

        if self.domain is None:
            domain = Domain.box(X.min(axis=0), X.max(axis=0))
        elif isinstance(self.domain, Domain):
            domain = self.domain
        else:
            raise ValueError("domain must be a Domain or None")
        if domain.dim != dim:
            raise ValueError(
                f"domain dimension {domain.dim} does not match X with "
                f"{dim} features"
            )

        config = TrainConfig(
            max_iters=int(self.max_iters),
            step_size=float(self.step_size),
            tolerance=float(self.tol),
            optimizer=self.optimizer,
            seed=int(self.random_state),
            constrained=bool(self.constrained),
            tight_1d=bool(self.tight_1d),
        )
        constraint = None
        if config.constrained:
            constraint = ConstraintSpec.for_structure(
                structure, Activation.RELU, domain.x_bound(),
                tight_1d=config.tight_1d,
            )
        data = Dataset(X, y)
        net0 = init_random(structure, Activation.RELU, config.seed)
        network, report = train(net0, data, data, config, constraint)

        self.network_ = network
        self.report_ = report
        self.domain_ = domain
        self.constraint_spec_ = constraint
        self.n_features_in_ = dim
        return self

    def predict(self, X):
        """Network outputs for each row of X."""
        check_is_fitted(self, "network_")
        X = check_array(X)
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected "
                f"{self.n_features_in_}"
            )
        return forward_batch(self.network_, X)

    def canonicalized(self):
        """The trained network rewritten onto the reduced space (unit-norm
        weights, and bounded thresholds for a single hidden layer), with the
        rewrite report."""
        check_is_fitted(self, "network_")
        return canonicalize(self.network_, self.domain_)
