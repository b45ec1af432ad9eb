"""Two-layer network, symmetric init, giant-step training, ridge, baselines.

Sign convention: gradient_matrix returns the descent update G of the
half-MSE loss, so training steps are W <- W - eta * G. The rank-one
"negative gradient" decomposition used in the analysis module applies to
-G at initialization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .hermite import Activation, he_values
from .targets import Dataset, MultiIndexTarget, sample_dataset
from .util import rng_from

__all__ = [
    "TwoLayerNet",
    "TrainConfig",
    "GDTrace",
    "init_symmetric",
    "forward",
    "gradient_matrix",
    "train_first_layer",
    "ridge_second_layer",
    "second_layer_features",
    "preprocess_labels",
    "reinjection_values",
    "predict_with_reinjection",
    "fit_second_layer",
    "RidgePredictor",
    "kernel_ridge_baseline",
]


@dataclass
class TwoLayerNet:
    """f(z) = (1/sqrt(p)) sum_i a_i sigma(<w_i, z>)."""

    first_layer: np.ndarray   # (p, d)
    second_layer: np.ndarray  # (p,)
    activation: Activation

    @property
    def p(self) -> int:
        return self.first_layer.shape[0]

    @property
    def d(self) -> int:
        return self.first_layer.shape[1]

    def with_weights(self, weights: np.ndarray) -> "TwoLayerNet":
        return TwoLayerNet(np.asarray(weights, dtype=float), self.second_layer, self.activation)


@dataclass
class TrainConfig:
    """Hyperparameters for giant-step first-layer training.

    eta_rule:
      - "theorem2":    eta = p * d^((leap - 1) / 2)
      - "alg1_scaled": eta = eta_scale * p * sqrt(n / d)
      - "fixed":       eta = eta_value
    preprocess_degree k >= 1 subtracts plug-in Hermite estimates of total
    degree < k from the labels of every batch (0 disables).
    """

    d: int
    p: int
    n: int
    T: int
    eta_rule: str = "alg1_scaled"
    eta_scale: float = 5.0
    leap: int = 1
    eta_value: float = 0.0
    ridge_lambda: float = 1.0
    seed: int = 0
    preprocess_degree: int = 0
    second_layer_dist: str = "uniform"

    def __post_init__(self):
        if self.p % 2:
            raise ValueError("p must be even for the symmetric initialization")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.eta_rule not in ("theorem2", "alg1_scaled", "fixed"):
            raise ValueError(f"unknown eta_rule {self.eta_rule!r}")
        if self.second_layer_dist not in ("uniform", "gaussian"):
            raise ValueError("second_layer_dist must be 'uniform' or 'gaussian'")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")

    def learning_rate(self) -> float:
        if self.eta_rule == "theorem2":
            return self.p * self.d ** ((self.leap - 1) / 2.0)
        if self.eta_rule == "alg1_scaled":
            return self.eta_scale * self.p * math.sqrt(self.n / self.d)
        return float(self.eta_value)


@dataclass
class GDTrace:
    """Per-step snapshots of a giant-step run (weights include the init)."""

    weights: list        # T+1 arrays (p, d)
    gradients: list      # T arrays (p, d)
    batch_seeds: list    # seed tags used per step
    eta: float

    @property
    def final_weights(self) -> np.ndarray:
        return self.weights[-1]


def init_symmetric(p: int, d: int, seed, second_layer_dist: str = "uniform") -> TwoLayerNet:
    """Symmetrically paired init: unit rows, a_i = -a_{p-i+1}, w_i = w_{p-i+1}.

    sqrt(p) * a_i ~ Unif[-1, 1] (default) or N(0, 1) ("gaussian", which
    spreads the gradient directions better in the teacher plane). The
    pairing makes the initial forward map identically zero.
    """
    if p % 2:
        raise ValueError("p must be even")
    rng = rng_from(seed, "init")
    half = p // 2
    w_half = rng.standard_normal((half, d))
    w_half /= np.linalg.norm(w_half, axis=1, keepdims=True)
    if second_layer_dist == "uniform":
        a_half = rng.uniform(-1.0, 1.0, size=half) / math.sqrt(p)
    elif second_layer_dist == "gaussian":
        a_half = rng.standard_normal(half) / math.sqrt(p)
    else:
        raise ValueError("second_layer_dist must be 'uniform' or 'gaussian'")
    weights = np.vstack([w_half, w_half[::-1]])
    second = np.concatenate([a_half, -a_half[::-1]])
    return TwoLayerNet(weights, second, Activation.relu())


def forward(net: TwoLayerNet, inputs: np.ndarray) -> np.ndarray:
    """Predictions (1/sqrt(p)) sigma(Z W^T) a for rows of `inputs`."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape[-1] != net.d:
        raise ValueError(f"inputs have dimension {inputs.shape[-1]}, net expects {net.d}")
    return net.activation.value(inputs @ net.first_layer.T) @ net.second_layer / math.sqrt(net.p)


def gradient_matrix(net: TwoLayerNet, batch: Dataset) -> np.ndarray:
    """Descent gradient of the half-MSE loss, row i for neuron i.

    G_i = (a_i / sqrt(p)) (1/n) sum_nu z^nu sigma'(<w_i, z^nu>) (fhat - y)_nu.
    The reduction order is fixed (single BLAS contraction), so repeated
    calls on identical inputs are bit-identical.
    """
    pre = batch.inputs @ net.first_layer.T            # (n, p)
    resid = net.activation.value(pre) @ net.second_layer / math.sqrt(net.p) - batch.labels
    weighted = net.activation.deriv(pre) * resid[:, None]
    grads = weighted.T @ batch.inputs / batch.n        # (p, d)
    grads *= (net.second_layer / math.sqrt(net.p))[:, None]
    return grads


def train_first_layer(net: TwoLayerNet, target: MultiIndexTarget, config: TrainConfig) -> GDTrace:
    """T giant steps, each on a fresh deterministic batch; a stays at a^0.

    Batches are drawn from substreams keyed by (seed, "batch", t), so steps
    use independent data and reruns are reproducible. With
    config.preprocess_degree >= 1 every batch's labels are adjusted by
    plug-in Hermite estimates before the gradient is taken.
    """
    eta = config.learning_rate()
    weights = [net.first_layer.copy()]
    gradients = []
    batch_seeds = []
    current = net
    for t in range(config.T):
        tag = (config.seed, "batch", t)
        batch = sample_dataset(target, config.n, config.d, tag)
        if config.preprocess_degree >= 1:
            adjusted, _ = preprocess_labels(batch, config.preprocess_degree)
            batch = Dataset(batch.inputs, adjusted)
        grad = gradient_matrix(current, batch)
        current = current.with_weights(current.first_layer - eta * grad)
        weights.append(current.first_layer.copy())
        gradients.append(grad)
        batch_seeds.append(tag)
    return GDTrace(weights, gradients, batch_seeds, eta)


def ridge_second_layer(features: np.ndarray, labels: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """argmin_a ||X a - y||^2 + lambda ||a||^2, exact.

    Uses the dual form X^T (X X^T + lambda I_n)^{-1} y when n < p and the
    primal form otherwise; the two agree to numerical precision for
    lambda > 0. lambda == 0 falls back to the pseudo-inverse with a warning.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n, p = features.shape
    if ridge_lambda <= 0.0:
        warnings.warn("ridge with lambda=0: using pseudo-inverse least squares")
        return np.linalg.lstsq(features, labels, rcond=None)[0]
    if n < p:
        gram = features @ features.T
        gram[np.diag_indices_from(gram)] += ridge_lambda
        return features.T @ np.linalg.solve(gram, labels)
    gram = features.T @ features
    gram[np.diag_indices_from(gram)] += ridge_lambda
    return np.linalg.solve(gram, features.T @ labels)


def second_layer_features(net: TwoLayerNet, inputs: np.ndarray) -> np.ndarray:
    """Feature map sigma(Z W^T) / sqrt(p) used for second-layer ridge."""
    return net.activation.value(np.asarray(inputs, dtype=float) @ net.first_layer.T) / math.sqrt(net.p)


# -- label preprocessing ------------------------------------------------------

def _multi_indices(d: int, below_degree: int):
    """Sparse multi-indices ((var, order), ...) of total degree < below_degree."""
    out = [()]
    for total in range(1, below_degree):
        for combo in combinations_with_replacement(range(d), total):
            idx = []
            for var in sorted(set(combo)):
                idx.append((var, combo.count(var)))
            out.append(tuple(idx))
    return out


def _basis_column(he_table: np.ndarray, index) -> np.ndarray:
    col = np.ones(he_table.shape[0])
    for var, order in index:
        col = col * he_table[:, var, order]
    return col


def preprocess_labels(batch: Dataset, k: int):
    """Subtract plug-in Hermite estimates of total degree < k from the labels.

    Coefficients c_hat are estimated in the standard basis of R^d from the
    batch itself, then the expansion sum c_hat / prod(j_i!) * prod He_{j_i}
    is removed. The degree-0 term (empirical mean) is always included for
    k >= 1. Returns (adjusted labels, coefficient table); the table feeds
    predict_with_reinjection at test time.
    """
    if k < 1:
        raise ValueError("preprocess degree k must be >= 1")
    max_order = max(k - 1, 1)
    he_table = he_values(max_order, batch.inputs)   # (n, d, max_order+1)
    adjusted = batch.labels.astype(float).copy()
    table = []
    for index in _multi_indices(batch.d, k):
        col = _basis_column(he_table, index)
        c_hat = float(batch.labels @ col) / batch.n
        denom = 1.0
        for _, order in index:
            denom *= math.factorial(order)
        table.append((index, c_hat))
        adjusted -= (c_hat / denom) * col
    return adjusted, table


def reinjection_values(table, inputs: np.ndarray) -> np.ndarray:
    """Evaluate the suppressed expansion sum c_hat/prod(j!) * prod He_j at `inputs`."""
    inputs = np.asarray(inputs, dtype=float)
    max_order = max((order for index, _ in table for _, order in index), default=1)
    he_table = he_values(max_order, inputs)
    out = np.zeros(inputs.shape[0])
    for index, c_hat in table:
        denom = 1.0
        for _, order in index:
            denom *= math.factorial(order)
        out += (c_hat / denom) * _basis_column(he_table, index)
    return out


def predict_with_reinjection(net: TwoLayerNet, a_hat: np.ndarray, table, inputs: np.ndarray) -> np.ndarray:
    """(1/sqrt(p)) a_hat^T sigma(W z) plus the reinjected suppressed part."""
    preds = second_layer_features(net, inputs) @ a_hat
    if table:
        preds = preds + reinjection_values(table, inputs)
    return preds


@dataclass
class RidgePredictor:
    """Trained second layer on top of a (possibly trained) first layer."""

    net: TwoLayerNet
    a_hat: np.ndarray
    table: list = field(default_factory=list)

    def __call__(self, inputs: np.ndarray) -> np.ndarray:
        return predict_with_reinjection(self.net, self.a_hat, self.table, inputs)


def fit_second_layer(net: TwoLayerNet, target: MultiIndexTarget, config: TrainConfig,
                     batch_tag="ridge") -> RidgePredictor:
    """Ridge-train the second layer on a fresh batch (preprocessed if enabled)."""
    batch = sample_dataset(target, config.n, config.d, (config.seed, batch_tag))
    table = []
    labels = batch.labels
    if config.preprocess_degree >= 1:
        labels, table = preprocess_labels(batch, config.preprocess_degree)
    feats = second_layer_features(net, batch.inputs)
    a_hat = ridge_second_layer(feats, labels, config.ridge_lambda)
    return RidgePredictor(net, a_hat, table)


def kernel_ridge_baseline(train: Dataset, degree: int, ridge_lambda: float, test: Dataset) -> float:
    """Held-out MSE of kernel ridge with k(x, y) = (1 + <x, y>/d)^degree."""
    if degree not in (1, 2, 3):
        raise ValueError("degree must be 1, 2 or 3")
    d = train.d
    gram = (1.0 + train.inputs @ train.inputs.T / d) ** degree
    gram[np.diag_indices_from(gram)] += ridge_lambda
    alpha = np.linalg.solve(gram, train.labels)
    cross = (1.0 + test.inputs @ train.inputs.T / d) ** degree
    preds = cross @ alpha
    return float(np.mean((preds - test.labels) ** 2))
