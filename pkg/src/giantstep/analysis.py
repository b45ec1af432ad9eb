"""Feature-learning diagnostics: overlaps, spike+bulk, norm law, orientations.

The rank-one decomposition and the norm/orientation predictions apply to
the negative gradient -G (the direction neurons actually move, since the
trainer steps W <- W - eta G); see the sign-convention note in
:mod:`giantstep.network`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import TwoLayerNet
from .hermite import Activation
from .staircase import Subspace
from .targets import Dataset, MultiIndexTarget, hermite_tensor
from .util import rng_from

__all__ = [
    "AlignmentReport",
    "alignment_report",
    "SpikeBulk",
    "spike_bulk",
    "norm_update_oracle",
    "norm_concentration_check",
    "predicted_second_step_orientation",
    "recover_learned_subspace",
    "generalization_error",
    "default_overlap_threshold",
]


@dataclass
class AlignmentReport:
    """Per-neuron overlaps with the teacher subspace.

    overlaps[i] = W* w_i (r-vector); cosines[i, k] = <w_i, w*_k>/||w_i||;
    ratio[i] = ||overlaps[i]||^2 / ||w_i||^2; norms[i] = ||w_i||.
    Zero rows get NaN cosines/ratios.
    """

    overlaps: np.ndarray
    cosines: np.ndarray
    ratios: np.ndarray
    norms: np.ndarray


def alignment_report(weights: np.ndarray, target: MultiIndexTarget) -> AlignmentReport:
    weights = np.asarray(weights, dtype=float)
    overlaps = weights @ target.teacher.T
    norms = np.linalg.norm(weights, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cosines = np.where(norms[:, None] > 0, overlaps / norms[:, None], np.nan)
        ratios = np.where(norms > 0, np.sum(overlaps ** 2, axis=1) / norms ** 2, np.nan)
    return AlignmentReport(overlaps, cosines, ratios, norms)


@dataclass
class SpikeBulk:
    """Negative gradient split -G = u v^T + Delta with u = (mu_1/sqrt(p)) a."""

    u: np.ndarray
    v: np.ndarray
    delta: np.ndarray


def spike_bulk(gradient: np.ndarray, second_layer: np.ndarray, batch: Dataset, mu1: float) -> SpikeBulk:
    """Split the step's alignment direction -G into spike and bulk.

    v = (1/n) sum_nu y_nu z_nu and u = (mu_1/sqrt(p)) a, so the identity
    -G = u v^T + Delta holds by construction (Delta := -G - u v^T).
    """
    gradient = np.asarray(gradient, dtype=float)
    p = second_layer.shape[0]
    u = (mu1 / math.sqrt(p)) * second_layer
    v = batch.inputs.T @ batch.labels / batch.n
    delta = -gradient - np.outer(u, v)
    return SpikeBulk(u, v, delta)


def norm_update_oracle(target: MultiIndexTarget, student: Activation, d: int,
                       mc_samples: int = 1_000_000, seed=0) -> tuple[float, float]:
    """Monte Carlo constants entering the first-step norm prediction.

    At zero teacher overlap, the per-sample vector X = z sigma'(<w, z>) f*(z)
    has mean norm-squared m2 = ||E X||^2 and second moment S = E||X||^2.
    Only the (r+1)-dimensional span of (w, teacher rows) matters, so the
    estimate is dimension-reduced:

        S = (d - r - 1) E[sigma'^2 f*^2] + E[||z_low||^2 sigma'^2 f*^2].

    Returns (m2, S). Independent of the training path by construction.
    """
    r = target.num_index
    rng = rng_from(seed, "norm-oracle")
    low = rng.standard_normal((mc_samples, r + 1))  # coords: teacher rows then w
    teacher_coords = low[:, :r]
    w_coord = low[:, r]
    fstar = target.link_values(teacher_coords)
    sprime = student.deriv(w_coord)
    s2f2 = sprime ** 2 * fstar ** 2
    mean_vec = np.empty(r + 1)
    for j in range(r + 1):
        mean_vec[j] = np.mean(low[:, j] * sprime * fstar)
    m2 = float(np.sum(mean_vec ** 2))
    low_norm2 = np.sum(low ** 2, axis=1)
    s_low = float(np.mean(low_norm2 * s2f2))
    s_rest = (d - r - 1) * float(np.mean(s2f2))
    return m2, s_low + s_rest


def norm_concentration_check(trace_weights_before: np.ndarray, trace_weights_after: np.ndarray,
                             second_layer: np.ndarray, eta: float, n: int,
                             oracle: tuple[float, float]) -> dict:
    """Per-neuron relative deviation of ||w_i^1||^2 from its predicted value.

    Prediction: 1 + eta^2 (a_i^2 / p) * [ (n-1)/n * m2 + S / n ] with (m2, S)
    from norm_update_oracle -- the eta^2 coefficient of the norm update
    ||g_i||^2 = (a_i^2/p) ||mean batch vector||^2, estimated independently
    of the run being checked. (a_i as stored already carries the 1/sqrt(p)
    init scale, so the only explicit factor left is 1/p.)
    """
    p = second_layer.shape[0]
    m2, s = oracle
    coeff = ((n - 1) / n) * m2 + s / n
    predicted = 1.0 + (eta ** 2) * (second_layer ** 2 / p) * coeff
    measured = np.sum(np.asarray(trace_weights_after, dtype=float) ** 2, axis=1)
    base = np.sum(np.asarray(trace_weights_before, dtype=float) ** 2, axis=1)
    rel_dev = np.abs(measured - predicted) / predicted
    return {
        "measured": measured,
        "predicted": predicted,
        "rel_deviation": rel_dev,
        "median_rel_deviation": float(np.median(rel_dev)),
        "init_norms_sq": base,
    }


def _erf_first_hermite(alpha: float = 1.0) -> float:
    """E[z erf(alpha z)] = 2 alpha / sqrt(pi (1 + 2 alpha^2)); 2/sqrt(3 pi) at alpha=1."""
    return 2.0 * alpha / math.sqrt(math.pi * (1.0 + 2.0 * alpha ** 2))


def predicted_second_step_orientation(student: Activation, a_sign: int, eta: float,
                                      target: MultiIndexTarget) -> np.ndarray:
    """Closed-form in-plane orientation of the second-step gradient.

    Supports a relu student on two-index targets whose quadratic tensor is
    diagonal with entries of equal magnitude (the worked case sigma*_1,2 =
    z -/+ z^2 after one step with spike coefficient 2, plus its symmetric
    analog). The tilt away from the bisectrix is the first Hermite
    coefficient of erf, 2/sqrt(3 pi), signed by the quadratic pattern and by
    a_sign; for the symmetric pattern the tilt cancels and the prediction
    stays on the bisectrix. Anything else raises ValueError (use the
    staircase oracle numerically instead).
    """
    if student.kind != "relu":
        raise ValueError("no closed form: prediction derived for a relu student")
    if a_sign not in (+1, -1):
        raise ValueError("a_sign must be +1 or -1")
    if target.num_index != 2 or not target.is_polynomial:
        raise ValueError("no closed form: need a two-index polynomial target")
    c1 = hermite_tensor(target, 1).entries
    if not np.allclose(c1, np.array([1.0, 1.0]), atol=1e-10):
        raise ValueError("no closed form: first Hermite coefficient must be (1, 1)")
    c2 = hermite_tensor(target, 2).entries
    if abs(c2[0, 1]) > 1e-10 or abs(abs(c2[0, 0]) - abs(c2[1, 1])) > 1e-10:
        raise ValueError("no closed form: quadratic tensor must be diagonal "
                         "with entries of equal magnitude")
    tilt = _erf_first_hermite(1.0)
    signs = np.sign(np.diag(c2))
    direction = np.array([1.0, 1.0]) + a_sign * tilt * signs
    return direction / np.linalg.norm(direction)


def default_overlap_threshold(d: int, scale: float = 4.0) -> float:
    """tau(d) = scale / sqrt(d): the 2/sqrt(d) null-overlap guide, doubled.

    Normalized overlaps never exceed 1, so a log(d)/sqrt(d) rule with a
    constant of 4 would reject every neuron at moderate d; the plain
    1/sqrt(d) scaling keeps the threshold between the initialization noise
    floor and any genuinely aligned neuron.
    """
    return scale / math.sqrt(d)


def recover_learned_subspace(weights: np.ndarray, target: MultiIndexTarget,
                             threshold: float | None = None) -> Subspace:
    """Empirical learned subspace from above-threshold normalized overlaps.

    Stacks q_i = (W* w_i)/||w_i|| for neurons with ||q_i|| > tau(d), takes
    the SVD, and keeps right singular vectors with singular value > tau(d).
    """
    weights = np.asarray(weights, dtype=float)
    tau = default_overlap_threshold(weights.shape[1]) if threshold is None else threshold
    report = alignment_report(weights, target)
    q = report.overlaps / np.maximum(report.norms[:, None], 1e-300)
    selected = q[np.linalg.norm(q, axis=1) > tau]
    r = target.num_index
    if selected.shape[0] == 0:
        return Subspace.trivial(r)
    _, s, vt = np.linalg.svd(selected, full_matrices=False)
    keep = s > tau
    return Subspace(vt[keep]) if np.any(keep) else Subspace.trivial(r)


def generalization_error(predict, target: MultiIndexTarget, n_test: int = 10_000,
                         seed=0, normalize: bool = False) -> tuple[float, float]:
    """Monte Carlo test MSE of `predict` (callable on an (m, d) array).

    Returns (mse, standard error); with normalize=True both are divided by
    Var(f*).
    """
    rng = rng_from(seed, "generalization")
    inputs = rng.standard_normal((n_test, target.dim))
    truth = target.evaluate(inputs)
    sq = (np.asarray(predict(inputs), dtype=float) - truth) ** 2
    mse = float(np.mean(sq))
    stderr = float(np.std(sq, ddof=1) / math.sqrt(n_test))
    if normalize:
        var = target.variance()
        mse, stderr = mse / var, stderr / var
    return mse, stderr
