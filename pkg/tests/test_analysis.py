"""Alignment diagnostics, spike+bulk, norm law, orientation prediction."""

import math

import numpy as np
import pytest

from giantstep.analysis import (alignment_report, default_overlap_threshold,
                                generalization_error, norm_concentration_check,
                                norm_update_oracle, predicted_second_step_orientation,
                                recover_learned_subspace, spike_bulk)
from giantstep.hermite import Activation, hermite_coeffs
from giantstep.network import (Dataset, TrainConfig, gradient_matrix, init_symmetric,
                               train_first_layer)
from giantstep.polynomial import parse_polynomial
from giantstep.targets import MultiIndexTarget, make_teacher, sample_dataset


def target_of(expr, d, teacher_seed=None):
    link = parse_polynomial(expr)
    return MultiIndexTarget(make_teacher(link.num_vars, d, seed=teacher_seed), link)


def test_alignment_teacher_rows_and_rescaling():
    target = target_of("z1 + z2", 10, teacher_seed=1)
    rep = alignment_report(target.teacher, target)
    np.testing.assert_allclose(rep.ratios, 1.0, atol=1e-12)
    np.testing.assert_allclose(rep.cosines, np.eye(2), atol=1e-12)
    scaled = alignment_report(3.7 * target.teacher, target)
    np.testing.assert_allclose(scaled.ratios, rep.ratios, atol=1e-12)
    np.testing.assert_allclose(scaled.cosines, rep.cosines, atol=1e-12)


def test_alignment_zero_row_reports_nan():
    target = target_of("z1 + z2", 6)
    rep = alignment_report(np.zeros((2, 6)), target)
    assert np.all(np.isnan(rep.cosines)) and np.all(np.isnan(rep.ratios))


def test_alignment_rows_in_span_e1():
    target = target_of("z1 + z2", 6)
    rows = np.outer([1.0, -2.0], target.teacher[0])
    rep = alignment_report(rows, target)
    np.testing.assert_allclose(rep.cosines[:, 1], 0.0, atol=1e-12)


def test_alignment_random_rows_match_sphere_scale():
    # uniform-sphere oracle: ratios concentrate near r/d
    d, r = 10_000, 2
    target = target_of("z1 + z2", d, teacher_seed=2)
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((200, d))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    med = np.median(alignment_report(rows, target).ratios)
    assert r / d / 5 <= med <= 5 * r / d


def test_spike_bulk_reconstruction_and_identity_case():
    d = 12
    target = target_of("z1 + z2", d)
    net = init_symmetric(6, d, seed=4)
    net.activation = Activation.identity()
    batch = sample_dataset(target, 64, d, seed=5)
    grad = gradient_matrix(net, batch)
    decomp = spike_bulk(grad, net.second_layer, batch, mu1=1.0)
    # exact reconstruction by construction
    np.testing.assert_allclose(np.outer(decomp.u, decomp.v) + decomp.delta, -grad, atol=1e-14)
    # identity activation: sigma'_{>1} == 0 so Delta vanishes identically
    np.testing.assert_allclose(decomp.delta, 0.0, atol=1e-13)


def test_spike_bulk_relu_bulk_is_small():
    d = 256
    target = target_of("z1 + z2*z3", d)
    net = init_symmetric(128, d, seed=6)
    net.activation = Activation.relu()
    batch = sample_dataset(target, 4 * d, d, seed=7)
    grad = gradient_matrix(net, batch)
    mu1 = hermite_coeffs(Activation.relu(), 1)[1]
    decomp = spike_bulk(grad, net.second_layer, batch, mu1)
    spike_op = np.linalg.norm(decomp.u) * np.linalg.norm(decomp.v)
    bulk_op = np.linalg.svd(decomp.delta, compute_uv=False)[0]
    assert bulk_op < spike_op  # the spike dominates the bulk at this scale


def test_norm_concentration_eta_zero_exact():
    d = 32
    target = target_of("z1", d)
    net = init_symmetric(8, d, seed=8)
    oracle = norm_update_oracle(target, Activation.relu(), d, 50_000, seed=9)
    report = norm_concentration_check(net.first_layer, net.first_layer,
                                      net.second_layer, 0.0, 128, oracle)
    np.testing.assert_allclose(report["predicted"], 1.0, atol=1e-12)
    np.testing.assert_allclose(report["rel_deviation"], 0.0, atol=1e-12)


def test_norm_concentration_predicts_first_step():
    d = 256
    target = MultiIndexTarget(make_teacher(2, d), [Activation.erf(), Activation.erf()])
    oracle = norm_update_oracle(target, Activation.relu(), d, 500_000, seed=10)
    tc = TrainConfig(d=d, p=128, n=4 * d, T=1, eta_rule="alg1_scaled", eta_scale=1.0, seed=11)
    net = init_symmetric(tc.p, d, seed=11)
    net.activation = Activation.relu()
    trace = train_first_layer(net, target, tc)
    report = norm_concentration_check(trace.weights[0], trace.weights[1],
                                      net.second_layer, trace.eta, tc.n, oracle)
    assert report["median_rel_deviation"] <= 0.10


def test_predicted_orientation_pinned_values():
    target = target_of("z1 - z1^2 + z2 + z2^2", 8)
    c = 2.0 / math.sqrt(3.0 * math.pi)
    expected_plus = np.array([1.0 - c, 1.0 + c])
    expected_plus /= np.linalg.norm(expected_plus)
    v_plus = predicted_second_step_orientation(Activation.relu(), +1, 2.0, target)
    np.testing.assert_allclose(v_plus, expected_plus, rtol=1e-12)
    # decimal expansion pinned from evaluating 2/sqrt(3 pi) = 0.6514700...
    np.testing.assert_allclose(v_plus, np.array([0.34853, 1.65147]) / np.linalg.norm([0.34853, 1.65147]),
                               atol=1e-5)
    v_minus = predicted_second_step_orientation(Activation.relu(), -1, 2.0, target)
    np.testing.assert_allclose(v_minus, expected_plus[::-1], rtol=1e-12)
    assert abs(np.linalg.norm(v_plus) - 1.0) < 1e-12


def test_predicted_orientation_symmetric_stays_on_bisectrix():
    target = target_of("z1 + z1^2 + z2 + z2^2", 8)
    for sign in (+1, -1):
        v = predicted_second_step_orientation(Activation.relu(), sign, 2.0, target)
        np.testing.assert_allclose(v, np.full(2, 1.0 / math.sqrt(2.0)), rtol=1e-12)


def test_predicted_orientation_unsupported_cases():
    with pytest.raises(ValueError):
        predicted_second_step_orientation(Activation.tanh(), 1, 2.0,
                                          target_of("z1 - z1^2 + z2 + z2^2", 8))
    with pytest.raises(ValueError):
        predicted_second_step_orientation(Activation.relu(), 1, 2.0,
                                          target_of("z1 + z2*z3", 8))
    with pytest.raises(ValueError):
        predicted_second_step_orientation(Activation.relu(), 1, 2.0,
                                          target_of("z1 + 2*z2 + z1^2 - z2^2", 8))


def test_recover_learned_subspace_at_init_is_trivial():
    d = 512
    target = target_of("z1 + z2", d, teacher_seed=12)
    net = init_symmetric(64, d, seed=13)
    sub = recover_learned_subspace(net.first_layer, target)
    assert sub.dim == 0


def test_recover_learned_subspace_after_one_step():
    d = 256
    target = target_of("z1", d)
    tc = TrainConfig(d=d, p=64, n=4 * d, T=1, eta_rule="alg1_scaled", eta_scale=2.0, seed=14)
    net = init_symmetric(tc.p, d, seed=14)
    net.activation = Activation.relu()
    trace = train_first_layer(net, target, tc)
    sub = recover_learned_subspace(trace.weights[1], target)
    assert sub.dim == 1
    assert abs(abs(sub.basis[0][0]) - 1.0) < 0.05


def test_recover_learned_subspace_containment():
    # rows exactly in V* with large overlaps: recovered subspace within V*
    d = 64
    target = target_of("z1 + z2", d)
    rows = np.vstack([target.teacher[0], (target.teacher[0] + target.teacher[1]) / math.sqrt(2)])
    sub = recover_learned_subspace(rows, target, threshold=default_overlap_threshold(d))
    assert sub.dim <= 2
    for b in sub.basis:
        assert abs(np.linalg.norm(b) - 1.0) < 1e-10


def test_generalization_error_examples():
    d = 16
    target = target_of("z1", d)
    mse, se = generalization_error(lambda z: np.zeros(len(z)), target, n_test=50_000, seed=15)
    assert abs(mse - 1.0) <= 4 * se
    mse2, _ = generalization_error(lambda z: target.evaluate(z), target, n_test=10_000, seed=16)
    assert mse2 == 0.0
    # best linear predictor of z1 + z1 z2 leaves Var(z1 z2) = 1 (Wick oracle)
    t3 = target_of("z1 + z1*z2", d)
    cross = parse_polynomial("z1*z2", num_vars=2)
    wick = (cross * cross).gaussian_mean()
    assert wick == 1.0
    mse3, se3 = generalization_error(lambda z: z @ t3.teacher[0], t3, n_test=100_000, seed=17)
    assert abs(mse3 - wick) <= 4 * se3
    mse_norm, _ = generalization_error(lambda z: np.zeros(len(z)), t3, n_test=20_000,
                                       seed=18, normalize=True)
    assert abs(mse_norm - 1.0) < 0.05
