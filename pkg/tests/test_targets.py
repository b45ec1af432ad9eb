"""Targets, data generation, Hermite tensors, HOSVD, leap index."""

import math

import numpy as np
import pytest

from giantstep.hermite import Activation, he_poly
from giantstep.polynomial import parse_polynomial
from giantstep.targets import (Dataset, HermiteTensor, MultiIndexTarget,
                               conditional_variance, hermite_tensor, hosvd,
                               leap_index, make_teacher, sample_dataset)


def target_of(expr, d=8, teacher_seed=None):
    link = parse_polynomial(expr)
    return MultiIndexTarget(make_teacher(link.num_vars, d, seed=teacher_seed), link)


def test_teacher_orthonormality_enforced():
    bad = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    with pytest.raises(ValueError):
        MultiIndexTarget(bad, parse_polynomial("z1 + z2"))
    random_teacher = make_teacher(3, 12, seed=4)
    gram = random_teacher @ random_teacher.T
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12


def test_sample_dataset_label_statistics():
    # g* = z1: label mean within 3 sigma of 0, variance within 3 sigma of 1
    ds = sample_dataset(target_of("z1"), 100_000, 8, seed=0)
    n = ds.n
    assert abs(ds.labels.mean()) <= 3.0 / math.sqrt(n)
    var_se = math.sqrt(2.0 / n)  # Var of sample variance of N(0,1) ~ 2/n
    assert abs(ds.labels.var() - 1.0) <= 3 * var_se
    # g* = He2(z1): mean 0
    ds2 = sample_dataset(target_of("He2(z1)"), 100_000, 8, seed=1)
    se2 = ds2.labels.std(ddof=1) / math.sqrt(n)
    assert abs(ds2.labels.mean()) <= 3 * se2


def test_sample_dataset_correlation_oracle():
    # Wick oracle: E[y <w1*, z>] = 1 exactly for g* = z1 + z1 z2
    target = target_of("z1 + z1*z2", d=8, teacher_seed=3)
    g = target.link
    z1 = parse_polynomial("z1", num_vars=2)
    exact = (g * z1).gaussian_mean()
    assert exact == 1.0
    ds = sample_dataset(target, 100_000, 8, seed=2)
    proj = ds.inputs @ target.teacher[0]
    prod = ds.labels * proj
    se = prod.std(ddof=1) / math.sqrt(ds.n)
    assert abs(prod.mean() - exact) <= 3 * se


def test_sample_dataset_labels_exact_and_deterministic():
    target = target_of("z1 + z2*z3", d=6)
    ds = sample_dataset(target, 50, 6, seed=9)
    np.testing.assert_array_equal(ds.labels, target.evaluate(ds.inputs))
    ds2 = sample_dataset(target, 50, 6, seed=9)
    np.testing.assert_array_equal(ds.inputs, ds2.inputs)
    assert not np.array_equal(ds.inputs, sample_dataset(target, 50, 6, seed=10).inputs)


def test_sample_dataset_dimension_error():
    target = target_of("z1 + z2*z3", d=6)
    with pytest.raises(ValueError):
        sample_dataset(target, 10, 2, seed=0)


def test_hermite_tensor_pinned_examples():
    t1 = hermite_tensor(target_of("z1 + z1*z2"), 1)
    np.testing.assert_allclose(t1.entries, [1.0, 0.0], atol=1e-14)
    t2 = hermite_tensor(target_of("He2(z1) + He2(z2)"), 1)
    np.testing.assert_allclose(t2.entries, [0.0, 0.0], atol=1e-14)
    cross = hermite_tensor(target_of("z1*z2"), 2)
    assert cross.entries[0, 0] == 0.0 and cross.entries[1, 1] == 0.0
    # off-diagonal value fixed by the sqrt(k!) packing convention
    np.testing.assert_allclose(cross.entries[0, 1], 1.0 / math.sqrt(2.0), rtol=1e-12)
    np.testing.assert_allclose(cross.entries, cross.entries.T)


def test_hermite_tensor_zero_above_degree():
    t = hermite_tensor(target_of("z1 + z1*z2"), 4)
    assert t.frobenius_norm() == 0.0


def test_hermite_tensor_monte_carlo_oracle():
    # every entry matches the MC projection within 3 standard errors (r<=3, k<=4)
    rng = np.random.default_rng(31)
    target = target_of("z1 + z1*z2 + He2(z1)*z3 + He4(z2)")
    z = rng.standard_normal((1_000_000, 3))
    gv = target.link.evaluate(z)
    for k in range(1, 5):
        tensor = hermite_tensor(target, k)
        scale = math.sqrt(math.factorial(k))
        for idx in [(0,) * k, (0, 1) * (k // 2) + (0,) * (k % 2), (2,) * k]:
            orders = [idx.count(i) for i in range(3)]
            he = np.ones(len(z))
            for i, o in enumerate(orders):
                if o:
                    he = he * he_poly(o, z[:, i])
            prod = gv * he / scale
            se = prod.std(ddof=1) / math.sqrt(len(z))
            assert abs(tensor.entries[idx] - prod.mean()) <= 3 * se + 1e-12, (k, idx)


def test_symmetry_invariant():
    t = hermite_tensor(target_of("z1*z2*z3 + He2(z1)*z2"), 3)
    arr = t.entries
    np.testing.assert_allclose(arr, np.transpose(arr, (1, 0, 2)), atol=1e-12)
    np.testing.assert_allclose(arr, np.transpose(arr, (2, 1, 0)), atol=1e-12)


def test_parseval_identity():
    # sum_k <C_k, C_k>_F equals E[g*^2] within 1e-8 (exact here)
    for expr in ["z1 + z1*z2", "He2(z1) + He2(z2)", "z1/3 + 2*z1*z2/3 + z2*z3",
                 "z1 + He2(z1)/2 + He4(z1)/24"]:
        target = target_of(expr)
        g = target.link
        total = sum(float(np.sum(np.atleast_1d(hermite_tensor(target, k).entries) ** 2))
                    for k in range(0, g.degree + 1))
        assert abs(total - (g * g).gaussian_mean()) <= 1e-8


def test_leap_index_examples():
    assert leap_index(target_of("He2(z1) + He2(z2)")) == 2
    assert leap_index(target_of("z1 + z2*z3")) == 1
    assert leap_index(target_of("He4(z1)")) == 4
    with pytest.raises(ValueError):
        leap_index(target_of("z1*0 + 1"))


def test_leap_index_activation_sum_link():
    target = MultiIndexTarget(make_teacher(2, 8), [Activation.erf(), Activation.erf()])
    assert leap_index(target) == 1
    target2 = MultiIndexTarget(make_teacher(2, 8), [Activation.hermite(2), Activation.hermite(2)])
    assert leap_index(target2) == 2


def test_leap_index_basis_invariance():
    # rotate teacher rows and counter-rotate the link: leap is unchanged
    rng = np.random.default_rng(5)
    for expr in ["He2(z1) + He2(z2)", "z1 + z2*z3", "z1*z2*z3"]:
        target = target_of(expr, d=9)
        r = target.num_index
        q, _ = np.linalg.qr(rng.standard_normal((r, r)))
        rotated = MultiIndexTarget(q @ target.teacher, target.link.compose_linear(q.T))
        pts = rng.standard_normal((64, 9))
        np.testing.assert_allclose(rotated.evaluate(pts), target.evaluate(pts),
                                   rtol=1e-10, atol=1e-10)
        assert leap_index(rotated) == leap_index(target)


def test_hosvd_examples():
    res = hosvd(hermite_tensor(target_of("He2(z1) + He2(z2)"), 2))
    assert res.rank == 2
    res1 = hosvd(hermite_tensor(target_of("z1", d=4), 1))
    assert res1.rank == 1
    np.testing.assert_allclose(np.abs(res1.vectors[0]), [1.0], atol=1e-12)
    res2 = hosvd(hermite_tensor(target_of("He2(z1) + 0*z2"), 2))
    assert res2.rank == 1
    np.testing.assert_allclose(np.abs(res2.vectors[0]), [1.0, 0.0], atol=1e-12)


def test_hosvd_matches_matrix_svd_oracle():
    tensor = hermite_tensor(target_of("He2(z1) + He2(z2)"), 2)
    res = hosvd(tensor)
    svals = np.linalg.svd(tensor.entries, compute_uv=False)
    core_svals = np.sort(np.abs(np.diag(res.core)))[::-1]
    np.testing.assert_allclose(core_svals, svals, rtol=1e-12)


def test_hosvd_random_symmetric_reconstruction():
    rng = np.random.default_rng(6)
    for r, k in [(2, 2), (3, 3), (4, 4), (3, 4)]:
        raw = rng.standard_normal((r,) * k)
        sym = np.zeros_like(raw)
        from itertools import permutations

        for perm in set(permutations(range(k))):
            sym += np.transpose(raw, perm)
        sym /= math.factorial(k)
        tensor = HermiteTensor(k, r, sym)
        res = hosvd(tensor)
        err = np.sqrt(np.sum((res.reconstruct() - sym) ** 2))
        assert err <= 1e-8, (r, k, err)


def test_hosvd_zero_tensor():
    res = hosvd(HermiteTensor(2, 3, np.zeros((3, 3))))
    assert res.rank == 0 and res.vectors == []


def test_conditional_variance_examples():
    # f* measurable wrt U -> 0
    t = target_of("z1 + z1*z2")
    est, _ = conditional_variance(t, np.eye(2), mc_samples=20_000, seed=0)
    assert est == 0.0 or abs(est) < 1e-12
    # f* = z1 + z2 z3 given span(e1): Var(z2 z3) = 1 by the Wick oracle
    t2 = target_of("z1 + z2*z3")
    g = t2.link
    cross = parse_polynomial("z2*z3", num_vars=3)
    wick = (cross * cross).gaussian_mean() - cross.gaussian_mean() ** 2
    assert wick == 1.0
    est2, se2 = conditional_variance(t2, np.array([[1.0, 0.0, 0.0]]),
                                     mc_samples=200_000, seed=1)
    assert abs(est2 - wick) <= max(4 * se2, 0.02)
    # U = {0}: Var(z1) = 1
    est3, se3 = conditional_variance(target_of("z1"), None, mc_samples=200_000, seed=2)
    assert abs(est3 - 1.0) <= max(4 * se3, 0.02)


def test_polynomial_link_truncates_named_activations():
    target = MultiIndexTarget(make_teacher(2, 8), [Activation.erf(), Activation.erf()])
    rng = np.random.default_rng(8)
    pts = rng.uniform(-1.5, 1.5, size=(200, 2))
    direct = target.link_values(pts)
    # truncation error shrinks with the configured degree
    errs = [np.max(np.abs(target.polynomial_link(degree=deg).evaluate(pts) - direct))
            for deg in (5, 9)]
    assert errs[1] < errs[0] < 0.2
