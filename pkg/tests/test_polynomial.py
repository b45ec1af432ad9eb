"""Multivariate polynomial ring and exact Gaussian (Wick) calculus."""

import math

import numpy as np
import pytest

from giantstep.polynomial import (MultivariatePolynomial, he_monomial_coefficients,
                                  he_of, he_univariate, monomial_to_hermite,
                                  parse_polynomial, product_hermite_coeff)



def test_parse_and_evaluate():
    rng = np.random.default_rng(20)
    poly = parse_polynomial("z1/3 + 2*z1*z2/3 + z2*z3")
    pts = rng.standard_normal((64, 3))
    direct = pts[:, 0] / 3 + 2 * pts[:, 0] * pts[:, 1] / 3 + pts[:, 1] * pts[:, 2]
    np.testing.assert_allclose(poly.evaluate(pts), direct, rtol=1e-12)


def test_parse_hermite_and_powers():
    rng = np.random.default_rng(21)
    poly = parse_polynomial("He2(z1) + z2^2")
    x = rng.standard_normal((10, 2))
    np.testing.assert_allclose(poly.evaluate(x), x[:, 0] ** 2 - 1 + x[:, 1] ** 2, rtol=1e-12)


def test_parse_rejects_unknown_symbols():
    with pytest.raises(ValueError):
        parse_polynomial("z1 + import os")
    with pytest.raises(ValueError):
        parse_polynomial("__class__")


def test_ring_operations_against_pointwise():
    rng = np.random.default_rng(22)
    a = parse_polynomial("z1 + z2^2", num_vars=2)
    b = parse_polynomial("1 + z1*z2", num_vars=2)
    pts = rng.standard_normal((32, 2))
    np.testing.assert_allclose((a * b - a + 2.0).evaluate(pts),
                               a.evaluate(pts) * b.evaluate(pts) - a.evaluate(pts) + 2.0,
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose((a ** 3).evaluate(pts), a.evaluate(pts) ** 3,
                               rtol=1e-12, atol=1e-12)


def test_partial_derivatives():
    rng = np.random.default_rng(23)
    g = parse_polynomial("z1^3*z2 + z2^2")
    pts = rng.standard_normal((16, 2))
    np.testing.assert_allclose(g.partial(0).evaluate(pts), 3 * pts[:, 0] ** 2 * pts[:, 1], rtol=1e-12)
    np.testing.assert_allclose(g.partial(1).evaluate(pts), pts[:, 0] ** 3 + 2 * pts[:, 1], rtol=1e-12)


def test_gaussian_mean_wick_values():
    # E[z^2] = 1, E[z^4] = 3, E[z^6] = 15, odd moments vanish
    z = MultivariatePolynomial.variable(1, 0)
    assert (z ** 2).gaussian_mean() == 1.0
    assert (z ** 4).gaussian_mean() == 3.0
    assert (z ** 6).gaussian_mean() == 15.0
    assert (z ** 3).gaussian_mean() == 0.0
    g = parse_polynomial("z1^2*z2^4 + z1*z2")
    assert g.gaussian_mean() == 3.0  # E[z1^2]E[z2^4] = 1*3


def test_gaussian_mean_against_monte_carlo():
    rng = np.random.default_rng(24)
    g = parse_polynomial("z1 + 2*z1^2*z2^2 - z3^4 + z1*z2*z3")
    z = rng.standard_normal((2_000_000, 3))
    vals = g.evaluate(z)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(g.gaussian_mean() - vals.mean()) <= 4 * se


def test_gaussian_mean_partial():
    rng = np.random.default_rng(25)
    g = parse_polynomial("z1*z2^2 + z2^4 + z1^2")
    out = g.gaussian_mean_partial([1])  # integrate z2
    pts = rng.standard_normal((8, 2))
    np.testing.assert_allclose(out.evaluate(pts), pts[:, 0] + 3.0 + pts[:, 0] ** 2, rtol=1e-12)


def test_compose_linear_rotation():
    rng = np.random.default_rng(26)
    g = parse_polynomial("z1^2 - z2^2 + z1")
    theta = 0.3
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    h = g.compose_linear(rot)
    pts = rng.standard_normal((32, 2))
    np.testing.assert_allclose(h.evaluate(pts), g.evaluate(pts @ rot.T), rtol=1e-10, atol=1e-10)


def test_he_monomial_coefficients():
    assert he_monomial_coefficients(0) == [1]
    assert he_monomial_coefficients(1) == [0, 1]
    assert he_monomial_coefficients(2) == [-1, 0, 1]
    assert he_monomial_coefficients(3) == [0, -3, 0, 1]
    assert he_monomial_coefficients(4) == [3, 0, -6, 0, 1]


def test_he_of_composition():
    rng = np.random.default_rng(27)
    g = parse_polynomial("z1 + z2")
    pts = rng.standard_normal((16, 2))
    s = pts.sum(axis=1)
    np.testing.assert_allclose(he_of(3, g).evaluate(pts), s ** 3 - 3 * s, rtol=1e-12)


def test_product_hermite_coeff_pinned():
    g = parse_polynomial("z1*z2")
    assert product_hermite_coeff(g, (1, 1)) == 1.0     # E[z1^2] E[z2^2]
    assert product_hermite_coeff(g, (2, 0)) == 0.0     # odd moment in z2
    g2 = parse_polynomial("z1^2 + z2^2")
    assert product_hermite_coeff(g2, (2, 0)) == 2.0    # E[z1^4 - z1^2] = 2


def test_product_hermite_coeff_against_monte_carlo():
    rng = np.random.default_rng(28)
    g = parse_polynomial("z1 + z1*z2 + He2(z1)*z2")
    z = rng.standard_normal((1_000_000, 2))
    gv = g.evaluate(z)
    for orders in [(1, 0), (1, 1), (2, 1), (0, 2)]:
        he = np.ones(len(z))
        for i, k in enumerate(orders):
            if k:
                from giantstep.hermite import he_poly
                he = he * he_poly(k, z[:, i])
        prod = gv * he
        se = prod.std(ddof=1) / math.sqrt(len(z))
        assert abs(product_hermite_coeff(g, orders) - prod.mean()) <= 4 * se


def test_monomial_to_hermite_roundtrip():
    rng = np.random.default_rng(29)
    coeffs = [0.5, -1.0, 0.25, 2.0, -0.5]
    mu = monomial_to_hermite(coeffs)
    x = rng.uniform(-3, 3, 40)
    from giantstep.hermite import he_values

    weights = mu / np.array([math.factorial(k) for k in range(len(mu))])
    recon = he_values(len(mu) - 1, x) @ weights
    direct = np.polynomial.polynomial.polyval(x, coeffs)
    np.testing.assert_allclose(recon, direct, rtol=1e-10, atol=1e-12)


def test_restrict_to_vars():
    rng = np.random.default_rng(30)
    g = parse_polynomial("z1*z3 + z3^2", num_vars=3)
    reduced = g.gaussian_mean_partial([1]).restrict_to_vars([0, 2])
    assert reduced.num_vars == 2
    pts = rng.standard_normal((8, 2))
    np.testing.assert_allclose(reduced.evaluate(pts), pts[:, 0] * pts[:, 1] + pts[:, 1] ** 2,
                               rtol=1e-12)
