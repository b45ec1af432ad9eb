"""Sparse multivariate polynomials with exact Gaussian moment calculus.

Polynomials are dictionaries mapping exponent tuples to coefficients.
Expectations over standard Gaussian coordinates use Wick's formula
E[z^(2m)] = (2m-1)!! with exact integer double factorials, so the
symbolic oracles built on top (Hermite projections, staircase
conditioning) carry no quadrature error.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .util import double_factorial

_COEFF_TOL = 0.0  # only exact zeros are dropped; thresholds live in callers


class MultivariatePolynomial:
    """Polynomial in `num_vars` real variables, sparse exponent-map storage."""

    __slots__ = ("num_vars", "terms")

    def __init__(self, num_vars: int, terms=None):
        self.num_vars = int(num_vars)
        self.terms: dict[tuple[int, ...], float] = {}
        if terms:
            for exps, coeff in terms.items():
                if len(exps) != self.num_vars:
                    raise ValueError("exponent tuple length != num_vars")
                if coeff != 0.0:
                    self.terms[tuple(int(e) for e in exps)] = self.terms.get(tuple(exps), 0.0) + float(coeff)
            self.terms = {e: c for e, c in self.terms.items() if c != 0.0}

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, num_vars):
        return cls(num_vars)

    @classmethod
    def constant(cls, num_vars, value):
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, num_vars, index):
        exps = [0] * num_vars
        exps[index] = 1
        return cls(num_vars, {tuple(exps): 1.0})

    # -- basic queries -----------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exps) -> float:
        return self.terms.get(tuple(exps), 0.0)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, coeff in sorted(self.terms.items()):
            mono = "*".join(f"z{i + 1}^{e}" if e > 1 else f"z{i + 1}" for i, e in enumerate(exps) if e)
            parts.append(f"{coeff:g}*{mono}" if mono else f"{coeff:g}")
        return " + ".join(parts)

    # -- ring operations ---------------------------------------------------
    def _check(self, other):
        if self.num_vars != other.num_vars:
            raise ValueError("mixing polynomials over different variable counts")

    def __add__(self, other):
        if not isinstance(other, MultivariatePolynomial):
            other = MultivariatePolynomial.constant(self.num_vars, other)
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return MultivariatePolynomial(self.num_vars, out)

    __radd__ = __add__

    def __neg__(self):
        return MultivariatePolynomial(self.num_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, MultivariatePolynomial) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, MultivariatePolynomial):
            c = float(other)
            return MultivariatePolynomial(self.num_vars, {e: c * v for e, v in self.terms.items()})
        self._check(other)
        out: dict[tuple[int, ...], float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return MultivariatePolynomial(self.num_vars, out)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("negative powers not supported")
        out = MultivariatePolynomial.constant(self.num_vars, 1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # -- calculus ----------------------------------------------------------
    def partial(self, index: int) -> "MultivariatePolynomial":
        out = {}
        for exps, coeff in self.terms.items():
            e = exps[index]
            if e == 0:
                continue
            new = list(exps)
            new[index] = e - 1
            key = tuple(new)
            out[key] = out.get(key, 0.0) + coeff * e
        return MultivariatePolynomial(self.num_vars, out)

    def gradient(self):
        return [self.partial(i) for i in range(self.num_vars)]

    def compose_linear(self, matrix) -> "MultivariatePolynomial":
        """Substitute z_i <- sum_j matrix[i, j] * x_j; result over x variables."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape[0] != self.num_vars:
            raise ValueError("matrix rows must equal num_vars")
        m = matrix.shape[1]
        linear = [
            MultivariatePolynomial(m, {tuple(int(j == k) for k in range(m)): matrix[i, j]
                                       for j in range(m) if matrix[i, j] != 0.0})
            for i in range(self.num_vars)
        ]
        out = MultivariatePolynomial.zero(m)
        for exps, coeff in self.terms.items():
            term = MultivariatePolynomial.constant(m, coeff)
            for i, e in enumerate(exps):
                if e:
                    term = term * (linear[i] ** e)
            out = out + term
        return out

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at `points` of shape (..., num_vars); returns shape (...)."""
        points = np.asarray(points, dtype=float)
        scalar_input = points.ndim == 1
        pts = np.atleast_2d(points)
        if pts.shape[-1] != self.num_vars:
            raise ValueError("points last axis must equal num_vars")
        max_es = [0] * self.num_vars
        for exps in self.terms:
            for i, e in enumerate(exps):
                max_es[i] = max(max_es[i], e)
        # power tables per variable
        powers = [np.ones(pts.shape[:-1] + (max_es[i] + 1,)) for i in range(self.num_vars)]
        for i in range(self.num_vars):
            for e in range(1, max_es[i] + 1):
                powers[i][..., e] = powers[i][..., e - 1] * pts[..., i]
        out = np.zeros(pts.shape[:-1])
        for exps, coeff in self.terms.items():
            mono = np.full(pts.shape[:-1], coeff)
            for i, e in enumerate(exps):
                if e:
                    mono = mono * powers[i][..., e]
            out += mono
        return out[0] if scalar_input else out

    # -- Gaussian calculus ---------------------------------------------------
    def gaussian_mean(self) -> float:
        """E[p(z)] for z ~ N(0, I); exact via E[z^(2m)] = (2m-1)!!."""
        total = 0.0
        for exps, coeff in self.terms.items():
            if any(e % 2 for e in exps):
                continue
            moment = 1
            for e in exps:
                moment *= double_factorial(e - 1)
            total += coeff * moment
        return total

    def gaussian_mean_partial(self, var_indices) -> "MultivariatePolynomial":
        """Expectation over the listed variables; result independent of them."""
        var_indices = set(int(i) for i in var_indices)
        out: dict[tuple[int, ...], float] = {}
        for exps, coeff in self.terms.items():
            moment = 1
            skip = False
            new = list(exps)
            for i in var_indices:
                e = exps[i]
                if e % 2:
                    skip = True
                    break
                moment *= double_factorial(e - 1)
                new[i] = 0
            if skip:
                continue
            key = tuple(new)
            out[key] = out.get(key, 0.0) + coeff * moment
        return MultivariatePolynomial(self.num_vars, out)

    def restrict_to_vars(self, var_indices) -> "MultivariatePolynomial":
        """Re-index onto the listed variables; remaining exponents must be 0."""
        var_indices = list(var_indices)
        out = {}
        for exps, coeff in self.terms.items():
            for i, e in enumerate(exps):
                if e and i not in var_indices:
                    raise ValueError("polynomial depends on a dropped variable")
            out[tuple(exps[i] for i in var_indices)] = coeff
        return MultivariatePolynomial(len(var_indices), out)


# -- probabilists' Hermite polynomials in monomial basis ---------------------

def he_monomial_coefficients(k: int) -> list[int]:
    """Monomial coefficients (ascending) of He_k via the three-term recurrence."""
    if k < 0:
        raise ValueError("order must be >= 0")
    prev = [1]            # He_0
    if k == 0:
        return prev
    cur = [0, 1]          # He_1
    for n in range(1, k):
        nxt = [0] + cur                     # x * He_n
        for i, c in enumerate(prev):        # - n * He_{n-1}
            nxt[i] -= n * c
        prev, cur = cur, nxt
    return cur


def he_of(k: int, poly: MultivariatePolynomial) -> MultivariatePolynomial:
    """He_k composed with a polynomial argument."""
    out = MultivariatePolynomial.zero(poly.num_vars)
    for power, coeff in enumerate(he_monomial_coefficients(k)):
        if coeff:
            out = out + float(coeff) * (poly ** power)
    return out


def he_univariate(num_vars: int, var: int, k: int) -> MultivariatePolynomial:
    return he_of(k, MultivariatePolynomial.variable(num_vars, var))


def product_hermite_coeff(g: MultivariatePolynomial, orders) -> float:
    """E[g(z) * prod_i He_{orders[i]}(z_i)] for z ~ N(0, I_r), exact.

    `orders` is a length-r vector of non-negative integers.
    """
    orders = [int(j) for j in orders]
    if len(orders) != g.num_vars:
        raise ValueError("orders length must match the number of variables")
    prod = g
    for i, k in enumerate(orders):
        if k:
            prod = prod * he_univariate(g.num_vars, i, k)
    return prod.gaussian_mean()


# -- parsing ------------------------------------------------------------------

_VAR_RE = re.compile(r"\bz(\d+)\b")
_HE_RE = re.compile(r"\bHe(\d+)\b")


def parse_polynomial(text: str, num_vars: int | None = None) -> MultivariatePolynomial:
    """Parse expressions like ``z1/3 + 2*He2(z1)*z2 + z1*z3``.

    Variables are z1, z2, ...; HeK(...) is the probabilists' Hermite
    polynomial of order K. Evaluation happens through the polynomial
    ring operators, with no builtins exposed.
    """
    seen = [int(m) for m in _VAR_RE.findall(text)]
    if not seen and num_vars is None:
        raise ValueError("no variables found in polynomial expression")
    r = num_vars if num_vars is not None else max(seen)
    if seen and max(seen) > r:
        raise ValueError(f"variable z{max(seen)} exceeds num_vars={r}")
    namespace = {f"z{i + 1}": MultivariatePolynomial.variable(r, i) for i in range(r)}
    for k in set(int(m) for m in _HE_RE.findall(text)):
        namespace[f"He{k}"] = (lambda kk: lambda p: he_of(kk, p))(k)
    expr = text.replace("^", "**")
    if not re.fullmatch(r"[\w\s\+\-\*/\(\)\.]+", expr):
        raise ValueError(f"unsupported characters in polynomial expression: {text!r}")
    try:
        value = eval(expr, {"__builtins__": {}}, namespace)  # noqa: S307 - ring-restricted
    except Exception as exc:
        raise ValueError(f"could not parse polynomial {text!r}: {exc}") from exc
    if isinstance(value, (int, float)):
        value = MultivariatePolynomial.constant(r, float(value))
    if not isinstance(value, MultivariatePolynomial):
        raise ValueError(f"expression {text!r} did not evaluate to a polynomial")
    return value


def monomial_to_hermite(coeffs) -> np.ndarray:
    """1-D change of basis: f = sum_n c_n x^n -> mu_k = E[f He_k], exact.

    Uses x^n = sum_m binom(n, 2m) (2m-1)!! He_{n-2m}(x), so
    mu_k = k! * sum over contributing monomials.
    """
    coeffs = list(coeffs)
    deg = len(coeffs) - 1
    mu = np.zeros(deg + 1)
    for n, c in enumerate(coeffs):
        if c == 0:
            continue
        for m in range(n // 2 + 1):
            k = n - 2 * m
            mu[k] += c * math.comb(n, 2 * m) * double_factorial(2 * m - 1) * math.factorial(k)
    return mu
