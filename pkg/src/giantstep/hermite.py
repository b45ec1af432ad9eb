"""One-dimensional Hermite machinery: polynomials, activations, coefficients.

Convention used throughout: probabilists' Hermite polynomials He_k with
He_0 = 1, He_1 = x, He_{k+1} = x He_k - k He_{k-1}, and the expansion

    f(x) = sum_k (mu_k / k!) He_k(x),   mu_k = E_{z~N(0,1)}[f(z) He_k(z)].

The tensor-valued decomposition in :mod:`giantstep.targets` packs the same
coefficients symmetrically; see that module's docstring for the exact map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from .polynomial import monomial_to_hermite

__all__ = [
    "he_poly",
    "he_values",
    "HermiteSeries",
    "Activation",
    "QuadratureError",
    "hermite_coeffs",
    "leap_index_1d",
]


def he_poly(k: int, x):
    """He_k(x) by the three-term recurrence; `x` may be scalar or an array."""
    if k < 0:
        raise ValueError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for n in range(1, k):
        prev, cur = cur, x * cur - n * prev
    return cur if cur.ndim else float(cur)


def he_values(kmax: int, x) -> np.ndarray:
    """All of He_0..He_kmax at x, stacked on a trailing axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (kmax + 1,))
    out[..., 0] = 1.0
    if kmax >= 1:
        out[..., 1] = x
    for n in range(1, kmax):
        out[..., n + 1] = x * out[..., n] - n * out[..., n - 1]
    return out


@dataclass
class HermiteSeries:
    """Coefficients mu_0..mu_kmax of a scalar function of a standard Gaussian."""

    coeffs: np.ndarray
    kmax: int

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.kmax + 1,):
            raise ValueError("coeffs must have length kmax + 1")

    def __getitem__(self, k: int) -> float:
        return float(self.coeffs[k])

    def reconstruct(self, x):
        """sum_k (mu_k / k!) He_k(x)."""
        weights = self.coeffs / np.array([math.factorial(k) for k in range(self.kmax + 1)])
        return he_values(self.kmax, x) @ weights


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to converge."""


@dataclass
class Activation:
    """Scalar activation, evaluable pointwise with a pointwise derivative.

    Kinds: relu, erf, tanh, identity, hermite(k), polynomial(coeffs).
    Polynomial coefficients are in the monomial basis, ascending order.
    relu uses the subgradient convention sigma'(0) = 0.
    """

    kind: str
    order: int = 0
    coeffs: tuple = field(default_factory=tuple)

    _KINDS = ("relu", "erf", "tanh", "identity", "hermite", "polynomial")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "hermite" and self.order < 0:
            raise ValueError("hermite order must be >= 0")
        if self.kind == "polynomial" and not self.coeffs:
            raise ValueError("polynomial activation needs coefficients")

    # constructors ----------------------------------------------------------
    @classmethod
    def relu(cls):
        return cls("relu")

    @classmethod
    def erf(cls):
        return cls("erf")

    @classmethod
    def tanh(cls):
        return cls("tanh")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def hermite(cls, k: int):
        return cls("hermite", order=k)

    @classmethod
    def polynomial(cls, coeffs):
        return cls("polynomial", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def from_name(cls, name: str):
        name = name.strip()
        if name.startswith("He") and name[2:].isdigit():
            return cls.hermite(int(name[2:]))
        if name in ("relu", "erf", "tanh", "identity"):
            return cls(name)
        raise ValueError(f"unknown activation name {name!r}")

    # evaluation --------------------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return self.kind in ("identity", "hermite", "polynomial")

    def monomial_coeffs(self) -> np.ndarray:
        if self.kind == "identity":
            return np.array([0.0, 1.0])
        if self.kind == "hermite":
            from .polynomial import he_monomial_coefficients

            return np.array(he_monomial_coefficients(self.order), dtype=float)
        if self.kind == "polynomial":
            return np.asarray(self.coeffs, dtype=float)
        raise ValueError(f"{self.kind} has no finite monomial expansion")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "erf":
            return special.erf(x)
        if self.kind == "tanh":
            return np.tanh(x)
        if self.kind == "identity":
            return x
        if self.kind == "hermite":
            return he_poly(self.order, x)
        return np.polynomial.polynomial.polyval(x, np.asarray(self.coeffs))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            return (x > 0.0).astype(float)
        if self.kind == "erf":
            return 2.0 / math.sqrt(math.pi) * np.exp(-x * x)
        if self.kind == "tanh":
            t = np.tanh(x)
            return 1.0 - t * t
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "hermite":
            return self.order * he_poly(self.order - 1, x) if self.order else np.zeros_like(x)
        dcoef = np.polynomial.polynomial.polyder(np.asarray(self.coeffs))
        return np.polynomial.polynomial.polyval(x, dcoef)

    def kink_points(self):
        return (0.0,) if self.kind == "relu" else ()

    def __call__(self, x):
        return self.value(x)


_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _gauss_hermite_expectation(f, kmax, nodes):
    # scipy's probabilists' rule stays stable at high node counts, unlike
    # numpy's hermegauss/hermgauss which overflow past a few hundred nodes
    x, w = special.roots_hermitenorm(nodes)
    vals = f(x) * he_values(kmax, x).T  # (kmax+1, nodes)
    return vals @ w / _SQRT_2PI


def _split_expectation(f, kmax, kinks, nodes, cutoff=12.0):
    """Piecewise Gauss-Legendre of f(x) He_k(x) phi(x) dx, split at kinks."""
    edges = sorted(set([-cutoff, cutoff] + [k for k in kinks if -cutoff < k < cutoff]))
    total = np.zeros(kmax + 1)
    ref, wref = legendre.leggauss(nodes)
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * ref + 0.5 * (b + a)
        w = 0.5 * (b - a) * wref
        phi = np.exp(-0.5 * x * x) / _SQRT_2PI
        total += (f(x) * phi * he_values(kmax, x).T) @ w
    return total


def hermite_coeffs(activation: Activation, kmax: int, num_nodes: int = 200,
                   rel_tol: float = 1e-10, max_doublings: int = 6) -> HermiteSeries:
    """Coefficients mu_k = E[f(z) He_k(z)], k = 0..kmax.

    Polynomial kinds are converted exactly (monomial-to-Hermite change of
    basis); the rest use Gauss-Hermite quadrature with adaptive node
    doubling, splitting the integral at kinks (relu) where the plain rule
    stalls.

    Raises
    ------
    QuadratureError
        If successive node doublings disagree beyond `rel_tol` relatively.
    """
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    if activation.is_polynomial:
        mu = monomial_to_hermite(activation.monomial_coeffs())
        out = np.zeros(kmax + 1)
        upto = min(kmax, len(mu) - 1)
        out[: upto + 1] = mu[: upto + 1]
        return HermiteSeries(out, kmax)

    kinks = activation.kink_points()
    if kinks:
        def estimate(n):
            return _split_expectation(activation.value, kmax, kinks, n)
    else:
        def estimate(n):
            return _gauss_hermite_expectation(activation.value, kmax, n)

    prev = estimate(num_nodes)
    n = num_nodes
    for _ in range(max_doublings):
        n *= 2
        cur = estimate(n)
        if not np.all(np.isfinite(cur)):
            break
        scale = max(np.max(np.abs(cur)), 1.0)
        if np.max(np.abs(cur - prev)) <= rel_tol * scale:
            return HermiteSeries(cur, kmax)
        prev = cur
    raise QuadratureError(
        f"Hermite coefficients of {activation.kind} did not converge after "
        f"{max_doublings} doublings from {num_nodes} nodes (kmax={kmax})"
    )


def leap_index_1d(series: HermiteSeries, tol: float = 1e-8) -> int:
    """Smallest k >= 1 with |mu_k| > tol.

    Raises
    ------
    ValueError
        If every coefficient of order >= 1 is below `tol` ("no finite leap").
    """
    for k in range(1, series.kmax + 1):
        if abs(series[k]) > tol:
            return k
    raise ValueError(f"no Hermite coefficient above tol={tol} for k in 1..{series.kmax}")
