"""Exact staircase subspace oracle via symbolic subspace conditioning.

Conditioning a polynomial target on its projection onto a learned subspace
U and taking the expected gradient in the orthogonal coordinates yields a
vector of polynomials in the conditioning parameters; the span of their
monomial coefficient vectors is exactly the span of the conditional first
Hermite coefficient over all conditioning points. Iterating grows the
nested sequence U_0 = {0} <= U_1 <= ... of learnable subspaces.

All Gaussian expectations are exact (Wick moments); floating point enters
only at orthonormalization, with a 1e-10 drop tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polynomial import MultivariatePolynomial
from .util import complete_orthonormal_basis, orthonormalize_rows

__all__ = [
    "Subspace",
    "ParamVectorPolynomial",
    "conditional_first_hermite",
    "staircase_sequence",
    "is_staircase_learnable",
    "multi_direction_step_check",
    "dependent_directions",
]

DROP_TOL = 1e-10


@dataclass
class Subspace:
    """Orthonormal basis rows (dim x r) of a subspace of R^r; dim may be 0."""

    basis: np.ndarray

    def __post_init__(self):
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if self.basis.size == 0:
            self.basis = self.basis.reshape(0, self.basis.shape[-1] if self.basis.ndim == 2 else 0)
        gram = self.basis @ self.basis.T
        if gram.size and np.max(np.abs(gram - np.eye(self.dim))) > 1e-10:
            raise ValueError("basis rows are not orthonormal")

    @classmethod
    def trivial(cls, r: int) -> "Subspace":
        return cls(np.zeros((0, r)))

    @classmethod
    def span(cls, vectors, r: int | None = None) -> "Subspace":
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        basis, _ = orthonormalize_rows(vectors, tol=DROP_TOL)
        if r is not None and basis.shape[1] != r:
            basis = basis.reshape(-1, r)
        return cls(basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient(self) -> int:
        return self.basis.shape[1]

    def contains(self, vector, tol=1e-8) -> bool:
        vector = np.asarray(vector, dtype=float)
        resid = vector - self.basis.T @ (self.basis @ vector)
        return bool(np.linalg.norm(resid) <= tol * max(np.linalg.norm(vector), 1.0))

    def equals(self, other: "Subspace", tol=1e-8) -> bool:
        return self.dim == other.dim and all(other.contains(b, tol) for b in self.basis)

    def project(self, vector) -> np.ndarray:
        vector = np.asarray(vector, dtype=float)
        return self.basis.T @ (self.basis @ vector)


@dataclass
class ParamVectorPolynomial:
    """r-vector of polynomials in dim(U) conditioning parameters lambda."""

    entries: list[MultivariatePolynomial]
    num_params: int

    def coefficient_vectors(self, tol=DROP_TOL) -> np.ndarray:
        """One r-vector per lambda monomial appearing in any entry.

        The span over all conditioning points x of the vector polynomial
        equals the span of these coefficient vectors.
        """
        monomials = set()
        for e in self.entries:
            monomials.update(e.terms.keys())
        rows = []
        for mono in sorted(monomials):
            vec = np.array([e.coefficient(mono) for e in self.entries])
            if np.linalg.norm(vec) > tol:
                rows.append(vec)
        return np.array(rows) if rows else np.zeros((0, len(self.entries)))

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.entries)


def conditional_first_hermite(g: MultivariatePolynomial, subspace: Subspace) -> ParamVectorPolynomial:
    """Expected gradient of g conditioned on its projection onto `subspace`.

    Rotates coordinates so the first q axes span U, substitutes symbolic
    parameters for them, differentiates in the orthogonal coordinates and
    takes the exact Gaussian expectation there. The result is expressed in
    the original teacher basis, with zero components along U.
    """
    r = g.num_vars
    q = subspace.dim
    full = complete_orthonormal_basis(subspace.basis, r)
    # z = full.T @ w  =>  z_i = sum_m full[m, i] w_m
    h = g.compose_linear(full.T)
    ortho_vars = list(range(q, r))
    entries = [MultivariatePolynomial.zero(max(q, 1)) for _ in range(r)]
    for j in ortho_vars:
        mu_j = h.partial(j).gaussian_mean_partial(ortho_vars)
        mu_j = mu_j.restrict_to_vars(list(range(q))) if q else \
            MultivariatePolynomial.constant(1, mu_j.gaussian_mean())
        for i in range(r):
            if full[j, i] != 0.0:
                entries[i] = entries[i] + full[j, i] * mu_j
    return ParamVectorPolynomial(entries, num_params=max(q, 1))


def _step(g: MultivariatePolynomial, subspace: Subspace) -> Subspace:
    mu = conditional_first_hermite(g, subspace)
    new_vecs = mu.coefficient_vectors()
    if new_vecs.shape[0] == 0:
        return subspace
    basis, _ = orthonormalize_rows(new_vecs, base=list(subspace.basis), tol=DROP_TOL)
    return Subspace(basis)


def staircase_sequence(g: MultivariatePolynomial, t_max: int = 8) -> list[Subspace]:
    """U_0 = {0}; U_{t+1} = U_t + span of the conditional first Hermite.

    Returns t_max + 1 subspaces; once the sequence stabilizes the stable
    subspace is repeated, so nesting holds exactly (each basis is a prefix
    of the next).
    """
    seq = [Subspace.trivial(g.num_vars)]
    for _ in range(t_max):
        nxt = _step(g, seq[-1])
        seq.append(nxt)
    return seq


def dependent_directions(g: MultivariatePolynomial) -> Subspace:
    """Span of the directions g actually depends on (gradient span)."""
    grads = g.gradient()
    monomials = set()
    for gr in grads:
        monomials.update(gr.terms.keys())
    rows = [np.array([gr.coefficient(m) for gr in grads]) for m in sorted(monomials)]
    rows = [v for v in rows if np.linalg.norm(v) > DROP_TOL]
    if not rows:
        return Subspace.trivial(g.num_vars)
    basis, _ = orthonormalize_rows(np.array(rows), tol=DROP_TOL)
    return Subspace(basis)


def is_staircase_learnable(g: MultivariatePolynomial, t_max: int = 8) -> bool:
    """True iff the staircase stabilizes at the full span g depends on."""
    seq = staircase_sequence(g, t_max=t_max)
    return seq[-1].dim == dependent_directions(g).dim


def multi_direction_step_check(g: MultivariatePolynomial, subspace: Subspace) -> int:
    """Number of new orthogonal directions gained in one step from `subspace`."""
    return _step(g, subspace).dim - subspace.dim
