"""Multi-index targets, Gaussian data, Hermite tensors, HOSVD, leap index.

Tensor convention
-----------------
For g: R^r -> R square-integrable under N(0, I_r), the order-k coefficient
tensor stored here has entries

    C_k[i_1, ..., i_k] = E[g(z) * He_{m_1}(z_1) ... He_{m_r}(z_r)] / sqrt(k!)

where m_j is the multiplicity of j in (i_1, ..., i_k). With this packing
the Parseval identity holds with plain Frobenius inner products,

    E[g h] = sum_k <C_k(g), C_k(h)>_F   (k = 0, 1, ...),

and a single-index g(z_1) has the lone entry mu_k / sqrt(k!) at (1, ..., 1),
matching the scalar convention of :mod:`giantstep.hermite`. All tensors and
subspaces live in teacher coordinates (R^r); lifting to R^d happens only
where an ambient object is required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .hermite import Activation, hermite_coeffs, leap_index_1d
from .polynomial import MultivariatePolynomial, he_univariate, product_hermite_coeff
from .util import rng_from

__all__ = [
    "MultiIndexTarget",
    "Dataset",
    "HermiteTensor",
    "sample_dataset",
    "hermite_tensor",
    "leap_index",
    "hosvd",
    "HOSVDResult",
    "conditional_variance",
    "make_teacher",
]

ORTHO_TOL = 1e-12


def make_teacher(r: int, d: int, seed=None) -> np.ndarray:
    """Orthonormal teacher rows (r x d): canonical if seed is None, else random."""
    if d < r:
        raise ValueError(f"need d >= r, got d={d} < r={r}")
    if seed is None:
        return np.eye(r, d)
    rng = rng_from(seed, "teacher")
    mat = rng.standard_normal((d, r))
    q, _ = np.linalg.qr(mat)
    return q[:, :r].T.copy()


@dataclass
class MultiIndexTarget:
    """f*(z) = g*(<w1*, z>, ..., <wr*, z>) with orthonormal teacher rows.

    `link` is either a MultivariatePolynomial in r variables or a list of
    per-direction Activations (g*(u) = sum_k sigma*_k(u_k)).
    """

    teacher: np.ndarray
    link: MultivariatePolynomial | list[Activation]

    def __post_init__(self):
        self.teacher = np.asarray(self.teacher, dtype=float)
        r = self.teacher.shape[0]
        gram = self.teacher @ self.teacher.T
        if np.max(np.abs(gram - np.eye(r))) > 1e-10:
            raise ValueError("teacher rows are not orthonormal")
        if isinstance(self.link, MultivariatePolynomial):
            if self.link.num_vars != r:
                raise ValueError("link variable count != number of teacher rows")
        else:
            self.link = list(self.link)
            if len(self.link) != r:
                raise ValueError("need one activation per teacher row")

    @property
    def num_index(self) -> int:
        return self.teacher.shape[0]

    @property
    def dim(self) -> int:
        return self.teacher.shape[1]

    @property
    def is_polynomial(self) -> bool:
        return isinstance(self.link, MultivariatePolynomial)

    def link_values(self, projections: np.ndarray) -> np.ndarray:
        """g*(u) on rows u of `projections` (shape (..., r))."""
        if self.is_polynomial:
            return self.link.evaluate(projections)
        out = np.zeros(projections.shape[:-1])
        for k, act in enumerate(self.link):
            out = out + act.value(projections[..., k])
        return out

    def evaluate(self, inputs: np.ndarray) -> np.ndarray:
        """f*(z) for rows z of `inputs` (shape (..., d))."""
        return self.link_values(np.asarray(inputs, dtype=float) @ self.teacher.T)

    def polynomial_link(self, degree: int | None = None) -> MultivariatePolynomial:
        """The link as a polynomial; named activations are Hermite-truncated.

        For activation-sum links, each sigma*_k is replaced by its Hermite
        expansion truncated at `degree` (required for non-polynomial kinds).
        """
        if self.is_polynomial:
            return self.link
        r = self.num_index
        out = MultivariatePolynomial.zero(r)
        for k, act in enumerate(self.link):
            if act.is_polynomial:
                coeffs = act.monomial_coeffs()
                for power, c in enumerate(coeffs):
                    if c:
                        out = out + float(c) * (MultivariatePolynomial.variable(r, k) ** power)
            else:
                if degree is None:
                    raise ValueError("degree required to truncate a named activation")
                series = hermite_coeffs(act, degree)
                for j in range(degree + 1):
                    mu = series[j]
                    if mu != 0.0:
                        out = out + (mu / math.factorial(j)) * he_univariate(r, k, j)
        return out

    def variance(self, mc_samples: int = 200_000, seed=0) -> float:
        """Var(f*) -- exact for polynomial links, Monte Carlo otherwise."""
        if self.is_polynomial:
            mean = self.link.gaussian_mean()
            second = (self.link * self.link).gaussian_mean()
            return second - mean ** 2
        rng = rng_from(seed, "target-variance")
        vals = self.link_values(rng.standard_normal((mc_samples, self.num_index)))
        return float(np.var(vals))


@dataclass
class Dataset:
    """Gaussian inputs with noiseless labels y = f*(z)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs/labels length mismatch")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


def sample_dataset(target: MultiIndexTarget, n: int, d: int, seed) -> Dataset:
    """Draw n i.i.d. N(0, I_d) rows and label them with f*.

    Deterministic given `seed` (Philox substream, fixed row order). `seed`
    may be an int or a tuple such as (seed, step) for fresh per-step batches.
    """
    if d < target.num_index:
        raise ValueError(f"need d >= r, got d={d} < r={target.num_index}")
    if d != target.dim:
        raise ValueError("d must match the teacher's ambient dimension")
    if n < 1:
        raise ValueError("n must be >= 1")
    tags = seed if isinstance(seed, tuple) else (seed,)
    rng = rng_from(*tags, "dataset")
    inputs = rng.standard_normal((n, d))
    return Dataset(inputs, target.evaluate(inputs))


@dataclass
class HermiteTensor:
    """Dense symmetric order-k coefficient tensor in teacher coordinates."""

    order: int
    dim: int
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.shape != (self.dim,) * self.order:
            raise ValueError("entries shape must be (dim,) * order")

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.entries ** 2)))

    def mode_product_all_but_last(self, vec: np.ndarray) -> np.ndarray:
        """Contract the first (order-1) axes with `vec`; returns an r-vector."""
        out = self.entries
        for _ in range(self.order - 1):
            out = np.tensordot(vec, out, axes=(0, 0))
        return out


def hermite_tensor(target: MultiIndexTarget, k: int) -> HermiteTensor:
    """C_k(g*) in teacher coordinates, computed exactly (polynomial links).

    Orders above deg(g*) give a zero tensor, which is a valid output.
    """
    if not target.is_polynomial:
        raise ValueError("hermite_tensor requires a polynomial link; "
                         "use MultiIndexTarget.polynomial_link to truncate")
    g = target.link
    r = target.num_index
    if k == 0:
        return HermiteTensor(0, r, np.array(g.gaussian_mean()))
    entries = np.zeros((r,) * k)
    scale = 1.0 / math.sqrt(math.factorial(k))
    cache: dict[tuple[int, ...], float] = {}
    if g.degree >= k:
        for idx in product(range(r), repeat=k):
            orders = [0] * r
            for i in idx:
                orders[i] += 1
            key = tuple(orders)
            if key not in cache:
                cache[key] = product_hermite_coeff(g, key) * scale
            entries[idx] = cache[key]
    return HermiteTensor(k, r, entries)


def leap_index(target: MultiIndexTarget, tol: float = 1e-10) -> int:
    """Smallest k >= 1 with ||C_k(g*)||_F > tol.

    For activation-sum links this reduces to the minimum scalar leap over
    the per-direction activations.
    """
    if target.is_polynomial:
        deg = target.link.degree
        if deg == 0:
            raise ValueError("constant target has no leap index")
        for k in range(1, deg + 1):
            if hermite_tensor(target, k).frobenius_norm() > tol:
                return k
        raise ValueError("target is constant up to tolerance; no leap index")
    leaps = []
    for act in target.link:
        kmax = len(act.monomial_coeffs()) - 1 if act.is_polynomial else 16
        try:
            leaps.append(leap_index_1d(hermite_coeffs(act, kmax), tol=max(tol, 1e-12)))
        except ValueError:
            continue
    if not leaps:
        raise ValueError("target is constant up to tolerance; no leap index")
    return min(leaps)


@dataclass
class HOSVDResult:
    vectors: list[np.ndarray]
    core: np.ndarray
    rank: int

    def reconstruct(self) -> np.ndarray:
        if self.rank == 0:
            return self.core
        basis = np.array(self.vectors)  # (rank, r)
        out = self.core
        for _ in range(out.ndim):
            out = np.tensordot(out, basis, axes=(0, 0))
        return out


def hosvd(tensor: HermiteTensor, rel_tol: float = 1e-10) -> HOSVDResult:
    """Higher-order SVD of a symmetric tensor via its mode-1 unfolding.

    Symmetry makes all unfoldings equal, so a single SVD yields the
    singular vectors; the rank is cut at singular values > rel_tol * max.
    A zero tensor returns a rank-0 result with a zero core.
    """
    k, r = tensor.order, tensor.dim
    if k == 0:
        raise ValueError("hosvd needs order >= 1")
    unfolding = tensor.entries.reshape(r, -1)
    if tensor.frobenius_norm() == 0.0:
        return HOSVDResult([], np.zeros((0,) * k), 0)
    u, s, _ = np.linalg.svd(unfolding, full_matrices=False)
    rank = int(np.sum(s > rel_tol * s[0]))
    basis = u[:, :rank].T  # (rank, r)
    core = tensor.entries
    for _ in range(k):
        core = np.tensordot(core, basis, axes=(0, 1))
    vectors = [basis[i].copy() for i in range(rank)]
    return HOSVDResult(vectors, core, rank)


def conditional_variance(target: MultiIndexTarget, basis: np.ndarray,
                         mc_samples: int = 100_000, seed=0,
                         inner_samples: int = 512) -> tuple[float, float]:
    """Monte Carlo estimate of E[Var(f*(z) | P_U z)] with its standard error.

    `basis` holds orthonormal rows spanning U in teacher coordinates
    (shape (q, r), possibly empty). Outer samples fix the conditioned
    coordinates; the inner unbiased variance uses `inner_samples` draws of
    the orthogonal ones.
    """
    r = target.num_index
    basis = np.zeros((0, r)) if basis is None or len(basis) == 0 else np.atleast_2d(basis)
    q = basis.shape[0]
    rng = rng_from(seed, "conditional-variance")
    if q == r:
        return 0.0, 0.0
    from .util import complete_orthonormal_basis

    full = complete_orthonormal_basis(basis, r)
    comp = full[q:]
    n_outer = max(1, mc_samples // inner_samples)
    x = rng.standard_normal((n_outer, q)) if q else np.zeros((n_outer, 0))
    u = rng.standard_normal((n_outer, inner_samples, r - q))
    coords = x[:, None, :] @ basis + u @ comp  # (n_outer, inner, r)
    vals = target.link_values(coords)
    inner_var = np.var(vals, axis=1, ddof=1)
    est = float(np.mean(inner_var))
    stderr = float(np.std(inner_var, ddof=1) / math.sqrt(n_outer)) if n_outer > 1 else float("inf")
    return est, stderr
