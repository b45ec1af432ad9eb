"""Shared helpers: deterministic RNG substreams and orthonormalization."""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    digest = hashlib.sha256(repr(tag).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_from(seed, *tags) -> np.random.Generator:
    """Counter-based generator on a substream derived from (seed, *tags).

    Philox is counter-based, so distinct tag tuples give independent
    streams and the draw order within a stream is reproducible across
    platforms and thread schedules.
    """
    entropy = [_tag_int(seed)] + [_tag_int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def orthonormalize_rows(vectors, base=None, tol=1e-10):
    """Modified Gram-Schmidt over the rows of `vectors`.

    Rows of `base` (assumed orthonormal) are kept verbatim as a prefix of
    the result; new rows with residual norm <= tol are dropped.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    kept = [] if base is None or len(base) == 0 else [np.asarray(b, dtype=float) for b in base]
    n_base = len(kept)
    for v in vectors:
        w = v.copy()
        for b in kept:
            w -= (b @ w) * b
        # second pass for numerical stability
        for b in kept:
            w -= (b @ w) * b
        norm = np.linalg.norm(w)
        if norm > tol:
            kept.append(w / norm)
    out = np.array(kept, dtype=float) if kept else np.zeros((0, vectors.shape[1]))
    return out, n_base


def complete_orthonormal_basis(rows, dim, tol=1e-10):
    """Extend orthonormal `rows` (q x dim) to a full orthonormal basis of R^dim.

    Returns a (dim x dim) array whose first q rows are `rows`.
    """
    rows = np.zeros((0, dim)) if rows is None or len(rows) == 0 else np.atleast_2d(rows)
    candidates = np.eye(dim)
    full, _ = orthonormalize_rows(candidates, base=list(rows), tol=tol)
    out = np.vstack([rows, full[len(rows):]]) if len(rows) else full
    if out.shape[0] != dim:
        raise ValueError("failed to complete basis; input rows not independent?")
    return out


def double_factorial(n: int) -> int:
    """(n)!! for n >= -1 with (-1)!! = 0!! = 1, exact integer arithmetic."""
    if n <= 0:
        return 1
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out
