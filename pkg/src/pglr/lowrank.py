"""Singular value decomposition and spectral shrinkage operators.

The factorization is computed from the eigendecomposition of the smaller
Gram matrix by a cyclic Jacobi sweep. Jacobi is slower than LAPACK's
divide-and-conquer but runs identically everywhere: no blocking, no
threading, one floating-point path, so results are bit-reproducible
across machines and thread counts. The rotation kernel is JIT-compiled.

Shrinkage operators all follow the same pattern: factorize, map the
spectrum, recompose with the input's singular vectors.

* ``nnp_shrink``  : lambda -> max(lambda - mu, 0), the nuclear norm
  proximal map for (1/2)||Y - X||_F^2 + mu ||X||_*.
* ``wnnp_shrink`` : per-index thresholds, valid when the weights are
  non-descending (heavier cuts on smaller singular values).
* ``gnnm_shrink`` : lambda -> sqrt(max(lambda^2 - mu, 0)), the global
  minimizer of (1/2)||Y Y^T - X X^T||_F^2 + mu ||X X^T||_*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionMismatchError, InvalidInputError

# Singular values below RANK_FLOOR * largest are treated as zero by the
# shrinkage operators; Gram-matrix eigenvalues carry no information that
# far down anyway.
RANK_FLOOR = 1e-10

# Columns of the derived singular-vector side whose singular value falls
# below NULL_FLOOR * largest cannot be recovered from the Gram
# eigenvectors and are completed from the canonical basis instead.
NULL_FLOOR = 1e-9


@dataclass
class SvdFactorization:
    """Thin SVD: ``y = u @ diag(singular_values) @ v.T``.

    ``u`` is q x r and ``v`` is d x r with r = min(q, d); singular values
    are non-negative and non-ascending. The first entry of each column of
    ``v`` whose magnitude exceeds 1e-12 is positive, which pins the sign
    of the paired ``u`` column as well.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray


@dataclass
class ShrinkageSpec:
    """How much to shrink a spectrum.

    ``mu`` is a single threshold (intensity units for nnp_shrink,
    intensity squared for gnnm_shrink); ``weights`` holds per-index
    thresholds for wnnp_shrink and must be non-descending.
    """

    mu: float = 0.0
    weights: np.ndarray | None = None


@njit(cache=True)
def _jacobi_eigh(a_in, tol_scale, max_sweeps):
    """Eigendecomposition of a symmetric PSD matrix by cyclic Jacobi.

    Sweeps rows in a fixed (p, q) order until the off-diagonal Frobenius
    norm drops below tol_scale times the trace. Returns (eigenvalues,
    eigenvector columns), unsorted.
    """
    n = a_in.shape[0]
    a = a_in.copy()
    v = np.eye(n)
    trace = 0.0
    for i in range(n):
        trace += a[i, i]
    thresh = tol_scale * trace
    for _sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off) <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Stable rotation: tan(2*phi) = 2*a_pq / (a_qq - a_pp),
                # take the smaller-angle root.
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for i in range(n):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(n):
                    api = a[p, i]
                    aqi = a[q, i]
                    a[p, i] = c * api - s * aqi
                    a[q, i] = s * api + c * aqi
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v


def _validate_matrix(y, name: str = "matrix") -> np.ndarray:
    a = np.asarray(y, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def _complete_columns(cols: np.ndarray, n_good: int) -> None:
    """Fill cols[:, n_good:] with unit vectors orthogonal to cols[:, :n_good].

    Each missing column takes the canonical basis vector with the largest
    residual after projecting out the columns accepted so far; the choice
    is deterministic (ties resolve to the lowest index).
    """
    m, k = cols.shape
    for j in range(n_good, k):
        base = cols[:, :j]
        resid = np.eye(m) - base @ base.T
        norms = np.sqrt(np.sum(resid * resid, axis=0))
        pick = int(np.argmax(norms))
        col = resid[:, pick]
        cols[:, j] = col / norms[pick]


def _orthonormalize(cols: np.ndarray) -> None:
    """In-place modified Gram-Schmidt with reorthogonalization.

    Input columns are near-orthonormal (descending singular value order);
    this cleans up the last few digits so the orthonormality invariant
    holds even for near-null directions.
    """
    k = cols.shape[1]
    for i in range(k):
        for _ in range(2):
            for j in range(i):
                cols[:, i] -= (cols[:, j] @ cols[:, i]) * cols[:, j]
        nrm = np.sqrt(cols[:, i] @ cols[:, i])
        if nrm > 0.0:
            cols[:, i] /= nrm


def svd(matrix) -> SvdFactorization:
    """Thin SVD via Jacobi eigendecomposition of the smaller Gram matrix."""
    y = _validate_matrix(matrix)
    q, d = y.shape
    if d <= q:
        gram = y.T @ y
    else:
        gram = y @ y.T
    gram = 0.5 * (gram + gram.T)
    w, vecs = _jacobi_eigh(gram, 1e-12, 60)
    order = np.argsort(-w, kind="stable")
    vecs = np.ascontiguousarray(vecs[:, order])

    # One side comes from the eigenvectors, the other from projecting the
    # input through them. The projected column norms, not the square
    # roots of the Gram eigenvalues, are reported as singular values:
    # with s_i = ||Y v_i|| exactly, U diag(s) V^T collapses to (Y V) V^T
    # and the eigenvector side is always square, so reconstruction is
    # exact up to rounding even when the Gram matrix loses the trailing
    # digits of a rank-deficient spectrum.
    derived = (y @ vecs) if d <= q else (y.T @ vecs)
    norms = np.sqrt(np.sum(derived * derived, axis=0))
    by_norm = np.argsort(-norms, kind="stable")
    norms = norms[by_norm]
    vecs = np.ascontiguousarray(vecs[:, by_norm])
    derived = np.ascontiguousarray(derived[:, by_norm])

    s_max = norms[0] if norms.size else 0.0
    n_good = int(np.count_nonzero(norms > NULL_FLOOR * s_max)) if s_max > 0.0 else 0
    s = norms.copy()
    s[n_good:] = 0.0
    derived[:, :n_good] /= norms[:n_good]
    _complete_columns(derived, n_good)
    _orthonormalize(derived)

    if d <= q:
        u, v = derived, vecs
    else:
        u, v = vecs, derived

    # Sign convention: first non-negligible entry of each v column positive.
    for i in range(v.shape[1]):
        col = v[:, i]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0.0:
            v[:, i] = -col
            u[:, i] = -u[:, i]
    return SvdFactorization(u=u, singular_values=s, v=v)


def _floored(s: np.ndarray) -> np.ndarray:
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros_like(s)
    return np.where(s < RANK_FLOOR * s[0], 0.0, s)


def _recompose(f: SvdFactorization, new_s: np.ndarray) -> np.ndarray:
    return (f.u * new_s) @ f.v.T


def nnp_shrink(y, mu: float) -> np.ndarray:
    """Soft-threshold the singular values: lambda -> max(lambda - mu, 0)."""
    a = _validate_matrix(y)
    if mu < 0:
        raise InvalidInputError(f"mu must be >= 0, got {mu}")
    f = svd(a)
    new_s = np.maximum(_floored(f.singular_values) - mu, 0.0)
    return _recompose(f, new_s)


def wnnp_shrink(y, spec: ShrinkageSpec) -> np.ndarray:
    """Per-index soft threshold: lambda_i -> max(lambda_i - w_i, 0).

    ``spec.weights`` must be non-negative and non-descending (the regime
    where the weighted problem still has this closed-form minimizer). A
    weight vector shorter than min(q, d) is padded with its last value; a
    longer one is truncated.
    """
    a = _validate_matrix(y)
    if spec.weights is None:
        raise InvalidInputError("wnnp_shrink requires a ShrinkageSpec with weights")
    w = np.asarray(spec.weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise InvalidInputError("weights must be non-empty")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInputError("weights must be finite and >= 0")
    if np.any(np.diff(w) < 0):
        raise InvalidInputError("weights must be non-descending")
    n_sv = min(a.shape)
    if w.size < n_sv:
        w = np.concatenate([w, np.full(n_sv - w.size, w[-1])])
    f = svd(a)
    new_s = np.maximum(_floored(f.singular_values) - w[:n_sv], 0.0)
    return _recompose(f, new_s)


def gnnm_shrink(y, mu: float) -> tuple[np.ndarray, int]:
    """Minimize (1/2)||Y Y^T - X X^T||_F^2 + mu ||X X^T||_* in closed form.

    The minimizer keeps Y's singular vectors and maps each singular value
    to sqrt(max(lambda^2 - mu, 0)). Returns the minimizer and its rank
    (number of surviving singular values). mu = 0 returns an exact copy
    of the input.
    """
    a = _validate_matrix(y)
    if mu < 0:
        raise InvalidInputError(f"mu must be >= 0, got {mu}")
    f = svd(a)
    s = _floored(f.singular_values)
    if mu == 0:
        return a.copy(), int(np.count_nonzero(s))
    new_s = np.sqrt(np.maximum(s * s - mu, 0.0))
    rank = int(np.count_nonzero(new_s))
    return _recompose(f, new_s), rank


def gnnm_objective(y, x, mu: float) -> float:
    """Evaluate (1/2)||Y Y^T - X X^T||_F^2 + mu ||X X^T||_*.

    X X^T is positive semidefinite, so its nuclear norm is its trace,
    which equals ||X||_F^2; no factorization is needed.
    """
    a = _validate_matrix(y, "y")
    b = _validate_matrix(x, "x")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"y has shape {a.shape}, x has shape {b.shape}")
    if mu < 0:
        raise InvalidInputError(f"mu must be >= 0, got {mu}")
    diff = a @ a.T - b @ b.T
    return 0.5 * float(np.sum(diff * diff)) + mu * float(np.sum(b * b))
