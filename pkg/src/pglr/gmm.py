"""Gaussian mixture prior over patch vectors.

A model is a plain container of weights, means and covariances. Training
is standard EM with a diagonal regularization floor on every covariance
update, seeded k-means for initialization, and a fixed reduction order so
a (patches, k, seed) triple always produces the same model.

All densities are evaluated in log space through Cholesky factors; no
covariance is ever inverted explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .errors import DimensionMismatchError, FormatError, InvalidInputError

MODEL_MAGIC = b"PGLRGMM1"

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GmmModel:
    """Mixture of k Gaussians over d-dimensional patch vectors.

    ``weights`` is (k,) and sums to 1, ``means`` is (k, d),
    ``covariances`` is (k, d, d) with every slice symmetric positive
    definite. ``log_likelihoods`` holds the training log-likelihood after
    each E-step when the model came out of ``train_em``.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihoods: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]


def _validate_model(model: GmmModel) -> None:
    w, m, c = model.weights, model.means, model.covariances
    if m.ndim != 2 or w.shape != (m.shape[0],) or c.shape != (m.shape[0], m.shape[1], m.shape[1]):
        raise InvalidInputError(
            f"inconsistent model shapes: weights {w.shape}, means {m.shape}, "
            f"covariances {c.shape}"
        )
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(c))):
        raise InvalidInputError("model contains non-finite values")


def _validate_vectors(x, d: int, name: str = "x") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != d:
        raise DimensionMismatchError(f"{name} has shape {np.shape(x)}, expected (*, {d})")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def _cholesky_factors(covariances: np.ndarray) -> list:
    factors = []
    for j, cov in enumerate(covariances):
        try:
            factors.append(cholesky(cov, lower=True))
        except LinAlgError:
            raise InvalidInputError(
                f"covariance of component {j + 1} is not positive definite"
            ) from None
    return factors


def _log_pdf_all(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """Per-component Gaussian log densities, shape (n, k)."""
    n = x.shape[0]
    out = np.empty((n, model.k))
    for j, chol_l in enumerate(_cholesky_factors(model.covariances)):
        centered = (x - model.means[j]).T
        sol = solve_triangular(chol_l, centered, lower=True, check_finite=False)
        log_det = np.sum(np.log(np.diag(chol_l)))
        out[:, j] = -0.5 * (model.d * _LOG_2PI + np.sum(sol * sol, axis=0)) - log_det
    return out


def log_density(model: GmmModel, component: int, x) -> float:
    """Log density of one component (1-based) at a single vector."""
    _validate_model(model)
    if not 1 <= component <= model.k:
        raise InvalidInputError(f"component must be in [1, {model.k}], got {component}")
    a = _validate_vectors(x, model.d)
    if a.shape[0] != 1:
        raise InvalidInputError("log_density evaluates a single vector")
    j = component - 1
    try:
        chol_l = cholesky(model.covariances[j], lower=True)
    except LinAlgError:
        raise InvalidInputError(
            f"covariance of component {component} is not positive definite"
        ) from None
    sol = solve_triangular(chol_l, (a[0] - model.means[j]), lower=True, check_finite=False)
    return float(
        -0.5 * (model.d * _LOG_2PI + sol @ sol) - np.sum(np.log(np.diag(chol_l)))
    )


def posterior(model: GmmModel, x) -> np.ndarray:
    """Posterior component probabilities at a single vector, shape (k,)."""
    _validate_model(model)
    a = _validate_vectors(x, model.d)
    if a.shape[0] != 1:
        raise InvalidInputError("posterior evaluates a single vector")
    if np.any(model.weights <= 0):
        raise InvalidInputError("posterior requires strictly positive weights")
    log_joint = np.log(model.weights) + _log_pdf_all(model, a)[0]
    log_joint -= log_joint.max()
    p = np.exp(log_joint)
    return p / p.sum()


def inflate_covariances(model: GmmModel, sigma: float) -> GmmModel:
    """Return a copy of the model with sigma^2 added to every covariance diagonal.

    This is the prior for patches observed under additive Gaussian noise
    of standard deviation sigma.
    """
    _validate_model(model)
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    covs = model.covariances.copy()
    covs += (sigma * sigma) * np.eye(model.d)
    return GmmModel(
        weights=model.weights.copy(),
        means=model.means.copy(),
        covariances=covs,
        log_likelihoods=list(model.log_likelihoods),
    )


def _reseed_component(x, means):
    """Pick the patch farthest from its nearest mean as a fresh center."""
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ means.T)
        + np.sum(means * means, axis=1)[None, :]
    )
    return x[int(np.argmax(d2.min(axis=1)))].copy()


def train_em(patches, k: int, max_iters: int = 30, reg: float = 1e-3, seed: int = 0) -> GmmModel:
    """Fit a k-component Gaussian mixture to patch vectors with EM.

    Initialization clusters a seeded subsample of min(10k, n) patches
    with k-means and starts each component from a cluster's mean, scatter
    and share. Every covariance update adds ``reg`` times the identity,
    so log densities stay finite even for degenerate clusters. Iteration
    stops after ``max_iters`` rounds or when the relative log-likelihood
    improvement falls below 1e-6.

    :param patches: (n, d) array of patch vectors, n >= k.
    :param k: number of mixture components.
    :param reg: diagonal covariance floor, must be > 0.
    :param seed: seeds both the subsample draw and k-means.
    """
    x = np.asarray(patches, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError(f"patches must be a non-empty 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("patches contain non-finite values")
    n, d = x.shape
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must be in [1, {n}], got {k}")
    if reg <= 0:
        raise InvalidInputError(f"reg must be > 0, got {reg}")
    if max_iters < 1:
        raise InvalidInputError(f"max_iters must be >= 1, got {max_iters}")

    from .patches import kmeans  # late import, patches uses this module too

    rng = np.random.default_rng(seed)
    sub_idx = rng.choice(n, size=min(10 * k, n), replace=False)
    sub = x[sub_idx]
    labels = kmeans(sub, k, seed=seed, iters=5)

    eye = np.eye(d)
    weights = np.empty(k)
    means = np.empty((k, d))
    covariances = np.empty((k, d, d))
    for j in range(k):
        members = sub[labels == j + 1]
        weights[j] = members.shape[0] / sub.shape[0]
        means[j] = members.mean(axis=0)
        centered = members - means[j]
        scatter = (centered.T @ centered) / members.shape[0]
        covariances[j] = 0.5 * (scatter + scatter.T) + reg * eye
    model = GmmModel(weights=weights, means=means, covariances=covariances)

    global_var = float(np.mean(np.var(x, axis=0)))
    history = []
    prev_ll = None
    for _ in range(max_iters):
        log_joint = np.log(model.weights) + _log_pdf_all(model, x)
        row_max = log_joint.max(axis=1, keepdims=True)
        log_norm = row_max[:, 0] + np.log(np.sum(np.exp(log_joint - row_max), axis=1))
        ll = float(np.sum(log_norm))
        history.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) <= 1e-6 * abs(prev_ll):
            break
        prev_ll = ll

        resp = np.exp(log_joint - log_norm[:, None])
        mass = resp.sum(axis=0)
        old_means = means.copy()
        for j in range(k):
            if mass[j] < 1e-10:
                means[j] = _reseed_component(x, old_means)
                covariances[j] = (global_var + reg) * eye
                weights[j] = 1.0 / n
                continue
            means[j] = (resp[:, j] @ x) / mass[j]
            centered = x - means[j]
            scatter = (centered * resp[:, j : j + 1]).T @ centered / mass[j]
            covariances[j] = 0.5 * (scatter + scatter.T) + reg * eye
            weights[j] = mass[j] / n
        weights /= weights.sum()

    model.log_likelihoods = history
    return model


def save_model(model: GmmModel, path) -> None:
    """Serialize a model: magic, u32 k and d, then weights, means and
    covariances as little-endian float64 blocks."""
    _validate_model(model)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(np.array([model.k, model.d], dtype="<u4").tobytes())
        fh.write(model.weights.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(model.means, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.covariances, dtype="<f8").tobytes())


def load_model(path) -> GmmModel:
    """Read a model written by :func:`save_model`. Round-trips bit-exactly."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad model magic {data[:8]!r}")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated model header")
    k, d = (int(v) for v in np.frombuffer(data[8:16], dtype="<u4"))
    if k == 0 or d == 0:
        raise FormatError(f"{path}: bad model header, k={k} d={d}")
    if k * d * d * 8 > 1 << 40:
        raise FormatError(f"{path}: model header k={k} d={d} implies an implausible size")
    offsets = {
        "weights": 16 + 8 * k,
        "means": 16 + 8 * (k + k * d),
        "covariances": 16 + 8 * (k + k * d + k * d * d),
    }
    for name, end in offsets.items():
        if len(data) < end:
            raise FormatError(
                f"{path}: truncated {name} block, expected {end} bytes total, "
                f"got {len(data)}"
            )
    if len(data) != offsets["covariances"]:
        raise FormatError(
            f"{path}: trailing bytes, expected {offsets['covariances']}, got {len(data)}"
        )
    weights = np.frombuffer(data, dtype="<f8", count=k, offset=16).copy()
    means = np.frombuffer(data, dtype="<f8", count=k * d, offset=offsets["weights"])
    covs = np.frombuffer(data, dtype="<f8", count=k * d * d, offset=offsets["means"])
    model = GmmModel(
        weights=weights,
        means=means.reshape(k, d).copy(),
        covariances=covs.reshape(k, d, d).copy(),
    )
    _validate_model(model)
    return model
