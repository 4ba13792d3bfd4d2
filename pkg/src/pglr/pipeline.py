"""The iterative denoising loop.

Each iteration blends the running estimate back toward the noisy
observation, re-estimates the working noise level from the blend
residual, classifies guide-image patches under the inflated GMM prior,
shrinks per-class noisy patch stacks with mu = q_k * sigma_t^2, and
aggregates. One sigma_t drives both the covariance inflation and the
shrinkage of an iteration; it is updated after the iteration's denoising
pass from the residual of the blended image.

The guide image is blended toward the noisy observation the same way
each iteration; ``update_guide=False`` disables that (ablation), keeping
the initial guide fixed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError
from .gmm import GmmModel, _validate_model
from .imgio import ensure_image
from .lowrank import gnnm_shrink
from .metrics import psnr, ssim
from .patches import PatchStack, aggregate, assign_classes, balance_classes, build_stacks, extract_patches
from .preprocess import PreprocessConfig, local_denoise


@dataclass
class PipelineConfig:
    alpha: float = 0.10
    beta: float = 0.62
    max_iter: int = 5
    k_components: int = 250
    patch_size: int = 8
    stride: int = 2
    q_min: int = 64
    q_max: int = 360
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise InvalidInputError(f"beta must be in (0, 1], got {self.beta}")
        if self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.patch_size < 1:
            raise InvalidInputError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.stride < 1:
            raise InvalidInputError(f"stride must be >= 1, got {self.stride}")
        if self.q_min < 1 or self.q_max < 2 * self.q_min:
            raise InvalidInputError(
                f"need q_min >= 1 and q_max >= 2*q_min, got {self.q_min}, {self.q_max}"
            )


@dataclass
class IterationRecord:
    """What one iteration did: the sigma it used, the class layout, the
    per-class ranks after shrinkage, and quality metrics when a
    reference image is available."""

    iteration: int
    sigma: float
    class_sizes: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    psnr: float | None = None
    ssim: float | None = None


def regularize_estimate(y, x_prev, alpha: float) -> np.ndarray:
    """Blend the estimate back toward the observation:
    x_prev + alpha * (y - x_prev)."""
    a = ensure_image(y, "y")
    b = ensure_image(x_prev, "x_prev")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must be in (0, 1), got {alpha}")
    return b + alpha * (a - b)


def update_sigma(sigma0: float, y, y_t, beta: float) -> float:
    """Re-estimate the working noise level from the blend residual.

    Returns beta * sqrt(max(sigma0^2 - mean((y - y_t)^2), 0)): what
    remains of the original noise budget after the current blend already
    moved away from the observation, scaled back by beta.
    """
    a = ensure_image(y, "y")
    b = ensure_image(y_t, "y_t")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if sigma0 < 0:
        raise InvalidInputError(f"sigma0 must be >= 0, got {sigma0}")
    if not 0.0 < beta <= 1.0:
        raise InvalidInputError(f"beta must be in (0, 1], got {beta}")
    residual = float(np.mean((a - b) ** 2))
    return beta * float(np.sqrt(max(sigma0 * sigma0 - residual, 0.0)))


def denoise_iteration(
    y_t, xpr_t, sigma_t: float, model: GmmModel, cfg: PipelineConfig
) -> tuple[np.ndarray, IterationRecord]:
    """One classify-shrink-aggregate pass at noise level sigma_t.

    Classes come from the guide image's patches under the sigma_t-inflated
    prior; the stacks that get shrunk hold the corresponding noisy
    patches from y_t.
    """
    a = ensure_image(y_t, "y_t")
    g = ensure_image(xpr_t, "xpr_t")
    if a.shape != g.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {g.shape}")
    if sigma_t < 0:
        raise InvalidInputError(f"sigma_t must be >= 0, got {sigma_t}")
    _validate_model(model)
    if model.d != cfg.patch_size * cfg.patch_size:
        raise DimensionMismatchError(
            f"model dimension {model.d} does not match patch_size^2 = "
            f"{cfg.patch_size * cfg.patch_size}"
        )

    guide_grid = extract_patches(g, cfg.patch_size, cfg.stride)
    noisy_grid = extract_patches(a, cfg.patch_size, cfg.stride)
    labels = assign_classes(model, guide_grid, sigma_t)
    assignment = balance_classes(
        labels, guide_grid.vectors, q_min=cfg.q_min, q_max=cfg.q_max, seed=cfg.seed
    )
    stacks = build_stacks(noisy_grid, assignment)

    mu0 = sigma_t * sigma_t
    denoised = []
    ranks = []
    for stack in stacks:
        x, rank = gnnm_shrink(stack.matrix, stack.matrix.shape[0] * mu0)
        denoised.append(PatchStack(class_id=stack.class_id, matrix=x, coords=stack.coords))
        ranks.append(rank)
    out = aggregate(denoised, ranks, a.shape)
    record = IterationRecord(
        iteration=0,
        sigma=float(sigma_t),
        class_sizes=[s.matrix.shape[0] for s in stacks],
        ranks=list(ranks),
    )
    return out, record


def run(
    noisy,
    sigma: float,
    model: GmmModel,
    cfg: PipelineConfig | None = None,
    preprocessed=None,
    reference=None,
    update_guide: bool = True,
    preprocess_cfg: PreprocessConfig | None = None,
) -> tuple[np.ndarray, list]:
    """Full denoising run; returns the final estimate and the trace.

    ``preprocessed`` supplies an externally produced guide image; when
    omitted the built-in local denoiser builds one. ``reference`` (the
    clean image, when known) adds PSNR/SSIM to each trace record.
    """
    y = ensure_image(noisy, "noisy")
    if cfg is None:
        cfg = PipelineConfig()
    _validate_model(model)
    if model.d != cfg.patch_size * cfg.patch_size:
        raise DimensionMismatchError(
            f"model dimension {model.d} does not match patch_size^2 = "
            f"{cfg.patch_size * cfg.patch_size}"
        )
    ref = None
    if reference is not None:
        ref = ensure_image(reference, "reference")
        if ref.shape != y.shape:
            raise DimensionMismatchError(
                f"reference is {ref.shape}, noisy is {y.shape}"
            )
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0 and (ref is None or not np.array_equal(y, ref)):
        warnings.warn(
            "sigma=0 disables all shrinkage; the pipeline degenerates to a "
            "near-identity",
            stacklevel=2,
        )

    if preprocessed is not None:
        guide = ensure_image(preprocessed, "preprocessed")
        if guide.shape != y.shape:
            raise DimensionMismatchError(
                f"preprocessed is {guide.shape}, noisy is {y.shape}"
            )
        guide = guide.copy()
    else:
        if preprocess_cfg is None:
            preprocess_cfg = PreprocessConfig(patch_size=cfg.patch_size)
        guide = local_denoise(y, sigma, preprocess_cfg)

    estimate = y.copy()
    sigma_t = float(sigma)
    trace = []
    for t in range(1, cfg.max_iter + 1):
        y_t = regularize_estimate(y, estimate, cfg.alpha)
        if update_guide:
            guide = regularize_estimate(y, guide, cfg.alpha)
        estimate, record = denoise_iteration(y_t, guide, sigma_t, model, cfg)
        record.iteration = t
        if ref is not None:
            record.psnr = psnr(ref, estimate)
            record.ssim = ssim(ref, estimate)
        sigma_t = update_sigma(sigma, y, y_t, cfg.beta)
        trace.append(record)
    return estimate, trace
