"""Grayscale image denoising with a GMM-clustered low-rank patch model.

A preprocessed guide image steers patch clustering under a Gaussian
mixture prior; each cluster's patch stack is denoised by closed-form
spectral shrinkage and the results are aggregated back into the image,
iterating with noise re-estimation.
"""

from .errors import (
    DimensionMismatchError,
    FormatError,
    InternalConsistencyError,
    InvalidInputError,
    PglrError,
)
from .gmm import GmmModel, load_model, save_model, train_em
from .imgio import read_image, write_image
from .lowrank import ShrinkageSpec, gnnm_shrink, nnp_shrink, svd, wnnp_shrink
from .metrics import QualityReport, evaluate, mse, psnr, ssim
from .noise import add_noise
from .pipeline import IterationRecord, PipelineConfig, run
from .preprocess import PreprocessConfig, local_denoise

__version__ = "0.1.0"

__all__ = [
    "DimensionMismatchError",
    "FormatError",
    "GmmModel",
    "InternalConsistencyError",
    "InvalidInputError",
    "IterationRecord",
    "PglrError",
    "PipelineConfig",
    "PreprocessConfig",
    "QualityReport",
    "ShrinkageSpec",
    "add_noise",
    "evaluate",
    "gnnm_shrink",
    "load_model",
    "local_denoise",
    "mse",
    "nnp_shrink",
    "psnr",
    "read_image",
    "run",
    "save_model",
    "ssim",
    "svd",
    "train_em",
    "wnnp_shrink",
    "__version__",
]
