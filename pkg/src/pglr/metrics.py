"""Image fidelity metrics: MSE, PSNR and SSIM.

All three treat images as real-valued with a nominal [0, 255] dynamic
range. SSIM uses the reference configuration: 11x11 Gaussian window with
sigma 1.5, K1=0.01, K2=0.03, L=255, averaged over valid window positions
only (no padding). The windowing is separable correlation, which keeps
the function deterministic and makes ssim(a, a) exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DimensionMismatchError, InvalidInputError
from .imgio import ensure_image

PSNR_CAP = 100.0
_WINDOW = 11
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def _gaussian_window() -> np.ndarray:
    x = np.arange(_WINDOW) - (_WINDOW - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * 1.5 * 1.5))
    return g / g.sum()


_KERNEL = _gaussian_window()


@dataclass
class QualityReport:
    mse: float
    psnr: float
    ssim: float


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    x = ensure_image(a, "a")
    y = ensure_image(b, "b")
    if x.shape != y.shape:
        raise DimensionMismatchError(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def mse(a, b) -> float:
    """Mean squared per-pixel difference."""
    x, y = _pair(a, b)
    d = x - y
    return float(np.mean(d * d))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB against a 255 peak, capped at 100."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP
    return float(10.0 * np.log10(255.0 * 255.0 / m))


def _smooth(img: np.ndarray) -> np.ndarray:
    # Full separable correlation, then crop to valid windows; the crop
    # removes everything the boundary handling touched.
    half = _WINDOW // 2
    out = correlate1d(img, _KERNEL, axis=0, mode="constant")
    out = correlate1d(out, _KERNEL, axis=1, mode="constant")
    return out[half:-half, half:-half]


def ssim(a, b) -> float:
    """Mean structural similarity over all fully interior 11x11 windows."""
    x, y = _pair(a, b)
    if min(x.shape) < _WINDOW:
        raise InvalidInputError(
            f"ssim needs images of at least {_WINDOW}x{_WINDOW}, got {x.shape}"
        )
    mu_x = _smooth(x)
    mu_y = _smooth(y)
    xx = _smooth(x * x) - mu_x * mu_x
    yy = _smooth(y * y) - mu_y * mu_y
    xy = _smooth(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + _C1) * (2.0 * xy + _C2)
    den = (mu_x * mu_x + mu_y * mu_y + _C1) * (xx + yy + _C2)
    return float(np.mean(num / den))


def evaluate(a, b) -> QualityReport:
    """Bundle all three metrics for one image pair."""
    return QualityReport(mse=mse(a, b), psnr=psnr(a, b), ssim=ssim(a, b))
