"""Reproducible Gaussian noise.

The generator is fixed so that noisy images are bit-identical across
platforms and thread counts: a counter-based SplitMix64 stream feeds the
Box-Muller transform. Sample ``i`` of the uniform stream is

    z_i = mix(seed + (i + 1) * 0x9E3779B97F4A7C15)

with the standard SplitMix64 finalizer, so any slice of the stream can be
generated independently of the rest.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .imgio import ensure_image

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 2.0 ** -53


def splitmix64(seed: int, count: int) -> np.ndarray:
    """Return the first ``count`` uint64 outputs of the stream for ``seed``."""
    if count < 0:
        raise InvalidInputError(f"count must be >= 0, got {count}")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * GOLDEN
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def standard_normals(seed: int, count: int) -> np.ndarray:
    """Standard normal samples via Box-Muller on the SplitMix64 stream.

    Consecutive stream outputs are consumed in pairs; even output indices
    take the cosine branch, odd the sine branch. u1 is mapped into (0, 1]
    so the log is always finite.
    """
    if count < 0:
        raise InvalidInputError(f"count must be >= 0, got {count}")
    pairs = (count + 1) // 2
    z = splitmix64(seed, 2 * pairs)
    u1 = ((z[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (z[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


def add_noise(image, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise with standard deviation ``sigma``.

    Noise is laid over the image in row-major pixel order, so a given
    (seed, shape) pair always yields the same noise field. The result is
    not clamped or quantized.
    """
    a = ensure_image(image)
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return a.copy()
    noise = standard_normals(seed, a.size).reshape(a.shape)
    return a + sigma * noise
