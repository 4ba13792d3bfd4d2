"""Built-in preprocessing: a local block-matching denoiser.

This stands in for an external preprocessor. For each reference corner on
a coarse lattice it gathers the best-matching patches inside a search
window, shrinks the stack with the Gaussian nuclear norm rule at
mu = q * sigma^2, and aggregates everything back with rank-dependent
weights. Externally produced guide images can be loaded instead via
``load_preprocessed``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError
from .imgio import ensure_image, read_image
from .lowrank import gnnm_shrink
from .patches import PatchStack, aggregate, cover_corners


@dataclass
class PreprocessConfig:
    """Block-matching parameters.

    The search window spans ``search_radius`` corners in every direction
    from the reference (clipped at borders) and must be able to hold
    ``match_count`` candidates when unclipped.  The default match count
    equals the patch dimension so that the q*sigma^2 shrinkage offset
    covers the full noise inflation of the stack spectrum.
    """

    patch_size: int = 8
    search_radius: int = 19
    match_count: int = 64
    ref_stride: int = 4

    def __post_init__(self):
        if self.patch_size < 1:
            raise InvalidInputError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.search_radius < 0:
            raise InvalidInputError(f"search_radius must be >= 0, got {self.search_radius}")
        if self.ref_stride < 1:
            raise InvalidInputError(f"ref_stride must be >= 1, got {self.ref_stride}")
        if self.ref_stride > self.patch_size:
            raise InvalidInputError(
                f"ref_stride {self.ref_stride} exceeds patch_size "
                f"{self.patch_size}; reference patches would leave "
                "uncovered pixels"
            )
        if self.match_count < 1:
            raise InvalidInputError(f"match_count must be >= 1, got {self.match_count}")
        window = (2 * self.search_radius + 1) ** 2
        if window < self.match_count:
            raise InvalidInputError(
                f"search window holds {window} corners, fewer than "
                f"match_count={self.match_count}"
            )


def _patch_view(img: np.ndarray, s: int) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, (s, s))
    return np.ascontiguousarray(
        view.reshape(view.shape[0], view.shape[1], s * s), dtype=np.float64
    )


def _match(view: np.ndarray, ref_r: int, ref_c: int, cfg: PreprocessConfig) -> np.ndarray:
    """Corners of the best in-window matches, reference first.

    Candidates are ranked by squared Euclidean distance to the reference
    patch; ties fall back to raster order inside the window.
    """
    nr, nc = view.shape[:2]
    rad = cfg.search_radius
    r0, r1 = max(0, ref_r - rad), min(nr - 1, ref_r + rad)
    c0, c1 = max(0, ref_c - rad), min(nc - 1, ref_c + rad)
    win = view[r0 : r1 + 1, c0 : c1 + 1]
    wc = c1 - c0 + 1
    diff = win.reshape(-1, win.shape[2]) - view[ref_r, ref_c]
    dists = np.einsum("ij,ij->i", diff, diff)
    ref_flat = (ref_r - r0) * wc + (ref_c - c0)
    order = np.argsort(dists, kind="stable")
    order = order[order != ref_flat]
    if dists.size < cfg.match_count:
        warnings.warn(
            f"window at ({ref_r}, {ref_c}) holds only {dists.size} candidates, "
            f"fewer than match_count={cfg.match_count}",
            stacklevel=3,
        )
    flat = np.concatenate(([ref_flat], order[: cfg.match_count - 1]))
    corners = np.empty((flat.size, 2), dtype=np.int64)
    corners[:, 0] = r0 + flat // wc
    corners[:, 1] = c0 + flat % wc
    return corners


def block_match(image, ref_corner, cfg: PreprocessConfig) -> np.ndarray:
    """Find the q best in-window matches for one reference corner.

    Returns (q, 2) corner coordinates with the reference itself first.
    """
    img = ensure_image(image)
    s = cfg.patch_size
    h, w = img.shape
    if min(h, w) < s:
        raise InvalidInputError(f"image {h}x{w} smaller than patch size {s}")
    r, c = int(ref_corner[0]), int(ref_corner[1])
    if not (0 <= r <= h - s and 0 <= c <= w - s):
        raise InvalidInputError(
            f"reference corner ({r}, {c}) outside valid range "
            f"[0, {h - s}] x [0, {w - s}]"
        )
    return _match(_patch_view(img, s), r, c, cfg)


def local_denoise(noisy, sigma: float, cfg: PreprocessConfig | None = None) -> np.ndarray:
    """Denoise by matched-stack GNNM shrinkage around every lattice corner.

    Each reference stack of q patches is shrunk with mu = q * sigma^2 and
    the results are fused by rank-weighted aggregation, reference corners
    in raster order. sigma = 0 reduces to the identity.
    """
    img = ensure_image(noisy)
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if cfg is None:
        cfg = PreprocessConfig()
    s = cfg.patch_size
    h, w = img.shape
    if min(h, w) < s:
        raise InvalidInputError(f"image {h}x{w} smaller than patch size {s}")
    view = _patch_view(img, s)
    stacks = []
    ranks = []
    class_id = 0
    for r in cover_corners(h, s, cfg.ref_stride):
        for c in cover_corners(w, s, cfg.ref_stride):
            class_id += 1
            corners = _match(view, int(r), int(c), cfg)
            stack = view[corners[:, 0], corners[:, 1]]
            x, rank = gnnm_shrink(stack, corners.shape[0] * sigma * sigma)
            stacks.append(PatchStack(class_id=class_id, matrix=x, coords=corners))
            ranks.append(rank)
    return aggregate(stacks, ranks, img.shape)


def load_preprocessed(path, expected_dims) -> np.ndarray:
    """Read an externally produced guide image and check its dimensions."""
    img = read_image(path)
    expected = (int(expected_dims[0]), int(expected_dims[1]))
    if img.shape != expected:
        raise DimensionMismatchError(
            f"{path}: preprocessed image is {img.shape[0]}x{img.shape[1]}, "
            f"expected {expected[0]}x{expected[1]}"
        )
    return img
