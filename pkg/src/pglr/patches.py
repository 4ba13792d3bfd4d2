"""Patch extraction, class assignment, balancing and aggregation.

Patches are s x s image blocks flattened row-major into length s^2
vectors. A grid covers the image on a fixed stride with extra patches
pinned to the bottom and right edges so every pixel belongs to at least
one patch. Classes are GMM posterior argmax labels, rebalanced so each
class holds between q_min and q_max patches, then denoised per class and
written back as a weighted running mean over overlapping pixels.

The aggregation order is fixed (ascending class id, patches in stack
order) and uses an incremental weighted mean, so when every contribution
to a pixel carries the same value the result is that value exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import ceil, isqrt

import numpy as np

from .errors import DimensionMismatchError, InternalConsistencyError, InvalidInputError
from .gmm import GmmModel, _log_pdf_all, _validate_model, inflate_covariances
from .imgio import ensure_image


@dataclass
class PatchGrid:
    """Patches of one image: top-left corners and flattened pixel vectors."""

    patch_size: int
    stride: int
    coords: np.ndarray  # (n, 2) int64, (row, col) of each patch corner
    vectors: np.ndarray  # (n, patch_size**2) float64


@dataclass
class ClusterAssignment:
    """1-based class labels plus per-class patch index groups.

    ``groups[c]`` holds the ascending patch indices of class c + 1; the
    stack built for a class keeps this order.
    """

    labels: np.ndarray
    groups: list


@dataclass
class PatchStack:
    """The patches of one class: a (q, s^2) matrix and matching corners."""

    class_id: int
    matrix: np.ndarray
    coords: np.ndarray


def cover_corners(extent: int, size: int, stride: int) -> np.ndarray:
    """Corner offsets covering [0, extent) with a final edge-pinned corner."""
    last = extent - size
    starts = list(range(0, last + 1, stride))
    if starts[-1] != last:
        starts.append(last)
    return np.asarray(starts, dtype=np.int64)


def extract_patches(image, patch_size: int, stride: int) -> PatchGrid:
    """Slice an image into a covering grid of flattened patches."""
    img = ensure_image(image)
    h, w = img.shape
    if patch_size < 1 or patch_size > min(h, w):
        raise InvalidInputError(
            f"patch_size must be in [1, {min(h, w)}] for a {h}x{w} image, got {patch_size}"
        )
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    if stride > patch_size:
        raise InvalidInputError(
            f"stride {stride} exceeds patch_size {patch_size}; "
            "the grid would leave uncovered pixels"
        )
    rows = cover_corners(h, patch_size, stride)
    cols = cover_corners(w, patch_size, stride)
    view = np.lib.stride_tricks.sliding_window_view(img, (patch_size, patch_size))
    tiles = view[np.ix_(rows, cols)]
    vectors = tiles.reshape(rows.size * cols.size, patch_size * patch_size)
    coords = np.empty((rows.size * cols.size, 2), dtype=np.int64)
    coords[:, 0] = np.repeat(rows, cols.size)
    coords[:, 1] = np.tile(cols, rows.size)
    return PatchGrid(
        patch_size=patch_size,
        stride=stride,
        coords=coords,
        vectors=np.ascontiguousarray(vectors, dtype=np.float64),
    )


def _pairwise_sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * (x @ c.T)
        + np.sum(c * c, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeans(vectors, k: int, seed: int = 0, iters: int = 20) -> np.ndarray:
    """Seeded k-means with k-means++ initialization, returning 1-based labels.

    Empty clusters are reseeded from the point farthest from its assigned
    centroid; iteration stops when labels stop changing.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError(f"vectors must be a non-empty 2-D array, got shape {x.shape}")
    n = x.shape[0]
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must be in [1, {n}], got {k}")
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")

    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    cents = x[chosen[0]][None, :].copy()
    d2 = _pairwise_sq_dists(x, cents)[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # All points sit on existing centroids; take the first index
            # not already picked.
            taken = set(chosen)
            idx = next(i for i in range(n) if i not in taken)
        chosen.append(idx)
        cents = np.vstack([cents, x[idx]])
        d2 = np.minimum(d2, _pairwise_sq_dists(x, x[idx][None, :])[:, 0])

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(iters):
        dists = _pairwise_sq_dists(x, cents)
        new_labels = np.argmin(dists, axis=1)
        assigned = dists[np.arange(n), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(assigned))
                cents[j] = x[far]
                new_labels[far] = j
                assigned[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = x[labels == j]
            if members.shape[0]:
                cents[j] = members.mean(axis=0)
    return labels + 1


def assign_classes(model: GmmModel, grid: PatchGrid, sigma_t: float) -> np.ndarray:
    """Label every patch with its most probable mixture component (1-based).

    The model covariances are inflated by sigma_t^2 I first, since the
    patches being classified are observed under noise at level sigma_t.
    """
    _validate_model(model)
    if model.d != grid.vectors.shape[1]:
        raise DimensionMismatchError(
            f"model dimension {model.d} does not match patch vectors of "
            f"dimension {grid.vectors.shape[1]}"
        )
    if np.any(model.weights <= 0):
        raise InvalidInputError("class assignment requires strictly positive weights")
    inflated = inflate_covariances(model, sigma_t)
    log_joint = np.log(inflated.weights) + _log_pdf_all(inflated, grid.vectors)
    return np.argmax(log_joint, axis=1).astype(np.int64) + 1


def _redistribute(quotas: np.ndarray, target: int, q_min: int, q_max: int) -> np.ndarray:
    """Adjust clipped quotas so they sum to target, staying in [q_min, q_max]."""
    quotas = quotas.copy()
    diff = target - int(quotas.sum())
    for c in range(quotas.size):
        if diff > 0 and quotas[c] < q_max:
            add = min(diff, q_max - quotas[c])
            quotas[c] += add
            diff -= add
        elif diff < 0 and quotas[c] > q_min:
            cut = min(-diff, quotas[c] - q_min)
            quotas[c] -= cut
            diff += cut
        if diff == 0:
            break
    if diff != 0:
        raise InternalConsistencyError("class split quotas cannot reach the target size")
    return quotas


def _split_class(idx, sub_vecs, q_min, q_max, seed):
    """Split one oversized class into parts whose sizes fit [q_min, q_max].

    k-means proposes the partition; part sizes are clipped into range and
    points are assigned greedily, strongest centroid preference first,
    each to its nearest part with remaining quota.
    """
    q = idx.size
    m = ceil(q / q_max)
    sub_labels = kmeans(sub_vecs, m, seed=seed, iters=20) - 1
    cents = np.stack([sub_vecs[sub_labels == j].mean(axis=0) for j in range(m)])
    sizes = np.bincount(sub_labels, minlength=m)
    quotas = _redistribute(np.clip(sizes, q_min, q_max), q, q_min, q_max)

    dists = _pairwise_sq_dists(sub_vecs, cents)
    ranked = np.argsort(dists, axis=1, kind="stable")
    best = dists[np.arange(q), ranked[:, 0]]
    runner = dists[np.arange(q), ranked[:, 1]] if m > 1 else best
    order = np.argsort(-(runner - best), kind="stable")

    remaining = quotas.copy()
    members = [[] for _ in range(m)]
    for p in order:
        for j in ranked[p]:
            if remaining[j] > 0:
                members[j].append(idx[p])
                remaining[j] -= 1
                break
    return [np.sort(np.asarray(part, dtype=np.int64)) for part in members]


def balance_classes(
    labels, vectors, q_min: int = 64, q_max: int = 360, seed: int = 0
) -> ClusterAssignment:
    """Rebalance class sizes into [q_min, q_max].

    Undersized classes are merged smallest-first into the class with the
    nearest empirical centroid until every class reaches q_min (or only
    one class remains); oversized classes are then split with seeded
    k-means. Fewer than q_min patches in total collapses to a single
    class with a warning.
    """
    lab = np.asarray(labels, dtype=np.int64)
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or lab.shape != (x.shape[0],):
        raise DimensionMismatchError(
            f"labels of shape {lab.shape} do not match vectors of shape {x.shape}"
        )
    if q_min < 1:
        raise InvalidInputError(f"q_min must be >= 1, got {q_min}")
    if q_max < 2 * q_min:
        raise InvalidInputError(
            f"q_max must be >= 2 * q_min, got q_min={q_min} q_max={q_max}"
        )
    n = x.shape[0]
    if n < q_min:
        warnings.warn(
            f"only {n} patches for q_min={q_min}; using a single class",
            stacklevel=2,
        )
        return ClusterAssignment(
            labels=np.ones(n, dtype=np.int64), groups=[np.arange(n, dtype=np.int64)]
        )

    groups = {}
    cents = {}
    for class_id in np.unique(lab):
        idx = np.flatnonzero(lab == class_id)
        groups[int(class_id)] = idx
        cents[int(class_id)] = x[idx].mean(axis=0)

    # Merge phase: feed the smallest class to its nearest neighbour.
    while len(groups) > 1:
        sizes = {c: g.size for c, g in groups.items()}
        victim = min(sizes, key=lambda c: (sizes[c], c))
        if sizes[victim] >= q_min:
            break
        others = [c for c in sorted(groups) if c != victim]
        vc = cents[victim]
        target = min(others, key=lambda c: (float(np.sum((cents[c] - vc) ** 2)), c))
        merged = np.sort(np.concatenate([groups[victim], groups[target]]))
        cents[target] = (
            sizes[victim] * cents[victim] + sizes[target] * cents[target]
        ) / (sizes[victim] + sizes[target])
        groups[target] = merged
        del groups[victim], cents[victim]

    # Split phase: break up anything above q_max.
    final_groups = []
    for class_id in sorted(groups):
        idx = groups[class_id]
        if idx.size <= q_max:
            final_groups.append(idx)
            continue
        final_groups.extend(
            _split_class(idx, x[idx], q_min, q_max, seed + 97 * class_id)
        )

    out_labels = np.zeros(n, dtype=np.int64)
    for c, idx in enumerate(final_groups, start=1):
        out_labels[idx] = c
    for idx in final_groups:
        if not (q_min <= idx.size <= q_max) and len(final_groups) > 1:
            raise InternalConsistencyError(
                f"balanced class of size {idx.size} escaped [{q_min}, {q_max}]"
            )
    return ClusterAssignment(labels=out_labels, groups=final_groups)


def build_stacks(grid: PatchGrid, assignment: ClusterAssignment) -> list:
    """Gather each class's patch vectors and corners into a PatchStack."""
    n = grid.vectors.shape[0]
    if assignment.labels.shape != (n,):
        raise DimensionMismatchError(
            f"assignment covers {assignment.labels.shape[0]} patches, grid has {n}"
        )
    stacks = []
    for c, idx in enumerate(assignment.groups, start=1):
        if idx.size == 0:
            raise InternalConsistencyError(f"class {c} has no patches")
        if idx.min() < 0 or idx.max() >= n:
            raise InternalConsistencyError(f"class {c} indexes patches outside the grid")
        stacks.append(
            PatchStack(class_id=c, matrix=grid.vectors[idx], coords=grid.coords[idx])
        )
    return stacks


def patch_weight(rank: int, q: int) -> float:
    """Aggregation weight of a stack denoised at the given rank.

    Low rank means aggressive shrinkage and a trustworthy consensus, so
    the weight decreases with rank; a full-rank (unshrunk) stack gets the
    minimal weight 1/q.
    """
    if q < 1:
        raise InvalidInputError(f"q must be >= 1, got {q}")
    if not 0 <= rank <= q:
        raise InvalidInputError(f"rank must be in [0, {q}], got {rank}")
    if rank < q:
        return 1.0 - rank / q
    return 1.0 / q


def aggregate(stacks, ranks, shape) -> np.ndarray:
    """Fuse denoised patch stacks into an image by weighted running means.

    Stacks are folded in ascending class id, patches in stack order; each
    pixel's value is the weighted mean of every patch pixel that covers
    it, computed incrementally so consensus values survive exactly.
    """
    if len(stacks) != len(ranks):
        raise DimensionMismatchError(f"{len(stacks)} stacks but {len(ranks)} ranks")
    h, w = int(shape[0]), int(shape[1])
    if h < 1 or w < 1:
        raise InvalidInputError(f"bad image shape {shape}")
    mean = np.zeros((h, w))
    total = np.zeros((h, w))
    for pos in sorted(range(len(stacks)), key=lambda i: stacks[i].class_id):
        stack, rank = stacks[pos], ranks[pos]
        q, dim = stack.matrix.shape
        s = isqrt(dim)
        if s * s != dim:
            raise InvalidInputError(f"stack {stack.class_id} patch length {dim} is not square")
        weight = patch_weight(rank, q)
        for row in range(q):
            r, c = int(stack.coords[row, 0]), int(stack.coords[row, 1])
            if not (0 <= r <= h - s and 0 <= c <= w - s):
                raise InternalConsistencyError(
                    f"patch corner ({r}, {c}) outside a {h}x{w} image"
                )
            block = stack.matrix[row].reshape(s, s)
            tw = total[r : r + s, c : c + s]
            mv = mean[r : r + s, c : c + s]
            tw += weight
            mv += (weight / tw) * (block - mv)
    if np.any(total == 0.0):
        raise InternalConsistencyError("aggregation left uncovered pixels")
    return mean
