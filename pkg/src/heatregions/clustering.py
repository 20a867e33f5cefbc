"""Smoothing, per-pixel feature grid, Lloyd K-means and cluster clean-up."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .activation import label_components, threshold_mask
from .heatmap_io import Heatmap, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KMeansConfig:
    max_iterations: int = 300
    seed: int = 0
    convergence_epsilon: float = 0.0
    restarts: int = 20

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.convergence_epsilon < 0:
            raise ValidationError("convergence_epsilon must be >= 0")


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """``features`` is ``(H, W, 5)`` holding (x_n, y_n, r, g, b), zeroed where ``active`` is False."""

    features: np.ndarray
    active: np.ndarray

    @property
    def height(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def flat(self) -> np.ndarray:
        return self.features.reshape(-1, 5)


@dataclass(frozen=True)
class Cluster:
    id: int
    ys: np.ndarray
    xs: np.ndarray

    def __post_init__(self):
        if len(self.ys) == 0:
            raise ValidationError("cluster has no members")

    @property
    def size(self) -> int:
        return len(self.ys)

    def members(self) -> list[tuple[int, int]]:
        """Member pixels as ``(x, y)`` pairs in raster order."""
        return [(int(x), int(y)) for y, x in zip(self.ys, self.xs)]


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    sse: float
    sse_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    reseeds: int = 0
    restart: int = 0


def default_sigma(kernel_size: int) -> float:
    return 0.3 * ((kernel_size - 1) / 2.0 - 1.0) + 0.8


def gaussian_kernel_1d(kernel_size: int, sigma: Optional[float] = None) -> np.ndarray:
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValidationError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    if sigma is None:
        sigma = default_sigma(kernel_size)
    if sigma <= 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    half = kernel_size // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_smooth(h: Heatmap, kernel_size: int = 11, sigma: Optional[float] = None) -> Heatmap:
    """Separable Gaussian blur per channel with edge replication at the borders."""
    w = gaussian_kernel_1d(kernel_size, sigma)
    if kernel_size == 1:
        return h
    out = np.empty_like(h.pixels)
    for c in range(3):
        tmp = ndimage.correlate1d(h.pixels[..., c], w, axis=0, mode="nearest")
        out[..., c] = ndimage.correlate1d(tmp, w, axis=1, mode="nearest")
    return Heatmap(np.clip(out, 0.0, 1.0))


def normalized_coords(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.arange(width, dtype=np.float64) / (width - 1) if width > 1 else np.zeros(1)
    ys = np.arange(height, dtype=np.float64) / (height - 1) if height > 1 else np.zeros(1)
    return np.meshgrid(xs, ys)


def build_feature_grid(h_g: Heatmap, t_m: float = 0.5) -> FeatureGrid:
    active = threshold_mask(h_g, t_m)
    xn, yn = normalized_coords(h_g.width, h_g.height)
    feats = np.concatenate([xn[..., None], yn[..., None], h_g.pixels], axis=2)
    feats[~active] = 0.0
    feats.setflags(write=False)
    active.setflags(write=False)
    return FeatureGrid(feats, active)


def distinct_count(points: np.ndarray) -> int:
    return len(np.unique(points, axis=0))


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def sample_initial_centroids(inverse: np.ndarray, uniq: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick ``k`` data entries at random, skipping values already picked.

    Entries (``uniq[inverse]``) are visited in a uniformly random order, so
    frequent values are likely to be chosen; only the first occurrence of
    each value is kept.
    """
    chosen: list[int] = []
    seen: set[int] = set()
    for u in inverse[rng.permutation(len(inverse))]:
        if u in seen:
            continue
        seen.add(int(u))
        chosen.append(int(u))
        if len(chosen) == k:
            break
    if len(chosen) < k:
        raise ValidationError(f"k={k} exceeds the {len(chosen)} distinct entries")
    return uniq[chosen].copy()


def empty_cluster_repair(
    points: np.ndarray, centroids: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, int]:
    """Move every centroid without members onto the entry farthest from its own centroid.

    Returns the (possibly new) centroid array and the number of centroids moved.
    Several empty centroids take successive farthest entries; equal distances
    go to the lowest entry index.
    """
    k = len(centroids)
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if len(empty) == 0:
        return centroids, 0
    centroids = centroids.copy()
    diff = points - centroids[labels]
    dist = np.einsum("nd,nd->n", diff, diff)
    order = np.argsort(-dist, kind="stable")
    for j, idx in zip(empty, order):
        centroids[j] = points[idx]
    return centroids, len(empty)


def _lloyd(points: np.ndarray, weights: np.ndarray, centroids: np.ndarray, cfg: KMeansConfig) -> KMeansResult:
    # points are distinct values, weights their multiplicities.
    k, dim = centroids.shape
    idx = np.arange(len(points))
    labels = None
    history: list[float] = []
    reseeds = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        d2 = _sq_distances(points, centroids)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(np.dot(weights, d2[idx, new_labels])))
        if labels is not None and np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        counts = np.bincount(labels, weights=weights, minlength=k)
        sums = np.stack([np.bincount(labels, weights=weights * points[:, d], minlength=k) for d in range(dim)], axis=1)
        new_centroids = centroids.copy()
        nz = counts > 0
        new_centroids[nz] = sums[nz] / counts[nz, None]
        new_centroids, moved = empty_cluster_repair(points, new_centroids, labels)
        reseeds += moved
        shift = float(np.max(np.abs(new_centroids - centroids)))
        centroids = new_centroids
        if cfg.convergence_epsilon > 0 and shift <= cfg.convergence_epsilon:
            d2 = _sq_distances(points, centroids)
            labels = np.argmin(d2, axis=1)
            history.append(float(np.dot(weights, d2[idx, labels])))
            converged = True
            break
    return KMeansResult(
        labels=labels,
        centroids=centroids,
        sse=history[-1],
        sse_history=history,
        iterations=it,
        converged=converged,
        reseeds=reseeds,
    )


def kmeans_points(
    points: np.ndarray, k: int, cfg: KMeansConfig = KMeansConfig(), init: Optional[np.ndarray] = None
) -> KMeansResult:
    """Lloyd K-means over an ``(N, D)`` array.

    Stops when no assignment changes or after ``cfg.max_iterations``
    assignment steps. With several restarts the lowest final SSE wins, the
    earliest restart on ties. ``init`` fixes the starting centroids (single run).

    Identical entries always share an assignment, so the iterations run over
    distinct values weighted by multiplicity.
    """
    points = np.asarray(points, dtype=np.float64)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if len(points) == 0:
        raise ValidationError("no points to cluster")
    uniq, inverse, counts = np.unique(points, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    weights = counts.astype(np.float64)
    if init is not None:
        init = np.array(init, dtype=np.float64)
        if init.shape != (k, points.shape[1]):
            raise ValidationError(f"init must have shape {(k, points.shape[1])}")
        best = _lloyd(uniq, weights, init, cfg)
    else:
        if k > len(uniq):
            raise ValidationError(f"k={k} exceeds the {len(uniq)} distinct entries")
        rng = np.random.default_rng(cfg.seed)
        best = None
        for r in range(cfg.restarts):
            res = _lloyd(uniq, weights, sample_initial_centroids(inverse, uniq, k, rng), cfg)
            res.restart = r
            if best is None or res.sse < best.sse:
                best = res
    best.labels = best.labels[inverse]
    return best


def kmeans(grid: FeatureGrid, k: int, cfg: KMeansConfig = KMeansConfig()) -> KMeansResult:
    """Cluster every grid entry (zero vectors included); ``labels`` comes back as an ``(H, W)`` grid."""
    res = kmeans_points(grid.flat(), k, cfg)
    res.labels = res.labels.reshape(grid.height, grid.width)
    return res


def postprocess_clusters(assignment: np.ndarray, active_m: np.ndarray, min_area: int = 150) -> list[Cluster]:
    """Drop sub-threshold pixels, split clusters into 8-connected parts, discard small parts.

    Output ids are sequential, ordered by K-means cluster id and then by
    raster-scan discovery of each part.
    """
    assignment = np.asarray(assignment)
    active_m = np.asarray(active_m, dtype=bool)
    if assignment.shape != active_m.shape:
        raise ValidationError(f"assignment shape {assignment.shape} != mask shape {active_m.shape}")
    clusters: list[Cluster] = []
    for cid in np.unique(assignment[active_m]):
        parts = label_components((assignment == cid) & active_m)
        for part_id, size in parts.component_sizes.items():
            if size < min_area:
                continue
            ys, xs = np.nonzero(parts.labels == part_id)
            clusters.append(Cluster(id=len(clusters), ys=ys, xs=xs))
    return clusters
