"""Cluster activation scoring, tight boxes, and the end-to-end proposal pipeline."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .activation import active_mask, count_regions, label_components, RegionCount
from .clustering import (
    Cluster,
    KMeansConfig,
    KMeansResult,
    build_feature_grid,
    distinct_count,
    gaussian_smooth,
    kmeans,
    postprocess_clusters,
)
from .heatmap_io import BoundingBox, Heatmap, ValidationError

log = logging.getLogger(__name__)

ACTIVATION_DECIMALS = 12


@dataclass(frozen=True)
class RankingConfig:
    w_r: float = 0.7
    w_g: float = 0.3
    t_h: float = 0.9
    t_m: float = 0.5
    kernel_size: int = 11
    sigma: Optional[float] = None
    min_area: int = 150
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)

    def __post_init__(self):
        if self.w_r < 0 or self.w_g < 0:
            raise ValidationError("channel weights must be non-negative")
        for name in ("t_h", "t_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValidationError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if self.min_area < 1:
            raise ValidationError("min_area must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ScoredCluster:
    cluster: Cluster
    activation: float
    box: BoundingBox

    @property
    def area(self) -> int:
        return self.cluster.size


@dataclass
class Proposal:
    """Everything the pipeline computed on the way to the ranked candidates."""

    candidates: list[ScoredCluster]
    regions: RegionCount
    k_used: int
    mask_h: np.ndarray
    component_sizes: dict[int, int]
    kmeans: Optional[KMeansResult] = None


def cluster_activation(cluster: Cluster, h: Heatmap, w_r: float = 0.7, w_g: float = 0.3) -> float:
    """Mean of ``w_r * r + w_g * g`` over the cluster's pixels in the raw heatmap."""
    if cluster.size == 0:
        raise ValidationError("cannot score an empty cluster")
    r = h.red[cluster.ys, cluster.xs]
    g = h.green[cluster.ys, cluster.xs]
    return float(np.mean(w_r * r + w_g * g))


def tight_box(cluster: Cluster) -> BoundingBox:
    if cluster.size == 0:
        raise ValidationError("cannot box an empty cluster")
    return BoundingBox(int(cluster.xs.min()), int(cluster.ys.min()), int(cluster.xs.max()), int(cluster.ys.max()))


def rank_clusters(clusters: Sequence[Cluster], h: Heatmap, cfg: RankingConfig = RankingConfig()) -> list[ScoredCluster]:
    """Score and box each cluster, highest activation first.

    Activations equal to 12 decimal places are ties (a constant-intensity
    cluster's mean depends on its pixel count in the last bit). Ties go to the
    larger cluster, then to the box whose top-left corner comes first in
    raster order.
    """
    scored = [ScoredCluster(c, cluster_activation(c, h, cfg.w_r, cfg.w_g), tight_box(c)) for c in clusters]
    scored.sort(key=lambda s: (-round(s.activation, ACTIVATION_DECIMALS), -s.area, s.box.y0, s.box.x0))
    return scored


def run_pipeline(h: Heatmap, cfg: RankingConfig = RankingConfig()) -> Proposal:
    mask = active_mask(h, cfg.t_h)
    labeling = label_components(mask)
    regions = count_regions(labeling, cfg.min_area)
    proposal = Proposal([], regions, 0, mask, labeling.component_sizes)
    if regions.active_components == 0:
        return proposal

    h_g = gaussian_smooth(h, cfg.kernel_size, cfg.sigma)
    grid = build_feature_grid(h_g, cfg.t_m)
    if not grid.active.any():
        return proposal
    k = regions.k
    n_distinct = distinct_count(grid.flat())
    if k > n_distinct:
        log.warning("clamping k=%d to %d distinct feature entries", k, n_distinct)
        k = n_distinct
    result = kmeans(grid, k, cfg.kmeans)
    clusters = postprocess_clusters(result.labels, grid.active, cfg.min_area)
    proposal.k_used = k
    proposal.kmeans = result
    proposal.candidates = rank_clusters(clusters, h, cfg)
    return proposal


def propose_regions(h: Heatmap, cfg: RankingConfig = RankingConfig()) -> list[ScoredCluster]:
    """Ranked candidate regions for a heatmap; empty when nothing is active enough."""
    return run_pipeline(h, cfg).candidates


def candidates_to_records(candidates: Sequence[ScoredCluster]) -> list[dict]:
    return [
        {"rank": i, "box": c.box.as_list(), "activation": c.activation, "area": c.area}
        for i, c in enumerate(candidates, start=1)
    ]
