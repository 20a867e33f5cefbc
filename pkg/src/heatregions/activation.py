"""High-activation mask, 8-connected component labeling and region count."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .heatmap_io import Heatmap, ValidationError

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """``labels`` is an int grid (0 = inactive); ids start at 1 in raster-scan discovery order."""

    labels: np.ndarray
    component_sizes: dict[int, int]

    @property
    def count(self) -> int:
        return len(self.component_sizes)


@dataclass(frozen=True)
class RegionCount:
    k: int
    active_components: int


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")


def threshold_mask(h: Heatmap, threshold: float) -> np.ndarray:
    """Pixels whose red or green channel strictly exceeds ``threshold``."""
    _check_unit("threshold", threshold)
    return (h.red > threshold) | (h.green > threshold)


def active_mask(h: Heatmap, t_h: float = 0.9) -> np.ndarray:
    """Boolean ``(H, W)`` grid of highly active pixels on the raw heatmap."""
    return threshold_mask(h, t_h)


def label_components(mask: np.ndarray) -> ComponentLabeling:
    mask = np.asarray(mask, dtype=bool)
    raw, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    labels = np.zeros(mask.shape, dtype=np.int64)
    if n == 0:
        return ComponentLabeling(labels, {})
    # Renumber by first pixel in raster order so ids never depend on scipy internals.
    flat = raw.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    order = ids[np.argsort(first, kind="stable")]
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[order] = np.arange(1, len(order) + 1)
    labels = remap[raw]
    sizes = np.bincount(labels.ravel(), minlength=len(order) + 1)
    return ComponentLabeling(labels, {i: int(sizes[i]) for i in range(1, len(order) + 1)})


def count_regions(labeling: ComponentLabeling, min_area: int = 150) -> RegionCount:
    """Components of at least ``min_area`` pixels, plus one for the background."""
    if min_area < 1:
        raise ValidationError(f"min_area must be >= 1, got {min_area}")
    survivors = sum(1 for size in labeling.component_sizes.values() if size >= min_area)
    return RegionCount(k=survivors + 1, active_components=survivors)
