"""Synthetic heatmaps with planted activation blobs and known ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .heatmap_io import BoundingBox, Heatmap, ValidationError

GT_THRESHOLD = 0.9
FALLOFFS = ("gaussian", "flat")


@dataclass(frozen=True)
class BlobSpec:
    cx: int
    cy: int
    radius_x: float
    radius_y: float
    peak_r: float = 1.0
    peak_g: float = 0.0
    falloff: str = "flat"

    def __post_init__(self):
        if self.radius_x < 1 or self.radius_y < 1:
            raise ValidationError("blob radii must be >= 1")
        for name in ("peak_r", "peak_g"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.falloff not in FALLOFFS:
            raise ValidationError(f"falloff must be one of {FALLOFFS}, got {self.falloff!r}")

    @property
    def peak(self) -> float:
        return max(self.peak_r, self.peak_g)

    def extent(self) -> tuple[float, float, float, float]:
        """Continuous bounding box of the radius ellipse."""
        return (self.cx - self.radius_x, self.cy - self.radius_y, self.cx + self.radius_x, self.cy + self.radius_y)

    def profile(self, width: int, height: int) -> np.ndarray:
        """Unit-peak intensity profile over the canvas."""
        ys, xs = np.mgrid[0:height, 0:width]
        rho2 = ((xs - self.cx) / self.radius_x) ** 2 + ((ys - self.cy) / self.radius_y) ** 2
        if self.falloff == "flat":
            return (rho2 <= 1.0).astype(np.float64)
        return np.exp(-0.5 * rho2)

    def tip_width(self) -> int:
        """Fewest pixels on any extreme row or column of the flat ellipse.

        Single-pixel tips do not survive an 11-pixel smoothing followed by a
        0.5 threshold, so boxes recovered after smoothing can lose them.
        """
        w, h = int(np.ceil(self.cx + self.radius_x)) + 1, int(np.ceil(self.cy + self.radius_y)) + 1
        mask = BlobSpec(self.cx, self.cy, self.radius_x, self.radius_y, falloff="flat").profile(w, h) > 0
        ys, xs = np.nonzero(mask)
        return int(min(mask[ys.min()].sum(), mask[ys.max()].sum(), mask[:, xs.min()].sum(), mask[:, xs.max()].sum()))


@dataclass(frozen=True)
class SynthScene:
    width: int
    height: int
    blobs: tuple[BlobSpec, ...] = ()
    noise_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "blobs", tuple(self.blobs))
        if self.width < 1 or self.height < 1:
            raise ValidationError("scene dimensions must be >= 1")
        if not 0.0 <= self.noise_amplitude <= 1.0:
            raise ValidationError("noise_amplitude must lie in [0, 1]")
        for b in self.blobs:
            x0, y0, x1, y1 = b.extent()
            if x0 < 0 or y0 < 0 or x1 > self.width - 1 or y1 > self.height - 1:
                raise ValidationError(f"blob at ({b.cx}, {b.cy}) extends outside {self.width}x{self.height}")
        if self.blobs and self.noise_amplitude > 0 and self.noise_amplitude >= min(b.peak for b in self.blobs):
            raise ValidationError("noise_amplitude must stay below every blob peak")


def generate(scene: SynthScene) -> tuple[Heatmap, list[Optional[BoundingBox]]]:
    """Render the scene and return it with one ground-truth box per blob.

    Overlapping blobs combine by per-pixel maximum. Uniform noise in
    ``[0, noise_amplitude]`` goes on the red channel only. A blob's ground
    truth is the tight box of pixels where its own red (with noise) or green
    intensity exceeds 0.9; it is None when no pixel does.
    """
    w, h = scene.width, scene.height
    red = np.zeros((h, w))
    green = np.zeros((h, w))
    profiles = [b.profile(w, h) for b in scene.blobs]
    for b, prof in zip(scene.blobs, profiles):
        np.maximum(red, b.peak_r * prof, out=red)
        np.maximum(green, b.peak_g * prof, out=green)
    noise = np.zeros((h, w))
    if scene.noise_amplitude > 0:
        noise = np.random.default_rng(scene.seed).uniform(0.0, scene.noise_amplitude, size=(h, w))
    pixels = np.zeros((h, w, 3))
    pixels[..., 0] = np.clip(red + noise, 0.0, 1.0)
    pixels[..., 1] = green

    truth: list[Optional[BoundingBox]] = []
    for b, prof in zip(scene.blobs, profiles):
        hot = (b.peak_r * prof + noise > GT_THRESHOLD) | (b.peak_g * prof > GT_THRESHOLD)
        hot &= prof > 0
        if not hot.any():
            truth.append(None)
            continue
        ys, xs = np.nonzero(hot)
        truth.append(BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())))
    return Heatmap(pixels), truth


def random_scene(
    width: int,
    height: int,
    n_blobs: int,
    seed: int,
    radius_range: tuple[float, float] = (10.0, 18.0),
    falloff: str = "flat",
    peaks_r: Optional[list[float]] = None,
    noise_amplitude: float = 0.0,
    gap: float = 12.0,
    max_tries: int = 10_000,
) -> SynthScene:
    """Place ``n_blobs`` non-overlapping blobs at seeded random positions.

    Blob ellipse extents are kept at least ``gap`` pixels apart.
    """
    rng = np.random.default_rng(seed)
    blobs: list[BlobSpec] = []
    peaks_r = peaks_r if peaks_r is not None else [1.0] * n_blobs
    tries = 0
    while len(blobs) < n_blobs:
        tries += 1
        if tries > max_tries:
            raise ValidationError(f"could not place {n_blobs} blobs in {width}x{height}")
        rx = float(rng.uniform(*radius_range))
        ry = float(rng.uniform(*radius_range))
        if 2 * rx + 1 > width or 2 * ry + 1 > height:
            continue
        cx = int(rng.integers(int(np.ceil(rx)), int(width - 1 - np.ceil(rx)) + 1))
        cy = int(rng.integers(int(np.ceil(ry)), int(height - 1 - np.ceil(ry)) + 1))
        cand = BlobSpec(cx, cy, rx, ry, peak_r=peaks_r[len(blobs)], falloff=falloff)
        ax0, ay0, ax1, ay1 = cand.extent()
        if all(
            ax1 + gap < bx0 or bx1 + gap < ax0 or ay1 + gap < by0 or by1 + gap < ay0
            for bx0, by0, bx1, by1 in (b.extent() for b in blobs)
        ):
            blobs.append(cand)
    return SynthScene(width, height, tuple(blobs), noise_amplitude=noise_amplitude, seed=seed)
