"""Heatmap rasters, bounding boxes, dataset manifests and box overlays."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw

DIFFICULTIES = ("easy", "medium", "hard")


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant."""


class ManifestError(ValueError):
    """A manifest record could not be parsed."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box with inclusive corners."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(f"box coordinate {name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValidationError(f"degenerate box {self.as_list()}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_list(cls, values: Sequence[int]) -> "BoundingBox":
        if len(values) != 4:
            raise ValidationError(f"box needs 4 coordinates, got {len(values)}")
        return cls(*values)

    def within(self, width: int, height: int) -> bool:
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 < width and self.y1 < height


@dataclass(frozen=True, eq=False)
class Heatmap:
    """RGB activation raster with channels in [0, 1].

    ``pixels`` has shape ``(height, width, 3)`` and is stored read-only.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(f"heatmap must have shape (H, W, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError("heatmap has a zero dimension")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("heatmap channel values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def red(self) -> np.ndarray:
        return self.pixels[..., 0]

    @property
    def green(self) -> np.ndarray:
        return self.pixels[..., 1]

    @property
    def blue(self) -> np.ndarray:
        return self.pixels[..., 2]

    def to_bytes(self) -> np.ndarray:
        """Quantize to an 8-bit ``(H, W, 3)`` array."""
        return np.rint(self.pixels * 255.0).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, Heatmap):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    heatmap_path: str
    expression: str
    target_box: BoundingBox
    difficulty: str

    def __post_init__(self):
        if self.difficulty not in DIFFICULTIES:
            raise ValidationError(
                f"unknown difficulty {self.difficulty!r}; expected one of {', '.join(DIFFICULTIES)}"
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "image_id": self.image_id,
                "heatmap_path": self.heatmap_path,
                "expression": self.expression,
                "target_box": self.target_box.as_list(),
                "difficulty": self.difficulty,
            }
        )


def heatmap_from_bytes(arr: np.ndarray) -> Heatmap:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return Heatmap(arr.astype(np.float64) / 255.0)


def load_heatmap(path: str | os.PathLike) -> Heatmap:
    """Read an 8-bit RGB or grayscale image and normalize it to [0, 1].

    Alpha is dropped; palette images are expanded to RGB.
    """
    with Image.open(path) as img:
        img.load()
        if img.width < 1 or img.height < 1:
            raise ValidationError(f"{path}: zero-dimension image")
        if img.mode in ("L", "LA"):
            arr = np.asarray(img.convert("L"))
        elif img.mode in ("RGB", "RGBA", "P", "PA", "RGBX"):
            arr = np.asarray(img.convert("RGB"))
        elif img.mode == "1":
            arr = np.asarray(img.convert("L"))
        else:
            raise ValidationError(f"{path}: unsupported image mode {img.mode!r} (need 8-bit RGB or grayscale)")
    return heatmap_from_bytes(arr)


def save_heatmap(heatmap: Heatmap, path: str | os.PathLike) -> None:
    save_png(heatmap.to_bytes(), path)


def save_png(raster: np.ndarray, path: str | os.PathLike) -> None:
    # Fixed encoder settings keep output bytes reproducible.
    Image.fromarray(np.ascontiguousarray(raster, dtype=np.uint8), mode="RGB").save(
        path, format="PNG", optimize=False, compress_level=6
    )


def _entry_from_record(record, lineno: int) -> ManifestEntry:
    if not isinstance(record, dict):
        raise ManifestError(lineno, "record is not a JSON object")
    missing = [k for k in ("image_id", "heatmap_path", "target_box", "difficulty") if k not in record]
    if missing:
        raise ManifestError(lineno, f"missing keys: {', '.join(missing)}")
    box = record["target_box"]
    if not isinstance(box, list) or len(box) != 4 or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in box
    ):
        raise ManifestError(lineno, "target_box must be a list of 4 integers")
    for key in ("image_id", "heatmap_path", "difficulty"):
        if not isinstance(record[key], str):
            raise ManifestError(lineno, f"{key} must be a string")
    expression = record.get("expression", "")
    if not isinstance(expression, str):
        raise ManifestError(lineno, "expression must be a string")
    try:
        target = BoundingBox.from_list(box)
    except ValidationError as exc:
        raise ManifestError(lineno, str(exc)) from None
    try:
        return ManifestEntry(
            image_id=record["image_id"],
            heatmap_path=record["heatmap_path"],
            expression=expression,
            target_box=target,
            difficulty=record["difficulty"],
        )
    except ValidationError as exc:
        raise ValidationError(f"line {lineno}: {exc}") from None


def parse_manifest_lines(lines: Iterable[str]) -> list[ManifestEntry]:
    entries = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(lineno, f"invalid JSON ({exc.msg})") from None
        entries.append(_entry_from_record(record, lineno))
    return entries


def parse_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    """Parse a JSON-lines manifest, one entry per non-blank line, in file order."""
    with open(path, encoding="utf-8") as fh:
        return parse_manifest_lines(fh)


def write_manifest(entries: Iterable[ManifestEntry], path: str | os.PathLike, append: bool = False) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(entry.to_json() + "\n")


def resolve_heatmap_path(entry: ManifestEntry, manifest_dir: Optional[Path]) -> Path:
    p = Path(entry.heatmap_path)
    if not p.is_absolute() and manifest_dir is not None:
        p = manifest_dir / p
    return p


# Rank 1 green as in the usual presentation; later ranks fall back to white.
RANK_COLORS = [(0, 255, 0), (0, 255, 255), (255, 255, 0)]
OTHER_RANK_COLOR = (255, 255, 255)
TARGET_COLOR = (255, 0, 255)


def render_overlay(heatmap: Heatmap, boxes: Sequence[BoundingBox], target: Optional[BoundingBox] = None) -> np.ndarray:
    """Draw ranked candidate boxes (and optionally the target) on an 8-bit copy.

    ``boxes`` is in rank order. Returns a ``(H, W, 3)`` uint8 array.
    """
    raster = heatmap.to_bytes()
    all_boxes = list(boxes) + ([target] if target is not None else [])
    for b in all_boxes:
        if not b.within(heatmap.width, heatmap.height):
            raise ValidationError(f"box {b.as_list()} outside {heatmap.width}x{heatmap.height} image")
    if not all_boxes:
        return raster
    img = Image.fromarray(raster, mode="RGB")
    draw = ImageDraw.Draw(img)
    # Lowest rank drawn last so it stays on top where outlines coincide.
    for rank in range(len(boxes), 0, -1):
        b = boxes[rank - 1]
        color = RANK_COLORS[rank - 1] if rank <= len(RANK_COLORS) else OTHER_RANK_COLOR
        draw.rectangle(b.as_list(), outline=color)
        if b.width >= 12 and b.height >= 14:
            draw.text((b.x0 + 2, b.y0 + 1), str(rank), fill=color)
    if target is not None:
        draw.rectangle(target.as_list(), outline=TARGET_COLOR)
    return np.asarray(img).copy()
