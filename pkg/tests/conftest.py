import sys

import numpy as np
import pytest

from heatregions.heatmap_io import Heatmap, save_heatmap


def rect_heatmap(width, height, rects, green=()):
    """Heatmap with flat red rectangles ``(x0, y0, x1, y1, value)`` (inclusive)."""
    px = np.zeros((height, width, 3))
    for x0, y0, x1, y1, v in rects:
        px[y0 : y1 + 1, x0 : x1 + 1, 0] = v
    for x0, y0, x1, y1, v in green:
        px[y0 : y1 + 1, x0 : x1 + 1, 1] = v
    return Heatmap(px)


@pytest.fixture
def write_heatmap(tmp_path):
    def _write(name, heatmap):
        path = tmp_path / name
        save_heatmap(heatmap, path)
        return path

    return _write


# Three well-separated flat rectangles with distinct red levels; ranks 1, 2, 3.
FIXTURE_RECTS = [
    (20, 20, 59, 59, 1.0),
    (120, 30, 159, 69, 0.97),
    (60, 130, 109, 169, 0.94),
]
FIXTURE_SIZE = (200, 200)


@pytest.fixture
def three_rect_heatmap():
    return rect_heatmap(*FIXTURE_SIZE, FIXTURE_RECTS)


# (difficulty, target box, expected outcome) against the three-rectangle heatmap.
# Candidate boxes come out as the rectangles themselves, in the listed order.
FIXTURE_ENTRIES = [
    ("easy", [20, 20, 59, 59], "first"),  # identical to candidate 1: S = 1
    ("easy", [30, 20, 69, 59], "first"),  # IoU 1200/2000, d^2 100, c^2 4100: S = 0.6 - 100/4100
    ("medium", [120, 30, 159, 69], "second"),  # disjoint from 1, identical to 2
    ("medium", [170, 170, 189, 189], "none"),  # disjoint from all three
    ("hard", [60, 130, 109, 169], "third"),
    ("hard", [0, 100, 15, 115], "none"),
]


def write_fixture_manifest(tmp_path, heatmap):
    from heatregions.heatmap_io import BoundingBox, ManifestEntry, write_manifest

    save_heatmap(heatmap, tmp_path / "scene.png")
    entries = [
        ManifestEntry(f"img{i}", "scene.png", f"expression {i}", BoundingBox(*box), diff)
        for i, (diff, box, _) in enumerate(FIXTURE_ENTRIES)
    ]
    path = tmp_path / "manifest.jsonl"
    write_manifest(entries, path)
    return path


def expected_fixture_counts():
    counts = {d: {"first": 0, "second": 0, "third": 0, "none": 0} for d in ("easy", "medium", "hard")}
    for diff, _, outcome in FIXTURE_ENTRIES:
        counts[diff][outcome] += 1
    return counts


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
