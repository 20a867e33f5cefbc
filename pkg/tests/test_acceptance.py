"""Exit criteria for the package, one test per criterion.

Each check records a PASS/FAIL line that is printed in the pytest terminal
summary. Run ``python tests/test_acceptance.py`` to print them standalone.
"""

import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heatregions.activation import active_mask, label_components  # noqa: E402
from heatregions.cli import main as cli_main  # noqa: E402
from heatregions.clustering import KMeansConfig, build_feature_grid, gaussian_smooth, kmeans  # noqa: E402
from heatregions.evaluation import evaluate_manifest, match_score  # noqa: E402
from heatregions.heatmap_io import BoundingBox, Heatmap, parse_manifest, save_heatmap  # noqa: E402
from heatregions.ranking import RankingConfig, propose_regions, run_pipeline  # noqa: E402
from heatregions.synth import SynthScene, generate, random_scene  # noqa: E402

from conftest import FIXTURE_RECTS, FIXTURE_SIZE, expected_fixture_counts, rect_heatmap, write_fixture_manifest  # noqa: E402
from oracles import diou_by_rasterization, union_find_components  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


# 1 ---------------------------------------------------------------------------

def test_criterion_1_matching_score_oracle():
    rng = np.random.default_rng(2024)
    pairs = []
    for _ in range(1000):
        corners = []
        for _ in range(2):
            x = np.sort(rng.integers(0, 100, size=2))
            y = np.sort(rng.integers(0, 100, size=2))
            corners.append(BoundingBox(int(x[0]), int(y[0]), int(x[1]), int(y[1])))
        pairs.append(tuple(corners))
    t0 = time.perf_counter()
    scores = [match_score(a, b) for a, b in pairs]
    elapsed = time.perf_counter() - t0
    worst = max(abs(s - diou_by_rasterization(a.as_list(), b.as_list())) for s, (a, b) in zip(scores, pairs))
    ident = all(match_score(a, a) == 1.0 for a, _ in pairs)
    disjoint = [s for s, (a, b) in zip(scores, pairs) if a.x1 < b.x0 or b.x1 < a.x0 or a.y1 < b.y0 or b.y1 < a.y0]
    ok = worst <= 1e-9 and ident and all(s < 0 for s in disjoint) and elapsed < 1.0
    record(
        "1 matching score vs rasterized oracle",
        ok,
        f"max |diff| {worst:.2e} (tol 1e-9), identical->1: {ident}, {len(disjoint)} disjoint pairs all < 0: "
        f"{all(s < 0 for s in disjoint)}, {elapsed:.3f}s (limit 1s)",
    )
    assert ok


# 2 ---------------------------------------------------------------------------

def test_criterion_2_connected_components_oracle():
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(200):
        density = rng.uniform(0.1, 0.7)
        m = rng.uniform(size=(32, 32)) < density
        lab = label_components(m)
        ours = {frozenset(zip(*np.nonzero(lab.labels == j))) for j in lab.component_sizes}
        ref = union_find_components(m)
        if ours != ref or lab.count != len(ref):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    record("2 component labeling vs union-find", ok, f"{mismatches}/200 mismatches, {elapsed:.2f}s (limit 5s)")
    assert ok


# 3 ---------------------------------------------------------------------------

def _random_feature_grid(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    scene = random_scene(64, 64, n, seed, radius_range=(5, 10), falloff="gaussian", noise_amplitude=0.05, gap=2)
    h, _ = generate(scene)
    return build_feature_grid(gaussian_smooth(h, 11), 0.5), int(rng.integers(2, 6))


def test_criterion_3_kmeans_invariants():
    problems = []
    for seed in range(100):
        grid, k = _random_feature_grid(seed)
        k = min(k, len(np.unique(grid.flat(), axis=0)))
        cfg = KMeansConfig(seed=seed, restarts=1)
        a = kmeans(grid, k, cfg)
        b = kmeans(grid, k, cfg)
        hist = a.sse_history
        if any(later > earlier for earlier, later in zip(hist, hist[1:])):
            problems.append(f"seed {seed}: SSE increased")
        if a.iterations > 300 or not (a.converged or a.iterations == 300):
            problems.append(f"seed {seed}: stopped at {a.iterations} without fixpoint")
        if not (np.array_equal(a.labels, b.labels) and a.sse_history == b.sse_history):
            problems.append(f"seed {seed}: not reproducible")
        multi = [kmeans(grid, k, KMeansConfig(seed=seed)) for _ in range(2)]
        if not np.array_equal(multi[0].labels, multi[1].labels):
            problems.append(f"seed {seed}: restarts not reproducible")
    ok = not problems
    record("3 k-means invariants on 100 grids", ok, "; ".join(problems[:3]) or "SSE monotone, capped/fixpoint, bit-identical")
    assert ok, problems


# 4 ---------------------------------------------------------------------------

FLAT_PEAKS = [1.0, 0.98, 0.96, 0.94]
MIN_TIP_WIDTH = 5


def _flat_scenes(count, distinct_peaks):
    """Separated flat blobs without single-pixel ellipse tips, 1-4 per scene."""
    scenes, seed = [], 0
    while len(scenes) < count:
        seed += 1
        n = 1 + len(scenes) % 4
        rng = np.random.default_rng(10_000 + seed)
        peaks = [float(p) for p in rng.permutation(FLAT_PEAKS[:n])] if distinct_peaks else [1.0] * n
        scene = random_scene(240, 240, n, seed, radius_range=(12, 20), gap=40, peaks_r=peaks)
        if min(b.tip_width() for b in scene.blobs) < MIN_TIP_WIDTH:
            continue
        scenes.append(scene)
    return scenes


def test_criterion_4a_flat_blob_recovery():
    failures = []
    scenes = _flat_scenes(40, distinct_peaks=False) + _flat_scenes(40, distinct_peaks=True)
    for i, scene in enumerate(scenes):
        h, truth = generate(scene)
        cands = propose_regions(h, RankingConfig(kmeans=KMeansConfig(seed=i)))
        # Expected order: planted activation 0.7 * peak descending, larger blob first on ties.
        areas = [int((b.profile(scene.width, scene.height) > 0).sum()) for b in scene.blobs]
        order = sorted(range(len(truth)), key=lambda j: (-0.7 * scene.blobs[j].peak_r, -areas[j]))
        expected = [truth[j] for j in order]
        got = [c.box for c in cands]
        acts_ok = all(abs(c.activation - 0.7 * scene.blobs[j].peak_r) < 1e-12 for c, j in zip(cands, order))
        if got != expected or not acts_ok:
            failures.append(f"scene {i} ({len(truth)} blobs): got {[b.as_list() for b in got]}")
    ok = not failures
    record(
        "4a flat blobs: one exact box per blob, ranked by planted intensity",
        ok,
        f"{len(scenes) - len(failures)}/{len(scenes)} scenes exact" + (f"; {failures[0]}" if failures else ""),
    )
    assert ok, failures


def test_criterion_4b_gaussian_blob_top3():
    hits = 0
    for seed in range(100):
        n = 1 + seed % 3
        scene = random_scene(
            240, 240, n, seed, radius_range=(16, 24), falloff="gaussian", noise_amplitude=0.05, gap=30
        )
        h, truth = generate(scene)
        top = [c.box for c in propose_regions(h, RankingConfig(kmeans=KMeansConfig(seed=seed)))[:3]]
        if all(t is not None and any(match_score(b, t) > 0 for b in top) for t in truth):
            hits += 1
    ok = hits >= 95
    record("4b gaussian blobs + noise 0.05: every planted box matched in top 3", ok, f"{hits}/100 scenes (need >= 95)")
    assert ok


# 5 ---------------------------------------------------------------------------

def test_criterion_5_constants(capsys):
    assert cli_main(["config"]) == 0
    dump = json.loads(capsys.readouterr().out)
    got = {
        "t_h": dump["t_h"],
        "t_m": dump["t_m"],
        "min_area": dump["min_area"],
        "kernel_size": dump["kernel_size"],
        "max_iterations": dump["kmeans"]["max_iterations"],
        "w_r": dump["w_r"],
        "w_g": dump["w_g"],
    }
    want = {"t_h": 0.9, "t_m": 0.5, "min_area": 150, "kernel_size": 11, "max_iterations": 300, "w_r": 0.7, "w_g": 0.3}
    ok = got == want and RankingConfig().to_dict() == dump
    record("5 default constants", ok, json.dumps(got))
    assert ok


# 6 ---------------------------------------------------------------------------

def test_criterion_6_evaluation_fixture(tmp_path):
    heat = rect_heatmap(*FIXTURE_SIZE, FIXTURE_RECTS)
    manifest = write_fixture_manifest(tmp_path, heat)
    report = evaluate_manifest(parse_manifest(manifest), manifest_dir=tmp_path)
    ok = report.per_difficulty == expected_fixture_counts() and not report.errors
    record("6 six-entry evaluation fixture", ok, json.dumps(report.per_difficulty))
    assert ok


# 7 ---------------------------------------------------------------------------

def test_criterion_7_degenerate_inputs(tmp_path, capsys):
    checks = {}
    zero = tmp_path / "zero.png"
    save_heatmap(Heatmap(np.zeros((50, 60, 3))), zero)
    code = cli_main(["propose", str(zero)])
    out = capsys.readouterr().out
    checks["all-zero: empty, exit 0"] = code == 0 and json.loads(out) == []

    small = rect_heatmap(100, 100, [(5, 5, 16, 16, 1.0), (40, 40, 53, 49, 1.0), (70, 70, 70, 70, 1.0)])
    sizes = sorted(label_components(active_mask(small, 0.9)).component_sizes.values())
    checks["all components < 150 px: empty"] = max(sizes) < 150 and propose_regions(small) == []

    px = np.zeros((1, 1, 3))
    px[0, 0, 0] = 1.0
    with warnings.catch_warnings(), np.errstate(all="raise"):
        warnings.simplefilter("error")
        try:
            default = propose_regions(Heatmap(px))
            tiny = run_pipeline(Heatmap(px), RankingConfig(min_area=1)).candidates
            checks["1x1 image: no division error"] = default == [] and [c.box.as_list() for c in tiny] == [[0, 0, 0, 0]]
        except (FloatingPointError, RuntimeWarning, ZeroDivisionError) as exc:
            checks[f"1x1 image: {exc!r}"] = False
    ok = all(checks.values())
    record("7 degenerate inputs", ok, ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
