"""Command-line interface: propose, evaluate, synth, debug-clusters, config."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .clustering import KMeansConfig
from .heatmap_io import (
    DIFFICULTIES,
    BoundingBox,
    ManifestEntry,
    ManifestError,
    ValidationError,
    load_heatmap,
    parse_manifest,
    render_overlay,
    save_heatmap,
    save_png,
    write_manifest,
)
from .ranking import RankingConfig, candidates_to_records, run_pipeline
from .synth import BlobSpec, SynthScene, generate, random_scene

log = logging.getLogger("heatregions")

SEED_ENV = "REGION_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV}={raw!r} is not an integer")


def _add_ranking_flags(p: argparse.ArgumentParser) -> None:
    d = RankingConfig()
    k = d.kmeans
    g = p.add_argument_group("pipeline")
    g.add_argument("--w-r", type=float, default=d.w_r, help="red channel weight (default %(default)s)")
    g.add_argument("--w-g", type=float, default=d.w_g, help="green channel weight (default %(default)s)")
    g.add_argument("--t-h", type=float, default=d.t_h, help="region-count threshold (default %(default)s)")
    g.add_argument("--t-m", type=float, default=d.t_m, help="clustering threshold (default %(default)s)")
    g.add_argument("--kernel-size", type=int, default=d.kernel_size, help="Gaussian kernel size (default %(default)s)")
    g.add_argument("--sigma", type=float, default=d.sigma, help="Gaussian sigma (default: derived from kernel size)")
    g.add_argument("--min-area", type=int, default=d.min_area, help="minimum region size in pixels (default %(default)s)")
    g.add_argument("--max-iterations", type=int, default=k.max_iterations, help="K-means iteration cap (default %(default)s)")
    g.add_argument("--restarts", type=int, default=k.restarts, help="K-means restarts (default %(default)s)")
    g.add_argument("--convergence-epsilon", type=float, default=k.convergence_epsilon)
    g.add_argument("--seed", type=int, default=None, help=f"K-means seed (default ${SEED_ENV} or 0)")


def _ranking_config(args) -> RankingConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    return RankingConfig(
        w_r=args.w_r,
        w_g=args.w_g,
        t_h=args.t_h,
        t_m=args.t_m,
        kernel_size=args.kernel_size,
        sigma=args.sigma,
        min_area=args.min_area,
        kmeans=KMeansConfig(
            max_iterations=args.max_iterations,
            seed=seed,
            convergence_epsilon=args.convergence_epsilon,
            restarts=args.restarts,
        ),
    )


def _write_text(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_propose(args) -> int:
    cfg = _ranking_config(args)
    h = load_heatmap(args.heatmap)
    candidates = run_pipeline(h, cfg).candidates
    _write_text(json.dumps(candidates_to_records(candidates), indent=2) + "\n", args.out)
    if args.overlay:
        target = BoundingBox.from_list(args.target) if args.target else None
        save_png(render_overlay(h, [c.box for c in candidates[: args.overlay_top]], target), args.overlay)
    return 0


def cmd_debug_clusters(args) -> int:
    cfg = _ranking_config(args)
    h = load_heatmap(args.heatmap)
    p = run_pipeline(h, cfg)
    doc = {
        "width": h.width,
        "height": h.height,
        "k": p.regions.k,
        "k_used": p.k_used,
        "active_components": p.regions.active_components,
        "component_sizes": {str(i): s for i, s in p.component_sizes.items()},
        "mask": ["".join("1" if v else "0" for v in row) for row in p.mask_h],
        "kmeans": None
        if p.kmeans is None
        else {
            "iterations": p.kmeans.iterations,
            "converged": p.kmeans.converged,
            "sse": p.kmeans.sse,
            "restart": p.kmeans.restart,
            "reseeds": p.kmeans.reseeds,
        },
        "clusters": [
            {
                "rank": i,
                "id": c.cluster.id,
                "activation": c.activation,
                "box": c.box.as_list(),
                "pixels": [list(xy) for xy in c.cluster.members()],
            }
            for i, c in enumerate(p.candidates, start=1)
        ],
    }
    _write_text(json.dumps(doc) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate_manifest, format_csv, format_table

    cfg = _ranking_config(args)
    entries = parse_manifest(args.manifest)
    report = evaluate_manifest(
        entries, cfg, manifest_dir=Path(args.manifest).parent, workers=args.workers, method=args.method
    )
    doc = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.json_only:
        _write_text(doc, args.out or "-")
        return 0
    if args.out:
        _write_text(doc, args.out)
    else:
        sys.stdout.write(doc)
    print(format_table(report), file=sys.stdout if args.out else sys.stderr)
    if report.errors:
        print(f"{len(report.errors)} entr{'y' if len(report.errors) == 1 else 'ies'} skipped", file=sys.stderr)
    if args.csv:
        Path(args.csv).write_text(format_csv(report), encoding="utf-8")
    if args.figure:
        from .plotting import plot_outcome_counts

        plot_outcome_counts(report, args.figure)
    return 0


def _parse_blob(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) not in (4, 5, 6):
        raise argparse.ArgumentTypeError("blob must be CX,CY,RX,RY[,PEAK_R[,PEAK_G]]")
    try:
        cx, cy = int(parts[0]), int(parts[1])
        rx, ry = float(parts[2]), float(parts[3])
        pr = float(parts[4]) if len(parts) > 4 else 1.0
        pg = float(parts[5]) if len(parts) > 5 else 0.0
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad blob spec {text!r}")
    return cx, cy, rx, ry, pr, pg


def cmd_synth(args, parser) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.blob:
        blobs = tuple(BlobSpec(cx, cy, rx, ry, pr, pg, args.falloff) for cx, cy, rx, ry, pr, pg in args.blob)
        scene = SynthScene(args.width, args.height, blobs, args.noise, seed)
    else:
        if args.blobs < 0:
            parser.error("--blobs must be >= 0")
        if args.blobs == 0 and not args.allow_empty:
            parser.error("--blobs 0 makes a noise-only scene; pass --allow-empty to confirm")
        scene = random_scene(
            args.width,
            args.height,
            args.blobs,
            seed,
            radius_range=(args.min_radius, args.max_radius),
            falloff=args.falloff,
            noise_amplitude=args.noise,
        )
    if not scene.blobs and not args.allow_empty:
        parser.error("scene has no blobs; pass --allow-empty to confirm")
    h, truth = generate(scene)
    for target in (args.out, args.manifest):
        if target:
            Path(target).parent.mkdir(parents=True, exist_ok=True)
    save_heatmap(h, args.out)
    if args.manifest:
        if not truth:
            log.warning("no blobs planted; manifest line not written")
        elif truth[0] is None:
            raise ValidationError("first blob has no pixel above 0.9; no target box to record")
        else:
            entry = ManifestEntry(
                image_id=args.image_id or Path(args.out).stem,
                heatmap_path=os.path.relpath(Path(args.out).resolve(), Path(args.manifest).resolve().parent),
                expression=args.expression,
                target_box=truth[0],
                difficulty=args.difficulty,
            )
            write_manifest([entry], args.manifest, append=True)
    json.dump(
        {"heatmap": str(args.out), "ground_truth": [None if b is None else b.as_list() for b in truth]},
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


def cmd_config(args) -> int:
    sys.stdout.write(json.dumps(_ranking_config(args).to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatregions", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propose", help="rank candidate boxes for one heatmap")
    p.add_argument("heatmap")
    p.add_argument("--out", help="write candidates JSON here instead of stdout")
    p.add_argument("--overlay", help="write a PNG with candidate boxes drawn")
    p.add_argument("--overlay-top", type=int, default=3, help="boxes drawn on the overlay (default %(default)s)")
    p.add_argument("--target", type=int, nargs=4, metavar=("X0", "Y0", "X1", "Y1"), help="target box drawn on the overlay")
    _add_ranking_flags(p)

    p = sub.add_parser("evaluate", help="run the top-3 evaluation over a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write the report JSON here (table then goes to stdout)")
    p.add_argument("--json-only", action="store_true", help="emit only the JSON report")
    p.add_argument("--csv", help="also write per-difficulty counts as CSV")
    p.add_argument("--figure", help="also write a bar chart PNG of the counts")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--method", default="heatmap-kmeans", help="method label stored in the report")
    _add_ranking_flags(p)

    p = sub.add_parser("synth", help="generate a heatmap with planted blobs")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--manifest", help="append a manifest line (first blob as target)")
    p.add_argument("--width", type=int, default=224)
    p.add_argument("--height", type=int, default=224)
    p.add_argument("--blobs", type=int, default=1, help="number of randomly placed blobs")
    p.add_argument("--blob", type=_parse_blob, action="append", help="explicit blob CX,CY,RX,RY[,PEAK_R[,PEAK_G]]")
    p.add_argument("--min-radius", type=float, default=12.0)
    p.add_argument("--max-radius", type=float, default=20.0)
    p.add_argument("--falloff", choices=("flat", "gaussian"), default="flat")
    p.add_argument("--noise", type=float, default=0.0, help="red-channel noise amplitude")
    p.add_argument("--allow-empty", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--image-id")
    p.add_argument("--expression", default="")
    p.add_argument("--difficulty", choices=DIFFICULTIES, default="easy")

    p = sub.add_parser("debug-clusters", help="dump mask, K and clusters as JSON")
    p.add_argument("heatmap")
    p.add_argument("--out")
    _add_ranking_flags(p)

    p = sub.add_parser("config", help="print the effective pipeline configuration")
    _add_ranking_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        if args.command == "propose":
            return cmd_propose(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "synth":
            return cmd_synth(args, parser)
        if args.command == "debug-clusters":
            return cmd_debug_clusters(args)
        if args.command == "config":
            return cmd_config(args)
    except (OSError, ValidationError, ManifestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
