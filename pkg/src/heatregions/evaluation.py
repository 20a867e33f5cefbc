"""DIoU matching score, top-3 acceptance and per-difficulty tallies."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .heatmap_io import (
    DIFFICULTIES,
    BoundingBox,
    ManifestEntry,
    ValidationError,
    load_heatmap,
    resolve_heatmap_path,
)
from .ranking import RankingConfig, propose_regions

OUTCOME_KEYS = ("first", "second", "third", "none")
TOP_N = 3


def match_score(b_i: BoundingBox, b_target: BoundingBox) -> float:
    """IoU minus squared center distance over the squared covering-box diagonal.

    Boxes are integer pixel boxes with inclusive corners, so a box covers
    ``x1 - x0 + 1`` columns and the covering box's diagonal is measured over
    the pixels it spans. Result lies in (-1, 1].
    """
    if not isinstance(b_i, BoundingBox) or not isinstance(b_target, BoundingBox):
        raise ValidationError("match_score needs two BoundingBox values")
    iw = min(b_i.x1, b_target.x1) - max(b_i.x0, b_target.x0) + 1
    ih = min(b_i.y1, b_target.y1) - max(b_i.y0, b_target.y0) + 1
    inter = max(iw, 0) * max(ih, 0)
    union = b_i.area + b_target.area - inter
    iou = inter / union

    (cx_a, cy_a), (cx_b, cy_b) = b_i.center, b_target.center
    d2 = (cx_a - cx_b) ** 2 + (cy_a - cy_b) ** 2
    cw = max(b_i.x1, b_target.x1) - min(b_i.x0, b_target.x0) + 1
    ch = max(b_i.y1, b_target.y1) - min(b_i.y0, b_target.y0) + 1
    c2 = cw * cw + ch * ch
    return iou - d2 / c2


@dataclass(frozen=True)
class MatchOutcome:
    matched_rank: Optional[int]
    scores: tuple[float, ...]

    @property
    def key(self) -> str:
        return "none" if self.matched_rank is None else OUTCOME_KEYS[self.matched_rank - 1]


def match_top3(candidates: Sequence[BoundingBox], target: BoundingBox) -> MatchOutcome:
    """First of the top three candidates with a strictly positive score, else none.

    Scores are computed only up to the accepted rank.
    """
    scores = []
    for rank, box in enumerate(candidates[:TOP_N], start=1):
        s = match_score(box, target)
        scores.append(s)
        if s > 0:
            return MatchOutcome(rank, tuple(scores))
    return MatchOutcome(None, tuple(scores))


def _zero_counts() -> dict[str, int]:
    return {k: 0 for k in OUTCOME_KEYS}


@dataclass
class EvalRecord:
    index: int
    image_id: str
    difficulty: str
    outcome: Optional[MatchOutcome] = None
    n_candidates: int = 0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        d = {"index": self.index, "image_id": self.image_id, "difficulty": self.difficulty}
        if self.error is not None:
            d["error"] = self.error
        else:
            d["matched_rank"] = self.outcome.matched_rank
            d["outcome"] = self.outcome.key
            d["scores"] = list(self.outcome.scores)
            d["n_candidates"] = self.n_candidates
        return d


@dataclass
class EvalReport:
    method: str = "heatmap-kmeans"
    per_difficulty: dict[str, dict[str, int]] = field(default_factory=lambda: {d: _zero_counts() for d in DIFFICULTIES})
    overall: dict[str, int] = field(default_factory=_zero_counts)
    records: list[EvalRecord] = field(default_factory=list)

    @property
    def errors(self) -> list[EvalRecord]:
        return [r for r in self.records if r.error is not None]

    @property
    def evaluated(self) -> int:
        return sum(self.overall.values())

    def add(self, record: EvalRecord) -> None:
        self.records.append(record)
        if record.error is None:
            key = record.outcome.key
            self.per_difficulty[record.difficulty][key] += 1
            self.overall[key] += 1

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "overall": dict(self.overall),
            "per_difficulty": {d: dict(self.per_difficulty[d]) for d in DIFFICULTIES},
            "summary": {"evaluated": self.evaluated, "skipped": len(self.errors)},
            "errors": [{"index": r.index, "image_id": r.image_id, "message": r.error} for r in self.errors],
            "records": [r.to_dict() for r in self.records],
        }


def evaluate_entry(
    index: int, entry: ManifestEntry, cfg: RankingConfig, manifest_dir: Optional[Path] = None
) -> EvalRecord:
    record = EvalRecord(index, entry.image_id, entry.difficulty)
    try:
        h = load_heatmap(resolve_heatmap_path(entry, manifest_dir))
        if not entry.target_box.within(h.width, h.height):
            raise ValidationError(f"target_box {entry.target_box.as_list()} outside {h.width}x{h.height} heatmap")
        candidates = propose_regions(h, cfg)
    except (OSError, ValueError) as exc:
        record.error = f"{type(exc).__name__}: {exc}"
        return record
    record.n_candidates = len(candidates)
    record.outcome = match_top3([c.box for c in candidates], entry.target_box)
    return record


def evaluate_manifest(
    entries: Sequence[ManifestEntry],
    cfg: RankingConfig = RankingConfig(),
    manifest_dir: Optional[str | os.PathLike] = None,
    workers: int = 1,
    method: str = "heatmap-kmeans",
) -> EvalReport:
    """Propose regions for every entry and tally top-3 outcomes.

    Entries that fail to load are recorded as errors and left out of the
    counts. Records keep manifest order whatever ``workers`` is.
    """
    mdir = Path(manifest_dir) if manifest_dir is not None else None
    jobs = list(enumerate(entries))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda job: evaluate_entry(job[0], job[1], cfg, mdir), jobs))
    else:
        records = [evaluate_entry(i, e, cfg, mdir) for i, e in jobs]
    report = EvalReport(method=method)
    for rec in records:
        report.add(rec)
    return report


def format_table(report: EvalReport) -> str:
    header = ("difficulty", "1st", "2nd", "3rd", "none")
    rows = [header]
    for d in DIFFICULTIES:
        c = report.per_difficulty[d]
        rows.append((d, *(str(c[k]) for k in OUTCOME_KEYS)))
    rows.append(("overall", *(str(report.overall[k]) for k in OUTCOME_KEYS)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in range(1, len(r))]
        lines.append("  ".join(cells))
    return "\n".join(lines)


def format_csv(report: EvalReport) -> str:
    lines = ["method,difficulty,first,second,third,none"]
    for d in DIFFICULTIES:
        c = report.per_difficulty[d]
        lines.append(",".join([report.method, d, *(str(c[k]) for k in OUTCOME_KEYS)]))
    lines.append(",".join([report.method, "overall", *(str(report.overall[k]) for k in OUTCOME_KEYS)]))
    return "\n".join(lines) + "\n"
