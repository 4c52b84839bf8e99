"""Dataset-directory evaluation: run every feature/ground-truth pair, aggregate mIoU."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import PipelineConfig
from .errors import JobError
from .pipeline import SegJob, SegResult, run_image, write_job_outputs

__all__ = ["ImageEntry", "DatasetReport", "evaluate_dataset", "write_report"]

_GT_SUFFIXES = (".pgm", ".png", ".gt.pgm", ".mask.pgm")


@dataclass(frozen=True)
class ImageEntry:
    name: str
    miou: float
    foreground_iou: float | None
    flipped_miou: float
    trivial: bool
    seconds: float
    final_loss: float


@dataclass(frozen=True)
class DatasetReport:
    entries: list[ImageEntry]
    mean_miou: float
    mean_flipped_miou: float
    skipped: list[str]
    config_fingerprint: str
    total_seconds: float


def _find_gt(gt_dir: Path, stem: str) -> Path | None:
    for suffix in _GT_SUFFIXES:
        candidate = gt_dir / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    return None


def _fingerprint(config: PipelineConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def evaluate_dataset(
    features_dir,
    gt_dir,
    config: PipelineConfig,
    out_dir=None,
    losscurve: bool = False,
) -> DatasetReport:
    """Segment every *.ufv under features_dir against its ground truth.

    Pairs are matched by filename stem. Feature files with no ground truth
    are skipped and listed in the report. The report is independent of job
    execution order: entries are sorted by name.
    """
    features_dir = Path(features_dir)
    gt_dir = Path(gt_dir)
    feature_files = sorted(features_dir.glob("*.ufv"))
    if not feature_files:
        raise JobError(f"no jobs found: no *.ufv files under {features_dir}")

    jobs: list[SegJob] = []
    skipped: list[str] = []
    for path in feature_files:
        gt = _find_gt(gt_dir, path.stem)
        if gt is None:
            skipped.append(path.name)
            continue
        jobs.append(SegJob(features=path, config=config, gt=gt))
    if not jobs:
        raise JobError(f"no jobs found: no feature/ground-truth pairs between {features_dir} and {gt_dir}")

    started = time.perf_counter()

    def run_one(job: SegJob) -> tuple[SegJob, SegResult]:
        result = run_image(job)
        if out_dir is not None:
            write_job_outputs(result, job, out_dir, losscurve=losscurve)
        return job, result

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            completed = list(pool.map(run_one, jobs))
    else:
        completed = [run_one(job) for job in jobs]

    entries = []
    for job, result in sorted(completed, key=lambda pair: pair[0].features.name):
        assert result.iou is not None  # every job here has ground truth
        entries.append(
            ImageEntry(
                name=Path(job.features).stem,
                miou=result.iou.miou,
                foreground_iou=result.iou.per_class[1],
                flipped_miou=result.flipped_iou.miou,
                trivial=bool(result.mask.meta.get("trivial_partition", False)),
                seconds=result.seconds,
                final_loss=result.history[-1].total,
            )
        )
    mean_miou = sum(e.miou for e in entries) / len(entries)
    mean_flipped = sum(max(e.miou, e.flipped_miou) for e in entries) / len(entries)
    return DatasetReport(
        entries=entries,
        mean_miou=mean_miou,
        mean_flipped_miou=mean_flipped,
        skipped=sorted(skipped),
        config_fingerprint=_fingerprint(config),
        total_seconds=time.perf_counter() - started,
    )


def write_report(report: DatasetReport, out_dir) -> tuple[Path, Path]:
    """Write report.json and report.csv; returns the two paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    payload = {
        "mean_miou": report.mean_miou,
        "mean_oracle_flip_miou_diagnostic": report.mean_flipped_miou,
        "config_fingerprint": report.config_fingerprint,
        "images": [
            {
                "name": e.name,
                "miou": e.miou,
                "foreground_iou": e.foreground_iou,
                "oracle_flip_miou_diagnostic": max(e.miou, e.flipped_miou),
                "trivial_partition": e.trivial,
                "seconds": e.seconds,
                "final_loss": e.final_loss,
            }
            for e in report.entries
        ],
        "skipped_unmatched": report.skipped,
        "skipped_count": len(report.skipped),
        "total_seconds": report.total_seconds,
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    csv_path = out_dir / "report.csv"
    lines = ["name,miou,foreground_iou,oracle_flip_miou,trivial,seconds,final_loss"]
    for e in report.entries:
        lines.append(
            f"{e.name},{e.miou!r},{e.foreground_iou!r},{max(e.miou, e.flipped_miou)!r},"
            f"{int(e.trivial)},{e.seconds!r},{e.final_loss!r}"
        )
    csv_path.write_text("\n".join(lines) + "\n")
    return json_path, csv_path
