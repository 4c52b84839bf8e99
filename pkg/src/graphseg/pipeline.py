"""End-to-end per-image segmentation: features in, binary mask out.

Flow: load the feature grid, row-normalize, threshold into a graph, train
the network against the modularity loss, argmax the soft assignment into
patch labels, pick the foreground cluster by border occupancy, paint the
labels to full resolution, and optionally smooth the edges with one 3x3
majority pass.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import DegenerateGraphError, JobError, ShapeError
from .graph import build_adjacency, modularity_matrix, row_normalize
from .metrics import IoUBreakdown, iou
from .model import ClusterAssignment, init_model
from .objective import LossReport, hard_modularity, train
from .pgm import read_mask, write_pgm
from .ufv import read_ufv1

__all__ = [
    "SegMask",
    "SegJob",
    "SegResult",
    "run_image",
    "assemble_mask",
    "select_foreground",
    "refine_mask",
    "write_job_outputs",
    "loss_history_csv",
]


@dataclass(frozen=True)
class SegMask:
    width: int
    height: int
    bits: np.ndarray  # (height, width) of {0,1}
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SegJob:
    features: Path
    config: PipelineConfig = PipelineConfig()
    size: tuple[int, int] | None = None  # (s, t) = (height, width); default grid*patch
    gt: Path | None = None


@dataclass(frozen=True)
class SegResult:
    mask: SegMask
    history: list[LossReport]
    assignment: ClusterAssignment
    iou: IoUBreakdown | None
    flipped_iou: IoUBreakdown | None  # diagnostic only: the other foreground choice
    hard_q: float
    seconds: float


def _nearest_patch_index(out_len: int, grid_len: int) -> np.ndarray:
    """For each output pixel, the patch whose center is nearest."""
    pixel_centers = np.arange(out_len) + 0.5
    patch_centers = (np.arange(grid_len) + 0.5) * (out_len / grid_len)
    return np.abs(pixel_centers[:, None] - patch_centers[None, :]).argmin(axis=1)


def assemble_mask(
    labels: np.ndarray, grid: tuple[int, int], size: tuple[int, int], patch: int
) -> SegMask:
    """Paint patch labels as p x p blocks, nearest-neighbor scaled to (s, t).

    When (s, t) is an exact multiple of the patch size the nearest-center
    mapping reduces to plain block painting.
    """
    g_h, g_w = grid
    labels = np.asarray(labels)
    if labels.size != g_h * g_w:
        raise ShapeError(f"{labels.size} labels do not fill a {g_h}x{g_w} grid")
    del patch  # geometry is fully determined by grid and target size
    s, t = size
    label_map = labels.reshape(g_h, g_w)
    rows = _nearest_patch_index(s, g_h)
    cols = _nearest_patch_index(t, g_w)
    bits = label_map[np.ix_(rows, cols)].astype(np.uint8)
    return SegMask(width=t, height=s, bits=bits)


def select_foreground(labels: np.ndarray, grid: tuple[int, int]) -> int:
    """Pick the cluster that occupies the smaller share of the grid border.

    Ties fall back to the smaller cluster by node count, then to cluster 1.
    """
    g_h, g_w = grid
    label_map = np.asarray(labels).reshape(g_h, g_w)
    if label_map.max(initial=0) > 1:
        raise ShapeError("foreground selection is defined for two clusters only")
    border = np.concatenate(
        [label_map[0], label_map[-1], label_map[1:-1, 0], label_map[1:-1, -1]]
    )
    border_counts = np.bincount(border, minlength=2)[:2]
    if border_counts[0] != border_counts[1]:
        return int(border_counts.argmin())
    sizes = np.bincount(label_map.ravel(), minlength=2)[:2]
    if sizes[0] != sizes[1]:
        return int(sizes.argmin())
    return 1


def _window_sum3(a: np.ndarray) -> np.ndarray:
    """Sum over each pixel's 3x3 neighborhood, truncated at the borders."""
    h, w = a.shape
    padded = np.pad(a.astype(np.int64), 1)
    total = np.zeros((h, w), dtype=np.int64)
    for dy in range(3):
        for dx in range(3):
            total += padded[dy : dy + h, dx : dx + w]
    return total


def refine_mask(mask: SegMask) -> SegMask:
    """One 3x3 majority-filter pass; neighborhood ties keep the pixel."""
    bits = mask.bits
    ones = _window_sum3(bits)
    count = _window_sum3(np.ones_like(bits))
    refined = np.where(2 * ones > count, 1, np.where(2 * ones < count, 0, bits))
    return SegMask(
        width=mask.width, height=mask.height, bits=refined.astype(np.uint8), meta=dict(mask.meta)
    )


def _bilinear_weights(out_len: int, grid_len: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center-aligned source indices (lo, hi) and hi-weights per output pixel."""
    pos = (np.arange(out_len) + 0.5) * (grid_len / out_len) - 0.5
    lo = np.clip(np.floor(pos).astype(np.int64), 0, grid_len - 1)
    hi = np.clip(lo + 1, 0, grid_len - 1)
    w_hi = np.clip(pos - lo, 0.0, 1.0)
    return lo, hi, w_hi


def _soft_upsample_labels(
    soft: np.ndarray, grid: tuple[int, int], size: tuple[int, int]
) -> np.ndarray:
    """Bilinearly upsample the soft assignment, then argmax per pixel."""
    g_h, g_w = grid
    s, t = size
    planes = soft.T.reshape(-1, g_h, g_w)  # one plane per cluster
    r_lo, r_hi, r_w = _bilinear_weights(s, g_h)
    c_lo, c_hi, c_w = _bilinear_weights(t, g_w)
    up = np.empty((planes.shape[0], s, t))
    for idx, plane in enumerate(planes):
        rows_lo = plane[r_lo]
        rows_hi = plane[r_hi]
        interp_rows = rows_lo * (1.0 - r_w)[:, None] + rows_hi * r_w[:, None]
        up[idx] = (
            interp_rows[:, c_lo] * (1.0 - c_w)[None, :]
            + interp_rows[:, c_hi] * c_w[None, :]
        )
    return up.argmax(axis=0)


def run_image(job: SegJob) -> SegResult:
    """Run the full pipeline for one feature file; deterministic per seed."""
    cfg = job.config
    started = time.perf_counter()
    features = read_ufv1(job.features)
    g_h, g_w = features.grid
    size = job.size if job.size is not None else (g_h * cfg.patch, g_w * cfg.patch)

    normalized = row_normalize(features)
    try:
        graph = build_adjacency(normalized, cfg.tau)
    except DegenerateGraphError as exc:
        raise JobError(f"{job.features}: {exc}") from exc
    b = modularity_matrix(graph)
    model = init_model(cfg.arma_config(), normalized.c_in, cfg.k, cfg.seed)
    model, assignment, history = train(model, graph, b, normalized.values, cfg.optim_config())

    labels = assignment.hard_labels()
    trivial = np.unique(labels).size == 1
    foreground = select_foreground(labels, features.grid)
    patch_bits = (labels == foreground).astype(np.uint8)

    if cfg.soft_upsample:
        full_labels = _soft_upsample_labels(assignment.matrix, features.grid, size)
        bits = (full_labels == foreground).astype(np.uint8)
        mask = SegMask(width=size[1], height=size[0], bits=bits)
    else:
        mask = assemble_mask(patch_bits, features.grid, size, cfg.patch)
    if cfg.refine:
        mask = refine_mask(mask)

    meta = {
        "tau": cfg.tau,
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "activation": cfg.activation,
        "arch": cfg.arch,
        "foreground_rule": "border-occupancy",
        "foreground_cluster": int(foreground),
        "trivial_partition": bool(trivial),
        "refined": bool(cfg.refine),
        "soft_upsample": bool(cfg.soft_upsample),
    }
    mask = SegMask(width=mask.width, height=mask.height, bits=mask.bits, meta=meta)

    breakdown = None
    flipped = None
    if job.gt is not None:
        gt_bits = read_mask(job.gt)
        if gt_bits.shape != mask.bits.shape:
            raise JobError(
                f"{job.gt}: ground truth is {gt_bits.shape}, mask is {mask.bits.shape}"
            )
        breakdown = iou(mask.bits, gt_bits, n_classes=2)
        flipped = iou(1 - mask.bits, gt_bits, n_classes=2)

    elapsed = time.perf_counter() - started
    return SegResult(
        mask=mask,
        history=history,
        assignment=assignment,
        iou=breakdown,
        flipped_iou=flipped,
        hard_q=hard_modularity(graph, labels),
        seconds=elapsed,
    )


def loss_history_csv(history: list[LossReport]) -> str:
    lines = ["epoch,total,modularity_term,regularizer"]
    for report in history:
        lines.append(
            f"{report.epoch},{report.total!r},{report.modularity_term!r},{report.regularizer!r}"
        )
    return "\n".join(lines) + "\n"


def write_job_outputs(
    result: SegResult, job: SegJob, out_dir, losscurve: bool = False
) -> dict[str, Path]:
    """Write mask PGM, JSON sidecar, and optionally the loss CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(job.features).stem
    paths: dict[str, Path] = {}

    mask_path = out_dir / f"{stem}.mask.pgm"
    write_pgm(mask_path, result.mask.bits)
    paths["mask"] = mask_path

    sidecar = {
        "config": job.config.to_dict(),
        "meta": result.mask.meta,
        "loss": {
            "first": result.history[0].total,
            "last": result.history[-1].total,
            "min": min(r.total for r in result.history),
            "epochs": len(result.history),
        },
        "hard_modularity": result.hard_q,
        "seconds": result.seconds,
    }
    if result.iou is not None:
        sidecar["iou"] = {
            "per_class": result.iou.per_class,
            "miou": result.iou.miou,
            "foreground": result.iou.per_class[1],
        }
        sidecar["flipped_iou_diagnostic"] = {
            "miou": result.flipped_iou.miou,
            "note": "foreground/background swapped; diagnostic only, not the headline metric",
        }
    sidecar_path = out_dir / f"{stem}.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    paths["sidecar"] = sidecar_path

    if losscurve:
        csv_path = out_dir / f"{stem}.loss.csv"
        csv_path.write_text(loss_history_csv(result.history))
        paths["losscurve"] = csv_path
    return paths
