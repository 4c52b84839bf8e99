"""Synthetic benchmark generators: prototype-blob images and planted-partition graphs.

The blob generator writes a feature grid whose foreground square and
background are drawn from two unit prototype directions separated by a
given angle, plus isotropic Gaussian noise, together with the exact
ground-truth mask. The planted-partition (SBM) generator samples a
two-community random graph with noisy indicator features; it is the
clustering benchmark for the trainer.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graph import PatchGraph, graph_from_adjacency
from .pgm import write_pgm
from .ufv import write_ufv1

__all__ = [
    "BlobParams",
    "SbmParams",
    "make_blob",
    "sample_sbm",
    "write_blob_job",
    "write_sbm_job",
]


@dataclass(frozen=True)
class BlobParams:
    grid: tuple[int, int] = (28, 28)
    c_in: int = 32
    theta_deg: float = 60.0
    sigma: float = 0.15
    patch: int = 8

    def __post_init__(self):
        g_h, g_w = self.grid
        if g_h < 2 or g_w < 2:
            raise ConfigError("blob grid must be at least 2x2")
        if self.c_in < 2:
            raise ConfigError("blob features need c_in >= 2")
        if self.sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        if self.patch < 1:
            raise ConfigError("patch size must be >= 1")


@dataclass(frozen=True)
class SbmParams:
    block_size: int = 20
    blocks: int = 2
    p_in: float = 0.9
    p_out: float = 0.05
    sigma: float = 0.1

    def __post_init__(self):
        if self.block_size < 2:
            raise ConfigError("block size must be >= 2")
        if self.blocks < 2:
            raise ConfigError("need at least 2 blocks")
        for p in (self.p_in, self.p_out):
            if not (0.0 <= p <= 1.0):
                raise ConfigError("edge probabilities must lie in [0, 1]")
        if self.sigma < 0:
            raise ConfigError("noise sigma must be >= 0")


def _blob_square(grid: tuple[int, int]) -> np.ndarray:
    """Centered square covering roughly half the grid area.

    Side length g/sqrt(2) keeps the foreground clear of the border while
    making the two clusters nearly balanced, so the partition the features
    encode is also the one the training objective prefers.
    """
    g_h, g_w = grid
    side_h = min(g_h - 2, max(1, round(g_h / np.sqrt(2.0))))
    side_w = min(g_w - 2, max(1, round(g_w / np.sqrt(2.0))))
    top = (g_h - side_h) // 2
    left = (g_w - side_w) // 2
    mask = np.zeros((g_h, g_w), dtype=np.uint8)
    mask[top : top + side_h, left : left + side_w] = 1
    return mask


def make_blob(params: BlobParams, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (features (n, c_in), patch-level gt (g_h, g_w)) for one blob image."""
    rng = np.random.default_rng(seed)
    g_h, g_w = params.grid
    theta = np.deg2rad(params.theta_deg)
    proto_bg = np.zeros(params.c_in)
    proto_bg[0] = 1.0
    proto_fg = np.zeros(params.c_in)
    proto_fg[0] = np.cos(theta)
    proto_fg[1] = np.sin(theta)

    patch_gt = _blob_square(params.grid)
    flat_gt = patch_gt.ravel()
    features = np.where(flat_gt[:, None] == 1, proto_fg, proto_bg)
    features = features + params.sigma * rng.standard_normal((g_h * g_w, params.c_in))
    return features, patch_gt


def sample_sbm(params: SbmParams, seed: int) -> tuple[PatchGraph, np.ndarray, np.ndarray]:
    """Sample a planted-partition graph.

    Returns (graph, block labels, noisy one-hot indicator features). Nodes
    are grouped contiguously by block.
    """
    rng = np.random.default_rng(seed)
    n = params.block_size * params.blocks
    labels = np.repeat(np.arange(params.blocks), params.block_size)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, params.p_in, params.p_out)
    coin = rng.random((n, n))
    upper = np.triu(coin < prob, k=1)
    adj = (upper | upper.T).astype(np.float64)
    graph = graph_from_adjacency(adj)

    features = np.eye(params.blocks)[labels]
    features = features + params.sigma * rng.standard_normal((n, params.blocks))
    return graph, labels, features


def _upsample_mask(patch_gt: np.ndarray, patch: int) -> np.ndarray:
    return np.kron(patch_gt, np.ones((patch, patch), dtype=np.uint8))


def write_blob_job(out_dir, name: str, params: BlobParams, seed: int) -> tuple[Path, Path]:
    """Write <name>.ufv and <name>.gt.pgm; returns the two paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    features, patch_gt = make_blob(params, seed)
    ufv_path = out_dir / f"{name}.ufv"
    gt_path = out_dir / f"{name}.gt.pgm"
    write_ufv1(ufv_path, features, params.grid)
    write_pgm(gt_path, _upsample_mask(patch_gt, params.patch))
    return ufv_path, gt_path


def write_sbm_job(out_dir, name: str, params: SbmParams, seed: int) -> tuple[Path, Path]:
    """Write indicator features and the block mask for a sampled partition graph.

    Nodes are laid out one block per group of rows (grid blocks x block_size),
    so the mask marks the second block as foreground.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, labels, features = sample_sbm(params, seed)
    grid = (params.blocks, params.block_size)
    ufv_path = out_dir / f"{name}.ufv"
    gt_path = out_dir / f"{name}.gt.pgm"
    write_ufv1(ufv_path, features, grid)
    write_pgm(gt_path, labels.reshape(grid).astype(np.uint8) % 2)
    return ufv_path, gt_path
