import json

import numpy as np
import pytest

from graphseg.config import PipelineConfig
from graphseg.errors import JobError, ShapeError
from graphseg.metrics import iou
from graphseg.pipeline import (
    SegJob,
    SegMask,
    assemble_mask,
    refine_mask,
    run_image,
    select_foreground,
    write_job_outputs,
)
from graphseg.synth import BlobParams, write_blob_job
from graphseg.ufv import write_ufv1


class TestAssembleMask:
    def test_checkerboard_blocks(self):
        mask = assemble_mask(np.array([1, 0, 0, 1]), (2, 2), (4, 4), 2)
        expected = np.array(
            [
                [1, 1, 0, 0],
                [1, 1, 0, 0],
                [0, 0, 1, 1],
                [0, 0, 1, 1],
            ],
            dtype=np.uint8,
        )
        assert np.array_equal(mask.bits, expected)

    def test_all_ones(self):
        mask = assemble_mask(np.ones(6, dtype=int), (2, 3), (10, 15), 5)
        assert mask.bits.shape == (10, 15)
        assert np.all(mask.bits == 1)

    def test_non_multiple_size_uses_nearest_patch_center(self, rng):
        labels = rng.integers(0, 2, size=9)
        mask = assemble_mask(labels, (3, 3), (25, 25), 8)
        label_map = labels.reshape(3, 3)
        # independent nearest-center resampler, one pixel at a time
        for y in range(25):
            for x in range(25):
                centers = (np.arange(3) + 0.5) * 25.0 / 3.0
                iy = int(np.argmin(np.abs(y + 0.5 - centers)))
                ix = int(np.argmin(np.abs(x + 0.5 - centers)))
                assert mask.bits[y, x] == label_map[iy, ix]

    def test_multiplicity_preserved_in_exact_case(self, rng):
        labels = rng.integers(0, 2, size=12)
        mask = assemble_mask(labels, (3, 4), (9, 12), 3)
        assert int(mask.bits.sum()) == int(labels.sum()) * 9

    def test_label_count_must_match_grid(self):
        with pytest.raises(ShapeError):
            assemble_mask(np.zeros(5, dtype=int), (2, 3), (4, 6), 2)


class TestSelectForeground:
    def test_centered_blob_is_foreground(self):
        labels = np.zeros((5, 5), dtype=int)
        labels[1:4, 1:4] = 1
        assert select_foreground(labels.ravel(), (5, 5)) == 1

    def test_frame_cluster_is_background(self):
        labels = np.ones((5, 5), dtype=int)
        labels[1:4, 1:4] = 0  # cluster 0 is interior
        assert select_foreground(labels.ravel(), (5, 5)) == 0

    def test_border_tie_falls_back_to_smaller_cluster(self):
        # left half 0, right half 1 on a 4x4: border counts tie 6-6;
        # shrink cluster 1 by one interior cell to break the size tie
        labels = np.zeros((4, 4), dtype=int)
        labels[:, 2:] = 1
        labels[1, 2] = 0
        assert select_foreground(labels.ravel(), (4, 4)) == 1

    def test_full_tie_prefers_cluster_one(self):
        labels = np.zeros((4, 4), dtype=int)
        labels[:, 2:] = 1  # mirror-symmetric: border and sizes tie
        assert select_foreground(labels.ravel(), (4, 4)) == 1


class TestRefineMask:
    def test_all_foreground_unchanged(self):
        mask = SegMask(4, 4, np.ones((4, 4), dtype=np.uint8))
        assert np.array_equal(refine_mask(mask).bits, mask.bits)

    def test_isolated_pixel_removed(self):
        bits = np.zeros((5, 5), dtype=np.uint8)
        bits[2, 2] = 1
        out = refine_mask(SegMask(5, 5, bits))
        assert np.all(out.bits == 0)

    def test_hand_computed_jagged_edge(self):
        bits = np.array(
            [
                [1, 1, 0, 0, 0],
                [1, 1, 1, 0, 0],
                [1, 0, 0, 0, 0],
                [1, 1, 0, 0, 0],
                [1, 1, 0, 0, 0],
            ],
            dtype=np.uint8,
        )
        # hand-evaluated 3x3 majority with border truncation and ties keeping
        # the centre pixel
        expected = np.array(
            [
                [1, 1, 0, 0, 0],
                [1, 1, 0, 0, 0],
                [1, 1, 0, 0, 0],
                [1, 1, 0, 0, 0],
                [1, 1, 0, 0, 0],
            ],
            dtype=np.uint8,
        )
        assert np.array_equal(refine_mask(SegMask(5, 5, bits)).bits, expected)

    def test_changes_only_non_unanimous_neighborhoods(self, rng):
        bits = (rng.random((12, 12)) < 0.5).astype(np.uint8)
        out = refine_mask(SegMask(12, 12, bits))
        changed = np.nonzero(out.bits != bits)
        for y, x in zip(*changed):
            window = bits[max(0, y - 1) : y + 2, max(0, x - 1) : x + 2]
            assert window.min() != window.max()  # not unanimous

    def test_idempotent_on_smooth_mask(self):
        bits = np.zeros((8, 8), dtype=np.uint8)
        bits[:, 4:] = 1
        once = refine_mask(SegMask(8, 8, bits))
        assert np.array_equal(once.bits, bits)


def blob_job(tmp_path, seed=0, **config_kwargs):
    params = BlobParams(grid=(14, 14), c_in=16, theta_deg=75.0, sigma=0.1, patch=4)
    ufv, gt = write_blob_job(tmp_path, f"blob_{seed:03d}", params, seed)
    cfg = PipelineConfig(epochs=40, seed=seed, patch=4, **config_kwargs)
    return SegJob(features=ufv, config=cfg, gt=gt)


class TestRunImage:
    def test_blob_segmentation_quality(self, tmp_path):
        result = run_image(blob_job(tmp_path))
        assert result.iou is not None
        assert result.iou.per_class[1] >= 0.95
        assert result.iou.miou >= 0.95
        assert result.mask.meta["trivial_partition"] is False

    def test_two_seeds_produce_consistent_masks(self, tmp_path):
        a = run_image(blob_job(tmp_path, seed=1))
        job = blob_job(tmp_path, seed=1)
        job = SegJob(features=job.features, config=PipelineConfig(epochs=40, seed=2, patch=4), gt=job.gt)
        b = run_image(job)
        overlap = iou(a.mask.bits, b.mask.bits, 2)
        assert overlap.miou >= 0.9

    def test_identical_feature_grid_is_trivial_but_completes(self, tmp_path):
        values = np.tile([0.6, 0.8], (4, 1))
        path = tmp_path / "flat.ufv"
        write_ufv1(path, values, (2, 2))
        job = SegJob(features=path, config=PipelineConfig(epochs=5, patch=2))
        result = run_image(job)
        assert result.mask.meta["trivial_partition"] is True
        assert np.unique(result.mask.bits).size == 1

    def test_degenerate_graph_raises_job_error_with_advice(self, tmp_path):
        values = np.eye(4)  # orthogonal rows: no similarity above any tau
        path = tmp_path / "ortho.ufv"
        write_ufv1(path, values, (2, 2))
        with pytest.raises(JobError, match="lower tau"):
            run_image(SegJob(features=path, config=PipelineConfig(epochs=2)))

    def test_deterministic_byte_identical(self, tmp_path):
        a = run_image(blob_job(tmp_path, seed=4))
        b = run_image(blob_job(tmp_path, seed=4))
        assert a.mask.bits.tobytes() == b.mask.bits.tobytes()
        assert [r.total for r in a.history] == [r.total for r in b.history]

    def test_mask_dimensions_follow_requested_size(self, tmp_path):
        job = blob_job(tmp_path, seed=5)
        sized = SegJob(features=job.features, config=job.config, size=(50, 43), gt=None)
        result = run_image(sized)
        assert result.mask.bits.shape == (50, 43)
        assert (result.mask.height, result.mask.width) == (50, 43)

    def test_soft_upsample_smoke(self, tmp_path):
        job = blob_job(tmp_path, seed=6, soft_upsample=True)
        result = run_image(job)
        assert result.iou is not None
        assert result.iou.per_class[1] >= 0.9

    def test_gt_size_mismatch(self, tmp_path):
        job = blob_job(tmp_path, seed=7)
        bad = SegJob(features=job.features, config=job.config, size=(10, 10), gt=job.gt)
        with pytest.raises(JobError, match="ground truth"):
            run_image(bad)


class TestOutputs:
    def test_outputs_written_with_expected_names(self, tmp_path):
        job = blob_job(tmp_path, seed=8)
        result = run_image(job)
        out = tmp_path / "out"
        paths = write_job_outputs(result, job, out, losscurve=True)
        assert paths["mask"].name == "blob_008.mask.pgm"
        assert paths["sidecar"].name == "blob_008.json"
        assert paths["losscurve"].name == "blob_008.loss.csv"
        sidecar = json.loads(paths["sidecar"].read_text())
        assert sidecar["config"]["tau"] == 0.5
        assert sidecar["meta"]["foreground_rule"] == "border-occupancy"
        assert "iou" in sidecar and "flipped_iou_diagnostic" in sidecar
        csv_lines = paths["losscurve"].read_text().splitlines()
        assert csv_lines[0] == "epoch,total,modularity_term,regularizer"
        assert len(csv_lines) == 1 + job.config.epochs
