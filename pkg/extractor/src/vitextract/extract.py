"""Batch extraction of per-patch features into UFV1 files plus a manifest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backends import load_backbone
from .errors import ValidationError
from .ufv import parse_ufv1, write_ufv1_atomic

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tif", ".tiff"}


@dataclass
class ManifestEntry:
    source: str
    feature_file: str
    original_size: tuple[int, int]  # (height, width)
    resized_size: tuple[int, int]
    patch: int
    grid: tuple[int, int]
    n: int
    c_in: int
    sha256: str


@dataclass
class ExtractionManifest:
    model: str
    patch: int
    entries: list[ManifestEntry] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "patch": self.patch,
                "entries": [asdict(e) for e in self.entries],
                "skipped": self.skipped,
            },
            indent=2,
            sort_keys=True,
        )


def _nearest_multiple(value: int, base: int) -> int:
    # ties round up so borderline images keep slightly more content
    return max(base, int(value / base + 0.5) * base)


def resize_to_patch_multiple(img: Image.Image, patch: int) -> Image.Image:
    """Bilinearly resize so both sides are the nearest multiples of the patch size."""
    w, h = img.size
    target_w = _nearest_multiple(w, patch)
    target_h = _nearest_multiple(h, patch)
    if (w, h) == (target_w, target_h):
        return img
    return img.resize((target_w, target_h), Image.BILINEAR)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def extract(
    image_dir,
    out_dir,
    model_id: str = "dino-vits8",
    patch: int = 8,
) -> ExtractionManifest:
    """Extract features for every image under image_dir; write UFV1 + manifest.json.

    Unreadable images are skipped with a manifest note; a model that fails
    to load is fatal.
    """
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    encoder = load_backbone(model_id, patch)

    manifest = ExtractionManifest(model=model_id, patch=patch)
    files = sorted(
        p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
    )
    for path in files:
        try:
            with Image.open(path) as img:
                original = (img.height, img.width)
                rgb_img = resize_to_patch_multiple(img.convert("RGB"), patch)
                rgb = np.asarray(rgb_img, dtype=np.float32) / 255.0
        except (UnidentifiedImageError, OSError) as exc:
            manifest.skipped.append({"source": path.name, "reason": str(exc)})
            continue

        g_h, g_w = rgb.shape[0] // patch, rgb.shape[1] // patch
        features = encoder.encode(rgb)
        if features.shape[0] != g_h * g_w:
            raise ValidationError(
                "grid", f"{path.name}: encoder produced {features.shape[0]} rows for {g_h}x{g_w}"
            )
        out_path = out_dir / f"{path.stem}.ufv"
        write_ufv1_atomic(out_path, features, (g_h, g_w))
        verify_roundtrip(out_path)
        manifest.entries.append(
            ManifestEntry(
                source=path.name,
                feature_file=out_path.name,
                original_size=original,
                resized_size=(rgb.shape[0], rgb.shape[1]),
                patch=patch,
                grid=(g_h, g_w),
                n=g_h * g_w,
                c_in=features.shape[1],
                sha256=_sha256(out_path),
            )
        )

    (out_dir / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest


def verify_roundtrip(ufv_path) -> bool:
    """Validate a written feature file; raises a named ValidationError on any violation.

    Besides the structural checks, when the segmentation engine is
    importable its loader must read bit-identical values (the two packages
    share only the format, not code).
    """
    values, grid = parse_ufv1(ufv_path)
    try:
        from graphseg.ufv import read_ufv1 as engine_read
    except ImportError:
        return True
    loaded = engine_read(ufv_path)
    if loaded.grid != grid:
        raise ValidationError("engine-grid", f"engine read grid {loaded.grid}, wrote {grid}")
    if not np.array_equal(loaded.values.astype(np.float32), values):
        raise ValidationError("engine-values", "engine loader read different values")
    return True
