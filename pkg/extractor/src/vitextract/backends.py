"""Feature encoders: a pretrained ViT key-feature backend and an offline stub.

The real backend captures the key-projection outputs of the final
transformer block (per head, concatenated), the patch descriptor that
works markedly better than the block output for segmentation-style
grouping. The stub backend is a deterministic random projection of raw
patches; it exists so the file-format and manifest machinery can be
exercised without model weights.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ExtractorError

MODEL_ALIASES = {
    "dino-vits8": "facebook/dino-vits8",
    "dino-vits16": "facebook/dino-vits16",
}

# ImageNet statistics used by the DINO preprocessing pipeline.
_IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class StubEncoder:
    """Deterministic patch projector for offline runs and tests.

    Patchifies the image and applies a fixed seeded linear map + tanh.
    Model ids: ``stub`` (384 dims) or ``stub-<dims>``.
    """

    def __init__(self, patch: int, dim: int = 384):
        self.patch = patch
        self.dim = dim
        seed = int.from_bytes(hashlib.sha256(f"stub-{patch}-{dim}".encode()).digest()[:4], "little")
        rng = np.random.default_rng(seed)
        fan_in = patch * patch * 3
        bound = np.sqrt(6.0 / (fan_in + dim))
        self._proj = rng.uniform(-bound, bound, size=(fan_in, dim)).astype(np.float32)

    @property
    def name(self) -> str:
        return f"stub-{self.dim}"

    def encode(self, rgb: np.ndarray) -> np.ndarray:
        p = self.patch
        h, w, _ = rgb.shape
        g_h, g_w = h // p, w // p
        patches = (
            rgb[: g_h * p, : g_w * p]
            .reshape(g_h, p, g_w, p, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(g_h * g_w, p * p * 3)
        )
        return np.tanh(patches @ self._proj).astype(np.float32)


class VitKeyEncoder:
    """Key-projection outputs of the final attention block of a ViT."""

    def __init__(self, model_id: str, patch: int):
        try:
            import torch
            from transformers import ViTModel
        except ImportError as exc:
            raise ExtractorError(
                f"model {model_id!r} needs the [vit] extra (torch + transformers): {exc}"
            ) from exc
        try:
            self._model = ViTModel.from_pretrained(model_id)
        except Exception as exc:
            raise ExtractorError(f"failed to load model {model_id!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.name = model_id
        cfg = self._model.config
        if cfg.patch_size != patch:
            raise ExtractorError(
                f"model {model_id!r} has patch size {cfg.patch_size}, requested {patch}"
            )
        self.patch = patch
        self.dim = cfg.hidden_size
        self._captured: list = []
        key_linear = self._model.encoder.layer[-1].attention.attention.key
        key_linear.register_forward_hook(lambda mod, args, out: self._captured.append(out))

    def encode(self, rgb: np.ndarray) -> np.ndarray:
        torch = self._torch
        x = (rgb - _IMAGENET_MEAN) / _IMAGENET_STD
        tensor = torch.from_numpy(x.transpose(2, 0, 1)[None]).float()
        self._captured.clear()
        with torch.no_grad():
            self._model(pixel_values=tensor, interpolate_pos_encoding=True)
        if not self._captured:
            raise ExtractorError("key-projection hook captured nothing")
        keys = self._captured[-1][0]  # (1 + n, dim); token 0 is the class token
        return keys[1:].cpu().numpy().astype(np.float32)


def load_backbone(model_id: str, patch: int):
    """Resolve a model id to an encoder; unknown models are fatal."""
    if model_id == "stub":
        return StubEncoder(patch)
    if model_id.startswith("stub-"):
        try:
            dim = int(model_id.split("-", 1)[1])
        except ValueError:
            raise ExtractorError(f"bad stub model id {model_id!r}") from None
        return StubEncoder(patch, dim=dim)
    return VitKeyEncoder(MODEL_ALIASES.get(model_id, model_id), patch)
