"""Offline per-patch feature extraction into UFV1 files."""

from .backends import StubEncoder, VitKeyEncoder, load_backbone
from .errors import ExtractorError, ValidationError
from .extract import ExtractionManifest, ManifestEntry, extract, resize_to_patch_multiple, verify_roundtrip
from .ufv import parse_ufv1, write_ufv1_atomic

__version__ = "0.1.0"
