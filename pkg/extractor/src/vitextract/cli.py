import argparse
import sys
from pathlib import Path

from .errors import ExtractorError
from .extract import extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vitextract",
        description="Extract per-patch ViT key features into UFV1 files plus a manifest.",
    )
    parser.add_argument("--images", type=Path, required=True, help="directory of input images")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument(
        "--model",
        default="dino-vits8",
        help="backbone id (e.g. dino-vits8, a HF ViT id, or stub / stub-<dims> for offline runs)",
    )
    parser.add_argument("--patch", type=int, default=8, help="patch size in pixels")
    args = parser.parse_args(argv)

    try:
        manifest = extract(args.images, args.out, model_id=args.model, patch=args.patch)
    except ExtractorError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    print(
        f"extracted {len(manifest.entries)} images "
        f"({len(manifest.skipped)} skipped) -> {args.out / 'manifest.json'}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
