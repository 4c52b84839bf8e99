"""Command-line interface: segment one image, evaluate a directory, or generate benchmarks."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import PipelineConfig, config_from_sources, parse_kv_file
from .errors import GraphSegError
from .evaluate import evaluate_dataset, write_report
from .pipeline import SegJob, run_image, write_job_outputs
from .synth import BlobParams, SbmParams, write_blob_job, write_sbm_job

__all__ = ["main"]


def _parse_size(text: str) -> tuple[int, int]:
    try:
        s, t = text.lower().split("x")
        return int(s), int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected SxT (e.g. 224x224), got {text!r}") from None


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    # Defaults stay None so a config file can fill anything not given explicitly.
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--tau", type=float, help="similarity threshold in (0,1)")
    parser.add_argument("--activation", choices=["relu", "gelu", "silu", "selu"])
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--weight-decay", dest="weight_decay", type=float)
    parser.add_argument("--lr-decay", dest="lr_decay", type=float)
    parser.add_argument("--stacks", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--head-hidden", dest="head_hidden", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--patch", type=int)
    parser.add_argument("--arch", choices=["arma", "gcn"])
    parser.add_argument("--workers", type=int)
    parser.add_argument(
        "--shared-weights", dest="shared_weights", action="store_const", const=True
    )
    parser.add_argument("--no-refine", dest="refine", action="store_const", const=False)
    parser.add_argument(
        "--soft-upsample", dest="soft_upsample", action="store_const", const=True
    )


_CONFIG_KEYS = (
    "tau",
    "activation",
    "epochs",
    "seed",
    "lr",
    "weight_decay",
    "lr_decay",
    "stacks",
    "layers",
    "head_hidden",
    "k",
    "patch",
    "arch",
    "workers",
    "shared_weights",
    "refine",
    "soft_upsample",
)


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    file_values = parse_kv_file(args.config) if args.config else None
    overrides = {key: getattr(args, key) for key in _CONFIG_KEYS}
    return config_from_sources(file_values, overrides)


def _cmd_segment(args: argparse.Namespace) -> int:
    config = _build_config(args)
    job = SegJob(features=args.features, config=config, size=args.size, gt=args.gt)
    result = run_image(job)
    paths = write_job_outputs(result, job, args.out, losscurve=args.losscurve)
    line = f"{args.features.name}: mask -> {paths['mask']}"
    if result.iou is not None:
        line += f", mIoU {result.iou.miou:.4f} (foreground IoU {result.iou.per_class[1]:.4f})"
    print(line)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    report = evaluate_dataset(
        args.features_dir,
        args.gt_dir,
        config,
        out_dir=args.out,
        losscurve=args.losscurve,
    )
    json_path, csv_path = write_report(report, args.out)
    print(
        f"{len(report.entries)} images, dataset mIoU {report.mean_miou:.4f} "
        f"({len(report.skipped)} skipped) -> {json_path}, {csv_path}"
    )
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    for index in range(args.count):
        seed = args.seed + index
        name = f"{args.kind}_{index:03d}"
        if args.kind == "blob":
            params = BlobParams(
                grid=args.grid,
                c_in=args.cin,
                theta_deg=args.theta,
                sigma=args.sigma,
                patch=args.patch if args.patch is not None else 8,
            )
            ufv, gt = write_blob_job(args.out, name, params, seed)
        else:
            params = SbmParams(
                block_size=args.block_size,
                p_in=args.p_in,
                p_out=args.p_out,
                sigma=args.sigma if args.sigma is not None else 0.1,
            )
            ufv, gt = write_sbm_job(args.out, name, params, seed)
        print(f"wrote {ufv} and {gt}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphseg",
        description="Unsupervised patch-graph segmentation: threshold feature similarity, "
        "train a small graph network per image against a modularity loss, emit masks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment one feature file")
    seg.add_argument("--features", type=Path, required=True, help="UFV1 feature file")
    seg.add_argument("--size", type=_parse_size, help="original image size SxT (height x width)")
    seg.add_argument("--gt", type=Path, help="ground-truth mask (PGM or PNG)")
    seg.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    seg.add_argument("--losscurve", action="store_true", help="dump per-epoch loss CSV")
    _add_config_flags(seg)
    seg.set_defaults(fn=_cmd_segment)

    ev = sub.add_parser("evaluate", help="run every feature/ground-truth pair in a directory")
    ev.add_argument("--features-dir", dest="features_dir", type=Path, required=True)
    ev.add_argument("--gt-dir", dest="gt_dir", type=Path, required=True)
    ev.add_argument("-o", "--out", type=Path, required=True)
    ev.add_argument("--losscurve", action="store_true")
    _add_config_flags(ev)
    ev.set_defaults(fn=_cmd_evaluate)

    syn = sub.add_parser("synth", help="generate synthetic benchmark files")
    syn.add_argument("--kind", choices=["blob", "sbm"], required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--count", type=int, default=1)
    syn.add_argument("-o", "--out", type=Path, required=True)
    syn.add_argument("--grid", type=_parse_size, default=(28, 28), help="blob grid GHxGW")
    syn.add_argument("--cin", type=int, default=32, help="blob feature width")
    syn.add_argument("--theta", type=float, default=60.0, help="blob prototype angle, degrees")
    syn.add_argument("--sigma", type=float, default=0.15, help="feature noise level")
    syn.add_argument("--patch", type=int, default=None, help="patch size for the blob mask")
    syn.add_argument("--block-size", dest="block_size", type=int, default=20)
    syn.add_argument("--p-in", dest="p_in", type=float, default=0.9)
    syn.add_argument("--p-out", dest="p_out", type=float, default=0.05)
    syn.set_defaults(fn=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except GraphSegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
