"""Command-line entry point: ``vrnbody <command> [flags]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Numbers are
printed with 6 significant digits.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import format_dims, parse_dims, read_config
from .errors import (
    ConfigurationError,
    FormatError,
    NonFiniteLossError,
    ParseError,
    PreconditionError,
    UsageError,
    VrnError,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def fmt(value):
    return f"{value:.6g}"


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _dims(text):
    try:
        return parse_dims(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


# -- gen-data

def cmd_gen_data(args):
    from .synth import dataset_digest, generate_dataset

    if args.count < 1:
        raise UsageError(f"--count must be at least 1, got {args.count}")
    manifest = generate_dataset(args.count, args.seed, args.dims, args.out, workers=args.workers)
    print(f"samples={len(manifest)} dims={format_dims(args.dims)} digest={dataset_digest(manifest)}")
    print(f"manifest={Path(args.out) / 'manifest.txt'}")


# -- train

_TRAIN_FLAGS = {
    "variant": "variant",
    "manifest": "manifest",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "seed": "seed",
    "run_dir": "run_dir",
    "dims": "volume_dims",
    "features": "base_features",
    "hourglasses": "hourglass_count",
    "lr_initial": "lr_initial",
    "lr_reduced": "lr_reduced",
    "lr_switch_epoch": "lr_switch_epoch",
    "eval_every": "eval_every",
    "eval_fraction": "eval_fraction",
    "checkpoint_every": "checkpoint_every",
}


def train_config_from_args(args):
    from .training import TrainConfig

    values = read_config(args.config) if args.config else {}
    for flag, key in _TRAIN_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = format_dims(value) if key == "volume_dims" else str(value)
    if args.variant is not None:
        # a different variant implies its own input channel count
        values.pop("input_channels", None)
    values.setdefault("variant", "multistack")
    return TrainConfig.from_mapping(values)


def cmd_train(args):
    from .training import train

    config = train_config_from_args(args)
    if not Path(config.manifest).exists():
        raise UsageError(f"manifest {config.manifest} does not exist")
    resume = args.resume
    if resume not in (None, True) and not Path(resume).exists():
        raise UsageError(f"checkpoint {resume} does not exist")
    print(f"variant={config.spec.variant} taps={config.spec.supervised_taps} "
          f"input_channels={config.spec.input_channels} run_dir={config.run_dir}", flush=True)
    log = train(config, resume=resume, progress=lambda r: print(r.progress_line(), flush=True))
    final = log.last_iou()
    if final is not None:
        print("final iou=" + ",".join(fmt(v) for v in final))


# -- reconstruct

def cmd_reconstruct(args):
    from .encoding import Sample, assemble_input, input_parts, load_image, load_landmarks, load_mask
    from .geometry import VoxelGrid, marching_cubes, save_grid, save_obj
    from .training import load_trained_network

    network = load_trained_network(args.checkpoint)
    variant = network.spec.variant
    needed = input_parts(variant)
    supplied = {"image": args.image, "landmarks": args.landmarks, "mask": args.mask}
    missing = [p for p in needed if supplied[p] is None]
    if missing:
        raise UsageError(f"variant {variant} needs --{' --'.join(missing)}")
    image = load_image(args.image) if args.image else None
    landmarks = load_landmarks(args.landmarks) if args.landmarks else None
    mask = load_mask(args.mask) if args.mask else None
    x = assemble_input(variant, Sample(image, landmarks, mask, None))
    w, h, _ = network.spec.volume_dims
    if x.shape[1:] != (h, w):
        raise UsageError(f"input is {x.shape[2]}x{x.shape[1]} but the network expects {w}x{h}")
    pred = network.predict(x[None])[-1][0]
    grid = VoxelGrid(np.clip(pred.transpose(2, 1, 0), 0, 1).astype(np.float32))
    if args.out_volume:
        save_grid(grid, args.out_volume)
    mesh = marching_cubes(grid, args.iso)
    if args.out_mesh:
        save_obj(mesh, args.out_mesh)
    print(f"occupied={int((grid.values >= args.iso).sum())} vertices={len(mesh.vertices)} "
          f"triangles={len(mesh.triangles)}")


# -- eval

def cmd_eval(args):
    from .training import evaluate, load_trained_network

    network = load_trained_network(args.checkpoint)
    scores = evaluate(network, args.manifest, args.threshold)
    for k, v in enumerate(scores, start=1):
        print(f"tap={k} iou={fmt(v)}")
    print(f"taps={len(scores)} final={fmt(scores[-1])}")


# -- ablation

def cmd_ablation(args):
    from .training import TrainConfig, run_ablation

    folder = Path(args.config_dir)
    paths = sorted(folder.glob("*.cfg"))
    if not paths:
        raise UsageError(f"no *.cfg files in {folder}")
    configs, labels = [], []
    for path in paths:
        values = read_config(path)
        values.setdefault("run_dir", str(folder / "runs" / path.stem))
        configs.append(TrainConfig.from_mapping(values))
        labels.append(path.stem)

    def progress(record):
        print(record.progress_line(), flush=True)

    report = run_ablation(configs, labels, progress=progress)
    out = Path(args.out) if args.out else folder / "report"
    tsv, txt, png = report.save(out)
    print(report.format_text(), end="")
    print(f"report={tsv} text={txt} plot={png}")
    if any(r.status != "ok" for r in report.rows):
        raise CommandError("some ablation runs failed; see the status column", EXIT_RUNTIME)


# -- gradcheck

def cmd_gradcheck(args):
    from .gradsuite import run_gradient_suite

    entries, seconds = run_gradient_suite(seed=args.seed)
    for e in entries:
        print(f"{'ok  ' if e.ok else 'FAIL'} {e.name} max_rel_error={fmt(e.max_rel_error)} checked={e.checked}")
    failed = [e for e in entries if not e.ok]
    print(f"checks={len(entries)} failed={len(failed)} seconds={fmt(seconds)}")
    if failed:
        raise CommandError("gradient check failed", EXIT_RUNTIME)


# -- flops

def cmd_flops(args):
    from .nn import VARIANTS, NetworkSpec, build_network, flop_count

    variants = VARIANTS if args.variant == "all" else (args.variant,)
    reference = None
    counts = {}
    for variant in variants + (() if "multistack" in variants else ("multistack",)):
        spec = NetworkSpec.for_variant(variant, args.dims)
        if args.features is not None and variant != "conv3d-flat":
            spec = spec.replace(base_features=args.features)
        network = build_network(spec)
        counts[variant] = (flop_count(network), network.spec.base_features)
    reference = counts["multistack"][0]
    for variant in variants:
        flops, features = counts[variant]
        print(f"variant={variant} features={features} flops={flops} gflops={fmt(flops / 1e9)} "
              f"ratio={fmt(flops / reference)}")


def build_parser():
    parser = argparse.ArgumentParser(prog="vrnbody", description="Volumetric body regression toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=_dims, default=(64, 64, 64))
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a network")
    p.add_argument("--config")
    p.add_argument("--variant")
    p.add_argument("--resume", nargs="?", const=True, default=None,
                   help="resume from a checkpoint (default: the run's latest)")
    p.add_argument("--manifest")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--run-dir")
    p.add_argument("--dims", type=_dims)
    p.add_argument("--features", type=int)
    p.add_argument("--hourglasses", type=int)
    p.add_argument("--lr-initial", type=float)
    p.add_argument("--lr-reduced", type=float)
    p.add_argument("--lr-switch-epoch", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--eval-fraction", type=float)
    p.add_argument("--checkpoint-every", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="predict a volume and mesh from one input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image")
    p.add_argument("--landmarks")
    p.add_argument("--mask")
    p.add_argument("--out-mesh")
    p.add_argument("--out-volume")
    p.add_argument("--iso", type=float, default=0.5)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="per-tap IoU of a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablation", help="train every config in a directory and tabulate IoU")
    p.add_argument("--config-dir", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and a micro-network")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("flops", help="count forward FLOPs per variant")
    p.add_argument("--variant", default="all")
    p.add_argument("--dims", type=_dims, default=(64, 64, 64))
    p.add_argument("--features", type=int)
    p.set_defaults(func=cmd_flops)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on flag errors
    try:
        args.func(args)
    except CommandError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except NonFiniteLossError as err:
        print(f"error: {err}", file=sys.stderr)
        for key, value in err.diagnostics.items():
            print(f"  {key}={value}", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, ConfigurationError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, PreconditionError, VrnError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
