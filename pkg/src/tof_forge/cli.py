"""Command-line interface composing the workbench into reproducible,
batch-style experiments. Every command records its full flag set as a
config snapshot next to its outputs."""

import argparse
import os
import sys

import numpy as np

from . import dataset as ds
from . import metrics
from .classic_pipeline import MaskConfig, hole_fraction, reconstruct
from .errors import TofForgeError
from .neural import (NetworkConfig, TrainConfig, infer, load_checkpoint,
                     save_checkpoint, train)
from .scene_sim import Box, CameraPose, Plane, Scene, Sphere
from .types import SensorConfig


def _snapshot(args: argparse.Namespace, path: str):
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(vars(args)):
            if key == "func":
                continue
            f.write(f"{key}\t{getattr(args, key)}\n")


def _atomic_write(path: str, writer):
    tmp = path + ".tmp"
    writer(tmp)
    os.replace(tmp, path)


def _sensor_pair(args) -> tuple:
    base = SensorConfig(width=args.width, height=args.height,
                        mod_freq_hz=args.mod_freq_hz,
                        read_noise_sigma=args.read_noise_sigma,
                        photon_noise_gain=args.photon_noise_gain,
                        source_power=args.source_power)
    return (base.with_exposure(args.exposure_short),
            base.with_exposure(args.exposure_long))


def _mask_config(args) -> MaskConfig:
    return MaskConfig(amp_threshold_ratio=args.amp_threshold_ratio,
                      amr_threshold=args.amr_threshold,
                      combine_weight=args.combine_weight)


def _add_sensor_flags(p):
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--mod-freq-hz", type=float, default=6e6)
    p.add_argument("--read-noise-sigma", type=float, default=2.0)
    p.add_argument("--photon-noise-gain", type=float, default=0.1)
    p.add_argument("--source-power", type=float, default=12.0)
    p.add_argument("--exposure-short", type=float, default=200.0)
    p.add_argument("--exposure-long", type=float, default=4000.0)


def _add_mask_flags(p):
    p.add_argument("--amp-threshold-ratio", type=float, default=0.024)
    p.add_argument("--amr-threshold", type=float, default=16.0)
    p.add_argument("--combine-weight", type=float, default=0.5)


def reference_scene() -> Scene:
    """Fixed desk-scale scene used by reconstruct demos and the sweep."""
    return Scene(primitives=(
        Plane(point=(0.0, 0.0, 3.0), normal=(0.0, 0.0, -1.0), reflectivity=0.6),
        Sphere(center=(-0.4, 0.0, 2.0), radius=0.35, reflectivity=0.4),
        Box(min_corner=(0.2, -0.2, 1.6), max_corner=(0.8, 0.4, 2.2),
            reflectivity=0.15),
    ), ambient_level=0.4)


def cmd_dataset_gen(args):
    os.makedirs(args.out, exist_ok=True)
    cfg_short, cfg_long = _sensor_pair(args)
    manifest = ds.generate_corpus(args.scenes, cfg_short, cfg_long,
                                  seed=args.seed, out_dir=args.out,
                                  ratio=args.ratio)
    _snapshot(args, os.path.join(args.out, "run_config.tsv"))
    n_train = len(manifest.subset("train"))
    n_test = len(manifest.subset("test"))
    print(f"wrote {len(manifest.entries)} samples ({n_train} train / {n_test} test) "
          f"to {args.out}")


def cmd_reconstruct(args):
    raw = ds.read_raw(args.raw)
    depth = reconstruct(raw, _mask_config(args))
    _atomic_write(args.out, lambda p: ds.write_depth(p, depth))
    if args.pgm:
        _atomic_write(args.pgm, lambda p: ds.export_pgm(
            depth.depth, p, scale=raw.sensor.max_range_m, valid=depth.valid))
    _snapshot(args, args.out + ".config.tsv")
    print(f"hole_fraction\t{hole_fraction(depth):.6f}")


def cmd_train(args):
    manifest = ds.read_manifest(args.manifest)
    corpus_dir = os.path.dirname(os.path.abspath(args.manifest))
    train_set = ds.load_split(corpus_dir, manifest, "train")
    val_set = []
    net_cfg = NetworkConfig(out_channels=args.out_channels,
                            depth_scale_m=args.d_max)
    train_cfg = TrainConfig(lr0=args.lr0, flat_epochs=args.flat_epochs,
                            decay_epochs=args.decay_epochs, crop=args.crop,
                            batch_size=args.batch_size, seed=args.seed)
    if args.epochs is not None:
        total = min(args.epochs, train_cfg.total_epochs)
        flat = min(train_cfg.flat_epochs, total)
        train_cfg = TrainConfig(lr0=args.lr0, flat_epochs=flat,
                                decay_epochs=total - flat, crop=args.crop,
                                batch_size=args.batch_size, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    _snapshot(args, os.path.join(args.out, "run_config.tsv"))

    def progress(epoch, loss, lr):
        if args.verbose:
            print(f"epoch {epoch}\tloss {loss:.6f}\tlr {lr:.2e}", flush=True)

    net, curve = train(train_set, val_set, net_cfg, train_cfg,
                       checkpoint_dir=args.out,
                       checkpoint_interval=args.checkpoint_interval,
                       progress=progress)
    save_checkpoint(os.path.join(args.out, "final.tofw"), net)

    def write_curve(path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("epoch\ttrain_loss\n")
            for e, loss in enumerate(curve):
                f.write(f"{e}\t{loss:.8f}\n")

    _atomic_write(os.path.join(args.out, "loss_curve.tsv"), write_curve)
    print(f"trained {train_cfg.total_epochs} epochs; final loss {curve[-1]:.6f}")


def cmd_infer(args):
    net = load_checkpoint(args.ckpt)
    raw = ds.read_raw(args.raw)
    depth = infer(net, raw)
    _atomic_write(args.out, lambda p: ds.write_depth(p, depth))
    if args.pgm:
        _atomic_write(args.pgm, lambda p: ds.export_pgm(
            depth.depth, p, scale=net.cfg.depth_scale_m))
    _snapshot(args, args.out + ".config.tsv")
    print(f"depth_range_m\t{depth.depth.min():.4f}\t{depth.depth.max():.4f}")


def cmd_eval(args):
    net = load_checkpoint(args.ckpt)
    manifest = ds.read_manifest(args.manifest)
    corpus_dir = os.path.dirname(os.path.abspath(args.manifest))
    test_set = ds.load_split(corpus_dir, manifest, "test")
    d_max = net.cfg.depth_scale_m
    reports = {
        "classical": metrics.evaluate(metrics.classical_predictor(_mask_config(args)),
                                      test_set, d_max),
        "neural": metrics.evaluate(lambda s: infer(net, s.raw_short), test_set, d_max),
    }
    _atomic_write(args.out, lambda p: metrics.write_report(p, reports))
    _snapshot(args, args.out + ".config.tsv")
    for name, rep in reports.items():
        print(f"{name}\tmae_cm {rep.mae_cm:.4f}\tssim {rep.ssim:.4f}")


def cmd_sweep(args):
    net = load_checkpoint(args.ckpt)
    distances = [float(v) for v in args.distances.split(",")]
    cfg_short, cfg_long = _sensor_pair(args)
    series, mean, variance = metrics.distance_sweep(
        lambda s: infer(net, s.raw_short), reference_scene(), distances,
        cfg_short, cfg_long, seed=args.seed, mask_cfg=_mask_config(args))

    def write_sweep(path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("distance_m\tmae_cm\n")
            for d, m in zip(distances, series):
                f.write(f"{d:.4f}\t{m:.6f}\n")
            f.write(f"mean\t{mean:.6f}\n")
            f.write(f"variance\t{variance:.6f}\n")

    _atomic_write(args.out, write_sweep)
    _snapshot(args, args.out + ".config.tsv")
    print(f"sweep mean_mae_cm {mean:.4f}\tvariance {variance:.6f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tof-forge",
                                     description="AMCW ToF imaging workbench")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("TOF_FORGE_THREADS", "0")),
                        help="0 = deterministic single-threaded (default)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-gen", help="generate a synthetic corpus")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=float, default=0.75)
    _add_sensor_flags(p)
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("reconstruct", help="classical pipeline on one frame")
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm")
    _add_mask_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train", help="train the depth network")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None,
                   help="cap on total epochs (schedule truncation)")
    p.add_argument("--lr0", type=float, default=2e-4)
    p.add_argument("--flat-epochs", type=int, default=200)
    p.add_argument("--decay-epochs", type=int, default=1800)
    p.add_argument("--crop", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-channels", type=int, default=1)
    p.add_argument("--d-max", type=float, default=8.0)
    p.add_argument("--checkpoint-interval", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="network inference on one frame")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate classical vs neural on a test split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_mask_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="distance stability sweep")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--distances", required=True,
                   help="comma-separated list of meters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_sensor_flags(p)
    _add_mask_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (TofForgeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
