"""Command-line entry point: train models, run experiments, run baselines.

Every command writes a manifest echoing its fully resolved configuration
plus a hash of it, so any artifact can be regenerated from the manifest
alone. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from .archive import ArchiveError, load_archive
from .evaluation import (
    SplitSpec,
    baseline_predictions,
    latent_morph,
    make_split,
    midsagittal_directions,
    run_conditional_generation,
    run_interpolation_experiment,
    write_condgen_csv,
    write_curves_csv,
    write_midsagittal_csv,
)
from .preprocess import (
    canonicalize_ear,
    database_equator_scale,
    extend_azimuth_wrap,
    make_frequency_grid,
    process_subject_ear,
)
from .siren import load_model, save_model
from .training import TrainConfig, fit


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x != ""]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x != ""]


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=18)
    p.add_argument("--latent-dim", type=int, default=32)
    p.add_argument("--hidden-dim", type=int, default=2048)
    p.add_argument("--n-hidden", type=int, default=2)
    p.add_argument("--n-bins", type=int, default=92)
    p.add_argument("--lr0", type=float, default=3.0e-4)
    p.add_argument("--lr-decay", type=float, default=0.01)
    p.add_argument("--grad-mode", choices=("exact", "detached"), default="exact")
    p.add_argument("--latent-steps", type=int, default=1)
    p.add_argument("--precision", choices=("f32", "f64"), default="f32")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--database-norm", action="store_true",
                   help="share one equator scale across each archive")


def _add_split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", choices=("checkerboard", "random", "decimation"),
                   default="checkerboard")
    p.add_argument("--fraction", type=float, default=0.5,
                   help="observed fraction for --split random")
    p.add_argument("--every-n", type=int, default=2,
                   help="keep every n-th azimuth for --split decimation")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hrtfkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on HRDF archives")
    p_train.add_argument("--data", nargs="+", required=True, help="HRDF archives")
    _add_train_flags(p_train)
    _add_common_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_exp = sub.add_parser("experiment", help="run an evaluation protocol")
    exp_sub = p_exp.add_subparsers(dest="protocol", required=True)

    for name, setting in (("interp-r", "ours_r"), ("interp-t", "ours_t"),
                          ("interp-e", "ours_e")):
        p = exp_sub.add_parser(name, help=f"interpolation protocol {setting}")
        p.add_argument("--target", required=True, help="target HRDF archive")
        p.add_argument("--others", nargs="*", default=[],
                       help="additional HRDF archives")
        _add_split_flags(p)
        _add_train_flags(p)
        _add_common_flags(p)
        p.set_defaults(func=cmd_interpolation, setting=setting)

    p_cg = exp_sub.add_parser("cond-gen", help="sparse conditional generation")
    p_cg.add_argument("--target", required=True, help="held-out HRDF archive")
    p_cg.add_argument("--model", default=None,
                      help="pretrained model file (its output width overrides --n-bins)")
    p_cg.add_argument("--others", nargs="*", default=[],
                      help="training archives when no --model is given")
    p_cg.add_argument("--fractions", type=_floats, default=[0.05, 0.10, 0.15, 0.20, 0.25])
    p_cg.add_argument("--seeds", type=_ints, default=[0, 1, 2, 3, 4])
    _add_train_flags(p_cg)
    _add_common_flags(p_cg)
    p_cg.set_defaults(func=cmd_cond_gen)

    p_m = exp_sub.add_parser("latent-morph", help="morph between two ears")
    p_m.add_argument("--model", required=True, help="trained model file")
    p_m.add_argument("--data", required=True, help="HRDF archive with both ears")
    p_m.add_argument("--ear-a", type=int, default=0, help="subject-ear index")
    p_m.add_argument("--ear-b", type=int, default=1, help="subject-ear index")
    p_m.add_argument("--t", type=_floats, default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    p_m.add_argument("--latent-steps", type=int, default=1)
    _add_common_flags(p_m)
    p_m.set_defaults(func=cmd_latent_morph)

    p_b = sub.add_parser("baseline", help="run a classical baseline standalone")
    p_b.add_argument("--data", required=True, help="HRDF archive")
    p_b.add_argument("--method", choices=("vbap", "bilinear"), required=True)
    p_b.add_argument("--n-bins", type=int, default=92)
    _add_split_flags(p_b)
    _add_common_flags(p_b)
    p_b.set_defaults(func=cmd_baseline)
    return parser


# --- shared plumbing ------------------------------------------------------------


def load_processed_fields(paths, n_bins: int, database_norm: bool):
    """Archives to processed magnitude fields (mirrored, normalized, dB)."""
    grid = make_frequency_grid(n_bins)
    fields = []
    for path in paths:
        archive = load_archive(path)
        ears = [canonicalize_ear(se) for se in archive.subject_ears]
        shared = database_equator_scale(ears, grid) if database_norm else None
        fields.extend(process_subject_ear(se, grid, shared_scale=shared)
                      for se in ears)
    return fields


def train_config_from_args(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        latent_dim=args.latent_dim,
        hidden_dim=args.hidden_dim,
        n_hidden=args.n_hidden,
        n_bins=args.n_bins,
        lr0=args.lr0,
        lr_decay_coeff=args.lr_decay,
        omega0=30.0,
        grad_mode=args.grad_mode,
        latent_steps=args.latent_steps,
        seed=args.seed,
        precision=args.precision,
        threads=args.threads,
    )


def split_from_args(args) -> SplitSpec:
    if args.split == "checkerboard":
        return SplitSpec("checkerboard")
    if args.split == "random":
        return SplitSpec("random_fraction", fraction=args.fraction, seed=args.seed)
    return SplitSpec("azimuth_decimation", every_n=args.every_n)


def write_manifest(out_dir: str, args, extra: dict | None = None) -> dict:
    """Resolved-config manifest with a content hash, one per run."""
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(resolved, sort_keys=True, default=str)
    manifest = {
        "config": json.loads(blob),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# --- commands --------------------------------------------------------------------


def cmd_train(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    cfg = train_config_from_args(args)
    fields = load_processed_fields(args.data, args.n_bins, args.database_norm)
    wrapped = [extend_azimuth_wrap(f) for f in fields]
    result = fit(wrapped, cfg, log_path=os.path.join(args.out, "training_log.csv"))
    model_path = os.path.join(args.out, "model.hfnf")
    save_model(result.net.astype(np.float64), model_path)
    final = result.history[-1]["mean_loss"] if result.history else float("nan")
    write_manifest(args.out, args, {"final_loss": final, "n_ears": len(fields)})
    print(f"trained {len(fields)} ears for {cfg.epochs} epochs -> {model_path}")
    return 0


def cmd_interpolation(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    cfg = train_config_from_args(args)
    targets = load_processed_fields([args.target], args.n_bins, args.database_norm)
    others = load_processed_fields(args.others, args.n_bins, args.database_norm)
    result = run_interpolation_experiment(
        args.setting, targets, others, split_from_args(args), cfg
    )
    recon = {k: v for k, v in result.curves.items() if k.endswith("_reconstruction")}
    interp = {k: v for k, v in result.curves.items() if k.endswith("_interpolation")}
    write_curves_csv(os.path.join(args.out, "reconstruction.csv"),
                     result.freq_hz, recon)
    write_curves_csv(os.path.join(args.out, "interpolation.csv"),
                     result.freq_hz, interp)
    if result.net is not None:
        save_model(result.net.astype(np.float64),
                   os.path.join(args.out, "model.hfnf"))
    write_manifest(args.out, args, {"overall_lsd_db": result.overall})
    for name, value in result.overall.items():
        print(f"{name}: {value:.4f} dB")
    return 0


def cmd_cond_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    net = None
    if args.model:
        net = load_model(args.model)
        args.n_bins = net.output_dim  # the model fixes the bin count
    elif not args.others:
        raise ValueError("cond-gen needs --model or --others to train from")
    targets = load_processed_fields([args.target], args.n_bins, args.database_norm)
    if net is None:
        cfg = train_config_from_args(args)
        others = load_processed_fields(args.others, args.n_bins, args.database_norm)
        net = fit([extend_azimuth_wrap(f) for f in others], cfg).net
    rows = run_conditional_generation(
        net, targets, args.fractions, args.seeds, latent_steps=args.latent_steps
    )
    write_condgen_csv(os.path.join(args.out, "condgen.csv"), rows)
    write_manifest(args.out, args, {"n_rows": len(rows)})
    for r in rows:
        print(f"{r.method} p={r.fraction:g}: mean {r.mean_db:.4f} dB, "
              f"std {r.std_db:.4f} dB, failed {r.n_failed}/{r.n_trials}")
    return 0


def cmd_latent_morph(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    net = load_model(args.model)
    args.n_bins = net.output_dim  # the model fixes the bin count
    fields = load_processed_fields([args.data], args.n_bins, args.database_norm)
    for idx in (args.ear_a, args.ear_b):
        if not 0 <= idx < len(fields):
            raise ValueError(f"ear index {idx} out of range (archive has "
                             f"{len(fields)} subject-ears)")
    polar, az, el = midsagittal_directions()
    morphs = latent_morph(
        net, fields[args.ear_a], fields[args.ear_b], args.t,
        grid=(az, el), latent_steps=args.latent_steps,
    )
    freq = fields[0].freq_grid_hz
    paths = []
    for t, fld in zip(args.t, morphs):
        path = os.path.join(args.out, f"morph_t_{float(t):g}.csv")
        write_midsagittal_csv(path, polar, fld.values_db, freq)
        paths.append(path)
    write_manifest(args.out, args, {"outputs": paths})
    print(f"wrote {len(paths)} midsagittal morph CSVs to {args.out}")
    return 0


def cmd_baseline(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    fields = load_processed_fields([args.data], args.n_bins, args.database_norm)
    spec = split_from_args(args)
    sq_recon = np.zeros(args.n_bins)
    sq_interp = np.zeros(args.n_bins)
    n_recon = 0
    n_interp = 0
    pred_rows = []
    for fld in fields:
        split = make_split(fld.directions, spec)
        if split.desired.size == 0:
            raise ValueError("split leaves nothing to interpolate")
        recon, interp = baseline_predictions(
            args.method, fld, split.observed, split.desired
        )
        sq_recon += np.square(fld.values_db[split.observed] - recon).sum(axis=0)
        n_recon += split.observed.size
        sq_interp += np.square(fld.values_db[split.desired] - interp).sum(axis=0)
        n_interp += split.desired.size
        for j, i in enumerate(split.desired):
            d = fld.directions[i]
            pred_rows.append(
                [fld.subject_id, repr(d.azimuth_deg), repr(d.elevation_deg)]
                + [repr(float(v)) for v in interp[j]]
            )
    freq = fields[0].freq_grid_hz
    curves = {
        f"{args.method}_reconstruction": np.sqrt(sq_recon / n_recon),
        f"{args.method}_interpolation": np.sqrt(sq_interp / n_interp),
    }
    write_curves_csv(os.path.join(args.out, "lsd_per_frequency.csv"), freq, curves)
    with open(os.path.join(args.out, "predictions.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "azimuth_deg", "elevation_deg"]
                   + [f"f_{f:.6f}_hz" for f in freq])
        w.writerows(pred_rows)
    overall = {
        "reconstruction": float(np.sqrt(sq_recon.sum() / (n_recon * args.n_bins))),
        "interpolation": float(np.sqrt(sq_interp.sum() / (n_interp * args.n_bins))),
    }
    write_manifest(args.out, args, {"overall_lsd_db": overall})
    print(f"{args.method} reconstruction: {overall['reconstruction']:.4f} dB")
    print(f"{args.method} interpolation: {overall['interpolation']:.4f} dB")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ArchiveError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"hrtfkit: data error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"hrtfkit: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
