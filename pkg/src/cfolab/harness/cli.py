"""Command-line interface.

Subcommands: ``generate`` (datasets), ``baseline`` (classical estimator
MSE), ``train`` / ``eval`` (model training and evaluation), ``sweep``
(multi-variant experiments), ``plot`` (CSV -> SVG), ``gradcheck``
(finite-difference verification).  Exit codes: 0 success, 1 runtime/IO
failure, 2 usage error.  The only environment variable honored is
``CFOLAB_WORKERS`` (thread count for dataset generation).
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .. import dataset as ds
from ..errors import DivergenceError, FormatError
from ..estimators import evaluate_estimator
from ..neuralnet import (
    HeadKind,
    ModelConfig,
    TrainConfig,
    evaluate_model,
    grad_check,
    load_model,
    save_model,
    train,
)
from .expconfig import parse_channel, parse_config, parse_mods
from .sweeps import SWEEP_KINDS, file_digest, run_sweep, write_history_csv

__all__ = ["main", "build_parser"]


def _workers() -> int:
    return max(1, int(os.environ.get("CFOLAB_WORKERS", "1")))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfolab",
        description="Carrier frequency offset estimation workbench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a labeled dataset file")
    p.add_argument("--mods", required=True, help="comma list: bpsk,fsk2,qam16,pam4")
    p.add_argument("--snr-min", type=float, required=True)
    p.add_argument("--snr-max", type=float, required=True)
    p.add_argument("--snr-step", type=float, default=2.0)
    p.add_argument("--per-cell", type=int, required=True, help="frames per (modulation, SNR) cell")
    p.add_argument("--len", type=int, required=True, dest="length")
    p.add_argument("--os", type=int, required=True, dest="oversampling")
    p.add_argument("--channel", choices=["awgn", "rayleigh"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cfo-min", type=float, default=-0.2)
    p.add_argument("--cfo-max", type=float, default=0.2)
    p.add_argument("--rolloff-min", type=float, default=0.2)
    p.add_argument("--rolloff-max", type=float, default=0.7)
    p.add_argument("--out", required=True)

    p = sub.add_parser("baseline", help="evaluate a classical estimator")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["kay", "kay2", "autocorr", "ml"], required=True)
    p.add_argument("--power", type=int, default=2, help="kay2 power")
    p.add_argument("--lag", type=int, default=1, help="autocorr lag")
    p.add_argument("--zero-pad", type=int, default=8, help="ml zero-pad factor")
    p.add_argument("--per-mod", action="store_true", help="one row per (SNR, modulation)")
    p.add_argument("--out", help="CSV path (stdout when omitted)")

    p = sub.add_parser("train", help="train the regression model")
    p.add_argument("--train", required=True, dest="train_path")
    p.add_argument("--eval", required=True, dest="eval_path")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--history", help="history CSV path (default: <out>.history.csv)")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--lr-drops", default="5,10", help="comma list of 1-indexed epochs")
    p.add_argument("--lr-drop-factor", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel-size", type=int, default=3)
    p.add_argument("--head", choices=["gap", "flatten"], default="gap")

    p = sub.add_parser("eval", help="evaluate a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="CSV path (stdout when omitted)")

    p = sub.add_parser("sweep", help="run a multi-variant experiment")
    p.add_argument("--kind", choices=list(SWEEP_KINDS), required=True)
    p.add_argument("--config", required=True, help="flat key = value config file")

    p = sub.add_parser("plot", help="render metrics CSVs to an SVG")
    p.add_argument("--out", required=True)
    p.add_argument("csvs", nargs="+")

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-4)
    return parser


def _cmd_generate(args) -> int:
    spec = ds.DatasetSpec(
        modulations=parse_mods(args.mods),
        snr_grid_db=ds.snr_grid(args.snr_min, args.snr_max, args.snr_step),
        frames_per_cell=args.per_cell,
        length=args.length,
        oversampling=args.oversampling,
        channel=parse_channel(args.channel),
        master_seed=args.seed,
        cfo_range=(args.cfo_min, args.cfo_max),
        rolloff_range=(args.rolloff_min, args.rolloff_max),
    )
    spec.validate()
    records = ds.generate(spec, workers=_workers())
    ds.write_dataset(records, args.out, spec=spec)
    print(f"records={len(records)} digest=sha256:{file_digest(args.out)}")
    return 0


def _cmd_baseline(args) -> int:
    records = ds.read_dataset(args.data)
    params = {}
    if args.method == "kay2":
        params["power"] = args.power
    elif args.method == "autocorr":
        params["lag"] = args.lag
    elif args.method == "ml":
        params["zero_pad_factor"] = args.zero_pad
    from ..estimators import make_estimator

    report = evaluate_estimator(
        records, make_estimator(args.method, **params), method_name=args.method,
        by_modulation=args.per_mod,
    )
    if args.out:
        report.write_csv(args.out)
        print(f"wrote {args.out} ({len(report.rows)} rows)")
    else:
        sys.stdout.write(report.to_csv())
    return 0


def _cmd_train(args) -> int:
    train_records = ds.read_dataset(args.train_path)
    eval_records = ds.read_dataset(args.eval_path)
    length = train_records[0].frame.size
    head = HeadKind.FLATTEN if args.head == "flatten" else HeadKind.GLOBAL_AVG_POOL
    model_cfg = ModelConfig(input_length=length, kernel_size=args.kernel_size, head=head)
    model_cfg.validate()
    if eval_records[0].frame.size != length and head == HeadKind.FLATTEN:
        raise ValueError(
            f"eval frame length {eval_records[0].frame.size} != train length {length}"
        )
    drops = tuple(int(t) for t in args.lr_drops.split(",") if t.strip())
    train_cfg = TrainConfig(
        epochs=args.epochs,
        base_lr=args.lr,
        lr_drop_epochs=drops,
        lr_drop_factor=args.lr_drop_factor,
        batch_size=args.batch,
        seed=args.seed,
    )
    train_cfg.validate()
    history_path = args.history or f"{args.out}.history.csv"
    try:
        result = train(model_cfg, train_records, eval_records, train_cfg)
    except DivergenceError as exc:
        write_history_csv(exc.history, history_path)
        print(f"training diverged: {exc} (partial history in {history_path})", file=sys.stderr)
        return 1
    save_model(result.model, args.out)
    write_history_csv(result.history, history_path)
    print(
        f"model={args.out} digest=sha256:{file_digest(args.out)} "
        f"final_eval_mse={result.history[-1].eval_mse!r}"
    )
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    records = ds.read_dataset(args.data)
    report = evaluate_model(model, records)
    if args.out:
        report.write_csv(args.out)
        print(f"wrote {args.out} ({len(report.rows)} rows)")
    else:
        sys.stdout.write(report.to_csv())
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if "CFOLAB_WORKERS" in os.environ:
        cfg.workers = _workers()
    manifest, all_ok = run_sweep(args.kind, cfg)
    failed = [v["name"] for v in manifest["variants"] if v.get("status") != "ok"]
    print(
        f"sweep {args.kind}: {len(manifest['variants'])} entries, "
        f"manifest={Path(cfg.out_dir) / 'manifest.json'}"
    )
    if failed:
        print(f"failed variants: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _cmd_plot(args) -> int:
    from .svgplot import plot_csvs

    plot_csvs(args.csvs, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    err = grad_check(seed=args.seed, eps=args.eps)
    print(f"max relative gradient error: {err:.3e}")
    return 0 if err < 1e-4 else 1


_COMMANDS = {
    "generate": _cmd_generate,
    "baseline": _cmd_baseline,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "plot": _cmd_plot,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
