"""Experiment sweeps: datasets, baselines, training, evaluation, manifest.

Each sweep kind expands a base :class:`ExperimentConfig` into variants,
materializes the variant datasets (if absent), runs the kay / kay2
baselines and a model train/eval per variant, and writes one metrics CSV
per (variant, method) plus a JSON manifest listing every artifact with
its seed and digest.  Everything is a pure function of the config, so
re-running a sweep reproduces identical files.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ..dataset import DatasetSpec, filter_split, generate, read_dataset, write_dataset
from ..estimators import evaluate_estimator
from ..neuralnet import (
    HeadKind,
    ModelConfig,
    TrainConfig,
    evaluate_model,
    save_model,
    train,
)
from ..waveform import Channel, Modulation
from .expconfig import ExperimentConfig

__all__ = ["SWEEP_KINDS", "run_sweep", "file_digest", "derived_seed", "write_history_csv"]

SWEEP_KINDS = ("oversampling", "length", "channel", "adaptability")

BASELINE_METHODS = ("kay", "kay2")

HISTORY_HEADER = "epoch,lr,train_loss,eval_mse"


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def derived_seed(base: int, tag: str) -> int:
    """Disjoint 63-bit seed for a named artifact of a base seed."""
    digest = hashlib.sha256(f"{base}/{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(HISTORY_HEADER + "\n")
        for row in history:
            fh.write(f"{row.epoch},{row.lr!r},{row.train_loss!r},{row.eval_mse!r}\n")


def _safe_name(name: str) -> str:
    return name.replace(",", "+")


def _ensure_dataset(spec: DatasetSpec, path: Path, workers: int) -> dict:
    """Generate and write a dataset unless the file already exists."""
    if not path.exists():
        records = generate(spec, workers=workers)
        write_dataset(records, path, spec=spec)
    return {
        "path": str(path),
        "seed": spec.master_seed,
        "digest": file_digest(path),
    }


def _dataset_spec(cfg: ExperimentConfig, mods, per_cell: int, seed: int, *, length=None, oversampling=None, channel=None) -> DatasetSpec:
    return DatasetSpec(
        modulations=tuple(mods),
        snr_grid_db=cfg.snr_grid_db,
        frames_per_cell=per_cell,
        length=length if length is not None else cfg.length,
        oversampling=oversampling if oversampling is not None else cfg.oversampling,
        channel=channel if channel is not None else cfg.channel,
        master_seed=seed,
    )


def _model_config(cfg: ExperimentConfig, length: int) -> ModelConfig:
    head = HeadKind.FLATTEN if cfg.head == "flatten" else HeadKind.GLOBAL_AVG_POOL
    return ModelConfig(input_length=length, kernel_size=cfg.kernel_size, head=head)


def _train_config(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs,
        base_lr=cfg.base_lr,
        lr_drop_epochs=tuple(e for e in cfg.lr_drop_epochs if e <= cfg.epochs),
        lr_drop_factor=cfg.lr_drop_factor,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )


@dataclass
class _Variant:
    name: str
    length: int
    oversampling: int
    channel: Channel
    train_mods: tuple[Modulation, ...]


def _expand_variants(kind: str, cfg: ExperimentConfig) -> list[_Variant]:
    if kind == "oversampling":
        return [
            _Variant(f"os{r}", cfg.length, r, cfg.channel, cfg.mods)
            for r in (4, 8, 16)
        ]
    if kind == "length":
        return [
            _Variant(f"len{l}", l, cfg.oversampling, cfg.channel, cfg.mods)
            for l in (512, 1024, 2048)
        ]
    if kind == "channel":
        return [
            _Variant(
                "awgn" if ch == Channel.AWGN else "rayleigh",
                cfg.length,
                cfg.oversampling,
                ch,
                cfg.mods,
            )
            for ch in (Channel.AWGN, Channel.FLAT_RAYLEIGH)
        ]
    if kind == "adaptability":
        combos = [
            ("bpsk-bpsk", (Modulation.BPSK,)),
            ("2fsk-bpsk", (Modulation.FSK2,)),
            ("16qam-bpsk", (Modulation.QAM16,)),
            ("4pam-bpsk", (Modulation.PAM4,)),
            (
                "2fsk,16qam,4pam,bpsk-bpsk",
                (Modulation.BPSK, Modulation.FSK2, Modulation.QAM16, Modulation.PAM4),
            ),
            (
                "2fsk,16qam,4pam-bpsk",
                (Modulation.FSK2, Modulation.QAM16, Modulation.PAM4),
            ),
        ]
        return [
            _Variant(name, cfg.length, cfg.oversampling, cfg.channel, mods)
            for name, mods in combos
        ]
    raise ValueError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")


def _run_variant(variant: _Variant, cfg: ExperimentConfig, dirs, train_records, test_records, train_info, test_info) -> dict:
    csv_dir, model_dir, hist_dir = dirs
    safe = _safe_name(variant.name)
    entry: dict = {
        "name": variant.name,
        "train_dataset": train_info,
        "test_dataset": test_info,
        "csvs": [],
    }
    for method in BASELINE_METHODS:
        report = evaluate_estimator(test_records, method)
        out = csv_dir / f"{safe}-{method}.csv"
        report.write_csv(out)
        entry["csvs"].append(str(out))
    result = train(
        _model_config(cfg, variant.length), train_records, test_records, _train_config(cfg)
    )
    model_path = model_dir / f"{safe}.cfon"
    save_model(result.model, model_path)
    hist_path = hist_dir / f"{safe}-history.csv"
    write_history_csv(result.history, hist_path)
    report = evaluate_model(result.model, test_records)
    out = csv_dir / f"{safe}-iq-resnet.csv"
    report.write_csv(out)
    entry["csvs"].append(str(out))
    entry["model"] = {"path": str(model_path), "digest": file_digest(model_path)}
    entry["history"] = str(hist_path)
    entry["train_seed"] = cfg.seed
    entry["status"] = "ok"
    return entry


def run_sweep(kind: str, cfg: ExperimentConfig) -> tuple[dict, bool]:
    """Run one sweep; returns ``(manifest, all_ok)`` and writes
    ``manifest.json`` under ``cfg.out_dir``."""
    cfg.validate()
    variants = _expand_variants(kind, cfg)
    out_dir = Path(cfg.out_dir)
    data_dir = out_dir / "datasets"
    csv_dir = out_dir / "csv"
    model_dir = out_dir / "models"
    hist_dir = out_dir / "history"
    for d in (data_dir, csv_dir, model_dir, hist_dir):
        d.mkdir(parents=True, exist_ok=True)
    dirs = (csv_dir, model_dir, hist_dir)

    manifest: dict = {"kind": kind, "seed": cfg.seed, "variants": []}
    all_ok = True

    if kind == "adaptability":
        # One shared pool: all four modulations for training, BPSK-only test.
        all_mods = tuple(Modulation)
        train_spec = _dataset_spec(
            cfg, all_mods, cfg.per_cell_train, derived_seed(cfg.seed, "adapt/train")
        )
        test_spec = _dataset_spec(
            cfg, (Modulation.BPSK,), cfg.per_cell_test, derived_seed(cfg.seed, "adapt/test")
        )
        train_info = _ensure_dataset(train_spec, data_dir / "adapt-train.cfod", cfg.workers)
        test_info = _ensure_dataset(test_spec, data_dir / "adapt-test.cfod", cfg.workers)
        pool = read_dataset(train_info["path"])
        test_records = read_dataset(test_info["path"])
        baseline_entry: dict = {"name": "baselines", "csvs": [], "status": "ok"}
        for method in BASELINE_METHODS:
            report = evaluate_estimator(test_records, method)
            out = csv_dir / f"test-{method}.csv"
            report.write_csv(out)
            baseline_entry["csvs"].append(str(out))
        manifest["variants"].append(baseline_entry)
        for variant in variants:
            t_info = dict(train_info)
            t_info["filter_modulations"] = [m.name for m in variant.train_mods]
            try:
                records = filter_split(pool, lambda r: r.modulation in variant.train_mods)
                entry = _run_variant(
                    variant, cfg, dirs, records, test_records, t_info, test_info
                )
            except Exception as exc:  # record and continue with other variants
                entry = {"name": variant.name, "status": "failed", "error": str(exc)}
                all_ok = False
            manifest["variants"].append(entry)
    else:
        for variant in variants:
            safe = _safe_name(variant.name)
            try:
                train_spec = _dataset_spec(
                    cfg,
                    variant.train_mods,
                    cfg.per_cell_train,
                    derived_seed(cfg.seed, f"{variant.name}/train"),
                    length=variant.length,
                    oversampling=variant.oversampling,
                    channel=variant.channel,
                )
                test_spec = _dataset_spec(
                    cfg,
                    variant.train_mods,
                    cfg.per_cell_test,
                    derived_seed(cfg.seed, f"{variant.name}/test"),
                    length=variant.length,
                    oversampling=variant.oversampling,
                    channel=variant.channel,
                )
                train_info = _ensure_dataset(
                    train_spec, data_dir / f"{safe}-train.cfod", cfg.workers
                )
                test_info = _ensure_dataset(
                    test_spec, data_dir / f"{safe}-test.cfod", cfg.workers
                )
                train_records = read_dataset(train_info["path"])
                test_records = read_dataset(test_info["path"])
                entry = _run_variant(
                    variant, cfg, dirs, train_records, test_records, train_info, test_info
                )
            except Exception as exc:
                entry = {"name": variant.name, "status": "failed", "error": str(exc)}
                all_ok = False
            manifest["variants"].append(entry)

    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest, all_ok
