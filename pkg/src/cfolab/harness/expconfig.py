"""Flat key = value experiment configuration files.

One option per line, ``#`` starts a comment, unknown keys are rejected.
Example::

    out_dir = runs/demo
    seed = 7
    mods = bpsk
    snr_min = 0
    snr_max = 20
    snr_step = 10
    per_cell_train = 50
    per_cell_test = 20
    length = 512
    oversampling = 8
    channel = awgn
    epochs = 2
    lr_drop_epochs =
"""

from dataclasses import dataclass, fields
from pathlib import Path

from ..dataset import snr_grid
from ..waveform import Channel, Modulation

__all__ = ["ExperimentConfig", "parse_config", "parse_mods", "parse_channel"]


def parse_channel(text: str) -> Channel:
    name = text.strip().upper()
    if name == "RAYLEIGH":
        name = "FLAT_RAYLEIGH"
    try:
        return Channel[name]
    except KeyError:
        raise ValueError(f"unknown channel {text!r}") from None


def parse_mods(text: str) -> tuple[Modulation, ...]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ValueError("empty modulation list")
    try:
        return tuple(Modulation[name.upper()] for name in names)
    except KeyError as exc:
        raise ValueError(f"unknown modulation {exc.args[0]!r}") from None


def _parse_int_list(text: str) -> tuple[int, ...]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    return tuple(int(t) for t in items)


@dataclass
class ExperimentConfig:
    out_dir: Path
    seed: int = 7
    mods: tuple[Modulation, ...] = (Modulation.BPSK,)
    snr_min: float = -20.0
    snr_max: float = 30.0
    snr_step: float = 2.0
    per_cell_train: int = 60
    per_cell_test: int = 60
    length: int = 1024
    oversampling: int = 8
    channel: Channel = Channel.AWGN
    epochs: int = 20
    batch_size: int = 64
    base_lr: float = 0.02
    lr_drop_epochs: tuple[int, ...] = (5, 10)
    lr_drop_factor: float = 0.1
    kernel_size: int = 3
    head: str = "gap"
    workers: int = 1

    @property
    def snr_grid_db(self) -> tuple[float, ...]:
        return snr_grid(self.snr_min, self.snr_max, self.snr_step)

    def validate(self) -> None:
        if self.head not in ("flatten", "gap"):
            raise ValueError(f"head must be 'flatten' or 'gap', got {self.head!r}")
        if not self.out_dir.parent.exists():
            raise ValueError(f"out_dir parent {self.out_dir.parent} does not exist")
        self.snr_grid_db  # raises on a malformed grid


_PARSERS = {
    "out_dir": Path,
    "seed": int,
    "mods": parse_mods,
    "snr_min": float,
    "snr_max": float,
    "snr_step": float,
    "per_cell_train": int,
    "per_cell_test": int,
    "length": int,
    "oversampling": int,
    "channel": parse_channel,
    "epochs": int,
    "batch_size": int,
    "base_lr": float,
    "lr_drop_epochs": _parse_int_list,
    "lr_drop_factor": float,
    "kernel_size": int,
    "head": str,
    "workers": int,
}


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a config file; unknown keys are an error."""
    path = Path(path)
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    if "out_dir" not in values:
        raise ValueError(f"{path}: missing required key 'out_dir'")
    known = {f.name for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig(**{k: v for k, v in values.items() if k in known})
    cfg.validate()
    return cfg
