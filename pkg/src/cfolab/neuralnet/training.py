"""Adam optimization and the epoch training loop."""

from dataclasses import dataclass, field

import numpy as np

from .. import dataset as ds
from ..errors import DivergenceError
from ..metrics import MetricsReport, MetricsRow
from . import model as mdl
from .ops import Mode, mse_loss

__all__ = [
    "AdamState",
    "adam_init",
    "adam_step",
    "TrainConfig",
    "EpochStats",
    "TrainResult",
    "learning_rate",
    "train",
    "evaluate_model",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment accumulators keyed like ``named_params``."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def adam_init(model: mdl.Model) -> AdamState:
    return AdamState(
        m={name: np.zeros_like(p) for name, p in mdl.named_params(model)},
        v={name: np.zeros_like(p) for name, p in mdl.named_params(model)},
    )


def adam_step(model: mdl.Model, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place on the model parameters.

    Raises :class:`DivergenceError` on any non-finite gradient rather
    than clipping it.
    """
    if lr <= 0:
        raise ValueError(f"lr {lr} must be positive")
    for name, _ in mdl.named_params(model):
        if not np.all(np.isfinite(grads[name])):
            raise DivergenceError(f"non-finite gradient in {name}")
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1**state.t
    bc2 = 1.0 - ADAM_BETA2**state.t
    for name, p in mdl.named_params(model):
        g = grads[name]
        m, v = state.m[name], state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    base_lr: float = 0.02
    lr_drop_epochs: tuple[int, ...] = (5, 10)
    lr_drop_factor: float = 0.1
    batch_size: int = 64
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs {self.epochs} must be >= 1")
        if self.batch_size < 1:
            raise ValueError(f"batch_size {self.batch_size} must be >= 1")
        if self.base_lr <= 0:
            raise ValueError(f"base_lr {self.base_lr} must be positive")
        for e in self.lr_drop_epochs:
            if not 1 <= e <= self.epochs:
                raise ValueError(f"lr drop epoch {e} outside [1, {self.epochs}]")


def learning_rate(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate for a 1-indexed epoch: the base rate multiplied by
    the drop factor once per drop epoch reached."""
    drops = sum(1 for e in cfg.lr_drop_epochs if epoch >= e)
    return cfg.base_lr * cfg.lr_drop_factor**drops


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    eval_mse: float


@dataclass
class TrainResult:
    model: mdl.Model
    history: list[EpochStats]
    adam_state: AdamState


def _eval_mse(model: mdl.Model, records) -> float:
    x, y = ds.records_to_tensors(records)
    pred = mdl.predict(model, x)
    err = (pred.astype(np.float64) - y.astype(np.float64)).ravel()
    return float(np.mean(err * err))


def train(model_config: mdl.ModelConfig, train_records, eval_records, cfg: TrainConfig) -> TrainResult:
    """Train a freshly initialized model on labeled records.

    Each epoch reshuffles with a permutation derived from ``(seed,
    epoch)``, runs Adam updates in TRAIN mode, then measures eval MSE in
    EVAL mode.  The history has exactly ``cfg.epochs`` entries.  A
    non-finite loss or gradient aborts with a :class:`DivergenceError`
    carrying the completed epochs as diagnostic history.
    """
    cfg.validate()
    train_records = list(train_records)
    eval_records = list(eval_records)
    if not train_records:
        raise ValueError("empty training set")
    model = mdl.init_model(model_config, seed=cfg.seed)
    state = adam_init(model)
    history: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        lr = learning_rate(cfg, epoch)
        sq_sum = 0.0
        n_seen = 0
        for xb, yb in ds.batch_iter(
            train_records, cfg.batch_size, shuffle_seed=cfg.seed, epoch=epoch, train=True
        ):
            out, caches = mdl.model_forward(model, xb, Mode.TRAIN, return_caches=True)
            loss, grad = mse_loss(out, yb)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}", history=history
                )
            try:
                grads = mdl.model_backward(model, caches, grad)
                adam_step(model, grads, state, lr)
            except DivergenceError as exc:
                raise DivergenceError(
                    f"epoch {epoch}: {exc}", history=history
                ) from exc
            sq_sum += loss * xb.shape[0]
            n_seen += xb.shape[0]
        history.append(
            EpochStats(
                epoch=epoch,
                lr=lr,
                train_loss=sq_sum / n_seen,
                eval_mse=_eval_mse(model, eval_records) if eval_records else float("nan"),
            )
        )
    return TrainResult(model=model, history=history, adam_state=state)


def evaluate_model(model: mdl.Model, records, method_name: str = "iq-resnet") -> MetricsReport:
    """Per-SNR MSE of the model's estimates over labeled records."""
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    x, y = ds.records_to_tensors(records)
    pred = mdl.predict(model, x).ravel().astype(np.float64)
    truth = y.ravel().astype(np.float64)
    groups: dict[float, list[float]] = {}
    for rec, p, t in zip(records, pred, truth):
        groups.setdefault(float(rec.snr_db), []).append((t - p) ** 2)
    rows = [
        MetricsRow(
            snr_db=snr,
            method=method_name,
            mse=float(np.mean(np.asarray(errs, dtype=np.float64))),
            count=len(errs),
        )
        for snr, errs in sorted(groups.items())
    ]
    return MetricsReport(rows=rows)
