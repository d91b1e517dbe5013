"""From-scratch differentiable network: 1-D convolutions, batch
normalization, residual blocks, a linear head, Adam training, and
finite-difference gradient verification."""

from .gradcheck import grad_check, tiny_config
from .model import (
    HeadKind,
    Model,
    ModelConfig,
    init_model,
    model_backward,
    model_forward,
    named_params,
    param_count,
    predict,
    residual_block_forward,
)
from .modelio import load_model, save_model
from .ops import (
    Mode,
    batchnorm_backward,
    batchnorm_forward,
    conv1d_backward,
    conv1d_forward,
    mse_loss,
    relu,
    relu_backward,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainResult,
    adam_init,
    adam_step,
    evaluate_model,
    learning_rate,
    train,
)

__all__ = [
    "AdamState",
    "HeadKind",
    "Mode",
    "Model",
    "ModelConfig",
    "TrainConfig",
    "TrainResult",
    "adam_init",
    "adam_step",
    "batchnorm_backward",
    "batchnorm_forward",
    "conv1d_backward",
    "conv1d_forward",
    "evaluate_model",
    "grad_check",
    "init_model",
    "learning_rate",
    "load_model",
    "model_backward",
    "model_forward",
    "mse_loss",
    "named_params",
    "param_count",
    "predict",
    "relu",
    "relu_backward",
    "residual_block_forward",
    "save_model",
    "tiny_config",
    "train",
]
