"""Finite-difference verification of the analytic gradients.

This is the primary correctness oracle for every backward operation: a
tiny double-precision model is built, the analytic gradient of the MSE
loss is compared against central finite differences on a sampled set of
coordinates spanning every parameter kind.
"""

import numpy as np

from . import model as mdl
from .ops import Mode, mse_loss

__all__ = ["tiny_config", "grad_check"]


def tiny_config(input_length: int = 16) -> mdl.ModelConfig:
    """A scaled-down config (stem 4, widths 4/8/16) for gradient checks."""
    return mdl.ModelConfig(
        input_length=input_length,
        stem_channels=4,
        block_channels=(4, 8, 16),
        block_strides=(1, 2, 2),
    )


def _loss_at(model, x, y) -> float:
    out = mdl.model_forward(model, x, Mode.TRAIN)
    return mse_loss(out, y)[0]


def grad_check(config: mdl.ModelConfig | None = None, seed: int = 0, eps: float = 1e-4, min_coords: int = 200) -> float:
    """Worst relative error between analytic and numeric gradients.

    Builds a DOUBLE-precision model from ``config`` (default
    :func:`tiny_config`), draws a small random batch, and compares the
    analytic gradient against ``(loss(p+eps) - loss(p-eps)) / (2*eps)``
    on at least ``min_coords`` coordinates covering every parameter
    array.  A healthy implementation stays below 1e-4.
    """
    if config is None:
        config = tiny_config()
    model = mdl.init_model(config, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    x = rng.standard_normal((3, 2, config.input_length))
    y = rng.uniform(-0.2, 0.2, size=(3, 1))

    out, caches = mdl.model_forward(model, x, Mode.TRAIN, return_caches=True)
    _, grad_pred = mse_loss(out, y)
    analytic = mdl.model_backward(model, caches, grad_pred)

    params = mdl.named_params(model)
    per_array = max(2, min_coords // len(params) + 1)
    worst = 0.0
    for name, arr in params:
        flat = arr.ravel()
        count = min(flat.size, per_array)
        idx = rng.choice(flat.size, size=count, replace=False)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + eps
            lo_hi = _loss_at(model, x, y)
            flat[j] = orig - eps
            lo_lo = _loss_at(model, x, y)
            flat[j] = orig
            numeric = (lo_hi - lo_lo) / (2.0 * eps)
            a = float(analytic[name].ravel()[j])
            # Floor the denominator: conv biases feeding a batchnorm have
            # structurally zero gradients, so both sides are rounding
            # noise there and only absolute agreement is meaningful.
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, err)
    return worst
