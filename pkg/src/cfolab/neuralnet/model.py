"""Residual 1-D convolutional regressor over (2, L) IQ inputs.

Architecture: a stem convolution lifts the 2 IQ channels to the first
block width, three residual blocks follow (each two conv+batchnorm
stages; blocks that change width or stride project the skip path with a
strided 1x1 convolution plus batchnorm), and a linear head maps the
final feature map to one scalar per frame.  With the default widths
(16, 32, 64) and strides (1, 2, 2) the shapes run
``(B,2,L) -> (B,16,L) -> (B,16,L) -> (B,32,L/2) -> (B,64,L/4) -> (B,1)``.

Two heads are implemented.  ``GLOBAL_AVG_POOL`` (the default) averages
the final feature map over time and feeds 64 features to the linear
output; it is length-agnostic and trains stably at the default Adam
learning rate of 0.02.  ``FLATTEN`` feeds all ``64 * L/4`` features to
the output; with tens of thousands of head weights, coherent
per-coordinate Adam steps at lr 0.02 swing the prediction by hundreds on
the first updates, so expect to lower the learning rate when using it.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import ops
from .ops import Mode

__all__ = [
    "HeadKind",
    "ModelConfig",
    "ConvParams",
    "BatchNormParams",
    "BlockParams",
    "ModelParams",
    "Model",
    "init_model",
    "param_count",
    "named_params",
    "model_forward",
    "model_backward",
    "residual_block_forward",
    "predict",
]


class HeadKind(Enum):
    FLATTEN = 0
    GLOBAL_AVG_POOL = 1


@dataclass(frozen=True)
class ModelConfig:
    input_length: int
    stem_channels: int = 16
    block_channels: tuple[int, ...] = (16, 32, 64)
    block_strides: tuple[int, ...] = (1, 2, 2)
    kernel_size: int = 3
    head: HeadKind = HeadKind.GLOBAL_AVG_POOL

    def validate(self) -> None:
        if len(self.block_channels) != len(self.block_strides):
            raise ValueError("block_channels and block_strides lengths differ")
        if not self.block_channels:
            raise ValueError("need at least one block")
        if self.stem_channels != self.block_channels[0]:
            raise ValueError("stem_channels must equal the first block width")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size {self.kernel_size} must be odd")
        if any(s not in (1, 2) for s in self.block_strides):
            raise ValueError("block strides must be 1 or 2")
        total = math.prod(self.block_strides)
        if self.input_length < total or self.input_length % total:
            raise ValueError(
                f"input_length {self.input_length} must be divisible by {total}"
            )

    @property
    def stride_product(self) -> int:
        return math.prod(self.block_strides)

    @property
    def head_features(self) -> int:
        if self.head == HeadKind.FLATTEN:
            return self.block_channels[-1] * (self.input_length // self.stride_product)
        return self.block_channels[-1]


@dataclass
class ConvParams:
    kernels: np.ndarray  # (Co, Ci, K)
    bias: np.ndarray  # (Co,)


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class BlockParams:
    conv1: ConvParams
    bn1: BatchNormParams
    conv2: ConvParams
    bn2: BatchNormParams
    proj: ConvParams | None = None  # 1x1 strided projection when shape changes
    proj_bn: BatchNormParams | None = None


@dataclass
class ModelParams:
    stem: ConvParams
    blocks: list[BlockParams]
    head_w: np.ndarray  # (F, 1)
    head_b: np.ndarray  # (1,)


@dataclass
class Model:
    config: ModelConfig
    params: ModelParams

    @property
    def dtype(self):
        return self.params.stem.kernels.dtype


def _init_conv(rng, c_out, c_in, k, dtype) -> ConvParams:
    std = math.sqrt(2.0 / (c_in * k))
    kernels = (rng.standard_normal((c_out, c_in, k)) * std).astype(dtype)
    return ConvParams(kernels=kernels, bias=np.zeros(c_out, dtype=dtype))


def _init_bn(c, dtype) -> BatchNormParams:
    return BatchNormParams(
        gamma=np.ones(c, dtype=dtype),
        beta=np.zeros(c, dtype=dtype),
        running_mean=np.zeros(c, dtype=dtype),
        running_var=np.ones(c, dtype=dtype),
    )


def init_model(config: ModelConfig, seed: int, dtype=np.float32) -> Model:
    """Seeded initialization: He-scaled Gaussian kernels, zero biases,
    identity batchnorm, uniform ``+-1/sqrt(fan_in)`` head."""
    config.validate()
    rng = np.random.default_rng(seed)
    k = config.kernel_size
    stem = _init_conv(rng, config.stem_channels, 2, k, dtype)
    blocks = []
    c_prev = config.stem_channels
    for c_out, stride in zip(config.block_channels, config.block_strides):
        block = BlockParams(
            conv1=_init_conv(rng, c_out, c_prev, k, dtype),
            bn1=_init_bn(c_out, dtype),
            conv2=_init_conv(rng, c_out, c_out, k, dtype),
            bn2=_init_bn(c_out, dtype),
        )
        if stride != 1 or c_out != c_prev:
            block.proj = _init_conv(rng, c_out, c_prev, 1, dtype)
            block.proj_bn = _init_bn(c_out, dtype)
        blocks.append(block)
        c_prev = c_out
    f = config.head_features
    bound = 1.0 / math.sqrt(f)
    head_w = rng.uniform(-bound, bound, size=(f, 1)).astype(dtype)
    head_b = np.zeros(1, dtype=dtype)
    return Model(config=config, params=ModelParams(stem, blocks, head_w, head_b))


def named_params(model: Model) -> list[tuple[str, np.ndarray]]:
    """Learnable parameters in a fixed, documented order.

    Order: stem kernels/bias; per block conv1 k/b, bn1 gamma/beta,
    conv2 k/b, bn2 gamma/beta, then projection k/b and its bn gamma/beta
    when present; head weight, head bias.  Running statistics are not
    learnable and are excluded.
    """
    p = model.params
    out = [("stem.kernels", p.stem.kernels), ("stem.bias", p.stem.bias)]
    for i, blk in enumerate(p.blocks):
        pre = f"block{i}"
        out += [
            (f"{pre}.conv1.kernels", blk.conv1.kernels),
            (f"{pre}.conv1.bias", blk.conv1.bias),
            (f"{pre}.bn1.gamma", blk.bn1.gamma),
            (f"{pre}.bn1.beta", blk.bn1.beta),
            (f"{pre}.conv2.kernels", blk.conv2.kernels),
            (f"{pre}.conv2.bias", blk.conv2.bias),
            (f"{pre}.bn2.gamma", blk.bn2.gamma),
            (f"{pre}.bn2.beta", blk.bn2.beta),
        ]
        if blk.proj is not None:
            out += [
                (f"{pre}.proj.kernels", blk.proj.kernels),
                (f"{pre}.proj.bias", blk.proj.bias),
                (f"{pre}.proj_bn.gamma", blk.proj_bn.gamma),
                (f"{pre}.proj_bn.beta", blk.proj_bn.beta),
            ]
    out += [("head.w", p.head_w), ("head.b", p.head_b)]
    return out


def param_count(config: ModelConfig) -> int:
    """Learnable parameter count as a pure function of the config."""
    k = config.kernel_size
    total = config.stem_channels * 2 * k + config.stem_channels
    c_prev = config.stem_channels
    for c_out, stride in zip(config.block_channels, config.block_strides):
        total += c_out * c_prev * k + c_out  # conv1
        total += 2 * c_out  # bn1
        total += c_out * c_out * k + c_out  # conv2
        total += 2 * c_out  # bn2
        if stride != 1 or c_out != c_prev:
            total += c_out * c_prev + c_out + 2 * c_out  # projection + bn
        c_prev = c_out
    total += config.head_features + 1
    return total


def residual_block_forward(x, block: BlockParams, stride: int, mode: Mode, padding: int):
    """One residual block: Conv-BN-ReLU-Conv-BN plus (projected) skip,
    then ReLU.  Returns ``(out, cache)``."""
    a = ops.conv1d_forward(x, block.conv1.kernels, block.conv1.bias, stride, padding)
    b, bn1c = ops.batchnorm_forward(
        a, block.bn1.gamma, block.bn1.beta, block.bn1.running_mean,
        block.bn1.running_var, mode,
    )
    r = ops.relu(b)
    c = ops.conv1d_forward(r, block.conv2.kernels, block.conv2.bias, 1, padding)
    d, bn2c = ops.batchnorm_forward(
        c, block.bn2.gamma, block.bn2.beta, block.bn2.running_mean,
        block.bn2.running_var, mode,
    )
    if block.proj is not None:
        s = ops.conv1d_forward(x, block.proj.kernels, block.proj.bias, stride, 0)
        skip, bnpc = ops.batchnorm_forward(
            s, block.proj_bn.gamma, block.proj_bn.beta, block.proj_bn.running_mean,
            block.proj_bn.running_var, mode,
        )
    else:
        if d.shape != x.shape:
            raise ValueError(
                f"identity skip needs matching shapes, got {x.shape} -> {d.shape}"
            )
        skip, bnpc = x, None
    pre = d + skip
    out = ops.relu(pre)
    cache = (x, b, r, bn1c, bn2c, bnpc, pre)
    return out, cache


def _residual_block_backward(grad_out, block: BlockParams, stride: int, padding: int, cache):
    x, b, r, bn1c, bn2c, bnpc, pre = cache
    g = ops.relu_backward(grad_out, pre)
    # Main path.
    gd, g_gamma2, g_beta2 = ops.batchnorm_backward(g, bn2c)
    gr, gk2, gb2 = ops.conv1d_backward(gd, r, block.conv2.kernels, 1, padding)
    gb_in = ops.relu_backward(gr, b)
    ga, g_gamma1, g_beta1 = ops.batchnorm_backward(gb_in, bn1c)
    gx, gk1, gb1 = ops.conv1d_backward(ga, x, block.conv1.kernels, stride, padding)
    grads = {
        "conv1.kernels": gk1,
        "conv1.bias": gb1,
        "bn1.gamma": g_gamma1,
        "bn1.beta": g_beta1,
        "conv2.kernels": gk2,
        "conv2.bias": gb2,
        "bn2.gamma": g_gamma2,
        "bn2.beta": g_beta2,
    }
    # Skip path.
    if block.proj is not None:
        gs, g_gammap, g_betap = ops.batchnorm_backward(g, bnpc)
        gxs, gkp, gbp = ops.conv1d_backward(gs, x, block.proj.kernels, stride, 0)
        gx = gx + gxs
        grads.update(
            {
                "proj.kernels": gkp,
                "proj.bias": gbp,
                "proj_bn.gamma": g_gammap,
                "proj_bn.beta": g_betap,
            }
        )
    else:
        gx = gx + g
    return gx, grads


def model_forward(model: Model, x, mode: Mode = Mode.EVAL, return_caches: bool = False):
    """Run the full network on ``(B, 2, L)`` inputs, returning ``(B, 1)``.

    TRAIN mode uses batch statistics (and updates running statistics);
    EVAL mode uses the stored running statistics.  With
    ``return_caches=True`` also returns the caches consumed by
    :func:`model_backward`.
    """
    cfg, p = model.config, model.params
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[1] != 2:
        raise ValueError(f"expected input (B, 2, L), got {x.shape}")
    if cfg.head == HeadKind.FLATTEN:
        if x.shape[2] != cfg.input_length:
            raise ValueError(
                f"input length {x.shape[2]} does not match configured "
                f"{cfg.input_length} (FLATTEN head is length-specific)"
            )
    elif x.shape[2] % cfg.stride_product:
        raise ValueError(
            f"input length {x.shape[2]} not divisible by {cfg.stride_product}"
        )
    if x.dtype != model.dtype:
        raise ValueError(f"input dtype {x.dtype} != model dtype {model.dtype}")
    pad = cfg.kernel_size // 2
    h = ops.conv1d_forward(x, p.stem.kernels, p.stem.bias, 1, pad)
    block_caches = []
    for blk, stride in zip(p.blocks, cfg.block_strides):
        h, cache = residual_block_forward(h, blk, stride, mode, pad)
        block_caches.append(cache)
    if cfg.head == HeadKind.FLATTEN:
        feats = h.reshape(h.shape[0], -1)
    else:
        feats = h.mean(axis=2)
    out = np.einsum("bf,fo->bo", feats, p.head_w) + p.head_b[None, :]
    if not return_caches:
        return out
    caches = {"x": x, "h_final": h, "feats": feats, "blocks": block_caches}
    return out, caches


def model_backward(model: Model, caches, grad_out) -> dict[str, np.ndarray]:
    """Gradient of the loss w.r.t. every learnable parameter.

    ``caches`` must come from a TRAIN-mode forward with
    ``return_caches=True``; ``grad_out`` is the loss gradient w.r.t. the
    ``(B, 1)`` output.  Returns a dict keyed like :func:`named_params`.
    """
    if not isinstance(caches, dict) or "blocks" not in caches:
        raise ValueError("stale or missing caches: run a TRAIN-mode forward first")
    cfg, p = model.config, model.params
    feats = caches["feats"]
    h_final = caches["h_final"]
    grads: dict[str, np.ndarray] = {}
    grads["head.w"] = np.einsum("bf,bo->fo", feats, grad_out)
    grads["head.b"] = grad_out.sum(axis=0)
    g_feats = np.einsum("bo,fo->bf", grad_out, p.head_w)
    if cfg.head == HeadKind.FLATTEN:
        gh = g_feats.reshape(h_final.shape)
    else:
        gh = np.repeat(
            g_feats[:, :, None] / h_final.shape[2], h_final.shape[2], axis=2
        ).astype(h_final.dtype)
    pad = cfg.kernel_size // 2
    for i in range(len(p.blocks) - 1, -1, -1):
        gh, block_grads = _residual_block_backward(
            gh, p.blocks[i], cfg.block_strides[i], pad, caches["blocks"][i]
        )
        for key, val in block_grads.items():
            grads[f"block{i}.{key}"] = val
    _, gk, gb = ops.conv1d_backward(gh, caches["x"], p.stem.kernels, 1, pad)
    grads["stem.kernels"] = gk
    grads["stem.bias"] = gb
    return grads


def predict(model: Model, x, batch_size: int = 256) -> np.ndarray:
    """EVAL-mode forward in batches; returns ``(B, 1)`` estimates."""
    outs = [
        model_forward(model, x[i : i + batch_size], Mode.EVAL)
        for i in range(0, x.shape[0], batch_size)
    ]
    return np.concatenate(outs, axis=0)
