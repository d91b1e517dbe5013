"""Binary model container with bit-exact round-tripping.

Layout (little-endian)::

    magic  b"CFON"
    u16    format version (1)
    u32    input length L
    u8     head kind (0 = flatten, 1 = global average pool)
    u8     kernel size
    u8     block count
    per block: u16 channels, u8 stride
    then all parameters as contiguous f32, in the fixed order:
    stem kernels, stem bias; per block conv1 k/b, bn1 gamma/beta/mean/var,
    conv2 k/b, bn2 gamma/beta/mean/var, [projection k/b, its bn
    gamma/beta/mean/var]; head weight, head bias.

The stem width equals the first block width and is not stored
separately.  Parameters are stored in 32-bit precision, so round trips
are bit-exact for single-precision models.
"""

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import (
    BatchNormParams,
    BlockParams,
    ConvParams,
    HeadKind,
    Model,
    ModelConfig,
    ModelParams,
    named_params,
    param_count,
)

__all__ = ["save_model", "load_model"]

MAGIC = b"CFON"
VERSION = 1
_PREFIX = struct.Struct("<4sHIBBB")
_BLOCK = struct.Struct("<HB")


def _conv_arrays(conv: ConvParams):
    yield conv.kernels
    yield conv.bias


def _bn_arrays(bn: BatchNormParams):
    yield bn.gamma
    yield bn.beta
    yield bn.running_mean
    yield bn.running_var


def _all_arrays(params: ModelParams):
    yield from _conv_arrays(params.stem)
    for blk in params.blocks:
        yield from _conv_arrays(blk.conv1)
        yield from _bn_arrays(blk.bn1)
        yield from _conv_arrays(blk.conv2)
        yield from _bn_arrays(blk.bn2)
        if blk.proj is not None:
            yield from _conv_arrays(blk.proj)
            yield from _bn_arrays(blk.proj_bn)
    yield params.head_w
    yield params.head_b


def save_model(model: Model, path) -> None:
    """Serialize config and parameters; see the module docstring."""
    cfg = model.config
    cfg.validate()
    with open(path, "wb") as fh:
        fh.write(
            _PREFIX.pack(
                MAGIC,
                VERSION,
                cfg.input_length,
                cfg.head.value,
                cfg.kernel_size,
                len(cfg.block_channels),
            )
        )
        for ch, st in zip(cfg.block_channels, cfg.block_strides):
            fh.write(_BLOCK.pack(ch, st))
        for arr in _all_arrays(model.params):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _layer_plan(cfg: ModelConfig):
    """Yield ``(name, shape)`` for every stored array, in file order."""
    k = cfg.kernel_size
    yield "stem.kernels", (cfg.stem_channels, 2, k)
    yield "stem.bias", (cfg.stem_channels,)
    c_prev = cfg.stem_channels
    for i, (c, stride) in enumerate(zip(cfg.block_channels, cfg.block_strides)):
        pre = f"block{i}"
        yield f"{pre}.conv1.kernels", (c, c_prev, k)
        yield f"{pre}.conv1.bias", (c,)
        for part in ("gamma", "beta", "running_mean", "running_var"):
            yield f"{pre}.bn1.{part}", (c,)
        yield f"{pre}.conv2.kernels", (c, c, k)
        yield f"{pre}.conv2.bias", (c,)
        for part in ("gamma", "beta", "running_mean", "running_var"):
            yield f"{pre}.bn2.{part}", (c,)
        if stride != 1 or c != c_prev:
            yield f"{pre}.proj.kernels", (c, c_prev, 1)
            yield f"{pre}.proj.bias", (c,)
            for part in ("gamma", "beta", "running_mean", "running_var"):
                yield f"{pre}.proj_bn.{part}", (c,)
        c_prev = c
    yield "head.w", (cfg.head_features, 1)
    yield "head.b", (1,)


def load_model(path) -> Model:
    """Parse and validate a model file; raises FormatError on any
    structural problem, naming the offending field or layer."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _PREFIX.size:
        raise FormatError(f"{path}: {len(blob)} bytes is shorter than the header")
    magic, version, length, head_id, kernel_size, n_blocks = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    try:
        head = HeadKind(head_id)
    except ValueError:
        raise FormatError(f"{path}: unknown head kind {head_id}") from None
    off = _PREFIX.size
    channels, strides = [], []
    for i in range(n_blocks):
        if off + _BLOCK.size > len(blob):
            raise FormatError(f"{path}: truncated in block table entry {i}")
        ch, st = _BLOCK.unpack_from(blob, off)
        off += _BLOCK.size
        channels.append(ch)
        strides.append(st)
    if not channels:
        raise FormatError(f"{path}: zero blocks declared")
    cfg = ModelConfig(
        input_length=length,
        stem_channels=channels[0],
        block_channels=tuple(channels),
        block_strides=tuple(strides),
        kernel_size=kernel_size,
        head=head,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise FormatError(f"{path}: invalid config block: {exc}") from exc

    arrays = {}
    for name, shape in _layer_plan(cfg):
        n = int(np.prod(shape))
        nbytes = 4 * n
        if off + nbytes > len(blob):
            raise FormatError(
                f"{path}: truncated while reading {name}: need {nbytes} bytes "
                f"at offset {off}, file has {len(blob) - off}"
            )
        arrays[name] = (
            np.frombuffer(blob, dtype="<f4", count=n, offset=off)
            .reshape(shape)
            .copy()
        )
        off += nbytes
    if off != len(blob):
        raise FormatError(f"{path}: {len(blob) - off} unexpected trailing bytes")

    def conv(prefix):
        return ConvParams(kernels=arrays[f"{prefix}.kernels"], bias=arrays[f"{prefix}.bias"])

    def bn(prefix):
        return BatchNormParams(
            gamma=arrays[f"{prefix}.gamma"],
            beta=arrays[f"{prefix}.beta"],
            running_mean=arrays[f"{prefix}.running_mean"],
            running_var=arrays[f"{prefix}.running_var"],
        )

    blocks = []
    c_prev = cfg.stem_channels
    for i, (c, stride) in enumerate(zip(cfg.block_channels, cfg.block_strides)):
        pre = f"block{i}"
        blk = BlockParams(
            conv1=conv(f"{pre}.conv1"),
            bn1=bn(f"{pre}.bn1"),
            conv2=conv(f"{pre}.conv2"),
            bn2=bn(f"{pre}.bn2"),
        )
        if stride != 1 or c != c_prev:
            blk.proj = conv(f"{pre}.proj")
            blk.proj_bn = bn(f"{pre}.proj_bn")
        blocks.append(blk)
        c_prev = c
    params = ModelParams(
        stem=conv("stem"),
        blocks=blocks,
        head_w=arrays["head.w"],
        head_b=arrays["head.b"],
    )
    model = Model(config=cfg, params=params)
    got = sum(p.size for _, p in named_params(model))
    want = param_count(cfg)
    if got != want:
        raise FormatError(f"{path}: parameter count {got} != expected {want}")
    for i, blk in enumerate(blocks):
        bns = [("bn1", blk.bn1), ("bn2", blk.bn2)]
        if blk.proj_bn is not None:
            bns.append(("proj_bn", blk.proj_bn))
        for label, bnp in bns:
            if np.any(bnp.running_var <= 0):
                raise FormatError(
                    f"{path}: non-positive running variance in block{i}.{label}"
                )
    return model
