"""Differentiable layer primitives on plain ndarrays.

Forward convolution accumulates per output element in (input-channel,
tap) order, exactly matching a scalar nested-loop evaluation, so results
are bitwise reproducible and directly comparable against a naive oracle.
The hot loop is JIT-compiled; backward passes use BLAS reductions (their
correctness oracle is finite differences, not bit equality).

All backward functions return exact gradients of their forward maps.
Set ``DEBUG_CHECK_FINITE = True`` to assert finiteness of every forward
and backward output (slow; meant for debugging).
"""

from enum import Enum

import numpy as np
from numba import njit
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Mode",
    "conv1d_forward",
    "conv1d_backward",
    "batchnorm_forward",
    "batchnorm_backward",
    "relu",
    "relu_backward",
    "mse_loss",
]

DEBUG_CHECK_FINITE = False


class Mode(Enum):
    TRAIN = "train"
    EVAL = "eval"


def _check_finite(name, *arrays):
    if DEBUG_CHECK_FINITE:
        for arr in arrays:
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite values in {name}")


@njit(cache=True)
def _conv1d_kernel(xp, kernels, bias, stride, out):  # pragma: no cover - jitted
    B, C, _ = xp.shape
    Co, _, K = kernels.shape
    n_out = out.shape[2]
    acc = np.empty((Co, n_out), dtype=xp.dtype)
    seg = np.empty(n_out, dtype=xp.dtype)
    for b in range(B):
        for o in range(Co):
            row = acc[o]
            bo = bias[o]
            for i in range(n_out):
                row[i] = bo
        for c in range(C):
            xrow = xp[b, c]
            for k in range(K):
                for i in range(n_out):
                    seg[i] = xrow[i * stride + k]
                for o in range(Co):
                    w = kernels[o, c, k]
                    row = acc[o]
                    for i in range(n_out):
                        row[i] += w * seg[i]
        for o in range(Co):
            row = acc[o]
            for i in range(n_out):
                out[b, o, i] = row[i]


def _pad_input(x, padding):
    if padding == 0:
        return x
    B, C, N = x.shape
    xp = np.zeros((B, C, N + 2 * padding), dtype=x.dtype)
    xp[:, :, padding : padding + N] = x
    return xp


def _conv_geometry(x, kernels, bias, stride, padding):
    if x.ndim != 3 or kernels.ndim != 3 or bias.ndim != 1:
        raise ValueError(
            f"expected input (B,C,N), kernels (Co,Ci,K), bias (Co,); got "
            f"{x.shape}, {kernels.shape}, {bias.shape}"
        )
    B, C, N = x.shape
    Co, Ci, K = kernels.shape
    if Ci != C:
        raise ValueError(f"kernels expect {Ci} input channels, input has {C}")
    if bias.shape[0] != Co:
        raise ValueError(f"bias has {bias.shape[0]} entries, kernels {Co} outputs")
    if not (x.dtype == kernels.dtype == bias.dtype):
        raise ValueError(
            f"mixed dtypes: input {x.dtype}, kernels {kernels.dtype}, "
            f"bias {bias.dtype}"
        )
    if stride < 1 or padding < 0:
        raise ValueError(f"invalid stride {stride} / padding {padding}")
    span = N + 2 * padding - K
    if span < 0:
        raise ValueError(f"kernel size {K} exceeds padded length {N + 2 * padding}")
    return span // stride + 1


def conv1d_forward(x, kernels, bias, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation over the last axis (no kernel flip).

    ``out[b,o,i] = bias[o] + sum_{c,k} kernels[o,c,k] *
    padded_x[b,c,i*stride+k]``, with output length
    ``(N + 2*padding - K) // stride + 1``.
    """
    n_out = _conv_geometry(x, kernels, bias, stride, padding)
    xp = _pad_input(x, padding)
    out = np.empty((x.shape[0], kernels.shape[0], n_out), dtype=x.dtype)
    _conv1d_kernel(xp, kernels, bias, stride, out)
    _check_finite("conv1d_forward", out)
    return out


def conv1d_backward(grad_out, x, kernels, stride: int = 1, padding: int = 0):
    """Gradients of :func:`conv1d_forward`.

    Returns ``(grad_input, grad_kernels, grad_bias)`` for the cached
    forward input ``x``.
    """
    n_out = _conv_geometry(x, kernels, np.zeros(kernels.shape[0], x.dtype), stride, padding)
    B, C, N = x.shape
    Co, _, K = kernels.shape
    if grad_out.shape != (B, Co, n_out):
        raise ValueError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{(B, Co, n_out)}"
        )
    xp = _pad_input(x, padding)
    grad_bias = grad_out.sum(axis=(0, 2))
    windows = sliding_window_view(xp, K, axis=2)[:, :, ::stride, :][:, :, :n_out, :]
    grad_kernels = np.tensordot(grad_out, windows, axes=([0, 2], [0, 2]))
    grad_xp = np.zeros_like(xp)
    for k in range(K):
        t = np.tensordot(grad_out, kernels[:, :, k], axes=([1], [0]))  # (B, n_out, C)
        grad_xp[:, :, k : k + stride * n_out : stride] += t.transpose(0, 2, 1)
    grad_x = grad_xp[:, :, padding : padding + N] if padding else grad_xp
    grad_x = np.ascontiguousarray(grad_x)
    _check_finite("conv1d_backward", grad_x, grad_kernels, grad_bias)
    return grad_x, grad_kernels, grad_bias


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode: Mode, momentum: float = 0.1, eps: float = 1e-5):
    """Per-channel batch normalization over the (batch, position) axes.

    TRAIN mode normalizes with the biased batch statistics and updates
    the running statistics in place as ``(1 - momentum) * old +
    momentum * batch``.  EVAL mode normalizes with the running statistics
    only.  Returns ``(out, cache)``; the cache (TRAIN only) feeds
    :func:`batchnorm_backward`.
    """
    if x.ndim != 3:
        raise ValueError(f"expected (B, C, N), got {x.shape}")
    B, C, N = x.shape
    if mode == Mode.TRAIN:
        if B * N < 2:
            raise ValueError("degenerate batch: TRAIN mode needs B*N >= 2 per channel")
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean[None, :, None]) * inv[None, :, None]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
        cache = (xhat, inv, gamma)
    else:
        inv = 1.0 / np.sqrt(running_var + eps)
        xhat = (x - running_mean[None, :, None]) * inv[None, :, None]
        cache = None
    out = gamma[None, :, None] * xhat + beta[None, :, None]
    _check_finite("batchnorm_forward", out)
    return out, cache


def batchnorm_backward(grad_out, cache):
    """Gradients of TRAIN-mode :func:`batchnorm_forward`.

    Includes the dependence of the batch mean and variance on the input.
    Returns ``(grad_input, grad_gamma, grad_beta)``.
    """
    if cache is None:
        raise ValueError("batchnorm_backward needs a TRAIN-mode cache")
    xhat, inv, gamma = cache
    m = xhat.shape[0] * xhat.shape[2]
    grad_beta = grad_out.sum(axis=(0, 2))
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2))
    grad_xhat = grad_out * gamma[None, :, None]
    t1 = grad_xhat.sum(axis=(0, 2), keepdims=True)
    t2 = (grad_xhat * xhat).sum(axis=(0, 2), keepdims=True)
    grad_x = (grad_xhat - t1 / m - xhat * (t2 / m)) * inv[None, :, None]
    _check_finite("batchnorm_backward", grad_x, grad_gamma, grad_beta)
    return grad_x, grad_gamma, grad_beta


def relu(x) -> np.ndarray:
    """Elementwise ``max(0, x)``."""
    return np.maximum(x, 0)


def relu_backward(grad_out, x) -> np.ndarray:
    """Mask the upstream gradient where the forward input was <= 0."""
    return np.where(x > 0, grad_out, 0)


def mse_loss(pred, target):
    """Mean squared error over the batch.

    Returns ``(loss, grad_pred)`` with ``loss = mean((target - pred)^2)``
    and ``grad_pred = (2/B) * (pred - target)``.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape}, target {target.shape}")
    if pred.shape[0] < 1:
        raise ValueError("empty batch")
    diff = pred - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = (2.0 / pred.shape[0]) * diff
    return loss, grad
