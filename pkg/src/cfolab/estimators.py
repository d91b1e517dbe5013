"""Classical non-data-aided carrier frequency offset estimators.

All estimators map one received frame to a single offset estimate in
cycles per sample.  They are pure functions of their inputs and invariant
to global complex scaling of the frame.

* ``kay_estimate`` -- weighted average of adjacent-sample phase
  increments with a parabolic smoothing window; exact on noiseless
  complex exponentials for ``|cfo| < 0.5``.
* ``power_kay_estimate`` -- raises the frame to an integer power first to
  strip M-ary phase modulation (power 2 removes BPSK), then divides the
  phase-increment estimate by the power.
* ``autocorr_estimate`` -- phase of the lag-k autocorrelation divided by
  ``2*pi*k``; aliases when ``lag * |cfo| >= 0.5``.
* ``periodogram_ml_estimate`` -- argmax of the zero-padded periodogram
  refined by three-point quadratic interpolation.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .metrics import MetricsReport, MetricsRow

__all__ = [
    "Method",
    "EstimateResult",
    "kay_weights",
    "kay_estimate",
    "power_kay_estimate",
    "autocorr_estimate",
    "periodogram_ml_estimate",
    "make_estimator",
    "evaluate_estimator",
]


class Method(Enum):
    KAY = "kay"
    KAY_POW = "kay2"
    AUTOCORR = "autocorr"
    PERIODOGRAM_ML = "ml"


@dataclass(frozen=True)
class EstimateResult:
    """One frequency estimate, in cycles per sample (|value| <= 0.5)."""

    cfo_hat: float
    method: Method


def _as_frame(frame) -> np.ndarray:
    # All estimator arithmetic runs in double precision, whatever the
    # storage dtype of the frame (datasets hold complex64 payloads).
    x = np.asarray(frame)
    if x.ndim != 1:
        raise ValueError(f"frame must be 1-D, got shape {x.shape}")
    return x.astype(np.complex128, copy=False)


def kay_weights(n: int) -> np.ndarray:
    """Parabolic smoothing weights for ``n - 1`` phase increments.

    ``w[t] = (3/2) * n/(n^2-1) * (1 - ((t - (n/2 - 1)) / (n/2))^2)`` for
    ``t = 0..n-2``.  The weights are symmetric, nonnegative, and sum to 1.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    t = np.arange(n - 1, dtype=np.float64)
    centered = (t - (n / 2.0 - 1.0)) / (n / 2.0)
    return 1.5 * (n / (n * n - 1.0)) * (1.0 - centered * centered)


def kay_estimate(frame) -> EstimateResult:
    """Weighted phase-increment frequency estimate.

    ``cfo_hat = (1/2pi) * sum_t w[t] * arg(conj(r[t]) * r[t+1])``.  Exact
    on a noiseless complex exponential with ``|cfo| < 0.5``.

    A zero-magnitude adjacent product carries no phase information: it
    is excluded and the remaining weights are renormalized, which keeps
    the estimate unbiased instead of shrinking it toward zero.  (Exact
    zero samples do occur in real waveforms: a pulse-shaped signal
    sampled on a symbol-boundary zero crossing.)  A frame whose products
    are all zero estimates 0.0.
    """
    x = _as_frame(frame)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    products = np.conj(x[:-1]) * x[1:]
    w = kay_weights(x.size)
    zero = products == 0
    if zero.any():
        used = ~zero
        total = float(np.sum(w[used]))
        if total == 0.0:
            return EstimateResult(0.0, Method.KAY)
        increments = np.angle(products[used])
        return EstimateResult(
            float(np.dot(w[used], increments)) / total / (2.0 * np.pi), Method.KAY
        )
    increments = np.angle(products)
    return EstimateResult(float(np.dot(w, increments)) / (2.0 * np.pi), Method.KAY)


def power_kay_estimate(frame, power: int = 2) -> EstimateResult:
    """Kay estimate after raising the frame to an integer power.

    Power 2 strips BPSK modulation: squaring turns ``a(n) * e^{j phi(n)}``
    with real ``a`` into ``a^2(n) * e^{j 2 phi(n)}`` with a nonnegative
    envelope, so the phase increments become modulation-free.  The raw
    estimate is divided by ``power``.  Meaningful when
    ``power * |cfo| < 0.5``.
    """
    if power < 1:
        raise ValueError(f"power {power} must be >= 1")
    x = _as_frame(frame)
    z = x if power == 1 else x**power
    raw = kay_estimate(z)
    return EstimateResult(raw.cfo_hat / power, Method.KAY_POW)


def autocorr_estimate(frame, lag: int = 1) -> EstimateResult:
    """Frequency from the phase of the lag-k autocorrelation.

    ``cfo_hat = arg(sum_n conj(r[n]) * r[n+lag]) / (2*pi*lag)``.  The
    estimate aliases when ``lag * |cfo| >= 0.5``.
    """
    x = _as_frame(frame)
    if not 1 <= lag < x.size:
        raise ValueError(f"lag {lag} outside [1, {x.size - 1}]")
    acc = np.sum(np.conj(x[:-lag]) * x[lag:])
    if acc == 0:
        raise ValueError("zero accumulated correlation: frequency undefined")
    return EstimateResult(float(np.angle(acc)) / (2.0 * np.pi * lag), Method.AUTOCORR)


def periodogram_ml_estimate(frame, zero_pad_factor: int = 8) -> EstimateResult:
    """Periodogram peak location with quadratic refinement.

    Zero-pads the frame to ``L * zero_pad_factor`` points, locates the
    argmax of ``|DFT|^2``, and refines it with a three-point parabolic
    fit (wrapping at the spectrum edges).  The result is wrapped to
    ``(-0.5, 0.5]`` cycles per sample.
    """
    if zero_pad_factor < 1:
        raise ValueError(f"zero_pad_factor {zero_pad_factor} must be >= 1")
    x = _as_frame(frame)
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    nfft = x.size * zero_pad_factor
    spec = np.abs(np.fft.fft(x, nfft)) ** 2
    k = int(np.argmax(spec))
    ym1, y0, yp1 = spec[k - 1], spec[k], spec[(k + 1) % nfft]
    denom = ym1 - 2.0 * y0 + yp1
    delta = 0.0 if denom == 0.0 else 0.5 * (ym1 - yp1) / denom
    delta = min(0.5, max(-0.5, delta))
    freq = (k + delta) / nfft
    freq %= 1.0
    if freq > 0.5:
        freq -= 1.0
    return EstimateResult(float(freq), Method.PERIODOGRAM_ML)


def make_estimator(method: str, **params):
    """Build ``frame -> cfo_hat`` for a method name.

    Recognized names and parameters: ``kay``; ``kay2`` (``power``, default
    2); ``autocorr`` (``lag``, default 1); ``ml`` (``zero_pad_factor``,
    default 8).
    """
    if method == "kay":
        if params:
            raise ValueError(f"kay takes no parameters, got {sorted(params)}")
        return lambda frame: kay_estimate(frame).cfo_hat
    if method == "kay2":
        power = int(params.pop("power", 2))
        if params:
            raise ValueError(f"unknown kay2 parameters: {sorted(params)}")
        return lambda frame: power_kay_estimate(frame, power).cfo_hat
    if method == "autocorr":
        lag = int(params.pop("lag", 1))
        if params:
            raise ValueError(f"unknown autocorr parameters: {sorted(params)}")
        return lambda frame: autocorr_estimate(frame, lag).cfo_hat
    if method == "ml":
        factor = int(params.pop("zero_pad_factor", 8))
        if params:
            raise ValueError(f"unknown ml parameters: {sorted(params)}")
        return lambda frame: periodogram_ml_estimate(frame, factor).cfo_hat
    raise ValueError(f"unknown method {method!r}")


def evaluate_estimator(records, estimate, method_name: str | None = None, *, by_modulation: bool = False) -> MetricsReport:
    """Mean-squared error of an estimator, grouped by SNR.

    Parameters
    ----------
    records : sequence of FrameRecord
        Labeled frames (see :mod:`cfolab.dataset`).
    estimate : str or callable
        A method name accepted by :func:`make_estimator`, or any callable
        mapping a complex frame to a float estimate.
    method_name : str, optional
        Label for the report's ``method`` column; defaults to the method
        string or ``"custom"`` for callables.
    by_modulation : bool
        When true, report one row per (SNR, modulation) with the method
        label suffixed ``/<modulation>`` instead of pooling modulations.
    """
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    if callable(estimate):
        fn = estimate
        name = method_name or "custom"
    else:
        fn = make_estimator(estimate)
        name = method_name or estimate

    groups: dict[tuple, list[float]] = {}
    for rec in records:
        err = rec.cfo_norm - float(fn(rec.frame))
        if by_modulation:
            key = (float(rec.snr_db), rec.modulation.name.lower())
        else:
            key = (float(rec.snr_db),)
        groups.setdefault(key, []).append(err * err)

    rows = []
    for key in sorted(groups):
        errs = groups[key]
        label = name if len(key) == 1 else f"{name}/{key[1]}"
        rows.append(
            MetricsRow(
                snr_db=key[0],
                method=label,
                mse=float(np.mean(np.asarray(errs, dtype=np.float64))),
                count=len(errs),
            )
        )
    return MetricsReport(rows=rows)
