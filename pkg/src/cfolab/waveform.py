"""Seeded synthesis of single-carrier baseband bursts.

The generative chain is: random payload bits -> constellation mapping (or
continuous-phase FSK) -> root-raised-cosine pulse shaping -> channel gain ->
carrier frequency/phase rotation -> additive noise.  Every stage is a pure
function of its inputs and an explicit random generator, so synthesis is
bit-reproducible and safe to fan out across threads.

Frames are plain 1-D complex ndarrays.  ``iq_stack`` converts a frame into
the ``(2, L)`` real/imaginary stack consumed by the regression model.
"""

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

__all__ = [
    "Modulation",
    "Channel",
    "SynthesisParams",
    "FrameLabel",
    "RrcFilter",
    "iq_stack",
    "frame_from_iq",
    "map_symbols",
    "design_rrc",
    "pulse_shape",
    "modulate_cpfsk",
    "apply_cfo",
    "apply_awgn",
    "apply_flat_rayleigh",
    "synthesize",
]


class Modulation(IntEnum):
    """Supported modulations; integer values double as on-disk ids."""

    BPSK = 0
    FSK2 = 1
    QAM16 = 2
    PAM4 = 3


class Channel(IntEnum):
    """Channel kinds; integer values double as on-disk ids."""

    AWGN = 0
    FLAT_RAYLEIGH = 1


BITS_PER_SYMBOL = {Modulation.BPSK: 1, Modulation.QAM16: 4, Modulation.PAM4: 2}

#: Gray-coded 4-level amplitude lookup, indexed by the 2-bit value
#: ``2*b0 + b1`` (first bit is the MSB): 00->-3, 01->-1, 11->+1, 10->+3.
_GRAY4 = np.array([-3.0, -1.0, +3.0, +1.0])

_RRC_SPAN_SYMBOLS = 6
_FSK2_MOD_INDEX = 0.5
_ALLOWED_OVERSAMPLING = (4, 8, 16)


@dataclass(frozen=True)
class SynthesisParams:
    """Full generative ground truth for one frame.

    ``cfo_norm`` is the carrier frequency offset in cycles per output
    sample and ``phase`` the carrier phase in radians.  ``length`` is the
    number of stored samples L.
    """

    modulation: Modulation
    rolloff: float
    oversampling: int
    cfo_norm: float
    phase: float
    snr_db: float
    channel: Channel
    length: int

    def validate(self) -> None:
        if self.modulation not in Modulation:
            raise ValueError(f"unknown modulation: {self.modulation!r}")
        if self.channel not in Channel:
            raise ValueError(f"unknown channel: {self.channel!r}")
        if not 0.2 <= self.rolloff <= 0.7:
            raise ValueError(f"rolloff {self.rolloff} outside [0.2, 0.7]")
        if self.oversampling not in _ALLOWED_OVERSAMPLING:
            raise ValueError(
                f"oversampling {self.oversampling} not in {_ALLOWED_OVERSAMPLING}"
            )
        if abs(self.cfo_norm) > 0.2:
            raise ValueError(f"|cfo_norm| = {abs(self.cfo_norm)} exceeds 0.2")
        if self.length < 2 or self.length % 4:
            raise ValueError(f"length {self.length} must be >= 2 and divisible by 4")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")


@dataclass(frozen=True)
class FrameLabel:
    """Ground truth attached to a synthesized frame.

    Carries the exact :class:`SynthesisParams` used plus the realized
    channel coefficient (``1+0j`` on AWGN).
    """

    params: SynthesisParams
    channel_gain: complex = 1.0 + 0.0j

    @property
    def cfo_norm(self) -> float:
        return self.params.cfo_norm


@dataclass(frozen=True)
class RrcFilter:
    """Unit-energy root-raised-cosine FIR taps (odd length, symmetric)."""

    taps: np.ndarray
    rolloff: float
    oversampling: int

    @property
    def half(self) -> int:
        """Group delay in samples, ``(len(taps) - 1) // 2``."""
        return (len(self.taps) - 1) // 2


def iq_stack(frame) -> np.ndarray:
    """Stack a complex frame into a ``(2, L)`` array of I and Q rows."""
    frame = np.asarray(frame)
    return np.stack([frame.real, frame.imag])


def frame_from_iq(stack) -> np.ndarray:
    """Inverse of :func:`iq_stack`: rebuild the complex frame."""
    stack = np.asarray(stack)
    if stack.ndim != 2 or stack.shape[0] != 2:
        raise ValueError(f"expected shape (2, L), got {stack.shape}")
    return stack[0] + 1j * stack[1]


def map_symbols(bits, modulation: Modulation) -> np.ndarray:
    """Map payload bits onto a unit-average-power constellation.

    Parameters
    ----------
    bits : array_like of {0, 1}
        Payload bits, length divisible by the bits-per-symbol of the
        modulation (1 for BPSK, 4 for QAM16, 2 for PAM4).
    modulation : Modulation
        One of the linear modulations.  FSK2 has no constellation; use
        :func:`modulate_cpfsk` for it.

    Returns
    -------
    ndarray of complex128
        One point per symbol.  Conventions: BPSK 0 -> +1, 1 -> -1; PAM4
        and the QAM16 axes use the Gray order 00 -> -3, 01 -> -1,
        11 -> +1, 10 -> +3, scaled to unit mean power.
    """
    if modulation == Modulation.FSK2:
        raise ValueError("FSK2 is not a linear constellation; use modulate_cpfsk")
    if modulation not in BITS_PER_SYMBOL:
        raise ValueError(f"unknown modulation: {modulation!r}")
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1:
        raise ValueError("bits must be a flat sequence")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must contain only 0 and 1")
    bps = BITS_PER_SYMBOL[modulation]
    if bits.size == 0 or bits.size % bps:
        raise ValueError(f"bit count {bits.size} not a positive multiple of {bps}")

    if modulation == Modulation.BPSK:
        return (1.0 - 2.0 * bits).astype(np.complex128)
    groups = bits.reshape(-1, bps)
    if modulation == Modulation.PAM4:
        idx = 2 * groups[:, 0] + groups[:, 1]
        return (_GRAY4[idx] / np.sqrt(5.0)).astype(np.complex128)
    # QAM16: first bit pair selects the I level, second pair the Q level.
    i_level = _GRAY4[2 * groups[:, 0] + groups[:, 1]]
    q_level = _GRAY4[2 * groups[:, 2] + groups[:, 3]]
    return (i_level + 1j * q_level) / np.sqrt(10.0)


def design_rrc(rolloff: float, span_symbols: int = 6, oversampling: int = 8) -> RrcFilter:
    """Design a root-raised-cosine filter, truncated and unit-energy.

    Taps are evaluated on the integer sample grid spanning
    ``span_symbols`` symbol periods (length ``span_symbols *
    oversampling + 1``).  The removable singularities of the closed form
    at t = 0 and |t| = T/(4*rolloff) are replaced by their analytic
    limits.  The positive half is mirrored so symmetry is exact, then the
    taps are scaled to unit energy.

    Parameters
    ----------
    rolloff : float
        Excess-bandwidth factor, in (0, 1].
    span_symbols : int
        Truncation length in symbols; must make the tap count odd.
    oversampling : int
        Samples per symbol, >= 2.
    """
    if not 0.0 < rolloff <= 1.0:
        raise ValueError(f"rolloff {rolloff} outside (0, 1]")
    if oversampling < 2:
        raise ValueError(f"oversampling {oversampling} must be >= 2")
    if span_symbols < 1 or (span_symbols * oversampling) % 2:
        raise ValueError("span_symbols * oversampling must be even")

    half = span_symbols * oversampling // 2
    beta = float(rolloff)
    u = np.arange(half + 1) / oversampling  # time in symbol periods, t/T
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sin(np.pi * u * (1.0 - beta)) + 4.0 * beta * u * np.cos(
            np.pi * u * (1.0 + beta)
        )
        den = np.pi * u * (1.0 - (4.0 * beta * u) ** 2)
        vals = num / den
    vals[0] = 1.0 - beta + 4.0 * beta / np.pi
    singular = np.abs(1.0 - (4.0 * beta * u) ** 2) < 1e-10
    singular[0] = False
    if np.any(singular):
        lim = (beta / np.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
            + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
        )
        vals[singular] = lim

    taps = np.concatenate([vals[:0:-1], vals])
    taps = taps / np.sqrt(np.sum(taps * taps))
    return RrcFilter(taps=taps, rolloff=beta, oversampling=oversampling)


def pulse_shape(symbols, filt: RrcFilter) -> np.ndarray:
    """Upsample symbols by the filter's oversampling ratio and RRC-filter.

    Zero-stuffs by R, applies the FIR filter with "same" alignment (the
    output is advanced by the filter group delay), and trims so that
    symbol k lands on output index ``k * R``.  Output length is
    ``R * len(symbols)``.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size == 0:
        raise ValueError("empty symbol sequence")
    r = filt.oversampling
    up = np.zeros(r * symbols.size, dtype=np.complex128)
    up[::r] = symbols
    full = np.convolve(up, filt.taps)
    return full[filt.half : filt.half + up.size]


def modulate_cpfsk(bits, mod_index: float = 0.5, oversampling: int = 8) -> np.ndarray:
    """Continuous-phase FSK with a rectangular frequency pulse.

    Each bit spans ``oversampling`` samples whose phase advances by
    ``sign * pi * mod_index / oversampling`` per sample (bit 0 -> -, bit
    1 -> +).  Sample n carries the phase accumulated through its own
    increment, so the final sample of a symbol sits at the full
    ``+-pi * mod_index`` phase step.  Output has unit modulus everywhere.
    """
    if mod_index <= 0:
        raise ValueError(f"mod_index {mod_index} must be positive")
    if oversampling < 1:
        raise ValueError("oversampling must be >= 1")
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size == 0 or np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be a nonempty sequence of 0/1")
    signs = 2.0 * bits - 1.0
    incs = np.repeat(signs, oversampling) * (np.pi * mod_index / oversampling)
    return np.exp(1j * np.cumsum(incs))


def apply_cfo(frame, cfo_norm: float, phase: float = 0.0) -> np.ndarray:
    """Rotate a frame by ``exp(j * (2*pi*cfo_norm*n + phase))``, n from 0.

    ``cfo_norm`` is in cycles per sample.  Sample magnitudes, and hence
    frame energy, are preserved up to rounding.
    """
    frame = np.asarray(frame, dtype=np.complex128)
    if frame.size == 0:
        raise ValueError("empty frame")
    n = np.arange(frame.size)
    return frame * np.exp(1j * (2.0 * np.pi * cfo_norm * n + phase))


def apply_awgn(frame, snr_db: float, rng: np.random.Generator, *, normalize: bool = True) -> np.ndarray:
    """Add white complex Gaussian noise at the requested SNR.

    With ``normalize=True`` the frame is first scaled to unit average
    power, so the per-complex-sample noise variance is
    ``10**(-snr_db / 10)`` (half per real component) relative to the
    signal.  ``snr_db = inf`` disables noise (and draws nothing from
    ``rng``); the scaled signal is returned unchanged.

    With ``normalize=False`` the frame is left at its incoming power and
    the same absolute noise variance is added; this preserves channel
    fades when the nominal power was fixed upstream.
    """
    frame = np.asarray(frame, dtype=np.complex128)
    if frame.size == 0:
        raise ValueError("empty frame")
    if normalize:
        power = np.mean(frame.real**2 + frame.imag**2)
        if power == 0.0:
            raise ValueError("zero-power frame: SNR undefined")
        frame = frame / np.sqrt(power)
    else:
        frame = frame.copy()
    if np.isinf(snr_db) and snr_db > 0:
        return frame
    sigma2 = 10.0 ** (-snr_db / 10.0)
    scale = np.sqrt(sigma2 / 2.0)
    noise_re = rng.standard_normal(frame.size)
    noise_im = rng.standard_normal(frame.size)
    return frame + scale * (noise_re + 1j * noise_im)


def apply_flat_rayleigh(frame, rng: np.random.Generator, *, coeff: complex | None = None):
    """Multiply the whole frame by one Rayleigh-fading coefficient.

    The coefficient is drawn circularly-symmetric complex Gaussian with
    unit variance (``E[|h|^2] = 1``), so its magnitude is
    Rayleigh-distributed.  Pass ``coeff`` to force a known gain (test
    hook); no draw is consumed in that case.

    Returns
    -------
    (ndarray, complex)
        The faded frame and the coefficient used.
    """
    frame = np.asarray(frame, dtype=np.complex128)
    if frame.size == 0:
        raise ValueError("empty frame")
    if coeff is None:
        coeff = complex(rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
    return frame * coeff, coeff


def _clean_signal(params: SynthesisParams, rng: np.random.Generator) -> np.ndarray:
    """Generate exactly ``params.length`` steady-state baseband samples."""
    r = params.oversampling
    length = params.length
    if params.modulation == Modulation.FSK2:
        n_sym = -(-length // r)
        bits = rng.integers(0, 2, n_sym)
        return modulate_cpfsk(bits, _FSK2_MOD_INDEX, r)[:length]
    # Linear modulations: overshoot by the filter span so the head
    # transient can be trimmed and every stored sample is steady-state.
    n_sym = -(-length // r) + _RRC_SPAN_SYMBOLS
    bits = rng.integers(0, 2, n_sym * BITS_PER_SYMBOL[params.modulation])
    symbols = map_symbols(bits, params.modulation)
    filt = design_rrc(params.rolloff, _RRC_SPAN_SYMBOLS, r)
    shaped = pulse_shape(symbols, filt)
    head = filt.half  # 3 symbols of transient before full filter overlap
    return shaped[head : head + length]


def synthesize(params: SynthesisParams, rng: np.random.Generator):
    """Synthesize one received burst with known ground truth.

    Pipeline: payload bits -> modulation (+ RRC shaping for the linear
    modulations) -> trim to exactly L steady-state samples -> channel ->
    frequency/phase rotation -> noise.  Draws from ``rng`` in a fixed
    order (bits, fading coefficient, noise), so output is a pure function
    of ``(params, rng state)``.

    The stored frame is normalized so its clean (pre-noise) part has unit
    average power at the channel input; Rayleigh fades are applied after
    that normalization and are *not* rescaled away, so a deep fade lowers
    the effective SNR of the frame as it would at a receiver front end
    with fixed noise floor.

    Returns
    -------
    (ndarray of complex128, FrameLabel)
    """
    params.validate()
    signal = _clean_signal(params, rng)
    power = np.mean(signal.real**2 + signal.imag**2)
    if power == 0.0:
        raise ValueError("degenerate zero-power signal")
    signal = signal / np.sqrt(power)

    gain = 1.0 + 0.0j
    if params.channel == Channel.FLAT_RAYLEIGH:
        signal, gain = apply_flat_rayleigh(signal, rng)
    rotated = apply_cfo(signal, params.cfo_norm, params.phase)
    frame = apply_awgn(rotated, params.snr_db, rng, normalize=False)
    return frame, FrameLabel(params=params, channel_gain=gain)
