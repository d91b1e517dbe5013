"""Compare the classical offset estimators on a noisy BPSK burst.

Shows the characteristic behaviors: the plain Kay estimator is exact on
a pure tone but suffers modulation self-noise on BPSK, squaring the
signal strips the modulation (at the cost of squaring the noise), the
autocorrelation estimator aliases when lag * offset leaves the
unambiguous range, and the periodogram needs only one strong line.
"""

import numpy as np

from cfolab.estimators import (
    autocorr_estimate,
    kay_estimate,
    periodogram_ml_estimate,
    power_kay_estimate,
)
from cfolab.waveform import Channel, Modulation, SynthesisParams, synthesize

TRUE_CFO = 0.08
rng = np.random.default_rng(7)

# On a noiseless tone every estimator is essentially exact.
tone = np.exp(1j * 2 * np.pi * TRUE_CFO * np.arange(1024))
print("pure tone:")
print(f"  kay         {kay_estimate(tone).cfo_hat:+.8f}")
print(f"  autocorr    {autocorr_estimate(tone, lag=1).cfo_hat:+.8f}")
print(f"  periodogram {periodogram_ml_estimate(tone, 8).cfo_hat:+.8f}")

# On modulated BPSK at 15 dB the story changes.
params = SynthesisParams(
    modulation=Modulation.BPSK, rolloff=0.35, oversampling=8,
    cfo_norm=TRUE_CFO, phase=0.0, snr_db=15.0,
    channel=Channel.AWGN, length=1024,
)
frame, _ = synthesize(params, rng)
print(f"\nBPSK burst at 15 dB (true offset {TRUE_CFO}):")
print(f"  kay (raw)       {kay_estimate(frame).cfo_hat:+.6f}   <- modulation self-noise")
print(f"  kay^2 (squared) {power_kay_estimate(frame, 2).cfo_hat:+.6f}")
print(f"  periodogram     {periodogram_ml_estimate(frame, 8).cfo_hat:+.6f}")

# Aliasing: lag 4 puts 4 * 0.15 = 0.6 cycles outside the +-0.5 range.
fast_tone = np.exp(1j * 2 * np.pi * 0.15 * np.arange(512))
print("\nautocorrelation aliasing on a 0.15-cycles/sample tone:")
for lag in (1, 2, 3, 4):
    est = autocorr_estimate(fast_tone, lag=lag).cfo_hat
    note = "ok" if abs(est - 0.15) < 1e-9 else "aliased"
    print(f"  lag {lag}: {est:+.6f}  ({note})")
