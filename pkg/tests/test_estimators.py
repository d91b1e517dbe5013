"""Classical estimator correctness: exactness on tones, aliasing, MSE."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfolab.dataset import FrameRecord
from cfolab.estimators import (
    EstimateResult,
    Method,
    autocorr_estimate,
    evaluate_estimator,
    kay_estimate,
    kay_weights,
    make_estimator,
    periodogram_ml_estimate,
    power_kay_estimate,
)
from cfolab.waveform import Channel, Modulation, SynthesisParams, synthesize

from conftest import make_tone


def tone_record(cfo: float, length: int = 64, snr_db: float = 100.0) -> FrameRecord:
    """A noiseless complex-exponential record (float64 payload)."""
    return FrameRecord(
        frame=make_tone(cfo, length),
        cfo_norm=cfo,
        snr_db=snr_db,
        modulation=Modulation.BPSK,
        channel=Channel.AWGN,
        rolloff=0.35,
        oversampling=8,
    )


class TestKayWeights:
    def test_n2(self):
        np.testing.assert_allclose(kay_weights(2), [1.0], atol=1e-15)

    def test_n3(self):
        # (3/2)(3/8)(8/9) = 1/2 per weight, by hand.
        np.testing.assert_allclose(kay_weights(3), [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("n", list(range(2, 65)) + [513, 1024, 4096])
    def test_sum_symmetry_nonneg(self, n):
        w = kay_weights(n)
        assert w.shape == (n - 1,)
        assert abs(np.sum(w) - 1.0) < 1e-12
        assert np.all(w >= 0)
        np.testing.assert_array_equal(w, w[::-1])

    def test_full_range_invariant(self):
        # Every n up to 4096: unit sum, nonnegative, exactly symmetric.
        for n in range(2, 4097):
            w = kay_weights(n)
            assert abs(np.sum(w) - 1.0) < 1e-12
            assert w.min() >= 0
            assert np.array_equal(w, w[::-1])

    def test_domain_error(self):
        with pytest.raises(ValueError):
            kay_weights(1)


class TestKayEstimate:
    def test_tone_exact(self):
        assert abs(kay_estimate(make_tone(0.05, 64)).cfo_hat - 0.05) < 1e-12

    def test_range_edge(self):
        assert abs(kay_estimate(make_tone(-0.2, 1024)).cfo_hat + 0.2) < 1e-12

    def test_constant_frame_zero(self):
        result = kay_estimate(np.ones(32, dtype=complex))
        assert result.cfo_hat == 0.0
        assert result.method is Method.KAY

    def test_zero_magnitude_products_excluded_unbiased(self):
        # Zeroing a sample kills two adjacent products; the estimator
        # must drop them and renormalize rather than bias toward zero.
        frame = make_tone(0.1, 16)
        frame[7] = 0.0
        assert abs(kay_estimate(frame).cfo_hat - 0.1) < 1e-12

    def test_all_zero_products_estimate_zero(self):
        frame = np.zeros(8, dtype=complex)
        frame[0] = 1.0
        assert kay_estimate(frame).cfo_hat == 0.0

    @given(st.floats(-0.49, 0.49), st.integers(2, 2048), st.floats(0, 6.283))
    @settings(max_examples=60, deadline=None)
    def test_exactness_property(self, cfo, length, phase):
        est = kay_estimate(make_tone(cfo, length, phase)).cfo_hat
        assert abs(est - cfo) < 1e-10

    @given(st.floats(-0.2, 0.2), st.floats(-0.1, 0.1), st.integers(16, 256))
    @settings(max_examples=30, deadline=None)
    def test_shift_equivariance(self, base_cfo, delta, length):
        # Smooth frames whose increments stay clear of the +-pi wrap.
        rng = np.random.default_rng(length)
        frame = make_tone(base_cfo, length)
        frame += 0.001 * (rng.standard_normal(length) + 1j * rng.standard_normal(length))
        from cfolab.waveform import apply_cfo

        before = kay_estimate(frame).cfo_hat
        after = kay_estimate(apply_cfo(frame, delta, 0.0)).cfo_hat
        assert abs(after - (before + delta)) < 1e-10

    def test_too_short(self):
        with pytest.raises(ValueError):
            kay_estimate(np.ones(1, dtype=complex))


class TestPowerKay:
    def test_noiseless_bpsk_rrc(self):
        rng = np.random.default_rng(21)
        for cfo in (-0.15, 0.02, 0.1):
            params = SynthesisParams(
                modulation=Modulation.BPSK, rolloff=0.4, oversampling=8,
                cfo_norm=cfo, phase=1.1, snr_db=float("inf"),
                channel=Channel.AWGN, length=1024,
            )
            frame, _ = synthesize(params, rng)
            est = power_kay_estimate(frame, power=2)
            assert abs(est.cfo_hat - cfo) < 1e-6
            assert est.method is Method.KAY_POW

    def test_tone_power2(self):
        # Reduces to kay on a tone at 0.30, halved.
        est = power_kay_estimate(make_tone(0.15, 256), power=2).cfo_hat
        assert abs(est - 0.15) < 1e-12

    def test_power1_identical_to_kay(self, rng):
        frame = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        assert power_kay_estimate(frame, 1).cfo_hat == kay_estimate(frame).cfo_hat

    def test_power_validation(self):
        with pytest.raises(ValueError):
            power_kay_estimate(make_tone(0.1, 16), power=0)


class TestAutocorr:
    def test_tone_lag4(self):
        est = autocorr_estimate(make_tone(0.1, 256), lag=4).cfo_hat
        assert abs(est - 0.1) < 1e-12

    def test_tone_lag1_edge(self):
        est = autocorr_estimate(make_tone(0.2, 128), lag=1).cfo_hat
        assert abs(est - 0.2) < 1e-12

    def test_aliasing_documented(self):
        # lag * cfo = 0.6 > 0.5: wraps to (0.6 - 1)/3 = -0.4/3.
        est = autocorr_estimate(make_tone(0.2, 256), lag=3).cfo_hat
        assert abs(est - 0.2) > 0.1
        assert abs(est - (-0.4 / 3.0)) < 1e-9

    def test_lag_validation(self):
        with pytest.raises(ValueError):
            autocorr_estimate(make_tone(0.1, 16), lag=0)
        with pytest.raises(ValueError):
            autocorr_estimate(make_tone(0.1, 16), lag=16)

    def test_degenerate_correlation(self):
        # Isolated nonzero endpoints: every lag-1 product is exactly zero.
        frame = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)
        with pytest.raises(ValueError, match="zero accumulated"):
            autocorr_estimate(frame, lag=1)


class TestPeriodogramMl:
    def test_on_grid_tone(self):
        est = periodogram_ml_estimate(make_tone(0.125, 64), 16).cfo_hat
        assert abs(est - 0.125) < 1e-4

    def test_off_grid_tone_vs_brute_force(self):
        frame = make_tone(0.1003, 1024)
        est = periodogram_ml_estimate(frame, 8).cfo_hat
        assert abs(est - 0.1003) < 2e-4
        # Independent oracle: dense grid around the peak.
        freqs = np.linspace(0.095, 0.105, 10001)
        n = np.arange(frame.size)
        power = np.abs(np.exp(-2j * np.pi * freqs[:, None] * n[None, :]) @ frame) ** 2
        brute = freqs[int(np.argmax(power))]
        assert abs(est - brute) < 2e-4

    def test_dc_frame(self):
        est = periodogram_ml_estimate(np.ones(64, dtype=complex), 8).cfo_hat
        assert abs(est) < 1e-12

    def test_negative_frequency_wrap(self):
        est = periodogram_ml_estimate(make_tone(-0.3, 128), 8).cfo_hat
        assert abs(est + 0.3) < 1e-3

    @given(st.floats(-0.45, 0.45), st.integers(32, 512))
    @settings(max_examples=30, deadline=None)
    def test_error_within_one_refined_cell(self, cfo, length):
        factor = 8
        est = periodogram_ml_estimate(make_tone(cfo, length), factor).cfo_hat
        assert abs(est - cfo) <= 1.0 / (length * factor)

    def test_factor_validation(self):
        with pytest.raises(ValueError):
            periodogram_ml_estimate(make_tone(0.1, 16), 0)


class TestScalingInvariance:
    @given(
        st.floats(-0.4, 0.4),
        st.floats(0.01, 50.0),
        st.floats(0, 6.283),
    )
    @settings(max_examples=25, deadline=None)
    def test_invariance_under_complex_scaling(self, cfo, mag, angle):
        frame = make_tone(cfo, 128) + 0.01
        scale = mag * np.exp(1j * angle)
        for fn in (
            lambda f: kay_estimate(f).cfo_hat,
            lambda f: power_kay_estimate(f, 2).cfo_hat,
            lambda f: autocorr_estimate(f, 1).cfo_hat,
            lambda f: periodogram_ml_estimate(f, 4).cfo_hat,
        ):
            assert abs(fn(frame * scale) - fn(frame)) < 1e-12


class TestEvaluateEstimator:
    def test_noiseless_tones_zero_mse(self):
        records = [tone_record(cfo, 64) for cfo in np.linspace(-0.2, 0.2, 21)]
        report = evaluate_estimator(records, "kay")
        assert len(report.rows) == 1
        assert report.rows[0].mse < 1e-20
        assert report.rows[0].count == 21

    def test_forced_estimate_hook(self):
        records = [tone_record(0.1, 32)]
        report = evaluate_estimator(records, lambda f: 0.0, method_name="zero")
        assert report.rows[0].mse == pytest.approx(0.01)
        assert report.rows[0].method == "zero"

    def test_blind_estimator_matches_uniform_prior(self):
        rng = np.random.default_rng(17)
        labels = rng.uniform(-0.2, 0.2, size=100_000)
        records = [
            FrameRecord(
                frame=np.ones(2, dtype=complex), cfo_norm=float(c), snr_db=0.0,
                modulation=Modulation.BPSK, channel=Channel.AWGN,
                rolloff=0.3, oversampling=8,
            )
            for c in labels
        ]
        report = evaluate_estimator(records, lambda f: 0.0)
        assert abs(report.rows[0].mse - 0.2**2 / 3.0) < 3e-4

    def test_groups_sorted_by_snr(self):
        records = [
            tone_record(0.05, 64, snr_db=snr) for snr in (20.0, 0.0, 10.0, 0.0)
        ]
        report = evaluate_estimator(records, "kay")
        assert [r.snr_db for r in report.rows] == [0.0, 10.0, 20.0]
        assert [r.count for r in report.rows] == [2, 1, 1]

    def test_by_modulation_breakdown(self):
        records = [tone_record(0.05, 64)]
        rec2 = FrameRecord(
            frame=make_tone(0.1, 64), cfo_norm=0.1, snr_db=100.0,
            modulation=Modulation.QAM16, channel=Channel.AWGN,
            rolloff=0.35, oversampling=8,
        )
        report = evaluate_estimator(records + [rec2], "kay", by_modulation=True)
        methods = {r.method for r in report.rows}
        assert methods == {"kay/bpsk", "kay/qam16"}

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            evaluate_estimator([], "kay")

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            make_estimator("nope")
