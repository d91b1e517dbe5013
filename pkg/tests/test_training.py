"""Adam updates, the learning-rate schedule, and the training loop."""

import copy

import numpy as np
import pytest

from cfolab.dataset import FrameRecord
from cfolab.errors import DivergenceError
from cfolab.neuralnet import (
    ModelConfig,
    TrainConfig,
    adam_init,
    adam_step,
    evaluate_model,
    grad_check,
    init_model,
    learning_rate,
    named_params,
    train,
)
from cfolab.neuralnet import ops
from cfolab.waveform import Channel, Modulation

from conftest import make_tone


def tiny_records(n, length=16, seed=0, snr_db=30.0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        cfo = float(rng.uniform(-0.2, 0.2))
        out.append(
            FrameRecord(
                frame=make_tone(cfo, length).astype(np.complex64),
                cfo_norm=cfo,
                snr_db=snr_db,
                modulation=Modulation.BPSK,
                channel=Channel.AWGN,
                rolloff=0.3,
                oversampling=4,
            )
        )
    return out


def zero_grads(model):
    return {name: np.zeros_like(p) for name, p in named_params(model)}


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        model = init_model(ModelConfig(input_length=16), seed=0)
        before = {n: p.copy() for n, p in named_params(model)}
        state = adam_init(model)
        for _ in range(3):
            adam_step(model, zero_grads(model), state, lr=0.02)
        for name, p in named_params(model):
            np.testing.assert_array_equal(before[name], p)
        assert state.t == 3

    def test_one_step_closed_form(self):
        # param 1.0, grad 0.5, lr 0.02: bias corrections cancel at t=1,
        # so the step is lr * 0.5 / sqrt(0.25) = lr.
        model = init_model(ModelConfig(input_length=16), seed=0)
        model.params.head_b[:] = 1.0
        grads = zero_grads(model)
        grads["head.b"] = np.array([0.5], dtype=np.float32)
        state = adam_init(model)
        adam_step(model, grads, state, lr=0.02)
        assert abs(model.params.head_b[0] - 0.98) < 1e-7

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        models = []
        for _ in range(2):
            model = init_model(ModelConfig(input_length=16), seed=4)
            state = adam_init(model)
            grads = {
                n: rng_copy.standard_normal(p.shape).astype(p.dtype)
                for (n, p), rng_copy in zip(
                    named_params(model),
                    [np.random.default_rng(9)] * len(named_params(model)),
                )
            }
            adam_step(model, grads, state, lr=0.01)
            models.append(model)
        for (na, pa), (nb, pb) in zip(*(named_params(m) for m in models)):
            np.testing.assert_array_equal(pa, pb)

    def test_non_finite_gradient_raises(self):
        model = init_model(ModelConfig(input_length=16), seed=0)
        grads = zero_grads(model)
        grads["head.w"][0] = np.nan
        with pytest.raises(DivergenceError, match="head.w"):
            adam_step(model, grads, adam_init(model), lr=0.01)

    def test_moments_decay_toward_zero(self):
        model = init_model(ModelConfig(input_length=16), seed=0)
        state = adam_init(model)
        grads = zero_grads(model)
        grads["head.b"] = np.array([1.0], dtype=np.float32)
        adam_step(model, grads, state, lr=0.01)
        m1 = abs(state.m["head.b"][0])
        for _ in range(5):
            adam_step(model, zero_grads(model), state, lr=0.01)
        assert abs(state.m["head.b"][0]) < m1


class TestSchedule:
    def test_default_schedule(self):
        cfg = TrainConfig()
        for epoch in range(1, 21):
            lr = learning_rate(cfg, epoch)
            if epoch < 5:
                assert lr == pytest.approx(0.02)
            elif epoch < 10:
                assert lr == pytest.approx(0.002)
            else:
                assert lr == pytest.approx(0.0002)

    def test_validation(self):
        with pytest.raises(ValueError, match="outside"):
            TrainConfig(epochs=3).validate()
        TrainConfig(epochs=3, lr_drop_epochs=()).validate()
        with pytest.raises(ValueError):
            TrainConfig(epochs=0, lr_drop_epochs=()).validate()
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0, lr_drop_epochs=()).validate()


class TestTrainLoop:
    def test_single_batch_single_step(self):
        records = tiny_records(64)
        cfg = TrainConfig(epochs=1, batch_size=64, lr_drop_epochs=(), seed=1)
        result = train(ModelConfig(input_length=16), records, records[:8], cfg)
        assert result.adam_state.t == 1
        assert len(result.history) == 1

    def test_history_rows(self):
        records = tiny_records(96)
        cfg = TrainConfig(epochs=3, batch_size=32, lr_drop_epochs=(2,), seed=1)
        result = train(ModelConfig(input_length=16), records, records[:16], cfg)
        assert [h.epoch for h in result.history] == [1, 2, 3]
        assert result.history[0].lr == pytest.approx(0.02)
        assert result.history[1].lr == pytest.approx(0.002)
        assert all(np.isfinite(h.train_loss) for h in result.history)
        assert all(np.isfinite(h.eval_mse) for h in result.history)

    def test_bit_deterministic(self):
        records = tiny_records(48)
        cfg = TrainConfig(epochs=2, batch_size=16, lr_drop_epochs=(), seed=3)
        r1 = train(ModelConfig(input_length=16), records, records[:8], cfg)
        r2 = train(ModelConfig(input_length=16), records, records[:8], cfg)
        assert r1.history == r2.history
        for (na, pa), (nb, pb) in zip(
            named_params(r1.model), named_params(r2.model)
        ):
            np.testing.assert_array_equal(pa, pb)

    def test_divergence_aborts_with_history(self):
        records = tiny_records(48)
        cfg = TrainConfig(
            epochs=3, base_lr=1e30, batch_size=16, lr_drop_epochs=(), seed=0
        )
        with pytest.raises(DivergenceError) as excinfo:
            train(ModelConfig(input_length=16), records, records[:8], cfg)
        assert isinstance(excinfo.value.history, list)

    def test_empty_training_set(self):
        with pytest.raises(ValueError, match="empty"):
            train(ModelConfig(input_length=16), [], [], TrainConfig())


class TestEvaluateModel:
    def test_per_snr_rows(self):
        records = tiny_records(20, snr_db=10.0) + tiny_records(10, seed=9, snr_db=0.0)
        model = init_model(ModelConfig(input_length=16), seed=0)
        report = evaluate_model(model, records)
        assert [(r.snr_db, r.count) for r in report.rows] == [(0.0, 10), (10.0, 20)]
        assert all(r.method == "iq-resnet" for r in report.rows)
        assert all(r.mse >= 0 for r in report.rows)


class TestGradCheck:
    def test_healthy(self):
        assert grad_check(seed=0, eps=1e-4) < 1e-4

    def test_eps_robustness(self):
        # Halving the step keeps the result within an order of magnitude.
        a = grad_check(seed=0, eps=1e-4)
        b = grad_check(seed=0, eps=5e-5)
        assert max(a, b) < 1e-4
        ratio = max(a, b) / max(min(a, b), 1e-12)
        assert ratio < 10.0

    def test_detects_corrupted_backward(self, monkeypatch):
        real = ops.conv1d_backward

        def corrupted(grad_out, x, kernels, stride=1, padding=0):
            gx, gk, gb = real(grad_out, x, kernels, stride, padding)
            return gx, gk * 1.1, gb

        monkeypatch.setattr(ops, "conv1d_backward", corrupted)
        assert grad_check(seed=0, eps=1e-4) > 1e-2
