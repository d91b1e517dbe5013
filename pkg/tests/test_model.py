"""Model assembly: shape algebra, determinism, serialization."""

import numpy as np
import pytest

from cfolab.errors import FormatError
from cfolab.neuralnet import (
    HeadKind,
    Mode,
    Model,
    ModelConfig,
    init_model,
    load_model,
    model_backward,
    model_forward,
    mse_loss,
    named_params,
    param_count,
    residual_block_forward,
    save_model,
)
from cfolab.neuralnet.gradcheck import tiny_config


@pytest.fixture
def small_model():
    return init_model(ModelConfig(input_length=32), seed=0)


class TestShapes:
    @pytest.mark.parametrize("length", [16, 64, 512])
    @pytest.mark.parametrize("head", [HeadKind.FLATTEN, HeadKind.GLOBAL_AVG_POOL])
    def test_output_shape(self, length, head):
        model = init_model(ModelConfig(input_length=length, head=head), seed=1)
        x = np.random.default_rng(0).standard_normal((3, 2, length)).astype(np.float32)
        out = model_forward(model, x)
        assert out.shape == (3, 1)

    def test_block_shape_algebra(self):
        # (B,16,L) -> (B,32,L/2) -> (B,64,L/4) through the strided blocks.
        model = init_model(ModelConfig(input_length=64), seed=2)
        rng = np.random.default_rng(1)
        h = rng.standard_normal((2, 16, 64)).astype(np.float32)
        out2, _ = residual_block_forward(h, model.params.blocks[1], 2, Mode.EVAL, 1)
        assert out2.shape == (2, 32, 32)
        out3, _ = residual_block_forward(out2, model.params.blocks[2], 2, Mode.EVAL, 1)
        assert out3.shape == (2, 64, 16)

    def test_length_must_divide(self):
        with pytest.raises(ValueError, match="divisible"):
            ModelConfig(input_length=126).validate()

    def test_flatten_length_checked(self):
        model = init_model(
            ModelConfig(input_length=32, head=HeadKind.FLATTEN), seed=0
        )
        x = np.zeros((1, 2, 64), dtype=np.float32)
        with pytest.raises(ValueError, match="length"):
            model_forward(model, x)

    def test_gap_accepts_other_lengths(self):
        model = init_model(ModelConfig(input_length=32), seed=0)
        x = np.zeros((2, 2, 64), dtype=np.float32)
        assert model_forward(model, x).shape == (2, 1)


class TestForward:
    def test_zero_input_zero_output(self, small_model):
        x = np.zeros((4, 2, 32), dtype=np.float32)
        out = model_forward(small_model, x, Mode.EVAL)
        np.testing.assert_array_equal(out, np.zeros((4, 1), dtype=np.float32))

    def test_deterministic(self):
        x = np.random.default_rng(5).standard_normal((2, 2, 32)).astype(np.float32)
        a = model_forward(init_model(ModelConfig(input_length=32), 7), x)
        b = model_forward(init_model(ModelConfig(input_length=32), 7), x)
        np.testing.assert_array_equal(a, b)

    def test_zeroed_main_path_is_relu_identity(self):
        model = init_model(ModelConfig(input_length=32), seed=3)
        blk = model.params.blocks[0]  # stride 1, no projection
        assert blk.proj is None
        blk.conv1.kernels[:] = 0
        blk.conv2.kernels[:] = 0
        rng = np.random.default_rng(2)
        h = rng.standard_normal((2, 16, 32)).astype(np.float32)
        out, _ = residual_block_forward(h, blk, 1, Mode.EVAL, 1)
        np.testing.assert_allclose(out, np.maximum(h, 0), atol=1e-6)

    def test_train_mode_updates_running_stats(self, small_model):
        before = small_model.params.blocks[0].bn1.running_mean.copy()
        x = np.random.default_rng(0).standard_normal((4, 2, 32)).astype(np.float32)
        model_forward(small_model, x, Mode.TRAIN, return_caches=True)
        after = small_model.params.blocks[0].bn1.running_mean
        assert not np.array_equal(before, after)

    def test_eval_mode_does_not_touch_stats(self, small_model):
        before = small_model.params.blocks[0].bn1.running_mean.copy()
        x = np.random.default_rng(0).standard_normal((4, 2, 32)).astype(np.float32)
        model_forward(small_model, x, Mode.EVAL)
        np.testing.assert_array_equal(before, small_model.params.blocks[0].bn1.running_mean)

    def test_dtype_checked(self, small_model):
        x = np.zeros((1, 2, 32), dtype=np.float64)
        with pytest.raises(ValueError, match="dtype"):
            model_forward(small_model, x)


class TestParams:
    def test_param_count_matches(self):
        for cfg in (
            ModelConfig(input_length=64),
            ModelConfig(input_length=64, head=HeadKind.FLATTEN),
            tiny_config(),
        ):
            model = init_model(cfg, seed=0)
            total = sum(p.size for _, p in named_params(model))
            assert total == param_count(cfg)

    def test_named_params_order(self, small_model):
        names = [n for n, _ in named_params(small_model)]
        assert names[0] == "stem.kernels"
        assert names[-2:] == ["head.w", "head.b"]
        assert "block1.proj.kernels" in names
        assert "block0.proj.kernels" not in names  # identity skip

    def test_unused_path_has_zero_gradient(self):
        # Zero head weights cut every upstream path; only head.b sees
        # gradient.
        model = init_model(ModelConfig(input_length=16), seed=0)
        model.params.head_w[:] = 0
        x = np.random.default_rng(3).standard_normal((3, 2, 16)).astype(np.float32)
        out, caches = model_forward(model, x, Mode.TRAIN, return_caches=True)
        _, grad = mse_loss(out, np.full((3, 1), 0.1, dtype=np.float32))
        grads = model_backward(model, caches, grad)
        assert np.all(grads["block0.bn1.gamma"] == 0)
        assert np.all(grads["stem.kernels"] == 0)
        assert grads["head.b"][0] != 0

    def test_backward_requires_caches(self, small_model):
        with pytest.raises(ValueError, match="cache"):
            model_backward(small_model, None, np.zeros((1, 1)))


class TestSaveLoad:
    def test_roundtrip_bitwise(self, tmp_path):
        for head in (HeadKind.GLOBAL_AVG_POOL, HeadKind.FLATTEN):
            model = init_model(ModelConfig(input_length=64, head=head), seed=9)
            path = tmp_path / f"m-{head.value}.cfon"
            save_model(model, path)
            loaded = load_model(path)
            assert loaded.config == model.config
            for (na, pa), (nb, pb) in zip(named_params(model), named_params(loaded)):
                assert na == nb
                np.testing.assert_array_equal(pa, pb)
            for blk_a, blk_b in zip(model.params.blocks, loaded.params.blocks):
                np.testing.assert_array_equal(
                    blk_a.bn1.running_mean, blk_b.bn1.running_mean
                )
                np.testing.assert_array_equal(
                    blk_a.bn2.running_var, blk_b.bn2.running_var
                )

    def test_save_load_save_identical_bytes(self, tmp_path):
        model = init_model(ModelConfig(input_length=32), seed=1)
        p1, p2 = tmp_path / "a.cfon", tmp_path / "b.cfon"
        save_model(model, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_file(self, tmp_path):
        model = init_model(ModelConfig(input_length=32), seed=1)
        path = tmp_path / "m.cfon"
        save_model(model, path)
        blob = path.read_bytes()
        bad = tmp_path / "bad.cfon"
        bad.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(FormatError, match="truncated while reading"):
            load_model(bad)

    def test_wrong_magic(self, tmp_path):
        model = init_model(ModelConfig(input_length=32), seed=1)
        path = tmp_path / "m.cfon"
        save_model(model, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        bad = tmp_path / "bad.cfon"
        bad.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            load_model(bad)

    def test_trailing_bytes(self, tmp_path):
        model = init_model(ModelConfig(input_length=32), seed=1)
        path = tmp_path / "m.cfon"
        save_model(model, path)
        bad = tmp_path / "bad.cfon"
        bad.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="trailing"):
            load_model(bad)

    def test_error_names_offending_layer(self, tmp_path):
        model = init_model(ModelConfig(input_length=32), seed=1)
        path = tmp_path / "m.cfon"
        save_model(model, path)
        blob = path.read_bytes()
        # Cut inside block1's first convolution payload.
        plan_sizes = []
        from cfolab.neuralnet.modelio import _layer_plan, _PREFIX, _BLOCK

        off = _PREFIX.size + 3 * _BLOCK.size
        for name, shape in _layer_plan(model.config):
            size = 4 * int(np.prod(shape))
            if name == "block1.conv1.kernels":
                bad = tmp_path / "bad.cfon"
                bad.write_bytes(blob[: off + size // 2])
                with pytest.raises(FormatError, match="block1.conv1.kernels"):
                    load_model(bad)
                return
            off += size
        raise AssertionError("layer not found in plan")
