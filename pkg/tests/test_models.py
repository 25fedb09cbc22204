import numpy as np
import pytest

from helpers import numeric_gradient, rel_err
from surface_bench.errors import ShapeError
from surface_bench.models import (
    InceptionBlock,
    InceptionBlockSpec,
    ModelSpec,
    ResidualBlock,
    ResidualBlockSpec,
    build_model,
)
from surface_bench.nn.loss import SmoothedLossSpec, smoothed_cross_entropy


def conv_params(out_ch, in_ch, k):
    return out_ch * in_ch * k * k + out_ch


def bn_params(ch):
    return 2 * ch


def residual_block_params(in_ch, out_ch, projection):
    total = conv_params(out_ch, in_ch, 3) + bn_params(out_ch)
    total += conv_params(out_ch, out_ch, 3) + bn_params(out_ch)
    if projection:
        total += conv_params(out_ch, in_ch, 1) + bn_params(out_ch)
    return total


def default_mini_resnet_param_table():
    """Layer-by-layer count of the default architecture, written out
    independently of the builder."""
    total = conv_params(16, 3, 7) + bn_params(16)  # stem
    widths = [(16, 16), (16, 16)]  # stage 1
    widths += [(16, 32), (32, 32)]  # stage 2
    widths += [(32, 64), (64, 64)]  # stage 3
    for in_ch, out_ch in widths:
        total += residual_block_params(in_ch, out_ch, projection=in_ch != out_ch)
    total += 64 * 6 + 6  # head
    return total


class TestSpecs:
    def test_projection_rule(self):
        assert not ResidualBlockSpec(16, 16, 1).projection
        assert ResidualBlockSpec(16, 32, 1).projection
        assert ResidualBlockSpec(16, 16, 2).projection

    def test_inception_out_channels(self):
        spec = InceptionBlockSpec(16, 8, 24, 8, 16, 8)
        assert spec.out_channels == 16 + 24 + 16 + 8

    def test_inception_widths_validated(self):
        with pytest.raises(ValueError):
            InceptionBlockSpec(0, 8, 24, 8, 16, 8)

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec("resnet50")

    @pytest.mark.parametrize(
        "spec",
        [
            ModelSpec.mini_resnet(),
            ModelSpec.mini_inception(),
            ModelSpec.mini_resnet(stem_width=8, stages=((8, 1),), num_classes=3, init_seed=4),
        ],
    )
    def test_spec_dict_round_trip(self, spec):
        assert ModelSpec.from_dict(spec.to_dict()) == spec


class TestBuildAndForward:
    def test_default_resnet_batch48_logits(self):
        model = build_model(ModelSpec.mini_resnet())
        x = np.random.default_rng(0).normal(size=(48, 3, 64, 64)).astype(np.float32)
        assert model.forward(x).shape == (48, 6)

    def test_default_inception_logits(self):
        model = build_model(ModelSpec.mini_inception())
        x = np.random.default_rng(1).normal(size=(4, 3, 64, 64)).astype(np.float32)
        assert model.forward(x).shape == (4, 6)

    def test_bad_input_shape(self):
        model = build_model(ModelSpec.mini_resnet())
        with pytest.raises(ShapeError):
            model.forward(np.zeros((2, 1, 64, 64), dtype=np.float32))

    def test_parameter_count_matches_layer_table(self):
        model = build_model(ModelSpec.mini_resnet())
        assert model.num_parameters() == default_mini_resnet_param_table()

    def test_parameter_names_unique_and_deterministic(self):
        a = build_model(ModelSpec.mini_inception())
        b = build_model(ModelSpec.mini_inception())
        assert list(a.state_tensors()) == list(b.state_tensors())
        names = list(a.state_tensors())
        assert len(names) == len(set(names))

    def test_infer_forward_is_deterministic(self):
        model = build_model(ModelSpec.mini_resnet(stages=((8, 1), (8, 1))))
        x = np.random.default_rng(2).normal(size=(3, 3, 32, 32)).astype(np.float32)
        np.testing.assert_array_equal(model.forward(x), model.forward(x))

    def test_batch_permutation_permutes_logits(self):
        model = build_model(ModelSpec.mini_inception(stem_width=8))
        x = np.random.default_rng(3).normal(size=(5, 3, 32, 32)).astype(np.float32)
        logits = model.forward(x)
        perm = np.array([4, 2, 0, 1, 3])
        np.testing.assert_allclose(model.forward(x[perm]), logits[perm], atol=1e-5)

    def test_train_differs_from_infer_only_via_batchnorm(self):
        spec = ModelSpec.mini_resnet(stages=((8, 1),))
        model = build_model(spec)
        x = np.random.default_rng(4).normal(size=(4, 3, 32, 32)).astype(np.float32)
        infer = model.forward(x, train=False)
        train = model.forward(x, train=True)
        assert not np.allclose(infer, train)


class TestResidualBlock:
    def test_zero_convs_pass_skip_through(self):
        rng = np.random.default_rng(5)
        block = ResidualBlock(ResidualBlockSpec(8, 8, 1), rng=rng, dtype=np.float64)
        for p_name, p in block.parameters().items():
            if "weight" in p_name:
                p[:] = 0.0
        x = np.abs(rng.normal(size=(2, 8, 6, 6)))  # post-relu inputs are >= 0
        np.testing.assert_allclose(block.forward(x, train=True), x, atol=1e-12)
        np.testing.assert_allclose(block.forward(x, train=False), x, atol=1e-12)

    def test_projection_present_exactly_when_needed(self):
        rng = np.random.default_rng(6)
        plain = ResidualBlock(ResidualBlockSpec(8, 8, 1), rng=rng, dtype=np.float32)
        projected = ResidualBlock(ResidualBlockSpec(8, 16, 2), rng=rng, dtype=np.float32)
        assert plain.skip is None
        assert projected.skip is not None
        x = np.random.default_rng(7).normal(size=(2, 8, 8, 8)).astype(np.float32)
        assert plain.forward(x, train=True).shape == (2, 8, 8, 8)
        assert projected.forward(x, train=True).shape == (2, 16, 4, 4)


class TestInceptionBlock:
    @pytest.mark.parametrize("seed", range(4))
    def test_output_channels_equal_branch_sum(self, seed):
        rng = np.random.default_rng(seed)
        widths = rng.integers(1, 9, size=6)
        spec = InceptionBlockSpec(*map(int, widths))
        in_ch = int(rng.integers(2, 9))
        block = InceptionBlock(in_ch, spec, rng=rng, dtype=np.float32)
        x = rng.normal(size=(2, in_ch, 8, 8)).astype(np.float32)
        out = block.forward(x, train=True)
        assert out.shape == (2, spec.out_channels, 8, 8)

    def test_spatial_dims_preserved(self):
        rng = np.random.default_rng(8)
        block = InceptionBlock(4, InceptionBlockSpec(2, 2, 3, 2, 2, 1), rng=rng, dtype=np.float32)
        x = rng.normal(size=(1, 4, 11, 7)).astype(np.float32)
        assert block.forward(x).shape[2:] == (11, 7)


TINY_RESNET = ModelSpec.mini_resnet(
    stem_width=4, stages=((4, 1), (6, 1)), num_classes=3, init_seed=5
)
TINY_INCEPTION = ModelSpec.mini_inception(
    stem_width=4,
    blocks=(InceptionBlockSpec(2, 2, 3, 2, 2, 1), InceptionBlockSpec(2, 2, 3, 2, 2, 1)),
    num_classes=3,
    init_seed=5,
)


@pytest.mark.parametrize("spec", [TINY_RESNET, TINY_INCEPTION], ids=["resnet", "inception"])
def test_end_to_end_gradient_check(spec):
    """Whole-model loss gradient vs finite differences, 64-bit, 8x8 inputs."""
    model = build_model(spec, dtype=np.float64)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(2, 3, 8, 8))
    y = np.array([0, 2])
    loss_spec = SmoothedLossSpec(0.1, 3)

    def loss():
        return smoothed_cross_entropy(model.forward(x, train=True), y, loss_spec)[0]

    _, dlogits = smoothed_cross_entropy(model.forward(x, train=True), y, loss_spec)
    model.backward(dlogits)
    grads = model.gradients()
    for name, param in model.parameters().items():
        assert rel_err(grads[name], numeric_gradient(loss, param)) < 1e-4, name
