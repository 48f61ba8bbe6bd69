import numpy as np
import pytest

from envmorph.errors import InvalidArgument, NumericFailure
from envmorph.nn.adam import AdamConfig, AdamState, adam_step
from envmorph.nn.gradcheck import max_relative_error, numeric_gradient
from envmorph.nn.layers import Conv1d, Dense, NearestUpsample, ReLU, Sigmoid
from envmorph.nn.losses import l1_loss, rmse_loss
from envmorph.nn.models import (
    LATENT_DIM,
    Autoencoder,
    Mapper,
    decode,
    encode,
    mapper_features,
    mapper_forward,
)
from envmorph.envelope import FRAME_COUNT, Envelope

GRAD_TOL = 1e-4
SEEDS = list(range(10))


def check_layer_grads(layer, x, rng):
    """Finite-difference check of input and parameter gradients."""
    y, cache = layer.forward(x)
    dy = rng.standard_normal(y.shape)

    def scalar(xv):
        out, _ = layer.forward(xv)
        return float(np.sum(out * dy))

    dx, grads = layer.backward(cache, dy)
    assert max_relative_error(dx, numeric_gradient(scalar, x.copy())) < GRAD_TOL

    for p_index, param in enumerate(layer.params()):
        def scalar_p(pv, _param=param):
            backup = _param.copy()
            _param[...] = pv
            out, _ = layer.forward(x)
            _param[...] = backup
            return float(np.sum(out * dy))

        numeric = numeric_gradient(scalar_p, param.copy())
        assert max_relative_error(grads[p_index], numeric) < GRAD_TOL


class TestConv1d:
    def test_identity_kernel(self, rng):
        layer = Conv1d(1, 1, stride=1, kernel_size=3, dtype=np.float64)
        layer.weight[1, 0, 0] = 1.0  # center tap
        x = rng.standard_normal((1, 3, 32))
        y, _ = layer.forward(x)
        assert np.allclose(y, x)

    def test_zero_input_no_bias(self, rng):
        layer = Conv1d(2, 3, stride=4, bias=False, dtype=np.float64, rng=rng)
        x = np.zeros((2, 2, 16))
        y, cache = layer.forward(x)
        assert np.all(y == 0.0)
        _, grads = layer.backward(cache, np.zeros_like(y))
        assert all(np.all(g == 0.0) for g in grads)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients_strided(self, seed):
        rng = np.random.default_rng(seed)
        layer = Conv1d(2, 3, stride=4, dtype=np.float64, rng=rng)
        check_layer_grads(layer, rng.standard_normal((2, 2, 16)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients_stride1(self, seed):
        rng = np.random.default_rng(100 + seed)
        layer = Conv1d(3, 2, stride=1, kernel_size=9, dtype=np.float64, rng=rng)
        check_layer_grads(layer, rng.standard_normal((3, 2, 12)), rng)

    def test_shape_mismatch(self, rng):
        layer = Conv1d(2, 3, stride=4, dtype=np.float64, rng=rng)
        with pytest.raises(InvalidArgument):
            layer.forward(rng.standard_normal((3, 2, 16)))
        with pytest.raises(InvalidArgument):
            layer.forward(rng.standard_normal((2, 2, 15)))  # not divisible


class TestOtherLayers:
    @pytest.mark.parametrize("seed", SEEDS)
    def test_dense_gradients(self, seed):
        rng = np.random.default_rng(200 + seed)
        layer = Dense(5, 4, dtype=np.float64, rng=rng)
        check_layer_grads(layer, rng.standard_normal((3, 5)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_relu_gradients(self, seed):
        rng = np.random.default_rng(300 + seed)
        check_layer_grads(ReLU(), rng.standard_normal((2, 3, 8)) + 0.05, rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_sigmoid_gradients(self, seed):
        rng = np.random.default_rng(400 + seed)
        check_layer_grads(Sigmoid(), rng.standard_normal((2, 3, 8)), rng)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_upsample_gradients(self, seed):
        rng = np.random.default_rng(500 + seed)
        check_layer_grads(NearestUpsample(4), rng.standard_normal((2, 3, 8)), rng)

    def test_sigmoid_extreme_values_safe(self):
        y, _ = Sigmoid().forward(np.array([-1e4, 0.0, 1e4]))
        assert np.all(np.isfinite(y))
        assert y[0] == 0.0 and y[1] == 0.5 and y[2] == 1.0


class TestLosses:
    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("loss_fn", [l1_loss, rmse_loss])
    def test_loss_gradients(self, seed, loss_fn):
        rng = np.random.default_rng(600 + seed)
        pred = rng.standard_normal((4, 6))
        target = rng.standard_normal((4, 6))

        def scalar(p):
            return loss_fn(p, target)[0]

        _, grad = loss_fn(pred, target)
        assert max_relative_error(grad, numeric_gradient(scalar, pred.copy())) < GRAD_TOL

    def test_rmse_loss_zero_case(self):
        x = np.ones((2, 3))
        value, grad = rmse_loss(x, x.copy())
        assert value == 0.0
        assert np.all(grad == 0.0)


class TestAutoencoderShapes:
    def test_encode_decode_shapes(self, rng):
        model = Autoencoder(seed=0)
        env = Envelope(rng.random(FRAME_COUNT).astype(np.float32))
        z = encode(env, model)
        assert z.shape == (LATENT_DIM,)
        out = decode(z, model)
        assert out.frames.shape == (FRAME_COUNT,)
        assert 0.0 < out.frames.min() and out.frames.max() < 1.0

    def test_encode_deterministic(self, rng):
        model = Autoencoder(seed=3)
        env = Envelope(rng.random(FRAME_COUNT).astype(np.float32))
        z1, z2 = encode(env, model), encode(env, model)
        assert np.array_equal(z1, z2)

    def test_zero_weight_decode_is_half(self):
        model = Autoencoder(seed=None)  # all-zero parameters
        out = decode(np.zeros(LATENT_DIM, dtype=np.float32), model)
        assert np.all(out.frames == 0.5)

    def test_downsampling_factor(self):
        model = Autoencoder(seed=0)
        strides = [l.stride for l in model.encoder if isinstance(l, Conv1d)]
        assert np.prod(strides) == FRAME_COUNT == 2048

    def test_lipschitz_perturbation(self, rng):
        # Small-weight model: latent distance bounded by the product of
        # per-layer operator-norm bounds (sum of per-tap spectral norms).
        model = Autoencoder(seed=None)
        gen = np.random.default_rng(7)
        bound = 1.0
        for layer in model.encoder:
            if not isinstance(layer, Conv1d):
                continue
            layer.weight[...] = gen.uniform(-0.01, 0.01, layer.weight.shape).astype(np.float32)
            tap_norms = [np.linalg.svd(w, compute_uv=False)[0] for w in layer.weight]
            bound *= float(np.sum(tap_norms))
        env = Envelope(rng.random(FRAME_COUNT).astype(np.float32))
        frames = env.frames.copy()
        delta = np.float32(1e-7)
        frames[1000] = min(1.0, frames[1000] + delta)
        z1 = encode(env, model)
        z2 = encode(Envelope(frames), model)
        dist = float(np.linalg.norm((z1 - z2).astype(np.float64)))
        assert dist <= bound * 1e-7 + 1e-12
        assert dist < 1e-2

    def test_nan_weights_raise_numeric_failure(self, rng):
        model = Autoencoder(seed=0)
        model.encoder[0].weight[0, 0, 0] = np.nan
        env = Envelope(rng.random(FRAME_COUNT).astype(np.float32))
        with pytest.raises(NumericFailure):
            encode(env, model)


class TestMapper:
    def test_features_equal_latents(self, rng):
        z = rng.standard_normal(LATENT_DIM).astype(np.float32)
        feats = mapper_features(z, z, 0.3)
        assert np.array_equal(feats[:64], 2 * z)
        assert np.all(feats[64:128] == 0.0)
        assert np.array_equal(feats[128:], z)

    def test_feature_symmetry_bitwise(self, rng):
        # alphas chosen with exactly-representable complements
        for k in range(50):
            z_a = rng.standard_normal(LATENT_DIM).astype(np.float32)
            z_b = rng.standard_normal(LATENT_DIM).astype(np.float32)
            alpha = float(rng.integers(0, 1025)) / 1024.0
            f1 = mapper_features(z_a, z_b, alpha)
            f2 = mapper_features(z_b, z_a, 1.0 - alpha)
            assert np.array_equal(f1, f2)

    def test_half_alpha_third_block(self, rng):
        z_a = rng.standard_normal(LATENT_DIM).astype(np.float32)
        z_b = rng.standard_normal(LATENT_DIM).astype(np.float32)
        feats = mapper_features(z_a, z_b, 0.5)
        assert np.array_equal(feats[128:], np.float32(0.5) * feats[:64])

    def test_forward_symmetry_bitwise(self, rng):
        model = Mapper(seed=0)
        for _ in range(10):
            z_a = rng.standard_normal(LATENT_DIM).astype(np.float32)
            z_b = rng.standard_normal(LATENT_DIM).astype(np.float32)
            alpha = float(rng.integers(0, 257)) / 256.0
            out1 = mapper_forward(z_a, z_b, alpha, model)
            out2 = mapper_forward(z_b, z_a, 1.0 - alpha, model)
            assert np.array_equal(out1, out2)

    def test_output_shape_and_zero_weights(self, rng):
        model = Mapper(seed=None)
        z = rng.standard_normal(LATENT_DIM).astype(np.float32)
        out = mapper_forward(z, z, 0.25, model)
        assert out.shape == (LATENT_DIM,)
        assert np.all(out == 0.0)


class TestAdam:
    def test_zero_gradient_keeps_params(self, rng):
        p = rng.standard_normal((3, 4)).astype(np.float32)
        before = p.copy()
        state = AdamState([p])
        for _ in range(5):
            adam_step([p], [np.zeros_like(p)], state, AdamConfig())
        assert np.array_equal(p, before)

    def test_zero_gradient_decays_moments(self, rng):
        p = rng.standard_normal((3, 4)).astype(np.float32)
        state = AdamState([p])
        state.m[0][:] = 0.5
        state.v[0][:] = 0.25
        adam_step([p], [np.zeros_like(p)], state, AdamConfig())
        assert np.all(state.m[0] < 0.5) and np.all(state.v[0] < 0.25)

    def test_first_step_magnitude(self, rng):
        g = rng.standard_normal(100).astype(np.float64) * 10.0  # |g| >> eps
        p = np.zeros(100, dtype=np.float64)
        cfg = AdamConfig(learning_rate=1e-3)
        adam_step([p], [g], AdamState([p]), cfg)
        assert np.allclose(p, -cfg.learning_rate * np.sign(g), atol=1e-8)

    def test_group_order_independent(self, rng):
        p1 = rng.standard_normal(5).astype(np.float32)
        p2 = rng.standard_normal(7).astype(np.float32)
        g1, g2 = (rng.standard_normal(x.shape).astype(np.float32) for x in (p1, p2))
        a1, a2 = p1.copy(), p2.copy()
        adam_step([a1, a2], [g1, g2], AdamState([a1, a2]), AdamConfig())
        b2, b1 = p2.copy(), p1.copy()
        adam_step([b2, b1], [g2, g1], AdamState([b2, b1]), AdamConfig())
        assert np.array_equal(a1, b1) and np.array_equal(a2, b2)

    def test_shape_mismatch(self, rng):
        p = rng.standard_normal(4)
        with pytest.raises(InvalidArgument):
            adam_step([p], [rng.standard_normal(3)], AdamState([p]), AdamConfig())
