import numpy as np
import pytest

from splitshield.engine import (Conv, Flatten, FullyConnected, MaxPool,
                                ModelGraph, ReLU, available_backends, forward,
                                forward_prefix, forward_suffix, input_gradient,
                                layer_flops, model_flops, set_backend)
from splitshield.engine import backend as backend_mod
from splitshield.errors import NonFiniteError, ShapeError

from helpers import make_random_model, sample_safe_input
from oracles import (central_difference_gradient, gradient_relative_error,
                     naive_conv2d, naive_fc, naive_maxpool)


def scalar_conv_model():
    # 1x1 conv, one channel, weight 2, bias 0
    return ModelGraph([Conv(np.full((1, 1, 1, 1), 2.0), np.zeros(1))], (1, 1, 1))


class TestForward:
    def test_scalar_conv_doubles(self, kernel_backend):
        out = forward(scalar_conv_model(), np.array([[[3.0]]]))
        assert out[-1] == pytest.approx(6.0)
        assert out[-1].shape == (1, 1, 1)

    def test_relu_definition(self, kernel_backend):
        model = ModelGraph([ReLU()], (3,))
        out = forward(model, np.array([-1.0, 0.0, 2.0]))[-1]
        assert np.array_equal(out, [0.0, 0.0, 2.0])

    def test_two_layer_conv_matches_naive_oracle(self, kernel_backend, rng):
        for _ in range(5):
            w1 = rng.normal(size=(3, 2, 3, 3))
            b1 = rng.normal(size=3)
            w2 = rng.normal(size=(2, 3, 2, 2))
            b2 = rng.normal(size=2)
            model = ModelGraph([Conv(w1, b1, padding=1), Conv(w2, b2)], (2, 4, 4))
            x = rng.normal(size=(2, 4, 4))
            acts = forward(model, x)
            ref1 = naive_conv2d(x, w1, b1, padding=1)
            ref2 = naive_conv2d(ref1, w2, b2)
            np.testing.assert_allclose(acts[0], ref1, atol=1e-12)
            np.testing.assert_allclose(acts[1], ref2, atol=1e-12)

    def test_maxpool_and_fc_match_oracles(self, kernel_backend, rng):
        x = rng.normal(size=(3, 4, 4))
        model = ModelGraph([MaxPool(2), Flatten(),
                            FullyConnected(rng.normal(size=(5, 12)), rng.normal(size=5))],
                           (3, 4, 4))
        acts = forward(model, x)
        pooled = naive_maxpool(x, 2)
        np.testing.assert_allclose(acts[0], pooled, atol=0)
        np.testing.assert_allclose(
            acts[2], naive_fc(pooled.reshape(-1), model.layers[2].weight,
                              model.layers[2].bias), atol=1e-12)

    def test_input_shape_mismatch_reports_layer(self):
        with pytest.raises(ShapeError) as err:
            forward(scalar_conv_model(), np.zeros((2, 1, 1)))
        assert err.value.layer == 0

    def test_chain_shape_mismatch_reports_offending_layer(self):
        with pytest.raises(ShapeError) as err:
            ModelGraph([Conv(np.zeros((2, 1, 3, 3)), np.zeros(2)),
                        FullyConnected(np.zeros((4, 8)), np.zeros(4))], (1, 5, 5))
        assert err.value.layer == 2

    def test_non_finite_input_rejected(self):
        x = np.full((1, 1, 1), np.nan)
        with pytest.raises(NonFiniteError):
            forward(scalar_conv_model(), x)

    def test_determinism_bit_identical(self, kernel_backend, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        first = forward(model, x)
        second = forward(model, x)
        for a, b in zip(first, second):
            assert np.array_equal(a, b)


class TestSplit:
    def test_prefix_zero_is_input(self, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        assert np.array_equal(forward_prefix(model, x, 0), x)

    def test_prefix_full_is_forward(self, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        assert np.array_equal(forward_prefix(model, x, model.n_layers),
                              forward(model, x)[-1])

    def test_prefix_matches_forward_elementwise(self, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        acts = forward(model, x)
        for m in range(1, model.n_layers + 1):
            assert np.array_equal(forward_prefix(model, x, m), acts[m - 1])

    def test_suffix_identity_cases(self, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        out = forward(model, x)[-1]
        v = forward_prefix(model, x, model.n_layers)
        assert np.array_equal(forward_suffix(model, v, model.n_layers), v)
        assert np.array_equal(forward_suffix(model, x, 0), out)

    def test_split_consistency_every_point(self, kernel_backend, rng):
        for _ in range(5):
            model = make_random_model(rng)
            x = rng.normal(size=model.input_shape)
            out = forward(model, x)[-1]
            for m in range(model.n_layers + 1):
                v = forward_prefix(model, x, m)
                assert np.array_equal(forward_suffix(model, v, m), out)

    def test_split_out_of_range(self, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        with pytest.raises(ShapeError):
            forward_prefix(model, x, model.n_layers + 1)
        with pytest.raises(ShapeError):
            forward_prefix(model, x, -1)

    def test_suffix_shape_mismatch(self, rng):
        model = ModelGraph([Flatten(), FullyConnected(np.eye(4), np.zeros(4))], (2, 2))
        with pytest.raises(ShapeError):
            forward_suffix(model, np.zeros(3), 1)


class TestInputGradient:
    def test_linear_layer_gradient_is_w_transpose_g(self, kernel_backend, rng):
        w = rng.normal(size=(4, 6))
        model = ModelGraph([FullyConnected(w, np.zeros(4))], (6,))
        g = rng.normal(size=4)
        x = rng.normal(size=6)
        grad = input_gradient(model, 1, g, x)
        np.testing.assert_allclose(grad, w.T @ g, atol=1e-12)

    def test_relu_blocks_negative_preactivations(self):
        model = ModelGraph([ReLU()], (3,))
        grad = input_gradient(model, 1, np.ones(3), np.array([-2.0, 0.0, 5.0]))
        assert np.array_equal(grad, [0.0, 0.0, 1.0])

    def test_matches_finite_differences_on_random_models(self, kernel_backend):
        rng = np.random.default_rng(7)
        for _ in range(8):
            model = make_random_model(rng)
            x = sample_safe_input(model, rng)
            m = model.n_layers
            g_out = rng.normal(size=model.output_shape(m))

            def loss(z):
                return float(np.sum(forward_prefix(model, z, m) * g_out))

            analytic = input_gradient(model, m, g_out, x)
            numeric = central_difference_gradient(loss, x, h=1e-5)
            assert gradient_relative_error(analytic, numeric) < 1e-4

    def test_gradient_shape_mismatch(self, rng):
        model = make_random_model(rng)
        x = rng.normal(size=model.input_shape)
        with pytest.raises(ShapeError):
            input_gradient(model, model.n_layers, np.zeros((99,)), x)

    def test_non_finite_loss_gradient_rejected(self, rng):
        model = scalar_conv_model()
        bad = np.full((1, 1, 1), np.inf)
        with pytest.raises(NonFiniteError):
            input_gradient(model, 1, bad, np.ones((1, 1, 1)))


class TestFlops:
    def test_unit_conv(self):
        layer = Conv(np.zeros((1, 1, 1, 1)), np.zeros(1))
        assert layer_flops(layer, (1, 1, 1)) == 4

    def test_conv_output_dims_convention(self):
        # 3x3 kernel, padding 1 on a 4x4 input keeps 4x4 output dims
        layer = Conv(np.zeros((8, 3, 3, 3)), np.zeros(8), padding=1)
        assert layer_flops(layer, (3, 4, 4)) == 2 * 16 * (3 * 9 + 1) * 8 == 7168

    def test_fc(self):
        layer = FullyConnected(np.zeros((3, 2)), np.zeros(3))
        assert layer_flops(layer, (2,)) == 9

    def test_activation_layers_are_free(self):
        assert layer_flops(ReLU(), (4, 4, 4)) == 0
        assert layer_flops(MaxPool(2), (4, 4, 4)) == 0
        assert layer_flops(Flatten(), (4, 4, 4)) == 0

    def test_totals_do_not_depend_on_data(self, rng):
        model = make_random_model(rng)
        assert model_flops(model) == model_flops(model)
        relabeled = ModelGraph(model.layers, model.input_shape)
        assert model_flops(relabeled) == model_flops(model)


@pytest.mark.skipif(len(available_backends()) < 2,
                    reason="compiled extension not built")
class TestBackendEquivalence:
    def test_forward_and_input_gradients_bit_identical(self, rng):
        for _ in range(5):
            model = make_random_model(rng)
            x = rng.normal(size=model.input_shape)
            m = model.n_layers
            g = rng.normal(size=model.output_shape(m))
            results = {}
            for name in available_backends():
                set_backend(name)
                results[name] = (forward(model, x), input_gradient(model, m, g, x))
            set_backend("cython" if "cython" in available_backends() else "python")
            ref_acts, ref_grad = results["python"]
            other_acts, other_grad = results["cython"]
            for a, b in zip(ref_acts, other_acts):
                assert np.array_equal(a, b)
            assert np.array_equal(ref_grad, other_grad)

    def test_conv_param_gradients_agree_closely(self, rng):
        from splitshield.engine.kernels_py import conv2d_backward_params as py_params
        from splitshield.engine._kernels import conv2d_backward_params as cy_params
        xp = rng.normal(size=(3, 6, 6))
        gy = rng.normal(size=(4, 4, 4))
        # weights implied: c_in=3, k=3, stride=1
        gw_py, gb_py = py_params(gy, xp, 3, 3, 1)
        gw_cy, gb_cy = cy_params(np.ascontiguousarray(gy), np.ascontiguousarray(xp), 3, 3, 1)
        np.testing.assert_allclose(gw_py, gw_cy, rtol=1e-12)
        np.testing.assert_allclose(gb_py, gb_cy, rtol=1e-12)

    def test_default_backend_prefers_cython(self):
        assert backend_mod._initial() in available_backends()
