"""Layer semantics tests: fixed points, hand-worked oracles, mode contracts.

Recurrent and normalization layers are checked against scalar-expanded
reference computations (explicit per-element loops over the defining
equations) rather than against vectorized re-implementations.
"""

import numpy as np
import pytest

from azarnet.errors import ConfigError, DimensionError, StateError
from azarnet.layers import (
    INFER,
    TRAIN,
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    Gru,
    LeakyRelu,
    MaxPool2x2,
    Reshape,
    Softmax,
    leaky_relu,
    sigmoid,
    softmax,
)
from azarnet.rng import Rng


class TestActivationFunctions:
    def test_leaky_relu_values(self):
        out = leaky_relu(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), alpha=0.1)
        assert np.allclose(out, [-0.3, -0.05, 0.0, 0.5, 3.0])

    def test_sigmoid_extremes_are_stable(self):
        out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert np.allclose(out, [0.0, 0.5, 1.0])

    def test_sigmoid_symmetry(self):
        x = Rng(1).uniform((100,), -8.0, 8.0)
        assert np.abs(sigmoid(x) + sigmoid(-x) - 1.0).max() < 1e-12

    def test_softmax_known_example(self):
        # softmax([2,0,0]) = e^2/(e^2+2), 1/(e^2+2), 1/(e^2+2)
        out = softmax(np.array([[2.0, 0.0, 0.0]]))
        assert np.allclose(out, [[0.78698604, 0.10650698, 0.10650698]], atol=1e-7)

    def test_softmax_shift_invariance(self):
        x = Rng(2).uniform((5, 7), -3.0, 3.0)
        assert np.abs(softmax(x) - softmax(x + 100.0)).max() < 1e-12

    def test_softmax_rows_sum_to_one(self):
        out = softmax(Rng(3).uniform((10, 7), -700.0, 700.0))
        assert np.all(np.isfinite(out))
        assert np.abs(out.sum(axis=1) - 1.0).max() < 1e-12


class TestConv2dLayer:
    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            Conv2d(1, 4, kernel_size=2)

    def test_infer_mode_caches_nothing(self):
        layer = Conv2d(1, 2)
        layer.init_params(Rng(0), np.float64)
        layer.forward(Rng(1).uniform((1, 4, 4, 1)), INFER)
        with pytest.raises(StateError):
            layer.backward(np.zeros((1, 4, 4, 2)))

    def test_param_count_formula(self):
        assert Conv2d(1, 16).param_count() == 3 * 3 * 1 * 16 + 16 == 160
        assert Conv2d(16, 32).param_count() == 3 * 3 * 16 * 32 + 32 == 4640

    def test_table_name(self):
        assert Conv2d(1, 16).table_name == "2D Convolution (3*3)(16)"


class TestLeakyReluLayer:
    def test_backward_scales_negative_side(self):
        layer = LeakyRelu(alpha=0.1)
        x = np.array([[2.0, -2.0]])
        layer.forward(x, TRAIN)
        gx = layer.backward(np.array([[5.0, 5.0]]))
        assert np.allclose(gx, [[5.0, 0.5]])


class TestDropoutLayer:
    def test_invalid_rate(self):
        with pytest.raises(ConfigError):
            Dropout(1.0)
        with pytest.raises(ConfigError):
            Dropout(-0.1)

    def test_infer_is_identity(self):
        layer = Dropout(0.4)
        x = Rng(1).uniform((8, 8))
        assert layer.forward(x, INFER) is x

    def test_train_needs_rng(self):
        with pytest.raises(StateError):
            Dropout(0.4).forward(np.ones((2, 2)), TRAIN, rng=None)

    def test_survivors_scaled_to_keep_expectation(self):
        layer = Dropout(0.5)
        x = np.ones((300, 300))
        out = layer.forward(x, TRAIN, Rng(11))
        vals = np.unique(out)
        assert set(np.round(vals, 6)) == {0.0, 2.0}
        assert abs(out.mean() - 1.0) < 0.05

    def test_backward_uses_same_mask(self):
        layer = Dropout(0.3)
        x = Rng(12).uniform((50, 50))
        out = layer.forward(x, TRAIN, Rng(13))
        gx = layer.backward(np.ones_like(x))
        assert np.array_equal(gx == 0.0, out == 0.0)

    def test_rate_zero_train_identity(self):
        layer = Dropout(0.0)
        x = np.ones((3, 3))
        assert np.array_equal(layer.forward(x, TRAIN, Rng(1)), x)
        assert np.array_equal(layer.backward(np.full((3, 3), 2.0)), np.full((3, 3), 2.0))


class TestBatchNormLayer:
    def test_train_output_is_standardized(self):
        layer = BatchNorm(3, eps=1e-3)
        x = Rng(20).uniform((64, 8, 8, 3), -5.0, 5.0)
        out = layer.forward(x, TRAIN)
        mean = out.mean(axis=(0, 1, 2))
        var = out.var(axis=(0, 1, 2))
        assert np.abs(mean).max() < 1e-10
        assert np.abs(var - 1.0).max() < 1e-2  # eps keeps it slightly below 1

    def test_running_stats_one_step(self):
        layer = BatchNorm(1, momentum=0.8)
        layer.init_params(Rng(0), np.float64)
        x = np.full((100, 1), 5.0)
        layer.forward(x, TRAIN)
        # running <- 0.8*0 + 0.2*5 and 0.8*1 + 0.2*0
        assert abs(layer.running_mean[0] - 1.0) < 1e-12
        assert abs(layer.running_var[0] - 0.8) < 1e-12

    def test_running_update_in_place(self):
        layer = BatchNorm(2)
        layer.init_params(Rng(0), np.float64)
        ref = layer.running_mean
        layer.forward(Rng(21).uniform((16, 2)), TRAIN)
        assert layer.running_mean is ref  # checkpoints hold live references

    def test_infer_uses_running_stats(self):
        layer = BatchNorm(1, momentum=0.0, eps=0.0)  # batch stats copied through
        layer.init_params(Rng(0), np.float64)
        x = np.array([[2.0], [4.0]])
        layer.forward(x, TRAIN)
        out = layer.forward(np.array([[3.0]]), INFER)
        assert abs(out[0, 0]) < 1e-12  # (3 - 3)/1

    def test_scalar_expanded_oracle(self):
        layer = BatchNorm(2, eps=1e-3)
        layer.init_params(Rng(0), np.float64)
        layer.gamma = np.array([2.0, 0.5])
        layer.beta = np.array([1.0, -1.0])
        x = Rng(22).uniform((5, 2), -1.0, 1.0)
        got = layer.forward(x, TRAIN)
        for c in range(2):
            col = x[:, c]
            mu = sum(col) / 5
            var = sum((v - mu) ** 2 for v in col) / 5
            for i in range(5):
                want = layer.gamma[c] * (col[i] - mu) / np.sqrt(var + 1e-3) + layer.beta[c]
                assert abs(got[i, c] - want) < 1e-12

    def test_empty_batch_rejected(self):
        with pytest.raises(DimensionError):
            BatchNorm(2).forward(np.zeros((0, 2)), TRAIN)

    def test_state_includes_running_tensors(self):
        assert set(BatchNorm(4).state()) == {"gamma", "beta", "running_mean", "running_var"}
        assert BatchNorm(16).param_count() == 64


class TestMaxPoolReshape:
    def test_pool_shape_rule(self):
        assert MaxPool2x2().out_shape((8, 8, 3)) == (4, 4, 3)
        with pytest.raises(DimensionError):
            MaxPool2x2().out_shape((7, 8, 3))

    def test_reshape_round_trip(self):
        layer = Reshape((64, 64))
        x = Rng(30).uniform((2, 8, 8, 64))
        out = layer.forward(x, TRAIN)
        assert out.shape == (2, 64, 64)
        assert np.array_equal(layer.backward(out), x)

    def test_reshape_count_mismatch(self):
        with pytest.raises(DimensionError):
            Reshape((64, 63)).forward(np.zeros((1, 8, 8, 64)), INFER)

    def test_reshape_is_row_major(self):
        # (1,2,2,2) -> (1,2,4): last axis fastest
        x = np.arange(8.0).reshape(1, 2, 2, 2)
        out = Reshape((2, 4)).forward(x, INFER)
        assert np.array_equal(out[0, 0], [0, 1, 2, 3])


class TestGruLayer:
    def test_zero_params_zero_input_fixed_point(self):
        layer = Gru(4, 3, return_sequences=True)
        out = layer.forward(np.zeros((2, 5, 4)), INFER)
        assert not out.any()  # h stays 0: z=sigmoid(0)=.5, hcand=tanh(0)=0

    def test_scalar_expanded_oracle(self):
        # 1 unit, 1 feature, 3 steps: follow the defining equations by hand
        layer = Gru(1, 1, return_sequences=True)
        layer.W = np.array([[0.3, -0.2, 0.5]])
        layer.U = np.array([[0.1, 0.4, -0.3]])
        layer.b_input = np.array([0.05, -0.05, 0.1])
        layer.b_recurrent = np.array([0.02, 0.03, -0.01])
        x = np.array([[[0.5], [-1.0], [0.25]]])
        got = layer.forward(x, INFER)[0, :, 0]

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        h = 0.0
        for t, xv in enumerate((0.5, -1.0, 0.25)):
            z = sig(xv * 0.3 + 0.05 + h * 0.1 + 0.02)
            r = sig(xv * -0.2 - 0.05 + h * 0.4 + 0.03)
            hc = np.tanh(xv * 0.5 + 0.1 + r * (h * -0.3 - 0.01))
            h = (1 - z) * hc + z * h
            assert abs(got[t] - h) < 1e-12

    def test_return_sequences_vs_final(self):
        rng = Rng(40)
        x = rng.uniform((3, 6, 4), -1.0, 1.0)
        seq_layer = Gru(4, 5, return_sequences=True)
        seq_layer.init_params(Rng(7), np.float64)
        fin_layer = Gru(4, 5, return_sequences=False)
        fin_layer.W = seq_layer.W.copy()
        fin_layer.U = seq_layer.U.copy()
        fin_layer.b_input = seq_layer.b_input.copy()
        fin_layer.b_recurrent = seq_layer.b_recurrent.copy()
        seq = seq_layer.forward(x, INFER)
        fin = fin_layer.forward(x, INFER)
        assert np.abs(seq[:, -1, :] - fin).max() < 1e-14

    def test_param_count_formula(self):
        assert Gru(64, 50, True).param_count() == 3 * (50 * 64 + 50 * 50 + 2 * 50) == 17400
        assert Gru(50, 100, False).param_count() == 3 * (100 * 50 + 100 * 100 + 2 * 100) == 45600

    def test_input_validation(self):
        with pytest.raises(DimensionError):
            Gru(4, 3, True).forward(np.zeros((2, 5, 7)), INFER)


class TestDenseLayer:
    def test_matmul_oracle(self):
        layer = Dense(3, 2)
        layer.W = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        layer.b = np.array([0.5, -0.5])
        out = layer.forward(np.array([[1.0, 0.0, -1.0]]), INFER)
        assert np.allclose(out, [[1 - 5 + 0.5, 2 - 6 - 0.5]])

    def test_grad_w_is_outer_product(self):
        layer = Dense(3, 2)
        layer.init_params(Rng(0), np.float64)
        x = np.array([[1.0, 2.0, 3.0]])
        gy = np.array([[0.5, -1.0]])
        layer.forward(x, TRAIN)
        layer.backward(gy)
        assert np.allclose(layer.grads()["W"], np.outer(x[0], gy[0]))
        assert np.allclose(layer.grads()["b"], gy[0])

    def test_classifier_table_name(self):
        assert Dense(5, 7, classifier=True).table_name == "FC (7) (classifier)"
        assert Dense(100, 5).table_name == "FC (5)"


class TestSoftmaxLayer:
    def test_backward_matches_jacobian(self):
        layer = Softmax()
        x = Rng(50).uniform((1, 4), -2.0, 2.0)
        p = layer.forward(x, TRAIN)[0]
        gy = Rng(51).uniform((1, 4), -1.0, 1.0)
        got = layer.backward(gy)[0]
        jac = np.diag(p) - np.outer(p, p)
        assert np.abs(got - jac @ gy[0]).max() < 1e-12
