"""Finite-difference gradient verification.

Every layer type is checked in float64 against central differences at
relative error < 1e-4 (they typically land near 1e-10); the reduced
end-to-end model — same layer sequence, smaller tensors — checks the full
training loss including both penalty terms.
"""

import numpy as np

from azarnet.gradcheck import (
    FD_STEP,
    LAYER_CHECKS,
    LAYER_TOLERANCE,
    MODEL_TOLERANCE,
    check_model,
    fd_grad,
    rel_error,
    run_layer_suite,
)
from azarnet.layers import INFER, TRAIN, Dense, LeakyRelu
from azarnet.rng import Rng

EXPECTED_LAYERS = {
    "conv2d",
    "maxpool",
    "batchnorm",
    "dropout",
    "leaky_relu",
    "gru",
    "dense",
    "softmax",
    "softmax_xent",
}


class TestLayerSuite:
    def test_covers_every_layer_type(self):
        assert set(LAYER_CHECKS) == EXPECTED_LAYERS

    def test_all_layers_pass_tolerance(self):
        errs = run_layer_suite(seed=0)
        for name, err in errs.items():
            assert err < LAYER_TOLERANCE, f"{name}: {err:.3e}"

    def test_stable_across_seeds(self):
        for seed in (1, 2):
            errs = run_layer_suite(seed=seed)
            assert max(errs.values()) < LAYER_TOLERANCE


class TestEndToEndModel:
    def test_total_loss_gradient(self):
        assert check_model(seed=0) < MODEL_TOLERANCE

    def test_second_seed(self):
        assert check_model(seed=5) < MODEL_TOLERANCE


class TestMachinery:
    def test_fd_grad_on_quadratic(self):
        # d/dx sum(x^2) = 2x, exact to O(h^2) under central differences
        x = Rng(1).uniform((5,), -2.0, 2.0)

        def f():
            return float((x * x).sum())

        g = fd_grad(f, x, FD_STEP)
        assert rel_error(g, 2.0 * x) < 1e-9

    def test_rel_error_scale_free(self):
        a = np.array([1e8, 2e8])
        assert rel_error(a, a * (1 + 1e-6)) < 1e-5

    def test_leaky_negative_region_slope(self):
        layer = LeakyRelu(alpha=0.1)
        x = np.array([[-3.0]])
        layer.forward(x, TRAIN)
        assert layer.backward(np.array([[1.0]]))[0, 0] == 0.1

        def f():
            return float(layer.forward(x, INFER).sum())

        fd = fd_grad(f, x, FD_STEP)
        assert abs(fd[0, 0] - 0.1) < 1e-8

    def test_dense_bias_gradient_shape(self):
        layer = Dense(4, 3)
        layer.init_params(Rng(2), np.float64)
        x = Rng(3).uniform((6, 4), -1.0, 1.0)
        layer.forward(x, TRAIN)
        layer.backward(np.ones((6, 3)))
        assert layer.grads()["b"].shape == (3,)
        assert np.allclose(layer.grads()["b"], 6.0)
