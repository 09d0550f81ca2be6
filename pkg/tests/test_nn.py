import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qntklab import nn
from qntklab.nn import (
    DivergenceError,
    NetworkConfig,
    Optimizer,
    forward,
    forward_batch,
    gradient,
    gradient_matrix,
    init,
    train,
)


def flat_to_state(template, vec):
    state = template.copy()
    i = 0
    for l in range(state.config.depth):
        w, b = state.weights[l], state.biases[l]
        w[...] = vec[i : i + w.size].reshape(w.shape)
        i += w.size
        b[...] = vec[i : i + b.size]
        i += b.size
    return state


class TestConfig:
    def test_output_width_must_be_one(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 2))

    def test_activation_count(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 4, 1), activations=("relu", "relu"))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 4, 1), activations=("tanh",))

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 1), init_scheme="xavier")

    def test_param_count(self):
        cfg = NetworkConfig(widths=(3, 5, 1))
        assert cfg.n_params == (5 * 3 + 5) + (1 * 5 + 1)


class TestInit:
    def test_unit_gaussian_moments(self):
        cfg = NetworkConfig(widths=(1000, 1000, 1))
        state = init(cfg, 0)
        w = state.weights[0].ravel()
        assert abs(w.mean()) < 3e-3
        assert abs(w.var() - 1.0) < 0.01

    def test_he_scaled_variance(self):
        cfg = NetworkConfig(widths=(300, 300, 1), init_scheme="he_scaled")
        state = init(cfg, 1)
        target = 2.0 / cfg.n_params
        assert abs(state.weights[0].var() / target - 1.0) < 0.02

    def test_determinism(self):
        cfg = NetworkConfig(widths=(4, 6, 1))
        s1, s2 = init(cfg, 7), init(cfg, 7)
        for a, b in zip(s1.weights + s1.biases, s2.weights + s2.biases):
            np.testing.assert_array_equal(a, b)


class TestForward:
    def test_zero_parameters(self):
        cfg = NetworkConfig(widths=(3, 4, 1), xi=0.5)
        state = init(cfg, 0)
        for arr in state.weights + state.biases:
            arr[...] = 0.0
        assert forward(state, np.array([1.0, -2.0, 3.0])) == 0.0

    def test_linear_closed_form(self):
        cfg = NetworkConfig(widths=(4, 1), xi=0.3, activations=())
        state = init(cfg, 1)
        x = np.array([0.5, -1.0, 2.0, 0.1])
        expected = state.weights[0][0] @ x / 2.0 + 0.3 * state.biases[0][0]
        assert forward(state, x) == pytest.approx(expected, abs=1e-14)

    def test_matches_dense_matrix_oracle(self):
        cfg = NetworkConfig(widths=(3, 5, 1), xi=0.2, activations=("relu",))
        state = init(cfg, 2)
        x = np.array([0.4, -0.7, 1.1])
        h1 = state.weights[0] @ x / np.sqrt(3) + 0.2 * state.biases[0]
        a1 = np.maximum(h1, 0)
        out = state.weights[1] @ a1 / np.sqrt(5) + 0.2 * state.biases[1]
        assert forward(state, x) == pytest.approx(float(out[0]), abs=1e-12)

    def test_shape_mismatch(self):
        cfg = NetworkConfig(widths=(3, 1), activations=())
        with pytest.raises(ValueError):
            forward(init(cfg, 0), np.zeros(4))


class TestGradient:
    @pytest.mark.parametrize("acts", [("sigmoid", "sigmoid"), ("identity", "identity")])
    def test_finite_differences(self, acts):
        cfg = NetworkConfig(widths=(3, 4, 3, 1), xi=0.6, activations=acts)
        state = init(cfg, 3)
        x = np.random.default_rng(4).standard_normal(3)
        g = gradient(state, x)
        flat = state.flat()
        h = 1e-5
        for p in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[p] += h
            down[p] -= h
            fd = (forward(flat_to_state(state, up), x) - forward(flat_to_state(state, down), x)) / (2 * h)
            assert g[p] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_linear_model_gradient(self):
        cfg = NetworkConfig(widths=(4, 1), xi=0.7, activations=())
        state = init(cfg, 5)
        x = np.array([1.0, 2.0, 3.0, 4.0])
        g = gradient(state, x)
        np.testing.assert_allclose(g[:4], x / 2.0, atol=1e-14)
        assert g[4] == pytest.approx(0.7)

    def test_zero_network_bias_gradient(self):
        cfg = NetworkConfig(widths=(2, 1), xi=0.9, activations=())
        state = init(cfg, 6)
        for arr in state.weights + state.biases:
            arr[...] = 0.0
        g = gradient(state, np.zeros(2))
        assert g[-1] == pytest.approx(0.9)

    def test_gradient_matrix_consistent(self):
        cfg = NetworkConfig(widths=(3, 4, 1), xi=0.1)
        state = init(cfg, 7)
        xs = np.random.default_rng(8).standard_normal((5, 3))
        gm = gradient_matrix(state, xs)
        for i, x in enumerate(xs):
            np.testing.assert_allclose(gm[i], gradient(state, x), atol=1e-12)


class TestOptimizer:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Optimizer("rmsprop", 0.1)

    def test_sgd_step(self):
        p = [np.array([1.0])]
        Optimizer("sgd", 0.5).update(p, [np.array([2.0])])
        assert p[0][0] == pytest.approx(0.0)

    def test_adam_first_step_magnitude(self):
        """Bias-corrected Adam moves by ~eta on the first step."""
        p = [np.array([0.0])]
        Optimizer("adam", 0.1).update(p, [np.array([3.0])])
        assert p[0][0] == pytest.approx(-0.1, rel=1e-6)


class TestTrain:
    def test_zero_learning_rate(self):
        cfg = NetworkConfig(widths=(2, 3, 1))
        state = init(cfg, 9)
        before = state.flat()
        xs = np.random.default_rng(10).standard_normal((4, 2))
        y = np.zeros(4)
        traj = train(state, xs, y, "mse", Optimizer("sgd", 0.0), steps=5)
        np.testing.assert_array_equal(state.flat(), before)
        assert np.all(traj.cost == traj.cost[0])

    def test_scalar_linear_recursion(self):
        """1-parameter linear model: residual decays as (1 - eta*k)^t."""
        cfg = NetworkConfig(widths=(1, 1), xi=0.0, activations=())
        state = init(cfg, 11)
        x_val, y_val, eta = 2.0, 3.0, 0.05
        k = x_val * x_val  # effective kernel of the 1-d model
        w0 = state.weights[0][0, 0]
        traj = train(
            state,
            np.array([[x_val]]),
            np.array([y_val]),
            "mse",
            Optimizer("sgd", eta),
            steps=20,
        )
        resid0 = w0 * x_val - y_val
        for t, f_t in zip(traj.times.astype(int), traj.outputs[:, 0]):
            assert f_t - y_val == pytest.approx(resid0 * (1 - eta * k) ** t, abs=1e-10)

    def test_divergence_error_names_step(self):
        cfg = NetworkConfig(widths=(1, 1), xi=0.0, activations=())
        state = init(cfg, 12)
        with pytest.raises(DivergenceError, match=r"step \d+"):
            train(
                state,
                np.array([[1.0]]),
                np.array([1e3]),
                "mse",
                Optimizer("sgd", 10.0),
                steps=400,
            )

    def test_bce_label_validation(self):
        cfg = NetworkConfig(widths=(1, 1), activations=())
        with pytest.raises(ValueError):
            train(init(cfg, 0), np.array([[1.0]]), np.array([0.5]), "bce",
                  Optimizer("sgd", 0.1), steps=1)

    def test_empty_dataset(self):
        cfg = NetworkConfig(widths=(1, 1), activations=())
        with pytest.raises(ValueError):
            train(init(cfg, 0), np.zeros((0, 1)), np.zeros(0), "mse",
                  Optimizer("sgd", 0.1), steps=1)

    def test_bce_training_decreases_cost(self):
        cfg = NetworkConfig(widths=(2, 8, 1), init_scheme="he_scaled")
        state = init(cfg, 13)
        rng = np.random.default_rng(14)
        xs = rng.standard_normal((20, 2))
        y = (xs[:, 0] > 0).astype(float)
        traj = train(state, xs, y, "bce", Optimizer("adam", 1e-2), steps=200,
                     record_every=50)
        assert traj.cost[-1] < traj.cost[0]


class TestNtkParameterization:
    def test_init_output_variance_width_independent(self):
        """Output variance at init stays at the infinite-width value."""
        rng_inputs = np.random.default_rng(15)
        x = rng_inputs.standard_normal(4)
        xi = 0.5
        # theory: Sigma^(2)(x,x) = Sigma^(1)(x,x)/2 + xi^2
        sigma1 = float(x @ x) / 4 + xi * xi
        target = sigma1 / 2 + xi * xi
        for width in (64, 512):
            cfg = NetworkConfig(widths=(4, width, 1), xi=xi)
            outs = [forward(init(cfg, s), x) for s in range(600)]
            assert np.var(outs) == pytest.approx(target, rel=0.2)

    def test_lazy_training_displacement_shrinks(self):
        rng = np.random.default_rng(16)
        xs = rng.standard_normal((10, 3))
        y = rng.standard_normal(10)
        disp = []
        for width in (32, 256, 2048):
            cfg = NetworkConfig(widths=(3, width, 1))
            state = init(cfg, 17)
            theta0 = state.flat()
            train(state, xs, y, "mse", Optimizer("sgd", 1e-3), steps=100,
                  record_every=100)
            disp.append(np.linalg.norm(state.flat() - theta0) / np.linalg.norm(theta0))
        assert disp[0] > disp[1] > disp[2]


class TestSerialization:
    def test_checkpoint_csv(self, tmp_path):
        cfg = NetworkConfig(widths=(2, 3, 1), xi=0.1)
        state = init(cfg, 18)
        path = tmp_path / "net.csv"
        state.to_csv(path)
        text = path.read_text()
        assert text.startswith("# widths=2,3,1")
        assert len(text.strip().splitlines()) == 2 + cfg.n_params

    def test_training_log_csv(self, tmp_path):
        cfg = NetworkConfig(widths=(1, 1), activations=())
        state = init(cfg, 19)
        traj = train(state, np.array([[1.0]]), np.array([0.5]), "mse",
                     Optimizer("sgd", 0.1), steps=3)
        path = tmp_path / "log.csv"
        nn.training_log_csv(traj, path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "step,cost"
        assert len(rows) == 5
