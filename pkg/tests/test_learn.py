import math

import numpy as np
import pytest

from oracles import numeric_param_gradients, relu_kink_clearance, scalar_lstm_step_ref
from trackpose.estimators import ChannelSpec, FeatureSchema, ModelNotTrained, fit_standardizer
from trackpose.learn import (
    Adam,
    Checkpoint,
    LstmModel,
    MlpModel,
    NonFiniteLoss,
    RegressionData,
    ShapeMismatch,
    TrainConfig,
    backward_and_step,
    load_checkpoint,
    lstm_forward,
    mlp_forward,
    model_forward_backward,
    save_checkpoint,
    train,
)


def _zeroed(model):
    for value in model.params.values():
        value[:] = 0.0
    return model


def _grad_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    for name in numeric:
        a, n = analytic[name], numeric[name]
        err = np.abs(a - n)
        tol = rtol * np.maximum(np.abs(n), atol / rtol)
        assert (err <= tol).all(), f"{name}: max err {err.max():.3e} vs tol {tol.min():.3e}"


class TestMlpForward:
    def test_zero_weights_give_zero(self):
        model = _zeroed(MlpModel.create(4, hidden_size=8, hidden_layers=2))
        np.testing.assert_allclose(mlp_forward(model, np.ones(4)), np.zeros(3))

    def test_hand_computed_chain(self):
        params = {
            "h0.W": np.array([[2.0]]),
            "h0.b": np.array([0.1]),
            "h1.W": np.array([[1.5]]),
            "h1.b": np.array([0.2]),
            "out.W": np.array([[0.5, -0.3, 2.0]]),
            "out.b": np.array([0.01, 0.02, 0.03]),
        }
        model = MlpModel(1, 1, 2, params)
        x = 0.5
        a0 = max(2.0 * x + 0.1, 0.0)
        a1 = max(1.5 * a0 + 0.2, 0.0)
        expected = np.array([0.5 * a1 + 0.01, -0.3 * a1 + 0.02, 2.0 * a1 + 0.03])
        np.testing.assert_allclose(mlp_forward(model, np.array([x])), expected, rtol=1e-14)

    def test_relu_zeroes_negative_preactivations(self):
        params = {
            "h0.W": np.array([[1.0]]),
            "h0.b": np.array([0.0]),
            "out.W": np.array([[1.0, 1.0, 1.0]]),
            "out.b": np.zeros(3),
        }
        model = MlpModel(1, 1, 1, params)
        np.testing.assert_allclose(model.predict(np.array([-3.0])), np.zeros(3))
        assert model.predict(np.array([2.0]))[0] == pytest.approx(2.0)

    def test_shape_mismatch(self):
        model = MlpModel.create(4, hidden_size=8, hidden_layers=1)
        with pytest.raises(ShapeMismatch):
            model.predict(np.ones(5))

    def test_batch_matches_single(self, rng):
        model = MlpModel.create(5, hidden_size=16, hidden_layers=3, rng=rng)
        X = rng.normal(0, 1, (7, 5))
        batch = model.predict(X)
        for i in range(7):
            np.testing.assert_allclose(batch[i], model.predict(X[i]), atol=1e-14)


class TestLstmForward:
    def test_zero_weights_give_zero(self):
        model = _zeroed(LstmModel.create(3, hidden_size=4, hidden_layers=2, window=5))
        np.testing.assert_allclose(lstm_forward(model, np.ones((5, 3))), np.zeros(3))

    def test_scalar_cell_matches_reference(self):
        wx = (0.7, -0.4, 1.1, 0.3)
        wh = (0.2, 0.5, -0.6, 0.9)
        b = (0.05, 1.0, -0.1, 0.2)
        params = {
            "l0.Wx": np.array([wx]),
            "l0.Wh": np.array([wh]),
            "l0.b": np.array(b),
            "out.W": np.array([[1.0, -2.0, 0.5]]),
            "out.b": np.array([0.0, 0.1, -0.1]),
        }
        model = LstmModel(1, 1, 1, 3, params)
        xs = [0.4, -0.2, 0.9]
        h = c = 0.0
        for x in xs:
            h, c = scalar_lstm_step_ref(x, h, c, wx, wh, b)
        expected = np.array([1.0 * h + 0.0, -2.0 * h + 0.1, 0.5 * h - 0.1])
        out = lstm_forward(model, np.array(xs).reshape(3, 1))
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_repeated_frame_converges_to_fixed_point(self):
        wx = (0.3, 0.2, 0.5, -0.1)
        wh = (0.1, -0.2, 0.3, 0.2)
        b = (0.0, 1.0, 0.1, 0.0)
        params = {
            "l0.Wx": np.array([wx]),
            "l0.Wh": np.array([wh]),
            "l0.b": np.array(b),
            "out.W": np.array([[1.0, 1.0, 1.0]]),
            "out.b": np.zeros(3),
        }
        x = 0.6
        # Iterate the scalar cell to its fixed point.
        h = c = 0.0
        for _ in range(10000):
            h_new, c_new = scalar_lstm_step_ref(x, h, c, wx, wh, b)
            if abs(h_new - h) < 1e-13 and abs(c_new - c) < 1e-13:
                break
            h, c = h_new, c_new
        fixed = h
        short = LstmModel(1, 1, 1, 60, params).predict(np.full((60, 1), x))
        longer = LstmModel(1, 1, 1, 120, params).predict(np.full((120, 1), x))
        assert abs(short[0] - fixed) < 1e-6
        assert abs(longer[0] - fixed) < 1e-9
        assert abs(short[0] - longer[0]) < 1e-6

    def test_window_length_enforced(self):
        model = LstmModel.create(3, hidden_size=4, hidden_layers=1, window=5)
        with pytest.raises(ShapeMismatch):
            model.predict(np.ones((4, 3)))

    def test_translation_consistency(self, rng):
        model = LstmModel.create(3, hidden_size=6, hidden_layers=2, window=4, rng=rng)
        window = rng.normal(0, 1, (4, 3))
        out1 = model.predict(window)
        out2 = model.predict(window.copy())
        np.testing.assert_array_equal(out1, out2)

    def test_forget_bias_initialized_to_one(self):
        model = LstmModel.create(3, hidden_size=4, hidden_layers=2, window=5)
        for layer in range(2):
            bias = model.params[f"l{layer}.b"]
            np.testing.assert_allclose(bias[4:8], 1.0)
            np.testing.assert_allclose(bias[:4], 0.0)


class TestGradients:
    def test_mlp_gradients_match_finite_differences(self):
        # Pick a case whose pre-activations clear the ReLU kinks by much
        # more than the finite-difference step.
        for seed in range(100):
            case = np.random.default_rng(seed)
            model = MlpModel.create(3, hidden_size=6, hidden_layers=2, rng=case)
            X = case.normal(0, 1, (5, 3))
            T = case.normal(0, 1, (5, 3))
            if relu_kink_clearance(model, X) > 1e-3:
                break
        else:
            pytest.fail("no kink-free gradient-check case found")
        _, analytic = model_forward_backward(model, X, T)
        numeric = numeric_param_gradients(model, X, T)
        _grad_close(analytic, numeric)

    def test_lstm_gradients_match_finite_differences(self, rng):
        model = LstmModel.create(2, hidden_size=3, hidden_layers=2, window=4, rng=rng)
        X = rng.normal(0, 1, (3, 4, 2))
        T = rng.normal(0, 1, (3, 3))
        _, analytic = model_forward_backward(model, X, T)
        numeric = numeric_param_gradients(model, X, T)
        _grad_close(analytic, numeric)

    def test_zero_residual_means_zero_gradients(self, rng):
        model = MlpModel.create(3, hidden_size=4, hidden_layers=1, rng=rng)
        X = rng.normal(0, 1, (4, 3))
        T = model.predict(X)
        before = {k: v.copy() for k, v in model.params.items()}
        cfg = TrainConfig(hidden_size=4, hidden_layers=1, epochs=1)
        opt = Adam(model.params, cfg)
        loss = backward_and_step(model, X, T, opt)
        assert loss == 0.0
        for name in before:
            np.testing.assert_array_equal(model.params[name], before[name])

    def test_overfit_single_batch(self, rng):
        model = MlpModel.create(2, hidden_size=16, hidden_layers=2, rng=rng)
        X = rng.normal(0, 1, (8, 2))
        T = rng.normal(0, 0.5, (8, 3))
        cfg = TrainConfig(learning_rate=0.01, hidden_size=16, hidden_layers=2, epochs=1)
        opt = Adam(model.params, cfg)
        losses = [backward_and_step(model, X, T, opt) for _ in range(6000)]
        assert losses[-1] < 1e-6
        assert losses[-1] < losses[0]

    def test_non_finite_loss_raises(self, rng):
        model = MlpModel.create(2, hidden_size=4, hidden_layers=1, rng=rng)
        model.params["out.b"][:] = 0.0
        X = np.full((2, 2), 1e200)
        T = np.zeros((2, 3))
        cfg = TrainConfig(hidden_size=4, hidden_layers=1)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteLoss):
            backward_and_step(model, X, T, Adam(model.params, cfg))


def _toy_data(rng, n_per_ep=300, width=4, episodes=3):
    """Linear mapping v = A x restricted to 3 outputs; learnable by design."""
    A = rng.normal(0, 1, (width, 3))
    schema = FeatureSchema([ChannelSpec(f"c{i}", "ic") for i in range(width)])
    eps = []
    for _ in range(episodes):
        X = rng.normal(0, 1, (n_per_ep, width))
        eps.append((X, X @ A))
    std = fit_standardizer(schema, np.concatenate([x for x, _ in eps]))
    eps = [(std.transform(x), t) for x, t in eps]
    return RegressionData(train=eps[:-1], val=eps[-1:], schema=std.schema, standardizer=std), A


class TestTrain:
    def test_zero_epochs_keeps_initial_weights(self, rng):
        data, _ = _toy_data(rng)
        cfg = TrainConfig(epochs=0, hidden_size=8, hidden_layers=1, batch_size=64, seed=7)
        result = train("mlp", data, cfg)
        fresh = MlpModel.create(len(data.schema), 8, 1, np.random.default_rng(7))
        for name, value in result.checkpoint.params.items():
            np.testing.assert_array_equal(value, fresh.params[name])

    def test_learns_linear_mapping(self, rng):
        data, _ = _toy_data(rng, n_per_ep=2000)
        cfg = TrainConfig(
            epochs=100, hidden_size=16, hidden_layers=1, batch_size=256,
            learning_rate=1e-2, val_period=5, seed=1,
        )
        result = train("mlp", data, cfg)
        assert math.sqrt(result.checkpoint.val_loss) < 0.01
        # losses end far below where they start on a learnable problem
        first_epoch = result.curve[1]["train_loss"]
        last_epoch = result.curve[-1]["train_loss"]
        assert last_epoch < first_epoch / 10.0

    def test_seed_reproducibility_bit_identical(self, rng, tmp_path):
        data, _ = _toy_data(rng)
        cfg = TrainConfig(epochs=4, hidden_size=8, hidden_layers=1, batch_size=64,
                          val_period=2, seed=42)
        r1 = train("mlp", data, cfg)
        r2 = train("mlp", data, cfg)
        p1 = save_checkpoint(r1.checkpoint, tmp_path / "a.ckpt")
        p2 = save_checkpoint(r2.checkpoint, tmp_path / "b.ckpt")
        assert p1.read_bytes() == p2.read_bytes()

    def test_lstm_path_trains(self, rng):
        data, _ = _toy_data(rng, n_per_ep=120)
        cfg = TrainConfig(epochs=2, hidden_size=6, hidden_layers=1, window=5,
                          batch_size=64, val_period=1, sample_stride=2, seed=3)
        result = train("lstm", data, cfg)
        assert result.checkpoint.kind == "lstm"
        assert result.checkpoint.window == 5
        assert np.isfinite(result.checkpoint.val_loss)

    def test_curve_structure(self, rng):
        data, _ = _toy_data(rng)
        cfg = TrainConfig(epochs=3, hidden_size=8, hidden_layers=1, batch_size=64,
                          val_period=2, seed=0)
        result = train("mlp", data, cfg)
        assert [row["epoch"] for row in result.curve] == [0, 1, 2, 3]
        assert math.isfinite(result.curve[0]["val_loss"])


class TestCheckpointIO:
    def _checkpoint(self, rng):
        data, _ = _toy_data(rng, n_per_ep=100)
        cfg = TrainConfig(epochs=1, hidden_size=8, hidden_layers=1, batch_size=64, seed=5)
        return train("mlp", data, cfg).checkpoint, data

    def test_binary_round_trip_bit_identical_inference(self, rng, tmp_path):
        ckpt, data = self._checkpoint(rng)
        path = save_checkpoint(ckpt, tmp_path / "model.ckpt")
        loaded = load_checkpoint(path)
        x = data.val[0][0][:10]
        np.testing.assert_array_equal(ckpt.build_model().predict(x), loaded.build_model().predict(x))
        assert loaded.kind == ckpt.kind
        assert loaded.schema == ckpt.schema
        assert loaded.val_loss == ckpt.val_loss

    def test_json_fallback_round_trip(self, rng, tmp_path):
        ckpt, data = self._checkpoint(rng)
        path = save_checkpoint(ckpt, tmp_path / "model.json", binary=False)
        loaded = load_checkpoint(path)
        x = data.val[0][0][:10]
        np.testing.assert_array_equal(ckpt.build_model().predict(x), loaded.build_model().predict(x))

    def test_truncated_checkpoint_rejected(self, rng, tmp_path):
        ckpt, _ = self._checkpoint(rng)
        path = save_checkpoint(ckpt, tmp_path / "model.ckpt")
        blob = path.read_bytes()
        (tmp_path / "bad.ckpt").write_bytes(blob[:-16])
        with pytest.raises(ModelNotTrained):
            load_checkpoint(tmp_path / "bad.ckpt")

    def test_unrecognized_file_rejected(self, tmp_path):
        (tmp_path / "junk.json").write_text('{"hello": 1}')
        with pytest.raises(ModelNotTrained):
            load_checkpoint(tmp_path / "junk.json")
