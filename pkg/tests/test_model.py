"""Forward, softmax, and reverse-mode gradients of the classifiers."""

import numpy as np
import pytest

from indirectml import model
from indirectml.errors import DimensionMismatch, InvalidArchitecture, NonFiniteInput
from conftest import finite_diff_grad, max_rel_err


LINEAR = model.Architecture(kind="linear")
MLP_TANH = model.Architecture(kind="mlp", hidden=(4,), activation="tanh")


def linear_params(weights, biases):
    """Params for an explicit linear map; weights is (K, d)."""
    w = np.asarray(weights, dtype=float)
    b = np.asarray(biases, dtype=float)
    flat = np.concatenate([w.ravel(), b.ravel()])
    return model.ClassifierParams(LINEAR, w.shape[1], w.shape[0], flat)


class TestArchitecture:
    def test_mlp_without_hidden_rejected(self):
        with pytest.raises(InvalidArchitecture, match="linear"):
            model.Architecture(kind="mlp", hidden=())

    def test_linear_with_hidden_rejected(self):
        with pytest.raises(InvalidArchitecture):
            model.Architecture(kind="linear", hidden=(8,))

    def test_unknown_kind(self):
        with pytest.raises(InvalidArchitecture):
            model.Architecture(kind="conv")

    def test_unknown_activation(self):
        with pytest.raises(InvalidArchitecture):
            model.Architecture(kind="mlp", hidden=(4,), activation="gelu")


class TestInit:
    def test_linear_param_count(self):
        params = model.init(LINEAR, 2, 3, seed=0)
        assert params.n_params == 2 * 3 + 3 == 9

    def test_mlp_param_count(self):
        params = model.init(model.Architecture(kind="mlp", hidden=(32,)), 7, 2, seed=0)
        assert params.n_params == 7 * 32 + 32 + 32 * 2 + 2 == 322

    def test_biases_zero_weights_bounded(self):
        params = model.init(MLP_TANH, 3, 2, seed=5)
        for name in ("b0", "b1"):
            assert np.all(params.view(name) == 0.0)
        assert np.all(np.abs(params.view("w0")) <= 1.0 / np.sqrt(3))
        assert np.all(np.abs(params.view("w1")) <= 1.0 / np.sqrt(4))

    def test_deterministic(self):
        a = model.init(MLP_TANH, 3, 2, seed=7)
        b = model.init(MLP_TANH, 3, 2, seed=7)
        assert np.array_equal(a.flat, b.flat)
        c = model.init(MLP_TANH, 3, 2, seed=8)
        assert not np.array_equal(a.flat, c.flat)

    def test_degenerate_dims(self):
        with pytest.raises(InvalidArchitecture):
            model.init(LINEAR, 0, 3, seed=0)
        with pytest.raises(InvalidArchitecture):
            model.init(LINEAR, 3, 1, seed=0)


class TestForward:
    def test_zero_params_zero_logits(self):
        params = linear_params(np.zeros((3, 2)), np.zeros(3))
        assert np.array_equal(model.forward_logits(params, [1.5, -2.0]), np.zeros(3))

    def test_hand_linear(self):
        params = linear_params([[1, 0], [0, 1], [0, 0]], [0, 0, 0])
        assert np.array_equal(model.forward_logits(params, [2.0, 3.0]), [2.0, 3.0, 0.0])

    def test_nan_input_rejected(self):
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(NonFiniteInput):
            model.forward_logits(params, [np.nan, 0.0])

    def test_dim_mismatch(self):
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(DimensionMismatch):
            model.forward_logits(params, [1.0, 2.0, 3.0])

    def test_deterministic_bitwise(self):
        params = model.init(MLP_TANH, 2, 3, seed=1)
        x = np.array([0.3, -0.7])
        assert np.array_equal(
            model.forward_logits(params, x), model.forward_logits(params, x)
        )


class TestPredictProba:
    def test_uniform_at_zero_logits(self):
        params = linear_params(np.zeros((3, 2)), np.zeros(3))
        p = model.predict_proba(params, [0.4, 0.6])
        assert np.allclose(p.probs, 1.0 / 3.0, atol=1e-15)

    def test_saturation_no_overflow(self):
        params = linear_params([[1.0], [0.0]], [0.0, 0.0])
        p = model.predict_proba(params, [1000.0])
        assert p.probs[0] == pytest.approx(1.0, abs=1e-12)
        assert p.probs[1] == pytest.approx(0.0, abs=1e-12)

    def test_hand_softmax(self):
        params = linear_params([[1.0], [0.0]], [0.0, 0.0])
        p = model.predict_proba(params, [np.log(2.0)])
        assert p.probs[0] == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert p.probs[1] == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_sums_to_one_large_magnitudes(self, rng):
        params = linear_params(np.eye(4) * 1.0, np.zeros(4))
        for _ in range(1000):
            x = rng.uniform(-1e4, 1e4, size=4)
            p = model.predict_proba(params, x)
            assert abs(float(p.probs.sum()) - 1.0) <= 1e-12


class TestBackward:
    def test_linear_closed_form(self, rng):
        params = model.init(LINEAR, 3, 2, seed=2)
        x = rng.standard_normal(3)
        up = rng.standard_normal(2)
        grad = model.backward(params, x, up)
        expected_w = np.outer(up, x)
        expected_b = up
        assert np.allclose(grad[:6], expected_w.ravel(), atol=1e-15)
        assert np.allclose(grad[6:], expected_b, atol=1e-15)

    def test_zero_upstream(self):
        params = model.init(MLP_TANH, 2, 3, seed=3)
        grad = model.backward(params, [0.5, 0.5], np.zeros(3))
        assert np.array_equal(grad, np.zeros(params.n_params))

    def test_upstream_shape_checked(self):
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(DimensionMismatch):
            model.backward(params, [1.0, 2.0], [1.0, 2.0])

    @pytest.mark.parametrize(
        "arch",
        [
            LINEAR,
            MLP_TANH,
            model.Architecture(kind="mlp", hidden=(4,), activation="relu"),
        ],
        ids=["linear", "mlp-tanh", "mlp-relu"],
    )
    def test_matches_finite_differences(self, arch, rng):
        d, k = 3, 2
        checked = 0
        attempts = 0
        while checked < 100 and attempts < 400:
            attempts += 1
            params = model.init(arch, d, k, seed=int(rng.integers(1 << 30)))
            noise = rng.standard_normal(params.n_params) * 0.3
            params = params.with_flat(params.flat + noise)
            x = rng.standard_normal(d)
            up = rng.standard_normal(k)
            if arch.activation == "relu" and arch.kind == "mlp":
                # Finite differences are invalid within h of a kink.
                pre = params.view("w0") @ x + params.view("b0")
                if np.any(np.abs(pre) < 1e-4):
                    continue
            analytic = model.backward(params, x, up)

            def f(w):
                return float(up @ model.forward_logits(params.with_flat(w), x))

            numeric = finite_diff_grad(f, params.flat.copy())
            assert max_rel_err(analytic, numeric) <= 1e-5
            checked += 1
        assert checked == 100


class TestSerialization:
    def test_roundtrip_bit_identical(self):
        params = model.init(MLP_TANH, 3, 4, seed=11)
        back = model.ClassifierParams.from_dict(params.to_dict())
        assert np.array_equal(back.flat, params.flat)
        x = np.array([0.1, -0.2, 0.3])
        assert np.array_equal(
            model.forward_logits(back, x), model.forward_logits(params, x)
        )

    def test_flat_length_checked(self):
        with pytest.raises(DimensionMismatch):
            model.ClassifierParams(LINEAR, 2, 3, np.zeros(8))
