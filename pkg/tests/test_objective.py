"""Indirect-observation likelihood: reductions, gradients, combination."""

import numpy as np
import pytest

from indirectml import datagen, model, objective, optimizer, presets
from indirectml import transition as tr
from indirectml.errors import (
    DimensionMismatch,
    EmptyCombination,
    ImpossibleObservation,
)
from conftest import finite_diff_grad, max_rel_err


LINEAR = model.Architecture(kind="linear")
MLP = model.Architecture(kind="mlp", hidden=(4,), activation="tanh")


def cross_entropy_oracle(params, x, z):
    """Plain softmax cross-entropy, computed independently of the
    indirect-likelihood code path."""
    logits = model.forward_logits_batch(params, x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return -float(np.mean(log_probs[np.arange(len(z)), z]))


def probability_space_oracle(params, data, idx):
    """Same loss evaluated without log-space tricks; valid only while
    nothing underflows."""
    probs = model.predict_proba_batch(params, data.features[idx])
    marg = probs @ data.transition.entries.T
    picked = marg[np.arange(len(idx)), data.observations[idx]]
    return -float(np.mean(np.log(picked)))


def constant_output_params(class_probs, input_dim=2):
    """Linear model with zero weights whose softmax equals class_probs."""
    k = len(class_probs)
    flat = np.concatenate([np.zeros(k * input_dim), np.log(np.asarray(class_probs))])
    return model.ClassifierParams(LINEAR, input_dim, k, flat)


def make_dataset(rng, m, n=16, d=2, name=""):
    x = rng.standard_normal((n, d))
    y = rng.integers(0, m.n_y, size=n)
    # Avoid structurally impossible observations: only outcomes with mass.
    live = np.flatnonzero(m.entries.any(axis=1))
    y = live[y % len(live)]
    return objective.WeakDataset(x, y, m, name=name)


class TestIdentityReduction:
    def test_equals_cross_entropy(self, rng):
        for _ in range(100):
            k = int(rng.integers(2, 6))
            d = int(rng.integers(1, 5))
            params = model.init(LINEAR, d, k, seed=int(rng.integers(1 << 30)))
            params = params.with_flat(rng.standard_normal(params.n_params))
            x = rng.standard_normal((8, d))
            z = rng.integers(0, k, size=8)
            data = objective.WeakDataset(x, z, tr.identity(k))
            out = objective.indirect_nll(params, data)
            assert abs(out.loss - cross_entropy_oracle(params, x, z)) <= 1e-12


class TestHandValues:
    def test_complementary_uniform_model(self):
        params = constant_output_params([1 / 3, 1 / 3, 1 / 3])
        m = tr.uniform_complementary(3)
        for y in range(3):
            data = objective.WeakDataset(np.zeros((1, 2)), [y], m)
            out = objective.indirect_nll(params, data)
            assert out.loss == pytest.approx(np.log(3.0), abs=1e-12)

    def test_coarse_group_mass(self):
        params = constant_output_params([0.2, 0.3, 0.5])
        m = tr.coarse_partition(3, [[0, 1], [2]])
        data = objective.WeakDataset(np.zeros((1, 2)), [0], m)
        out = objective.indirect_nll(params, data)
        assert out.loss == pytest.approx(-np.log(0.5), abs=1e-12)


TRANSITIONS = {
    "identity": lambda: tr.identity(3),
    "ccn": lambda: tr.class_conditional_noise(3, 0.3),
    "complementary": lambda: tr.uniform_complementary(3),
    "coarse": lambda: tr.coarse_partition(3, [[0, 1], [2]]),
    "pu": lambda: tr.pu_censoring(0.4),
    "llp": lambda: tr.llp_from_proportions(
        [
            tr.SimplexVector([0.7, 0.2, 0.1]),
            tr.SimplexVector([0.1, 0.6, 0.3]),
            tr.SimplexVector([0.2, 0.2, 0.6]),
            tr.SimplexVector([0.3, 0.3, 0.4]),
        ],
        tr.SimplexVector([0.3, 0.3, 0.2, 0.2]),
    ),
}


class TestGradient:
    @pytest.mark.parametrize("name", sorted(TRANSITIONS))
    @pytest.mark.parametrize("arch", [LINEAR, MLP], ids=["linear", "mlp"])
    def test_matches_finite_differences(self, name, arch, rng):
        m = TRANSITIONS[name]()
        k = m.n_z
        for _ in range(10):
            params = model.init(arch, 2, k, seed=int(rng.integers(1 << 30)))
            params = params.with_flat(
                params.flat + 0.3 * rng.standard_normal(params.n_params)
            )
            data = make_dataset(rng, m, n=12)
            analytic = objective.indirect_nll(params, data).grad

            def f(w):
                return objective.indirect_nll(params.with_flat(w), data).loss

            numeric = finite_diff_grad(f, params.flat.copy())
            assert max_rel_err(analytic, numeric) <= 1e-5


class TestLogSpace:
    def test_agrees_with_probability_space(self, rng):
        for name, make in TRANSITIONS.items():
            m = make()
            params = model.init(LINEAR, 2, m.n_z, seed=3)
            params = params.with_flat(rng.standard_normal(params.n_params))
            data = make_dataset(rng, m, n=20, name=name)
            idx = np.arange(len(data))
            log_loss = objective.indirect_nll(params, data).loss
            assert log_loss == pytest.approx(
                probability_space_oracle(params, data, idx), abs=1e-9
            )

    def test_impossible_observation(self):
        # Third outcome never occurs: its row is entirely zero.
        m = tr.TransitionMatrix([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        tr.validate(m)
        params = model.init(LINEAR, 2, 2, seed=0)
        data = objective.WeakDataset(np.zeros((1, 2)), [2], m, name="weird")
        with pytest.raises(ImpossibleObservation, match="weird"):
            objective.indirect_nll(params, data)


class TestBatchSemantics:
    def test_permutation_invariance(self, rng):
        m = tr.class_conditional_noise(3, 0.2)
        params = model.init(MLP, 2, 3, seed=4)
        data = make_dataset(rng, m, n=30)
        idx = np.arange(30)
        base = objective.indirect_nll(params, data, idx)
        shuffled = objective.indirect_nll(params, data, rng.permutation(idx))
        assert shuffled.loss == base.loss
        assert np.array_equal(shuffled.grad, base.grad)

    def test_empty_batch(self, rng):
        data = make_dataset(rng, tr.identity(3))
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(EmptyCombination):
            objective.indirect_nll(params, data, [])

    def test_out_of_range_batch_index(self, rng):
        data = make_dataset(rng, tr.identity(3), n=5)
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(DimensionMismatch):
            objective.indirect_nll(params, data, [0, 7])


class TestCombined:
    def test_single_dataset_reduces(self, rng):
        data = make_dataset(rng, tr.uniform_complementary(3), n=10)
        params = model.init(LINEAR, 2, 3, seed=1)
        single = objective.indirect_nll(params, data)
        combo = objective.combined_nll(params, [data])
        assert combo.loss == single.loss
        assert np.array_equal(combo.grad, single.grad)

    def test_duplication_invariance(self, rng):
        data = make_dataset(rng, tr.class_conditional_noise(3, 0.1), n=10)
        params = model.init(LINEAR, 2, 3, seed=1)
        one = objective.combined_nll(params, [data])
        two = objective.combined_nll(params, [data, data])
        assert two.loss == one.loss
        assert np.array_equal(two.grad, one.grad)

    def test_count_weighted_mean(self, rng):
        coarse = make_dataset(rng, tr.coarse_partition(3, [[0, 1], [2]]), n=24)
        direct = make_dataset(rng, tr.identity(3), n=8)
        params = model.init(LINEAR, 2, 3, seed=2)
        a = objective.indirect_nll(params, coarse)
        b = objective.indirect_nll(params, direct)
        combo = objective.combined_nll(params, [coarse, direct])
        expected = (a.loss * 24 + b.loss * 8) / 32
        assert combo.loss == pytest.approx(expected, abs=1e-12)
        assert combo.n_examples == 32

    def test_empty_combination(self):
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(EmptyCombination):
            objective.combined_nll(params, [])

    def test_mismatched_class_counts(self, rng):
        a = make_dataset(rng, tr.identity(3))
        b = make_dataset(rng, tr.identity(4))
        params = model.init(LINEAR, 2, 3, seed=0)
        with pytest.raises(DimensionMismatch):
            objective.combined_nll(params, [a, b])

    def test_pooled_objective_offsets(self, rng):
        a = make_dataset(rng, tr.identity(3), n=6)
        b = make_dataset(rng, tr.uniform_complementary(3), n=4)
        params = model.init(LINEAR, 2, 3, seed=0)
        fn, n_total = objective.pooled_objective([a, b])
        assert n_total == 10
        full = fn(params, np.arange(10))
        direct = objective.combined_nll(params, [a, b])
        assert full.loss == direct.loss
        only_b = fn(params, np.arange(6, 10))
        assert only_b.loss == objective.indirect_nll(params, b).loss


class TestTrainingMonotonicity:
    def test_full_batch_descent_never_increases(self):
        # Full-batch descent at step 0.1 over the 500-iteration synthetic
        # label-proportion run.
        spec = datagen.default_mixture()
        sample = datagen.sample_mixture(spec, 1000, seed=99)
        groups = datagen.sample_indirect(
            sample.true_targets, datagen.default_llp_transition(), seed=100
        )
        props, priors = datagen.estimate_llp_statistics(
            sample.true_targets, groups, n_classes=3, n_groups=4
        )
        m = tr.llp_from_proportions(props, priors)
        data = objective.WeakDataset(sample.features, groups, m)
        params = model.init(LINEAR, 2, 3, seed=101)
        cfg = optimizer.OptimizerConfig(
            kind="gd", learning_rate=0.1, epochs=500, batch_size=0
        )
        result = presets.fit(params, [data], cfg)
        diffs = np.diff(result.epoch_losses)
        assert np.all(diffs <= 1e-12)
