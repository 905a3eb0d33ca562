"""Scores, information matrices, variances, and identifiability.

All expected values follow the raw-coordinate convention documented in
the fisher module: the score of outcome y is row y of the matrix over
the outcome's marginal probability, and information matrices are
uncentered second moments.  Two consequences worth naming because they
are easy to get backwards:

  * the score's mean under the outcome distribution is the all-ones
    vector (columns sum to one), not zero;
  * a constant observation (single all-ones row) has information equal
    to the all-ones matrix, and the direct-minus-indirect difference
    then has smallest eigenvalue exactly zero, with the class
    distribution itself spanning the kernel.
"""

import numpy as np
import pytest

from indirectml import fisher
from indirectml import transition as tr
from indirectml.errors import ZeroProbability
from conftest import random_column_stochastic, random_interior_probs


P235 = tr.SimplexVector([0.2, 0.3, 0.5])


class TestScoreDirect:
    def test_hand_value(self):
        s = fisher.score_direct(0, tr.SimplexVector([0.5, 0.5]))
        assert np.array_equal(s, [2.0, 0.0])

    def test_uniform(self):
        for k in (2, 4, 7):
            for z in range(k):
                s = fisher.score_direct(z, tr.SimplexVector.uniform(k))
                expected = np.zeros(k)
                expected[z] = k
                assert np.allclose(s, expected)

    def test_boundary_rejected(self):
        with pytest.raises(ZeroProbability):
            fisher.score_direct(0, tr.SimplexVector([1.0, 0.0]))


class TestScoreIndirect:
    def test_identity_equals_direct(self):
        m = tr.identity(3)
        for z in range(3):
            assert np.allclose(
                fisher.score_indirect(z, P235, m), fisher.score_direct(z, P235)
            )

    def test_complementary_uniform(self):
        m = tr.uniform_complementary(3)
        s = fisher.score_indirect(0, tr.SimplexVector.uniform(3), m)
        assert np.allclose(s, [0.0, 1.5, 1.5])

    def test_coarse_group(self):
        m = tr.coarse_partition(3, [[0, 1], [2]])
        s = fisher.score_indirect(0, P235, m)
        assert np.allclose(s, [2.0, 2.0, 0.0])

    def test_mean_is_all_ones(self, rng):
        # First moment of the score in raw coordinates: exactly one in
        # every component, because each column of M sums to one.
        for _ in range(50):
            n_y = int(rng.integers(1, 7))
            k = int(rng.integers(2, 7))
            m = random_column_stochastic(rng, n_y, k)
            p = random_interior_probs(rng, k)
            q = m.entries @ p.probs
            mean = sum(
                q[j] * fisher.score_indirect(j, p, m)
                for j in range(n_y)
                if m.entries[j].any()
            )
            assert np.max(np.abs(mean - 1.0)) <= 1e-12


class TestFisherDirect:
    def test_hand_values(self):
        info = fisher.fisher_direct(P235)
        assert np.allclose(info, np.diag([5.0, 10.0 / 3.0, 2.0]))

    def test_uniform_k2(self):
        assert np.allclose(
            fisher.fisher_direct(tr.SimplexVector.uniform(2)), np.diag([2.0, 2.0])
        )

    def test_matches_bruteforce_identity(self):
        info = fisher.fisher_direct(P235)
        brute = fisher.fisher_bruteforce(P235, tr.identity(3))
        assert np.max(np.abs(info - brute)) <= 1e-12


class TestFisherIndirect:
    def test_identity_reduces_to_direct(self):
        info = fisher.fisher_indirect(P235, tr.identity(3))
        assert np.allclose(info, fisher.fisher_direct(P235))

    def test_complementary_k2_is_relabeling(self):
        # A two-class complementary label is a deterministic relabeling,
        # so it carries exactly the information of the direct label.
        p = tr.SimplexVector([0.3, 0.7])
        m = tr.uniform_complementary(2)
        info = fisher.fisher_indirect(p, m)
        assert np.allclose(info, fisher.fisher_direct(p), atol=1e-12)
        assert np.allclose(info, fisher.fisher_bruteforce(p, m), atol=1e-12)

    def test_random_against_bruteforce(self, rng):
        for _ in range(100):
            m = random_column_stochastic(rng, 5, 3)
            p = random_interior_probs(rng, 3)
            a = fisher.fisher_indirect(p, m)
            b = fisher.fisher_bruteforce(p, m)
            assert np.max(np.abs(a - b)) <= 1e-10

    def test_symmetry(self, rng):
        for _ in range(50):
            m = random_column_stochastic(rng, 4, 4)
            p = random_interior_probs(rng, 4)
            info = fisher.fisher_indirect(p, m)
            assert np.max(np.abs(info - info.T)) <= 1e-12


class TestFisherBruteforce:
    def test_identity(self):
        brute = fisher.fisher_bruteforce(P235, tr.identity(3))
        assert np.allclose(brute, np.diag([5.0, 10.0 / 3.0, 2.0]))

    def test_constant_observation_is_ones_matrix(self):
        # Single always-on outcome: score is the all-ones vector, so the
        # raw-coordinate second moment is the all-ones matrix.
        m = tr.TransitionMatrix(np.ones((1, 3)))
        tr.validate(m)
        brute = fisher.fisher_bruteforce(P235, m)
        assert np.allclose(brute, np.ones((3, 3)), atol=1e-12)
        assert np.allclose(fisher.fisher_indirect(P235, m), np.ones((3, 3)), atol=1e-12)

    def test_zero_rows_skipped(self):
        m = tr.TransitionMatrix([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        tr.validate(m)
        p = tr.SimplexVector([0.4, 0.6])
        brute = fisher.fisher_bruteforce(p, m)
        assert np.allclose(brute, np.diag([2.5, 1.0 / 0.6]))


class TestAsymptoticVariance:
    def test_diagonal_inverse(self):
        var = fisher.asymptotic_variance(np.diag([5.0, 10.0 / 3.0, 2.0]))
        assert np.allclose(var, [0.2, 0.3, 0.5])

    def test_singular_flags_infinite(self):
        m = tr.coarse_partition(4, [[0, 1], [2, 3]])
        info = fisher.fisher_indirect(tr.SimplexVector.uniform(4), m)
        var = fisher.asymptotic_variance(info)
        assert np.all(np.isinf(var))

    def test_floor_at_class_probability(self, rng):
        # Whenever the indirect information is invertible, its variance
        # can never undercut the direct observation's.
        for _ in range(100):
            k = int(rng.integers(2, 6))
            m = random_column_stochastic(rng, int(rng.integers(k, 8)), k)
            p = random_interior_probs(rng, k)
            var = fisher.asymptotic_variance(fisher.fisher_indirect(p, m))
            if np.all(np.isfinite(var)):
                assert np.all(var >= p.probs - 1e-9)

    def test_diagonal_inequality_chain(self, rng):
        # 1/[I]_ii >= p_i and [inv(I)]_ii >= 1/[I]_ii for invertible I.
        for _ in range(100):
            k = int(rng.integers(2, 6))
            m = random_column_stochastic(rng, int(rng.integers(2, 8)), k)
            p = random_interior_probs(rng, k)
            info = fisher.fisher_indirect(p, m)
            diag = np.diag(info)
            assert np.all(1.0 / diag >= p.probs - 1e-12)
            var = fisher.asymptotic_variance(info)
            if np.all(np.isfinite(var)):
                assert np.all(var >= 1.0 / diag - 1e-9)


class TestIdentifiability:
    def test_identity(self):
        assert fisher.check_identifiability(tr.identity(5)).identifiable

    def test_coarse_rank_deficient(self):
        v = fisher.check_identifiability(
            tr.coarse_partition(10, [[0, 1], [2, 3], [4, 5, 6], [7, 8, 9]])
        )
        assert not v.identifiable
        assert v.rank == 4

    def test_ccn_spectrum_and_verdict(self):
        # Symmetric-noise matrix has eigenvalue 1 once and
        # 1 - k * rate / (k - 1) with multiplicity k - 1.
        for k in (2, 3, 5):
            for rate in (0.0, 0.2, (k - 1) / k - 1e-3):
                m = tr.class_conditional_noise(k, rate)
                eig = np.sort(np.linalg.eigvalsh(m.entries))
                expected = np.sort(
                    np.concatenate([[1.0], np.full(k - 1, 1.0 - k * rate / (k - 1))])
                )
                assert np.allclose(eig, expected, atol=1e-12)
                assert fisher.check_identifiability(m).identifiable

    def test_complementary_and_pu(self):
        assert fisher.check_identifiability(tr.uniform_complementary(10)).identifiable
        assert fisher.check_identifiability(tr.pu_censoring(0.4)).identifiable

    def test_matches_invertibility(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 6))
            n_y = int(rng.integers(2, 8))
            m = random_column_stochastic(rng, n_y, k)
            verdict = fisher.check_identifiability(m)
            p = random_interior_probs(rng, k)
            var = fisher.asymptotic_variance(fisher.fisher_indirect(p, m))
            assert verdict.identifiable == bool(np.all(np.isfinite(var)))


class TestLoewner:
    def test_identity_margin_zero(self):
        assert abs(fisher.verify_loewner(P235, tr.identity(3))) <= 1e-12

    def test_constant_observation_margin_zero(self):
        # Direct info minus the all-ones matrix annihilates the class
        # distribution itself, so the smallest eigenvalue sits at zero.
        m = tr.TransitionMatrix(np.ones((1, 3)))
        tr.validate(m)
        margin = fisher.verify_loewner(P235, m)
        assert abs(margin) <= 1e-12
        diff = fisher.fisher_direct(P235) - fisher.fisher_indirect(P235, m)
        assert np.max(np.abs(diff @ P235.probs)) <= 1e-12

    def test_kernel_contains_class_probs(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 6))
            m = random_column_stochastic(rng, int(rng.integers(1, 8)), k)
            p = random_interior_probs(rng, k)
            diff = fisher.fisher_direct(p) - fisher.fisher_indirect(p, m)
            assert np.max(np.abs(diff @ p.probs)) <= 1e-9

    def test_margin_never_negative(self, rng):
        for _ in range(200):
            k = int(rng.integers(2, 8))
            n_y = int(rng.integers(1, 8))
            m = random_column_stochastic(rng, n_y, k)
            p = random_interior_probs(rng, k)
            assert fisher.verify_loewner(p, m) >= -1e-9


class TestReport:
    def test_identity_report(self):
        report = fisher.fisher_report(P235, tr.identity(3))
        assert np.allclose(report.asym_var_direct, P235.probs)
        assert np.allclose(report.asym_var_indirect, P235.probs)
        assert report.identifiability.identifiable
        assert report.psd_margin >= -1e-9

    def test_coarse_report_flags(self):
        report = fisher.fisher_report(
            tr.SimplexVector.uniform(4), tr.coarse_partition(4, [[0, 1], [2, 3]])
        )
        assert not report.identifiability.identifiable
        assert np.all(np.isinf(report.asym_var_indirect))
        doc = report.to_dict()
        assert doc["asym_var_indirect"] == [None] * 4
        assert doc["asym_var_indirect_finite"] is False

    def test_report_invariants_random(self, rng):
        for _ in range(30):
            k = int(rng.integers(2, 6))
            m = random_column_stochastic(rng, int(rng.integers(2, 7)), k)
            p = random_interior_probs(rng, k)
            report = fisher.fisher_report(p, m)
            assert np.max(np.abs(report.info_direct - report.info_direct.T)) <= 1e-12
            assert np.max(np.abs(report.info_indirect - report.info_indirect.T)) <= 1e-12
            assert report.psd_margin >= -1e-9
            if report.identifiability.identifiable:
                assert np.all(
                    report.asym_var_indirect >= report.asym_var_direct - 1e-9
                )

    def test_interior_required(self):
        with pytest.raises(ZeroProbability):
            fisher.fisher_report(
                tr.SimplexVector([1.0, 0.0]), tr.identity(2)
            )
