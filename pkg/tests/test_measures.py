"""Empirical measures: moments, exact W2 (with permutation oracle), and the
matching-based stochastic order check."""

import itertools

import numpy as np
import pytest

from nsfde import (
    Ensemble,
    LinearLagNeutral,
    Segment,
    constant_segment,
    ensemble_from_csv,
    ensemble_to_csv,
    leq_compensated,
    second_moment,
    stochastically_leq,
    sup_norm,
    w2,
    w2_bruteforce,
)

R0 = 0.5
K = 4


def random_ensemble(rng, N, n=1, scale=1.0):
    return Ensemble(rng.normal(0.0, scale, (N, K + 1, n)), R0)


def exhaustive_w2(mu, nu):
    """Independent oracle: enumerate every pairing from first principles."""
    N = mu.N
    best = np.inf
    for perm in itertools.permutations(range(N)):
        total = 0.0
        for i, j in enumerate(perm):
            diff = mu.values[i] - nu.values[j]
            total += np.sqrt((diff**2).sum(axis=1)).max() ** 2
        best = min(best, total)
    return np.sqrt(best / N)


class TestSecondMoment:
    def test_zero_ensemble(self):
        assert second_moment(Ensemble(np.zeros((3, K + 1, 2)), R0)) == 0.0

    def test_single_constant_member(self):
        mu = Ensemble.replicate(constant_segment(2.5, K, R0, 1), 1)
        assert second_moment(mu) == pytest.approx(2.5**2)

    def test_two_members_with_norms_one_and_three(self):
        mu = Ensemble.from_segments([
            constant_segment(1.0, K, R0, 1),
            constant_segment(-3.0, K, R0, 1),
        ])
        assert second_moment(mu) == pytest.approx(5.0)


class TestW2:
    def test_identical_ensembles(self):
        mu = random_ensemble(np.random.default_rng(0), 5)
        assert w2(mu, mu) == 0.0

    def test_single_pair_is_sup_distance(self):
        rng = np.random.default_rng(1)
        a = Segment(rng.normal(size=(K + 1, 2)), R0)
        b = Segment(rng.normal(size=(K + 1, 2)), R0)
        mu, nu = Ensemble.replicate(a, 1), Ensemble.replicate(b, 1)
        assert w2(mu, nu) == pytest.approx(sup_norm(Segment(a.values - b.values, R0)))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exhaustive_oracle_n3(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu = random_ensemble(rng, 3), random_ensemble(rng, 3)
        assert w2(mu, nu) == pytest.approx(exhaustive_w2(mu, nu), abs=1e-12)

    @pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
    def test_bruteforce_agrees_with_oracle_and_w2(self, N):
        rng = np.random.default_rng(N)
        mu, nu = random_ensemble(rng, N, n=2), random_ensemble(rng, N, n=2)
        oracle = exhaustive_w2(mu, nu)
        assert w2_bruteforce(mu, nu) == pytest.approx(oracle, abs=1e-12)
        assert w2(mu, nu) == pytest.approx(oracle, abs=1e-12)

    def test_bruteforce_rejects_large_n(self):
        mu = random_ensemble(np.random.default_rng(0), 9)
        with pytest.raises(ValueError):
            w2_bruteforce(mu, mu)

    def test_symmetry_is_exact(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            mu, nu = random_ensemble(rng, 8), random_ensemble(rng, 8)
            assert w2(mu, nu) == w2(nu, mu)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            a, b, c = (random_ensemble(rng, 10) for _ in range(3))
            assert w2(a, c) <= w2(a, b) + w2(b, c) + 1e-10

    def test_zero_iff_member_permutation(self):
        rng = np.random.default_rng(29)
        mu = random_ensemble(rng, 6)
        shuffled = Ensemble(mu.values[rng.permutation(6)], R0)
        assert w2(mu, shuffled) == 0.0
        perturbed = Ensemble(mu.values + 1e-6, R0)
        assert w2(mu, perturbed) > 0.0

    def test_index_aligned_coupling_upper_bound(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            mu, nu = random_ensemble(rng, 7, n=2), random_ensemble(rng, 7, n=2)
            aligned = np.mean([
                sup_norm(Segment(mu.values[i] - nu.values[i], R0)) ** 2
                for i in range(7)
            ])
            assert w2(mu, nu) ** 2 <= aligned + 1e-12

    def test_unequal_sizes_rejected(self):
        rng = np.random.default_rng(2)
        with pytest.raises(ValueError):
            w2(random_ensemble(rng, 3), random_ensemble(rng, 4))

    def test_grid_mismatch_rejected(self):
        rng = np.random.default_rng(2)
        mu = random_ensemble(rng, 3)
        nu = Ensemble(rng.normal(size=(3, K + 2, 1)), R0)
        with pytest.raises(ValueError):
            w2(mu, nu)


class TestStochasticOrder:
    def setup_method(self):
        self.D = LinearLagNeutral(0.5, K, R0)

    def test_identical_is_ordered(self):
        mu = random_ensemble(np.random.default_rng(3), 6)
        ok, match = stochastically_leq(mu, mu, self.D)
        assert ok
        assert sorted(match) == list(range(6))

    def test_shifted_copy_is_ordered(self):
        rng = np.random.default_rng(4)
        mu = random_ensemble(rng, 8)
        nu = mu.shifted(rng.uniform(0.1, 1.0, 8))
        ok, match = stochastically_leq(mu, nu, self.D)
        assert ok
        for i, j in enumerate(match):
            assert leq_compensated(mu.member(i), nu.member(int(j)), self.D)

    def test_witness_survives_member_shuffle(self):
        rng = np.random.default_rng(5)
        mu = random_ensemble(rng, 8)
        nu = Ensemble(mu.shifted(rng.uniform(0.1, 1.0, 8)).values[rng.permutation(8)], R0)
        ok, match = stochastically_leq(mu, nu, self.D)
        assert ok
        for i, j in enumerate(match):
            assert leq_compensated(mu.member(i), nu.member(int(j)), self.D)

    def test_pairwise_crossing_members_not_ordered(self):
        up = np.linspace(0.0, 1.0, K + 1)[:, None]
        down = np.linspace(1.0, 0.0, K + 1)[:, None]
        mu = Ensemble(np.stack([up, up + 0.1]), R0)
        nu = Ensemble(np.stack([down, down + 0.1]), R0)
        ok, match = stochastically_leq(mu, nu, self.D)
        assert not ok and match is None

    def test_transitive_through_composed_matchings(self):
        rng = np.random.default_rng(6)
        mu = random_ensemble(rng, 10)
        nu = Ensemble(mu.shifted(rng.uniform(0.0, 0.5, 10)).values[rng.permutation(10)], R0)
        rho = Ensemble(nu.shifted(rng.uniform(0.0, 0.5, 10)).values[rng.permutation(10)], R0)
        ok1, m1 = stochastically_leq(mu, nu, self.D)
        ok2, m2 = stochastically_leq(nu, rho, self.D)
        assert ok1 and ok2
        composed = m2[m1]
        for i, j in enumerate(composed):
            assert leq_compensated(mu.member(i), rho.member(int(j)), self.D)
        ok3, _ = stochastically_leq(mu, rho, self.D)
        assert ok3

    def test_unequal_sizes_rejected(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError):
            stochastically_leq(random_ensemble(rng, 3), random_ensemble(rng, 4), self.D)


class TestEnsembleCsv:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(8)
        mu = Ensemble(rng.normal(size=(4, K + 1, 2)), R0)
        path = tmp_path / "ens.csv"
        ensemble_to_csv(mu, path)
        back = ensemble_from_csv(path)
        assert back.N == 4 and back.n == 2
        assert back.r0 == pytest.approx(R0)
        assert np.allclose(back.values, mu.values, rtol=0, atol=0)

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("index,theta,x_1\n0,-0.5,0\n0,0,0\n")
        with pytest.raises(ValueError):
            ensemble_from_csv(path)
