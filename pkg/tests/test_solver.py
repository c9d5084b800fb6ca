"""Euler scheme, noise plan contracts, and the Picard iteration."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nsfde import (
    Ensemble,
    FixedPointError,
    MeasureFlow,
    NeutralTerm,
    NoisePlan,
    Segment,
    SimGrid,
    constant_segment,
    coupled_simulate,
    euler_step,
    initial_ensemble,
    mean_field_linear_family,
    picard,
    solve_frozen,
)


def deterministic_family(A, B, C, K, r0):
    return mean_field_linear_family(A=A, B=B, C=C, s=0.0, c=0.0, K=K, r0=r0)


class TestNoisePlan:
    def test_regeneration_is_bit_exact(self):
        a = NoisePlan.generate(123, 5, 20, 2, 0.01)
        b = NoisePlan.generate(123, 5, 20, 2, 0.01)
        assert np.array_equal(a.increments, b.increments)

    def test_particles_regenerable_in_any_order(self):
        plan = NoisePlan.generate(99, 6, 15, 2, 0.05)
        for p in reversed(range(6)):
            block = NoisePlan.particle_increments(99, p, 15, 2, 0.05)
            assert np.array_equal(block, plan.increments[p])

    def test_seeds_give_distinct_streams(self):
        a = NoisePlan.generate(1, 3, 10, 1, 0.01)
        b = NoisePlan.generate(2, 3, 10, 1, 0.01)
        assert not np.array_equal(a.increments, b.increments)

    def test_increment_moments(self):
        plan = NoisePlan.generate(7, 200, 50, 1, 0.04)
        z = plan.increments.ravel()
        assert abs(z.mean()) < 0.005
        assert z.var() == pytest.approx(0.04, rel=0.05)


class TestEulerStep:
    def test_all_zero_coefficients_keep_state(self):
        cs = deterministic_family(None, 0.0, 0.0, K=5, r0=0.5)
        seg = constant_segment(1.7, 5, 0.5, 1)
        mu = Ensemble.replicate(seg, 1)
        out = euler_step(seg, 0.0, mu, cs, np.zeros(1), dt=0.1)
        assert out[0] == pytest.approx(1.7)

    def test_unit_drift_explicit_euler(self):
        cs = mean_field_linear_family(A=None, B=0.0, C=0.0, s=0.0, c=0.0, g=[1.0],
                                      K=5, r0=0.5)
        seg = constant_segment(2.0, 5, 0.5, 1)
        mu = Ensemble.replicate(seg, 1)
        out = euler_step(seg, 0.0, mu, cs, np.zeros(1), dt=0.01)
        assert out[0] == pytest.approx(2.01)

    def test_pure_neutral_constant_history_is_stationary(self):
        cs = deterministic_family(0.5, 0.0, 0.0, K=5, r0=0.5)
        seg = constant_segment(3.0, 5, 0.5, 1)
        mu = Ensemble.replicate(seg, 1)
        out = euler_step(seg, 0.0, mu, cs, np.zeros(1), dt=0.1)
        assert out[0] == pytest.approx(3.0 * (1 - 0.5) + 0.5 * 3.0)


class TerminalReadingNeutral(NeutralTerm):
    """Reads the current value: exercises the implicit recovery."""

    def __init__(self, factor, K, r0):
        self.factor = factor
        self.n, self.K, self.r0 = 1, K, r0
        self.kappa = abs(factor)
        self.kappa_uniform = abs(factor)
        self.strictly_lagged = False

    def evaluate_values(self, values):
        return self.factor * values[..., -1, :]


class TestImplicitRecovery:
    def test_fixed_point_matches_closed_form(self):
        base = mean_field_linear_family(A=None, B=0.0, C=0.0, s=0.0, c=0.0, g=[1.0],
                                        K=4, r0=0.4)
        cs = type(base)(neutral=TerminalReadingNeutral(0.4, 4, 0.4), drift=base.drift,
                        diffusion=base.diffusion, n=1, m=1, declared=base.declared,
                        claims=base.claims)
        seg = constant_segment(0.0, 4, 0.4, 1)
        mu = Ensemble.replicate(seg, 1)
        # x = (x0 - 0.4*x0) + dt + 0.4*x  =>  x = dt / 0.6
        out = euler_step(seg, 0.0, mu, cs, np.zeros(1), dt=0.06)
        assert out[0] == pytest.approx(0.06 / 0.6, abs=1e-10)

    def test_non_contracting_recovery_raises(self):
        base = mean_field_linear_family(A=None, B=0.0, C=0.0, s=0.0, c=0.0, g=[1.0],
                                        K=4, r0=0.4)
        cs = type(base)(neutral=TerminalReadingNeutral(1.2, 4, 0.4), drift=base.drift,
                        diffusion=base.diffusion, n=1, m=1, declared=base.declared,
                        claims=base.claims)
        seg = constant_segment(0.0, 4, 0.4, 1)
        mu = Ensemble.replicate(seg, 1)
        with pytest.raises(FixedPointError):
            euler_step(seg, 0.0, mu, cs, np.zeros(1), dt=0.06)


def neutral_recursion_oracle(history, kappa, steps):
    """Independent stepwise recursion for b = 0, sigma = 0, lag neutral term:
    the compensated state is constant, so x(t+dt) = const + kappa*x(t+dt-r0)."""
    K = len(history) - 1
    path = np.empty(K + steps + 1)
    path[: K + 1] = history
    const = history[-1] - kappa * history[0]
    for a in range(steps):
        path[K + a + 1] = const + kappa * path[a + 1]
    return path


class TestSolveFrozen:
    def test_zero_coefficients_hold_paths_constant(self):
        cs = deterministic_family(None, 0.0, 0.0, K=3, r0=0.3)
        grid = SimGrid(dt=0.1, steps=20, K=3)
        init = initial_ensemble([1.5], 3, 0.3, 4, seed=0)
        noise = NoisePlan.generate(0, 4, 20, 1, 0.1)
        paths = solve_frozen(init, MeasureFlow.constant(init, 20), cs, noise, grid)
        assert np.all(paths.values == 1.5)

    def test_matches_single_particle_stepping(self):
        cs = mean_field_linear_family(A=0.4, B=0.3, C=0.2, s=0.5, c=0.1, K=4, r0=0.2)
        grid = SimGrid(dt=0.05, steps=8, K=4)
        init = initial_ensemble([1.0], 4, 0.2, 3, seed=5, amplitude=0.3)
        noise = NoisePlan.generate(5, 3, 8, 1, 0.05)
        flow = MeasureFlow.constant(init, 8)
        paths = solve_frozen(init, flow, cs, noise, grid)
        for k in range(3):
            window = init.member(k)
            for a in range(8):
                nxt = euler_step(window, a * 0.05, flow.ensembles[a], cs,
                                 noise.increments[k, a], 0.05)
                assert np.allclose(nxt, paths.values[k, 4 + a + 1], atol=1e-13)
                window = window.shifted_append(nxt)

    def test_bit_identical_reruns(self):
        cs = mean_field_linear_family(A=0.5, B=0.3, C=0.2, s=0.4, c=0.1, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=30, K=5)
        init = initial_ensemble([0.5], 5, 0.25, 8, seed=11, amplitude=0.2)
        noise = NoisePlan.generate(11, 8, 30, 1, 0.05)
        flow = MeasureFlow.constant(init, 30)
        a = solve_frozen(init, flow, cs, noise, grid)
        b = solve_frozen(init, flow, cs, noise, grid)
        assert np.array_equal(a.values, b.values)

    def test_segment_view_reproduces_path_values(self):
        cs = mean_field_linear_family(A=0.5, B=0.2, C=0.1, s=0.3, c=0.0, K=4, r0=0.2)
        grid = SimGrid(dt=0.05, steps=10, K=4)
        init = initial_ensemble([1.0], 4, 0.2, 2, seed=3, amplitude=0.1)
        noise = NoisePlan.generate(3, 2, 10, 1, 0.05)
        paths = solve_frozen(init, MeasureFlow.constant(init, 10), cs, noise, grid)
        for a in range(11):
            view = paths.segment_values(a)
            assert np.shares_memory(view, paths.values)
            assert np.array_equal(view, paths.values[:, a:a + 5, :])

    def test_pure_neutral_matches_recursion_oracle(self):
        K, steps, kappa = 10, 100, 0.5
        cs = deterministic_family(kappa, 0.0, 0.0, K=K, r0=1.0)
        grid = SimGrid(dt=0.1, steps=steps, K=K)
        theta = np.linspace(-1.0, 0.0, K + 1)
        history = 1.0 + 0.5 * np.sin(2 * np.pi * theta)
        init = Ensemble(history[None, :, None].repeat(2, axis=0), 1.0)
        noise = NoisePlan.generate(1, 2, steps, 1, 0.1)
        paths = solve_frozen(init, MeasureFlow.constant(init, steps), cs, noise, grid)
        oracle = neutral_recursion_oracle(history, kappa, steps)
        assert np.max(np.abs(paths.values[0, :, 0] - oracle)) <= 1e-12

    def test_dimension_mismatch_rejected(self):
        cs = deterministic_family(0.5, 0.0, 0.0, K=3, r0=0.3)
        grid = SimGrid(dt=0.1, steps=5, K=3)
        init = initial_ensemble([1.0, 2.0], 3, 0.3, 2, seed=0)  # n=2 vs cs n=1
        noise = NoisePlan.generate(0, 2, 5, 1, 0.1)
        with pytest.raises(ValueError):
            solve_frozen(init, MeasureFlow.constant(init, 5), cs, noise, grid)


class TestPicard:
    def test_measure_independent_fixed_point_in_one_sweep(self):
        cs = mean_field_linear_family(A=0.5, B=0.3, C=0.0, s=0.4, c=0.1, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=20, K=5)
        init = initial_ensemble([1.0], 5, 0.25, 16, seed=2, amplitude=0.2)
        noise = NoisePlan.generate(2, 16, 20, 1, 0.05)
        paths, flow, diag = picard(init, cs, grid, noise, tol=1e-12, max_iter=10)
        assert diag.converged
        assert diag.sweeps == 2
        assert diag.gaps[0] == 0.0

    def test_gap_ratios_contract_for_mean_field_family(self):
        cs = mean_field_linear_family(A=0.5, B=0.25, C=0.2, s=0.3, c=0.2, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=20, K=5)
        init = initial_ensemble([1.0], 5, 0.25, 32, seed=4, amplitude=0.2)
        noise = NoisePlan.generate(4, 32, 20, 1, 0.05)
        _, _, diag = picard(init, cs, grid, noise, tol=0.0, max_iter=5)
        assert len(diag.gaps) == 4
        assert np.all(diag.ratios < 1.0)

    def test_explicit_contraction_window_is_respected(self):
        cs = mean_field_linear_family(A=0.5, B=0.25, C=0.2, s=0.3, c=0.2, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=20, K=5, contraction_window=0.5)
        init = initial_ensemble([1.0], 5, 0.25, 8, seed=4, amplitude=0.2)
        noise = NoisePlan.generate(4, 8, 20, 1, 0.05)
        _, _, diag = picard(init, cs, grid, noise, tol=1e-10, max_iter=8)
        assert diag.window == pytest.approx(0.5)
        assert diag.window_index == 10

    def test_mean_matches_ode_for_deterministic_mean_field(self):
        B, C = 0.3, 0.2
        cs = deterministic_family(None, B, C, K=1, r0=0.01)
        grid = SimGrid(dt=0.01, steps=100, K=1)
        init = initial_ensemble([1.0], 1, 0.01, 8, seed=0)
        noise = NoisePlan.generate(0, 8, 100, 1, 0.01)
        paths, _, diag = picard(init, cs, grid, noise, tol=1e-13, max_iter=30)
        assert diag.converged
        times = grid.times()
        sol = solve_ivp(lambda t, y: (B + C) * y, (0, 1.0), [1.0], t_eval=times,
                        rtol=1e-11, atol=1e-13)
        empirical = paths.states()[:, :, 0].mean(axis=0)
        assert np.max(np.abs(empirical - sol.y[0])) < 5e-3

    def test_grid_refinement_has_first_order_accuracy(self):
        terminal = {}
        for level, dt in enumerate([0.04, 0.02, 0.01, 0.005]):
            K = int(round(0.2 / dt))
            steps = int(round(1.0 / dt))
            cs = deterministic_family(0.4, 0.5, 0.3, K=K, r0=0.2)
            grid = SimGrid(dt=dt, steps=steps, K=K)
            init = initial_ensemble([1.0], K, 0.2, 1, seed=0)
            noise = NoisePlan.generate(0, 1, steps, 1, dt)
            paths, _, _ = picard(init, cs, grid, noise, tol=1e-13, max_iter=40)
            terminal[level] = paths.state(steps)[0, 0]
        diffs = [abs(terminal[k] - terminal[k + 1]) for k in range(3)]
        slopes = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
        assert np.all(slopes >= 0.8)


class TestCoupledSimulate:
    def test_identical_inputs_give_identical_paths(self):
        cs = mean_field_linear_family(A=0.5, B=0.3, C=0.2, s=0.4, c=0.1, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=20, K=5)
        init = initial_ensemble([1.0], 5, 0.25, 8, seed=9, amplitude=0.2)
        noise = NoisePlan.generate(9, 8, 20, 1, 0.05)
        pp = coupled_simulate(init, init, cs, cs, grid, noise, tol=1e-10, max_iter=20)
        assert np.array_equal(pp.left.values, pp.right.values)
        assert pp.initial_order_ok

    def test_pathwise_gap_scales_linearly_in_drift_shift(self):
        cs = mean_field_linear_family(A=0.5, B=0.3, C=0.2, s=0.4, c=0.1, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=20, K=5)
        init = initial_ensemble([1.0], 5, 0.25, 16, seed=10, amplitude=0.1)
        noise = NoisePlan.generate(10, 16, 20, 1, 0.05)
        sups = {}
        for eps in (0.2, 0.1):
            pp = coupled_simulate(init, init, cs, cs.with_drift_shift(eps), grid,
                                  noise, tol=1e-11, max_iter=25)
            sups[eps] = np.abs(pp.right.states() - pp.left.states()).max()
        ratio = sups[0.2] / sups[0.1]
        assert 1.8 <= ratio <= 2.2

    def test_initial_order_flag_reports_unordered_pairs(self):
        cs = mean_field_linear_family(A=0.5, B=0.0, C=0.0, s=0.0, c=0.0, K=5, r0=0.25)
        grid = SimGrid(dt=0.05, steps=4, K=5)
        left = initial_ensemble([1.0], 5, 0.25, 3, seed=0)
        right = initial_ensemble([0.5], 5, 0.25, 3, seed=0)  # below left
        noise = NoisePlan.generate(0, 3, 4, 1, 0.05)
        pp = coupled_simulate(left, right, cs, cs, grid, noise, tol=1e-10, max_iter=5)
        assert not pp.initial_order_ok
        assert np.all(~pp.initial_order)


class TestInitialEnsemble:
    def test_replication_is_exact(self):
        init = initial_ensemble([1.0, -2.0], 4, 0.2, 5, seed=0)
        assert init.values.shape == (5, 5, 2)
        assert np.all(init.values[:, :, 0] == 1.0)
        assert np.all(init.values[:, :, 1] == -2.0)

    def test_amplitude_offsets_are_clipped_and_reproducible(self):
        a = initial_ensemble([0.0], 4, 0.2, 64, seed=1, amplitude=5.0, clip=0.5)
        b = initial_ensemble([0.0], 4, 0.2, 64, seed=1, amplitude=5.0, clip=0.5)
        assert np.array_equal(a.values, b.values)
        assert np.max(np.abs(a.values)) <= 0.5
        # members are constant in theta
        assert np.all(np.ptp(a.values, axis=1) == 0.0)
