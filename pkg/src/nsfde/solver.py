"""Particle Euler scheme for neutral delay equations with a frozen measure
flow, plus the Picard-in-distribution iteration around it.

The scheme integrates the compensated state: one step computes

    y = x(t) - D(x_t) + b(t, x_t, mu_t) dt + sigma(t, x_t, mu_t) dW

and recovers the new state from ``x = y + D(window advanced with terminal
x)``; the neutral term's contraction constant kappa < 1 makes that recovery
a fixed-point iteration (one explicit evaluation when the neutral term is
strictly lagged).  The segment grid spacing equals the time step, so
windowing is pure index arithmetic.

Noise comes from counter-based Philox streams keyed per (seed, particle)
with inverse-CDF normals, so any regeneration (whole plan, or one particle
at a time, in any order) is bit-exact.  Reusing one :class:`NoisePlan`
across Picard sweeps gives common random numbers, which makes successive
iterates pathwise comparable; reusing it across two systems is the
synchronous coupling the order diagnostics rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .coefficients import CoefficientSet
from .measures import Ensemble
from .segments import Segment, leq_compensated

__all__ = [
    "FixedPointError",
    "SimGrid",
    "NoisePlan",
    "MeasureFlow",
    "PathSet",
    "PairedPaths",
    "Diagnostics",
    "euler_step",
    "solve_frozen",
    "picard",
    "coupled_simulate",
    "initial_ensemble",
]

_KEY_MOD = 1 << 64
_INITIAL_STREAM_BASE = 1 << 48


class FixedPointError(RuntimeError):
    """Terminal-value recovery failed to contract (kappa >= 1 in practice)."""


@dataclass(frozen=True)
class SimGrid:
    """Uniform simulation grid.

    dt * K is the delay horizon r0 and dt * steps the final time T; the
    segment grid spacing equals dt.  ``contraction_window`` optionally pins
    the time window over which Picard iterate gaps are measured; when None
    the window is chosen from the observed gap ratios (largest grid time at
    which every recorded ratio stays below the threshold).
    """

    dt: float
    steps: int
    K: int
    contraction_window: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 1 or self.K < 1:
            raise ValueError("steps and K must be >= 1")
        if self.contraction_window is not None and not 0 < self.contraction_window:
            raise ValueError("contraction_window must be positive")

    @property
    def r0(self) -> float:
        return self.K * self.dt

    @property
    def T(self) -> float:
        return self.steps * self.dt

    def times(self) -> np.ndarray:
        """Grid times 0, dt, ..., T."""
        return np.arange(self.steps + 1) * self.dt

    def full_times(self) -> np.ndarray:
        """Grid times -r0, ..., 0, ..., T (history included)."""
        return (np.arange(self.K + self.steps + 1) - self.K) * self.dt


def _philox_uniforms(seed: int, stream: int, count: int) -> np.ndarray:
    """Uniforms in (0, 1) from the Philox counter stream keyed (seed, stream).

    Draws are taken in raw counter order, so draw k of a stream is a pure
    function of (seed, stream, k), independent of evaluation order.
    """
    key = (int(seed) % _KEY_MOD) * _KEY_MOD + int(stream)
    raw = Philox(key=key).random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54


def _philox_normals(seed: int, stream: int, count: int) -> np.ndarray:
    """Standard normals via the inverse CDF over counter-ordered uniforms."""
    return ndtri(_philox_uniforms(seed, stream, count))


@dataclass(frozen=True)
class NoisePlan:
    """Brownian increments, one (steps, m) block per particle.

    ``increments[p, a, j]`` is the j-th component of the increment used on
    the step from time a*dt.  Blocks are regenerable per particle from
    (seed, particle) alone, independent of evaluation order.
    """

    seed: int
    increments: np.ndarray

    @property
    def n_particles(self) -> int:
        return self.increments.shape[0]

    @property
    def steps(self) -> int:
        return self.increments.shape[1]

    @property
    def m(self) -> int:
        return self.increments.shape[2]

    @staticmethod
    def particle_increments(seed: int, particle: int, steps: int, m: int, dt: float) -> np.ndarray:
        z = _philox_normals(seed, particle, steps * m).reshape(steps, m)
        return z * np.sqrt(dt)

    @classmethod
    def generate(cls, seed: int, n_particles: int, steps: int, m: int, dt: float) -> "NoisePlan":
        out = np.empty((n_particles, steps, m))
        for p in range(n_particles):
            out[p] = cls.particle_increments(seed, p, steps, m, dt)
        return cls(seed=int(seed), increments=out)


@dataclass(frozen=True)
class MeasureFlow:
    """One empirical measure per grid time t = 0, dt, ..., T."""

    ensembles: tuple

    def __len__(self) -> int:
        return len(self.ensembles)

    @classmethod
    def constant(cls, mu: Ensemble, steps: int) -> "MeasureFlow":
        return cls(tuple([mu] * (steps + 1)))

    @classmethod
    def from_pathset(cls, paths: "PathSet") -> "MeasureFlow":
        return cls(tuple(paths.ensemble(a) for a in range(paths.grid.steps + 1)))


@dataclass(frozen=True)
class PathSet:
    """N trajectories on the full grid -r0..T: values (N, K+steps+1, n).

    The segment view at grid time index a is the slice [a, a+K] of the time
    axis, so it reproduces path values exactly.
    """

    values: np.ndarray
    grid: SimGrid

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def state(self, a: int) -> np.ndarray:
        """States at grid time a*dt, shape (N, n)."""
        return self.values[:, self.grid.K + a, :]

    def states(self) -> np.ndarray:
        """States over t in [0, T], shape (N, steps+1, n)."""
        return self.values[:, self.grid.K:, :]

    def segment_values(self, a: int) -> np.ndarray:
        """Window array (N, K+1, n) at grid time a*dt (a view, no copy)."""
        return self.values[:, a : a + self.grid.K + 1, :]

    def segment(self, k: int, a: int) -> Segment:
        return Segment(self.segment_values(a)[k], self.grid.r0)

    def ensemble(self, a: int) -> Ensemble:
        return Ensemble(self.segment_values(a), self.grid.r0)


@dataclass
class Diagnostics:
    """Picard iteration record.

    ``gaps[j]`` is the mean over particles of the squared sup distance,
    over the selected window, between iterates ``gap_index[j]+1`` and
    ``gap_index[j]`` (common random numbers); ``ratios`` are successive gap
    quotients aligned with ``gap_index[1:]``.  ``stop_metrics`` holds the
    full-horizon sup-over-time mean-square distances the stopping rule uses.
    """

    gap_index: np.ndarray
    gaps: np.ndarray
    ratios: np.ndarray
    window: float
    window_index: int
    converged: bool
    sweeps: int
    stop_metrics: np.ndarray


@dataclass(frozen=True)
class PairedPaths:
    """Two path sets driven by one noise plan, aligned by particle index."""

    left: PathSet
    right: PathSet
    initial_order: np.ndarray
    noise_seed: int
    diagnostics: tuple

    @property
    def N(self) -> int:
        return self.left.N

    @property
    def initial_order_ok(self) -> bool:
        return bool(np.all(self.initial_order))


def _euler_step_batch(window: np.ndarray, t: float, mu: Ensemble, cs: CoefficientSet,
                      dW: np.ndarray, dt: float, fp_tol: float) -> np.ndarray:
    x0 = window[:, -1, :]
    d0 = cs.neutral.evaluate_values(window)
    drift = cs.drift.evaluate_values(t, window, mu)
    diff = cs.diffusion.evaluate_values(t, window, mu)
    y = x0 - d0 + drift * dt + np.einsum("pnm,pm->pn", diff, dW)
    shifted = np.concatenate([window[:, 1:, :], y[:, None, :]], axis=1)
    if cs.neutral.strictly_lagged:
        return y + cs.neutral.evaluate_values(shifted)
    x = y.copy()
    for _ in range(200):
        shifted[:, -1, :] = x
        x_new = y + cs.neutral.evaluate_values(shifted)
        if float(np.max(np.abs(x_new - x))) <= fp_tol:
            return x_new
        x = x_new
    raise FixedPointError(
        "terminal-value recovery did not converge in 200 iterations; "
        "the neutral term is not a contraction in practice"
    )


def euler_step(x_seg: Segment, t: float, mu_t: Ensemble, cs: CoefficientSet,
               dW: np.ndarray, dt: float, fp_tol: float = 1e-12) -> np.ndarray:
    """One explicit step of the compensated state for a single particle.

    Computes ``y = x(0) - D(x_seg) + b dt + sigma dW`` and returns the state
    x at t + dt solving ``x = y + D(window shifted with terminal x)``.
    """
    dW = np.asarray(dW, dtype=float).reshape(cs.m)
    return _euler_step_batch(x_seg.values[None], t, mu_t, cs, dW[None], dt, fp_tol)[0]


def _validate_inputs(initial: Ensemble, cs: CoefficientSet, noise: NoisePlan, grid: SimGrid):
    if initial.K != grid.K or abs(initial.r0 - grid.r0) > 1e-12:
        raise ValueError(
            f"initial ensemble grid (K={initial.K}, r0={initial.r0}) does not match "
            f"the simulation grid (K={grid.K}, r0={grid.r0})"
        )
    if initial.n != cs.n:
        raise ValueError(f"state dimension mismatch: initial n={initial.n}, coefficients n={cs.n}")
    if noise.increments.shape != (initial.N, grid.steps, cs.m):
        raise ValueError(
            f"noise plan shape {noise.increments.shape} does not match "
            f"(N={initial.N}, steps={grid.steps}, m={cs.m})"
        )


def solve_frozen(initial: Ensemble, flow: MeasureFlow, cs: CoefficientSet,
                 noise: NoisePlan, grid: SimGrid, fp_tol: float = 1e-12) -> PathSet:
    """Advance every particle against a shared frozen measure flow.

    Each particle uses its own increments; the flow ensemble at each grid
    time is read-only during the step.  Deterministic given (seed, grid,
    coefficients).
    """
    _validate_inputs(initial, cs, noise, grid)
    if len(flow) < grid.steps:
        raise ValueError(f"flow covers {len(flow)} grid times, need at least {grid.steps}")
    if flow.ensembles[0].N != initial.N:
        raise ValueError("flow ensemble size does not match the particle count")
    N, K, steps = initial.N, grid.K, grid.steps
    traj = np.empty((N, K + steps + 1, cs.n))
    traj[:, : K + 1, :] = initial.values
    for a in range(steps):
        window = traj[:, a : a + K + 1, :]
        traj[:, K + a + 1, :] = _euler_step_batch(
            window, a * grid.dt, flow.ensembles[a], cs, noise.increments[:, a, :], grid.dt, fp_tol
        )
    return PathSet(traj, grid)


class _PicardRun:
    """One system's Picard state: flow, latest iterate, gap records."""

    def __init__(self, initial: Ensemble, cs: CoefficientSet, grid: SimGrid,
                 noise: NoisePlan, tol: float, fp_tol: float = 1e-12):
        _validate_inputs(initial, cs, noise, grid)
        self.initial = initial
        self.cs = cs
        self.grid = grid
        self.noise = noise
        self.tol = tol
        self.fp_tol = fp_tol
        self.flow = MeasureFlow.constant(initial, grid.steps)
        self.paths: PathSet | None = None
        self.window_curves: list[np.ndarray] = []
        self.stop_metrics: list[float] = []
        self.converged = False
        self.sweeps = 0

    def sweep(self) -> None:
        new = solve_frozen(self.initial, self.flow, self.cs, self.noise, self.grid, self.fp_tol)
        self.sweeps += 1
        if self.paths is not None:
            diff = new.states() - self.paths.states()
            sq = (diff**2).sum(axis=2)
            metric = float(sq.mean(axis=0).max())
            self.stop_metrics.append(metric)
            self.window_curves.append(np.maximum.accumulate(sq, axis=1).mean(axis=0))
            if metric <= self.tol:
                self.converged = True
        self.paths = new
        self.flow = MeasureFlow.from_pathset(new)

    def diagnostics(self, ratio_threshold: float = 1.0) -> Diagnostics:
        steps, dt = self.grid.steps, self.grid.dt
        curves = np.array(self.window_curves) if self.window_curves else np.zeros((0, steps + 1))
        if self.grid.contraction_window is not None:
            idx = int(np.clip(round(self.grid.contraction_window / dt), 1, steps))
        elif curves.shape[0] >= 2:
            denom = np.where(curves[:-1] > 1e-300, curves[:-1], np.inf)
            ratios = curves[1:] / denom
            ok = np.all(ratios < ratio_threshold, axis=0)
            qualifying = np.nonzero(ok[1:])[0] + 1
            idx = int(qualifying.max()) if qualifying.size else 1
        else:
            idx = steps
        gaps = curves[:, idx] if curves.size else np.zeros(0)
        gap_index = np.arange(1, len(gaps) + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(gaps[:-1] > 1e-300, gaps[1:] / np.maximum(gaps[:-1], 1e-300), 0.0)
        return Diagnostics(
            gap_index=gap_index,
            gaps=gaps,
            ratios=ratios,
            window=idx * dt,
            window_index=idx,
            converged=self.converged,
            sweeps=self.sweeps,
            stop_metrics=np.array(self.stop_metrics),
        )


def picard(initial: Ensemble, cs: CoefficientSet, grid: SimGrid, noise: NoisePlan,
           tol: float, max_iter: int, ratio_threshold: float = 1.0,
           fp_tol: float = 1e-12):
    """Picard-in-distribution iteration with common random numbers.

    Starts from the measure flow frozen at the initial law, repeatedly
    solves the frozen-flow equation and refreezes the flow from the result,
    and stops when the sup-over-time, index-aligned mean-square distance
    between successive iterates drops to ``tol`` (or ``max_iter`` sweeps are
    exhausted; the best iterate is returned with ``converged=False``).

    Returns
    -------
    (PathSet, MeasureFlow, Diagnostics)
    """
    if not tol >= 0:
        raise ValueError("tol must be nonnegative")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    run = _PicardRun(initial, cs, grid, noise, tol, fp_tol)
    for _ in range(max_iter):
        run.sweep()
        if run.converged:
            break
    return run.paths, run.flow, run.diagnostics(ratio_threshold)


def coupled_simulate(xi: Ensemble, xi_bar: Ensemble, cs: CoefficientSet,
                     cs_bar: CoefficientSet, grid: SimGrid, noise: NoisePlan,
                     tol: float, max_iter: int, fp_tol: float = 1e-12) -> PairedPaths:
    """Run both systems under one noise plan (synchronous coupling).

    The two Picard iterations advance in lockstep and stop together once
    both have converged, so the returned paths are the same iterate index
    for both systems.  Pairwise initial order in the compensated sense is
    validated and reported per pair, not enforced.
    """
    if xi.N != xi_bar.N:
        raise ValueError("paired initial ensembles must have equal size")
    left = _PicardRun(xi, cs, grid, noise, tol, fp_tol)
    right = _PicardRun(xi_bar, cs_bar, grid, noise, tol, fp_tol)
    for _ in range(max_iter):
        left.sweep()
        right.sweep()
        if left.converged and right.converged:
            break
    initial_order = np.array([
        leq_compensated(xi.member(k), xi_bar.member(k), cs.neutral)
        for k in range(xi.N)
    ])
    return PairedPaths(
        left=left.paths,
        right=right.paths,
        initial_order=initial_order,
        noise_seed=noise.seed,
        diagnostics=(left.diagnostics(), right.diagnostics()),
    )


def initial_ensemble(base_values, K: int, r0: float, N: int, seed: int,
                     amplitude: float = 0.0, clip: float = 3.0,
                     stream_offset: int = 0) -> Ensemble:
    """Constant initial segment replicated N times, optionally randomized.

    With ``amplitude > 0`` each member is the base segment plus a clipped
    Gaussian constant offset (one scalar per member, applied to every
    component).  Sampling uses a Philox stream disjoint from the particle
    noise streams.
    """
    base = np.atleast_1d(np.asarray(base_values, dtype=float))
    n = base.size
    values = np.tile(base, (N, K + 1, 1))
    if amplitude > 0.0:
        z = _philox_normals(seed, _INITIAL_STREAM_BASE + stream_offset, N)
        offsets = np.clip(amplitude * z, -clip, clip)
        values = values + offsets[:, None, None]
    return Ensemble(values, r0)
