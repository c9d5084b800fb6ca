"""Order-preservation verdicts on synchronously coupled simulations.

Works on a :class:`~nsfde.solver.PairedPaths`: per pair and component it
finds the first grid time at which the state order is violated beyond a
slack, and the first time the compensated-state order is violated.  The
structural fact checked by :func:`check_crossing_precedence` is that the
compensated crossing never happens after the state crossing, which holds
for any monotone contraction neutral term; the slack parameter plays the
role of a discrete crossing ladder.

When compensated crossings exist, :func:`localize_violation` evaluates both
drifts and both diffusions at each touch configuration (where the
compensated coordinates of the two paths meet) on the actual simulated
segments and empirical flows, and reports which comparison condition fails:
``drift (i)`` when the lower system's drift exceeds the upper one's, or
``diffusion (ii)`` when the diffusion rows differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet
from .measures import Ensemble
from .segments import leq_compensated
from .solver import NoisePlan, PairedPaths, PathSet, SimGrid, picard

__all__ = [
    "CrossingReport",
    "OrderVerdict",
    "Diagnosis",
    "ShiftResult",
    "crossing_times",
    "check_crossing_precedence",
    "order_report",
    "localize_violation",
    "drift_shift_experiment",
]


@dataclass(frozen=True)
class CrossingReport:
    """First crossing times per pair and component; inf means never.

    ``state_times[k, i]`` is the first grid time the i-th state component of
    pair k exceeds its partner by more than ``slack``;
    ``compensated_times[k, i]`` the analogue for the compensated state.
    """

    state_times: np.ndarray
    compensated_times: np.ndarray
    slack: float
    dt: float

    @property
    def state_pair_times(self) -> np.ndarray:
        return self.state_times.min(axis=1)

    @property
    def compensated_pair_times(self) -> np.ndarray:
        return self.compensated_times.min(axis=1)


@dataclass(frozen=True)
class OrderVerdict:
    """Summary of pairwise order violations over a coupled run."""

    applicable: bool
    n_pairs: int
    n_violating: int
    violation_fraction: float
    max_violation: float
    first_violation_times: np.ndarray
    slack: float


@dataclass(frozen=True)
class Diagnosis:
    """One flagged comparison-condition failure at a touch configuration."""

    pair: int
    component: int
    time: float
    condition: str
    magnitude: float


@dataclass(frozen=True)
class ShiftResult:
    """Drift-shift stability table: E sup |shifted path - base path| per shift."""

    shifts: np.ndarray
    distances: np.ndarray

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.distances) < 0))


def _compensated_paths(paths: PathSet, neutral) -> np.ndarray:
    """Compensated states over t in [0, T], shape (N, steps+1, n)."""
    steps = paths.grid.steps
    out = np.empty_like(paths.states())
    for a in range(steps + 1):
        window = paths.segment_values(a)
        out[:, a, :] = window[:, -1, :] - neutral.evaluate_values(window)
    return out


def _gap_arrays(pp: PairedPaths, neutral):
    state_gap = pp.left.states() - pp.right.states()
    comp_gap = _compensated_paths(pp.left, neutral) - _compensated_paths(pp.right, neutral)
    return state_gap, comp_gap


def _first_exceed_times(gaps: np.ndarray, slack: float, dt: float) -> np.ndarray:
    """First grid time (per pair, component) a gap exceeds slack; inf if never."""
    mask = gaps > slack
    hit = mask.any(axis=1)
    first = np.argmax(mask, axis=1)
    return np.where(hit, first * dt, np.inf)


def crossing_times(pp: PairedPaths, neutral, slack: float) -> CrossingReport:
    """First state-order and compensated-order crossings beyond ``slack``."""
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    state_gap, comp_gap = _gap_arrays(pp, neutral)
    dt = pp.left.grid.dt
    return CrossingReport(
        state_times=_first_exceed_times(state_gap, slack, dt),
        compensated_times=_first_exceed_times(comp_gap, slack, dt),
        slack=slack,
        dt=dt,
    )


def check_crossing_precedence(report: CrossingReport):
    """Check that the compensated crossing never trails the state crossing.

    Returns ``(ok, violating_pairs)``: per pair, the minimum compensated
    crossing time must be <= the minimum state crossing time (inf <= inf
    counts as vacuously fine).
    """
    comp = report.compensated_pair_times
    state = report.state_pair_times
    violating = np.nonzero(comp > state)[0]
    return violating.size == 0, violating


def order_report(pp: PairedPaths, neutral, slack: float) -> OrderVerdict:
    """Fraction of pairs ever violating the compensated order beyond slack.

    Marked inapplicable when the initial pair order does not hold; the
    violation statistics are still computed for inspection.
    """
    applicable = all(
        leq_compensated(pp.left.segment(k, 0), pp.right.segment(k, 0), neutral)
        for k in range(pp.N)
    )
    state_gap, comp_gap = _gap_arrays(pp, neutral)
    dt = pp.left.grid.dt
    state_first = _first_exceed_times(state_gap, slack, dt).min(axis=1)
    comp_first = _first_exceed_times(comp_gap, slack, dt).min(axis=1)
    first = np.minimum(state_first, comp_first)
    violating = np.isfinite(first)
    max_violation = float(max(state_gap.max(initial=0.0), comp_gap.max(initial=0.0)))
    return OrderVerdict(
        applicable=applicable,
        n_pairs=pp.N,
        n_violating=int(violating.sum()),
        violation_fraction=float(violating.mean()),
        max_violation=max_violation,
        first_violation_times=first,
        slack=slack,
    )


def localize_violation(pp: PairedPaths, cs: CoefficientSet, cs_bar: CoefficientSet,
                       report: CrossingReport, tol: float = 1e-9) -> list:
    """Evaluate the comparison conditions at each pair's touch configuration.

    For every pair with a finite compensated crossing, the drifts and
    diffusions of both systems are evaluated at the crossing time on the
    pair's actual segments and the runs' empirical flows; components whose
    compensated crossing is the earliest for the pair are inspected.
    Returns a list of :class:`Diagnosis` (empty when nothing crossed).
    """
    diagnoses: list[Diagnosis] = []
    comp_pair = report.compensated_pair_times
    dt = report.dt
    cache: dict[int, tuple] = {}
    for k in np.nonzero(np.isfinite(comp_pair))[0]:
        t_touch = comp_pair[k]
        a = int(round(t_touch / dt))
        if a not in cache:
            cache[a] = (pp.left.ensemble(a), pp.right.ensemble(a))
        mu, mu_bar = cache[a]
        seg = pp.left.segment(k, a)
        seg_bar = pp.right.segment(k, a)
        t = a * dt
        b = cs.drift.evaluate(t, seg, mu)
        b_bar = cs_bar.drift.evaluate(t, seg_bar, mu_bar)
        s = cs.diffusion.evaluate(t, seg, mu)
        s_bar = cs_bar.diffusion.evaluate(t, seg_bar, mu_bar)
        for i in np.nonzero(report.compensated_times[k] == t_touch)[0]:
            drift_excess = float(b[i] - b_bar[i])
            if drift_excess > tol:
                diagnoses.append(Diagnosis(int(k), int(i), t, "drift (i)", drift_excess))
            sigma_gap = float(np.max(np.abs(s[i] - s_bar[i])))
            if sigma_gap > tol:
                diagnoses.append(Diagnosis(int(k), int(i), t, "diffusion (ii)", sigma_gap))
    return diagnoses


def drift_shift_experiment(cs_bar: CoefficientSet, shifts, initial: Ensemble,
                           grid: SimGrid, noise: NoisePlan, tol: float = 1e-10,
                           max_iter: int = 50) -> ShiftResult:
    """Distance to the unshifted system as the drift offset shrinks.

    Solves the base system once, then re-solves with the drift raised by
    each constant shift, all under the same noise plan, and reports
    ``mean over particles of sup over [0, T] of |shifted - base|``.
    """
    shifts = np.asarray(list(shifts), dtype=float)
    base, _, _ = picard(initial, cs_bar, grid, noise, tol, max_iter)
    distances = np.empty(shifts.size)
    for idx, eps in enumerate(shifts):
        shifted, _, _ = picard(initial, cs_bar.with_drift_shift(eps), grid, noise, tol, max_iter)
        diff = shifted.states() - base.states()
        per_particle_sup = np.sqrt((diff**2).sum(axis=2)).max(axis=1)
        distances[idx] = float(per_particle_sup.mean())
    return ShiftResult(shifts=shifts, distances=distances)
