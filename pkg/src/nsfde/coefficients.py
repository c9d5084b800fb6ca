"""Coefficient triples (neutral term, drift, diffusion) and their checkers.

The built-in families are linear and ship with computable declared constants:

* ``LinearLagNeutral``: D(xi) = A xi(-r0), contraction constant kappa equal
  to the max absolute row sum of A (must be < 1);
* ``MeanFieldLinearDrift``: b(t, xi, mu) = B xi(0) + C mean_mu[zeta(0)] + g;
* ``CompensatedLinearDiffusion``: sigma_ij = s_ij (xi^i(0) - D^i(xi)) + c_ij,
  which depends only on the i-th compensated coordinate;
* ``LaggedLinearDiffusion``: sigma_ij = s_ij xi^i(-r0) + c_ij, which reads
  the lagged state and therefore breaks the structural condition the
  order-preservation theory requires (it exists to exercise the falsifiers).

Checkers are sampling-based falsifiers, not verifiers: a pass means no
counterexample was found in ``trials`` samples.  They never raise on
coefficient misbehaviour; they report.  All randomness flows through a
seeded :class:`SegmentSampler`, so reports are reproducible.

Coefficients evaluate on batches: ``evaluate_values`` takes an (N, K+1, n)
window array (plus the frozen ensemble for drift/diffusion) and returns the
stacked outputs.  ``evaluate`` is the single-segment convenience wrapper.
Subclassing the three base classes is the extension point for custom
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .measures import Ensemble, w2
from .segments import (
    Segment,
    _bisect_increasing,
    compensated_component,
    lower_companion,
    shift_component_to_match,
    sup_norm,
    zero_segment,
)

__all__ = [
    "NeutralTerm",
    "LinearLagNeutral",
    "ZeroNeutral",
    "Drift",
    "MeanFieldLinearDrift",
    "ShiftedDrift",
    "Diffusion",
    "CompensatedLinearDiffusion",
    "LaggedLinearDiffusion",
    "CoefficientSet",
    "mean_field_linear_family",
    "SegmentSampler",
    "CheckReport",
    "check_neutral_monotone",
    "check_neutral_contraction",
    "check_neutral_contraction_uniform",
    "check_drift_lipschitz",
    "check_diffusion_structure",
    "check_diffusion_lipschitz_uniform",
    "check_growth_at_zero",
    "check_comparison_conditions",
]


def _as_matrix(x, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if rows is not None and a.shape != (rows, cols):
        raise ValueError(f"expected shape {(rows, cols)}, got {a.shape}")
    return a


class NeutralTerm:
    """Base neutral term: maps a segment to an R^n vector, D(0) = 0 intended.

    Subclasses implement ``evaluate_values`` on (N, K+1, n) window arrays.
    ``kappa`` bounds |D_i(xi) - D_i(eta)| by kappa * max_j sup |xi^j - eta^j|
    per component; ``kappa_uniform`` is the analogous constant against the
    plain uniform norm.  ``strictly_lagged`` declares that the value at
    theta = 0 is never read, which lets the solver skip the implicit
    terminal-value recovery.
    """

    n: int
    K: int
    r0: float
    kappa: float
    kappa_uniform: float
    strictly_lagged: bool = False

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, seg: Segment) -> np.ndarray:
        return self.evaluate_values(seg.values[None])[0]


class LinearLagNeutral(NeutralTerm):
    """D(xi) = A xi(-r0) for an n x n matrix A with max |row sum| < 1."""

    def __init__(self, A, K: int, r0: float):
        self.A = _as_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A must be square")
        self.n = self.A.shape[0]
        self.K = int(K)
        self.r0 = float(r0)
        self.kappa = float(np.abs(self.A).sum(axis=1).max())
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"max absolute row sum of A must lie in (0, 1), got {self.kappa}")
        self.kappa_uniform = float(np.linalg.norm(self.A, 2))
        self.strictly_lagged = True
        self.monotone = bool(np.all(self.A >= 0.0))

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        return values[..., 0, :] @ self.A.T


class ZeroNeutral(NeutralTerm):
    """D = 0; any contraction constant in (0, 1) is valid, 0.5 declared."""

    def __init__(self, n: int, K: int, r0: float, kappa: float = 0.5):
        if not 0.0 < kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        self.n = int(n)
        self.K = int(K)
        self.r0 = float(r0)
        self.kappa = float(kappa)
        self.kappa_uniform = float(kappa)
        self.strictly_lagged = True
        self.monotone = True

    def evaluate_values(self, values: np.ndarray) -> np.ndarray:
        return np.zeros(values.shape[:-2] + (self.n,))


class Drift:
    """Base drift: (t, segment window, ensemble) -> R^n, batched."""

    n: int

    def evaluate_values(self, t: float, values: np.ndarray, mu: Ensemble) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, t: float, seg: Segment, mu: Ensemble) -> np.ndarray:
        return self.evaluate_values(t, seg.values[None], mu)[0]


class MeanFieldLinearDrift(Drift):
    """b(t, xi, mu) = B xi(0) + C mean_mu[zeta(0)] + g."""

    def __init__(self, B, C, g=None):
        self.B = _as_matrix(B)
        self.n = self.B.shape[0]
        self.C = _as_matrix(C, self.n, self.n)
        if self.B.shape != (self.n, self.n):
            raise ValueError("B must be square")
        self.g = np.zeros(self.n) if g is None else np.asarray(g, dtype=float).reshape(self.n)
        # sharp single-system Lipschitz constant against sup-norm + W2
        self.lip_single = float(np.linalg.norm(np.hstack([self.B, self.C]), 2) ** 2)
        self.growth_single = float(np.dot(self.g, self.g))

    def evaluate_values(self, t: float, values: np.ndarray, mu: Ensemble) -> np.ndarray:
        mean_term = mu.terminal_mean() @ self.C.T
        return values[..., -1, :] @ self.B.T + mean_term + self.g


class ShiftedDrift(Drift):
    """A drift plus a constant vector (scalar shifts apply to every component)."""

    def __init__(self, base: Drift, shift):
        self.base = base
        self.n = base.n
        s = np.asarray(shift, dtype=float)
        self.shift = np.full(self.n, float(s)) if s.ndim == 0 else s.reshape(self.n)
        self.lip_single = getattr(base, "lip_single", None)
        g = getattr(base, "growth_single", None)
        self.growth_single = None if g is None else float(np.dot(self.shift, self.shift)) * 2 + 2 * g

    def evaluate_values(self, t: float, values: np.ndarray, mu: Ensemble) -> np.ndarray:
        return self.base.evaluate_values(t, values, mu) + self.shift


class Diffusion:
    """Base diffusion: (t, segment window, ensemble) -> R^{n x m}, batched."""

    n: int
    m: int

    def evaluate_values(self, t: float, values: np.ndarray, mu: Ensemble) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, t: float, seg: Segment, mu: Ensemble) -> np.ndarray:
        return self.evaluate_values(t, seg.values[None], mu)[0]


class CompensatedLinearDiffusion(Diffusion):
    """sigma_ij = s_ij (xi^i(0) - D^i(xi)) + c_ij.

    Row i depends on (t, i-th compensated coordinate) only, which is the
    structural requirement of the comparison theory.
    """

    def __init__(self, s, c, neutral: NeutralTerm):
        self.s = _as_matrix(s)
        self.n, self.m = self.s.shape
        self.c = _as_matrix(c, self.n, self.m)
        self.neutral = neutral
        if neutral.n != self.n:
            raise ValueError("neutral term dimension does not match s")
        self.lip_rows_single = float((self.s**2).sum(axis=1).max())
        self.lip_uniform_single = float((1.0 + neutral.kappa) ** 2 * (self.s**2).sum())
        self.growth_single = float((self.c**2).sum())

    def evaluate_values(self, t: float, values: np.ndarray, mu: Ensemble) -> np.ndarray:
        comp = values[..., -1, :] - self.neutral.evaluate_values(values)
        return self.s * comp[..., :, None] + self.c


class LaggedLinearDiffusion(Diffusion):
    """sigma_ij = s_ij xi^i(-r0) + c_ij: reads the lagged state.

    Deliberately violates the compensated-coordinate dependence structure;
    used to produce order violations and exercise the localizer.
    """

    def __init__(self, s, c):
        self.s = _as_matrix(s)
        self.n, self.m = self.s.shape
        self.c = _as_matrix(c, self.n, self.m)
        self.lip_rows_single = None
        self.lip_uniform_single = float((self.s**2).sum())
        self.growth_single = float((self.c**2).sum())

    def evaluate_values(self, t: float, values: np.ndarray, mu: Ensemble) -> np.ndarray:
        lag = values[..., 0, :]
        return self.s * lag[..., :, None] + self.c


@dataclass(frozen=True)
class CoefficientSet:
    """The (neutral, drift, diffusion) triple plus declared constants.

    ``declared`` carries ``kappa`` (contraction constant), ``lip`` (the
    self-paired Lipschitz constant valid when the system is checked against
    itself) and ``growth`` (bound at the zero segment and point mass at 0).
    ``claims`` names the checks the set is expected to pass.
    """

    neutral: NeutralTerm
    drift: Drift
    diffusion: Diffusion
    n: int
    m: int
    declared: dict = field(default_factory=dict)
    claims: frozenset = frozenset()

    def with_drift(self, drift: Drift) -> "CoefficientSet":
        return replace(self, drift=drift)

    def with_drift_shift(self, shift) -> "CoefficientSet":
        return replace(self, drift=ShiftedDrift(self.drift, shift))


def mean_field_linear_family(
    *,
    B,
    C,
    s,
    c,
    K: int,
    r0: float,
    A=None,
    g=None,
    lagged_sigma: bool = False,
) -> CoefficientSet:
    """Assemble a built-in linear family as a :class:`CoefficientSet`.

    ``A = None`` selects the zero neutral term.  ``lagged_sigma`` swaps the
    compensated-coordinate diffusion for the lagged-state one.
    """
    B = _as_matrix(B)
    n = B.shape[0]
    neutral = ZeroNeutral(n, K, r0) if A is None else LinearLagNeutral(A, K, r0)
    if neutral.n != n:
        raise ValueError("A and B dimensions disagree")
    drift = MeanFieldLinearDrift(B, C, g)
    if lagged_sigma:
        diffusion = LaggedLinearDiffusion(s, c)
    else:
        diffusion = CompensatedLinearDiffusion(s, c, neutral)
    if diffusion.n != n:
        raise ValueError("s rows must match the state dimension")
    lip_candidates = [2.0 * drift.lip_single]
    if diffusion.lip_rows_single is not None:
        lip_candidates.append(2.0 * diffusion.lip_rows_single)
    declared = {
        "kappa": neutral.kappa,
        "lip": max(lip_candidates),
        "lip_uniform": 2.0 * drift.lip_single + 2.0 * diffusion.lip_uniform_single,
        "growth": drift.growth_single + diffusion.growth_single,
    }
    claims = {"neutral_contraction", "drift_lipschitz", "growth"}
    if getattr(neutral, "monotone", False):
        claims.add("neutral_monotone")
    if neutral.kappa_uniform < 1.0:
        claims.add("neutral_contraction_uniform")
    if not lagged_sigma:
        claims.add("diffusion_structure")
    return CoefficientSet(
        neutral=neutral,
        drift=drift,
        diffusion=diffusion,
        n=n,
        m=diffusion.m,
        declared=declared,
        claims=frozenset(claims),
    )


@dataclass
class SegmentSampler:
    """Seeded source of random segments, ordered pairs and small ensembles.

    Segments are random walks on the theta grid (constant offset plus
    Brownian-scaled increments), which resemble what the solver produces.
    Everything is drawn from one PCG64 stream, so a checker run is fully
    determined by the seed.
    """

    K: int
    r0: float
    n: int
    seed: int
    scale: float = 1.0
    t_max: float = 10.0

    def __post_init__(self):
        self.rng = np.random.Generator(np.random.PCG64(self.seed))

    def segment(self) -> Segment:
        start = self.rng.normal(0.0, self.scale, self.n)
        steps = self.rng.normal(0.0, self.scale / np.sqrt(self.K), (self.K, self.n))
        walk = np.vstack([np.zeros((1, self.n)), np.cumsum(steps, axis=0)])
        return Segment(start + walk, self.r0)

    def nonneg_segment(self) -> Segment:
        return Segment(np.abs(self.segment().values), self.r0)

    def time(self) -> float:
        return float(self.rng.uniform(0.0, self.t_max))

    def ordered_pair(self) -> tuple[Segment, Segment]:
        a = self.segment()
        return a, Segment(a.values + self.nonneg_segment().values, self.r0)

    def contraction_pair(self) -> tuple[Segment, Segment]:
        """Pair for Lipschitz probing; half the draws differ by a constant
        sign-pattern vector, which attains the linear families' constants."""
        a = self.segment()
        if self.rng.random() < 0.5:
            return a, self.segment()
        signs = self.rng.choice([-1.0, 1.0], self.n)
        magnitude = self.rng.uniform(0.5, 1.5) * self.scale
        return a, Segment(a.values + magnitude * signs, self.r0)

    def ensemble(self, N: int) -> Ensemble:
        return Ensemble(np.stack([self.segment().values for _ in range(N)]), self.r0)

    def ordered_ensembles(self, N: int) -> tuple[Ensemble, Ensemble]:
        mu = self.ensemble(N)
        shifts = self.rng.uniform(0.0, self.scale, N)
        return mu, mu.shifted(shifts)

    def matched_segment(self, neutral, i: int, target: float) -> Segment:
        """Fresh random segment whose i-th compensated coordinate is ``target``."""
        return shift_component_to_match(self.segment(), neutral, i, target)

    def ordered_pair_equal_compensated(self, neutral, i: int) -> tuple[Segment, Segment]:
        """eta <= eta_bar pointwise with equal i-th compensated coordinates.

        eta_bar is eta plus a nonnegative bump that vanishes at theta = 0 in
        component i, then component i is raised by the constant c >= 0 that
        restores the compensated coordinate (monotone in c, so bisection).
        """
        eta = self.segment()
        bump = self.nonneg_segment().values.copy()
        bump[-1, i] = 0.0
        raised = eta.values + bump
        unit = np.zeros_like(raised)
        unit[:, i] = 1.0
        target = compensated_component(eta, neutral, i)

        def f(cval: float) -> float:
            seg = Segment(raised + cval * unit, self.r0)
            return compensated_component(seg, neutral, i) - target

        f0 = f(0.0)
        if f0 >= 0.0:
            c = 0.0
        else:
            hi = -f0 / (1.0 - neutral.kappa) * (1.0 + 1e-9) + 1e-15
            c = max(_bisect_increasing(f, 0.0, hi, 1e-13), 0.0)
        return eta, Segment(raised + c * unit, self.r0)


@dataclass
class CheckReport:
    """Outcome of one sampling-based checker run."""

    name: str
    passed: bool
    trials: int
    metric: float | None = None
    threshold: float | None = None
    violations: int = 0
    details: dict = field(default_factory=dict)

    def __str__(self):
        state = "pass" if self.passed else "FAIL"
        parts = [f"{self.name}: {state} ({self.trials} trials"]
        if self.metric is not None:
            parts.append(f", metric={self.metric:.6g}")
        if self.threshold is not None:
            parts.append(f", threshold={self.threshold:.6g}")
        if self.violations:
            parts.append(f", violations={self.violations}")
        return "".join(parts) + ")"


def _bound_at(bound, t: float) -> float:
    return float(bound(t)) if callable(bound) else float(bound)


def check_neutral_monotone(neutral, sampler: SegmentSampler, trials: int) -> CheckReport:
    """D(0) = 0 (within 1e-14) and D(xi) >= D(eta) on sampled ordered pairs."""
    zero_val = float(np.max(np.abs(neutral.evaluate(zero_segment(sampler.K, sampler.r0, sampler.n)))))
    violations = 0
    worst = 0.0
    for _ in range(trials):
        eta, xi = sampler.ordered_pair()
        gap = neutral.evaluate(xi) - neutral.evaluate(eta)
        deficit = float(-np.min(gap))
        if deficit > 0.0:
            violations += 1
            worst = max(worst, deficit)
    passed = zero_val <= 1e-14 and violations == 0
    return CheckReport(
        name="neutral_monotone",
        passed=passed,
        trials=trials,
        metric=worst,
        threshold=0.0,
        violations=violations,
        details={"zero_value": zero_val},
    )


def _contraction_ratio(neutral, sampler, trials, numerator, denominator):
    worst = 0.0
    for _ in range(trials):
        a, b = sampler.contraction_pair()
        denom = denominator(a, b)
        if denom < 1e-30:
            continue
        worst = max(worst, numerator(a, b) / denom)
    return worst


def check_neutral_contraction(neutral, sampler: SegmentSampler, trials: int) -> CheckReport:
    """Componentwise contraction: max_i |D_i(xi) - D_i(eta)| against
    max_i sup |xi^i - eta^i|, compared to the declared kappa."""
    worst = _contraction_ratio(
        neutral,
        sampler,
        trials,
        lambda a, b: float(np.max(np.abs(neutral.evaluate(a) - neutral.evaluate(b)))),
        lambda a, b: float(np.max(np.abs(a.values - b.values))),
    )
    threshold = neutral.kappa
    return CheckReport(
        name="neutral_contraction",
        passed=worst <= threshold + 1e-12,
        trials=trials,
        metric=worst,
        threshold=threshold,
    )


def check_neutral_contraction_uniform(neutral, sampler: SegmentSampler, trials: int) -> CheckReport:
    """Plain-norm variant: Euclidean |D(xi) - D(eta)| against the uniform norm."""
    worst = _contraction_ratio(
        neutral,
        sampler,
        trials,
        lambda a, b: float(np.linalg.norm(neutral.evaluate(a) - neutral.evaluate(b))),
        lambda a, b: sup_norm(Segment(a.values - b.values, a.r0)),
    )
    threshold = neutral.kappa_uniform
    return CheckReport(
        name="neutral_contraction_uniform",
        passed=worst <= threshold + 1e-12,
        trials=trials,
        metric=worst,
        threshold=threshold,
    )


def check_drift_lipschitz(drift, drift_bar, bound, sampler: SegmentSampler, trials: int) -> CheckReport:
    """Squared drift increments against sup-norm^2 + W2^2.

    ``bound`` is a constant or a callable of t (the time-dependent variant).
    Samples with coinciding arguments are skipped (division guard).
    """
    worst_excess = -np.inf
    worst_ratio = 0.0
    checked = 0
    for _ in range(trials):
        t = sampler.time()
        xi, eta = sampler.contraction_pair()
        mu = sampler.ensemble(8)
        nu = sampler.ensemble(8)
        denom = sup_norm(Segment(xi.values - eta.values, xi.r0)) ** 2 + w2(mu, nu) ** 2
        if denom < 1e-30:
            continue
        num = float(
            np.sum((drift.evaluate(t, xi, mu) - drift.evaluate(t, eta, nu)) ** 2)
            + np.sum((drift_bar.evaluate(t, xi, mu) - drift_bar.evaluate(t, eta, nu)) ** 2)
        )
        ratio = num / denom
        limit = _bound_at(bound, t)
        worst_ratio = max(worst_ratio, ratio)
        worst_excess = max(worst_excess, ratio - limit)
        checked += 1
    slack = 1e-9 * (1.0 + abs(worst_ratio))
    return CheckReport(
        name="drift_lipschitz",
        passed=checked > 0 and worst_excess <= slack,
        trials=checked,
        metric=worst_ratio,
        threshold=None if callable(bound) else float(bound),
        details={"worst_excess": float(worst_excess)},
    )


def check_diffusion_structure(sigma, neutral, bound, sampler: SegmentSampler, trials: int,
                              dep_tol: float = 1e-12) -> CheckReport:
    """Two sub-checks per row i of the diffusion.

    (a) Lipschitz against the compensated-coordinate gap: the row-i squared
        increment summed over j must be <= bound * gap_i^2 while the measure
        argument varies freely.
    (b) Functional dependence: perturbing the segment and the measure while
        holding the i-th compensated coordinate fixed (fresh matched segments
        and their lower companion) must leave row i unchanged within
        ``dep_tol``.
    """
    worst_ratio = 0.0
    dep_violations = 0
    worst_dep = 0.0
    for trial in range(trials):
        t = sampler.time()
        xi, eta = sampler.contraction_pair()
        mu = sampler.ensemble(4)
        nu = sampler.ensemble(4)
        sx = sigma.evaluate(t, xi, mu)
        se = sigma.evaluate(t, eta, nu)
        comp_x = xi.terminal() - neutral.evaluate(xi)
        comp_e = eta.terminal() - neutral.evaluate(eta)
        for i in range(sigma.n):
            gap2 = float((comp_x[i] - comp_e[i]) ** 2)
            if gap2 < 1e-24:
                continue
            worst_ratio = max(worst_ratio, float(np.sum((sx[i] - se[i]) ** 2)) / gap2)
        # dependence probe on one row per trial
        i = int(sampler.rng.integers(sigma.n))
        target = compensated_component(xi, neutral, i)
        other = sampler.matched_segment(neutral, i, target)
        # companion constructions must be much tighter than dep_tol
        probes = [other]
        try:
            probes.append(lower_companion(xi, other, neutral, i, tol=1e-14))
        except (ValueError, RuntimeError):
            pass
        for probe in probes:
            diff = float(np.max(np.abs(
                sigma.evaluate(t, probe, nu)[i] - sx[i]
            )))
            if diff > dep_tol:
                dep_violations += 1
                worst_dep = max(worst_dep, diff)
    limit = None if callable(bound) else (None if bound is None else float(bound))
    lip_ok = True if bound is None else worst_ratio <= _bound_at(bound, 0.0) + 1e-9 * (1 + worst_ratio)
    return CheckReport(
        name="diffusion_structure",
        passed=lip_ok and dep_violations == 0,
        trials=trials,
        metric=worst_ratio,
        threshold=limit,
        violations=dep_violations,
        details={"dependence_violations": dep_violations, "worst_dependence_gap": worst_dep},
    )


def check_diffusion_lipschitz_uniform(sigma, sigma_bar, bound, sampler: SegmentSampler,
                                      trials: int) -> CheckReport:
    """Hilbert-Schmidt increments against sup-norm^2 + W2^2 (the uniform variant)."""
    worst_excess = -np.inf
    worst_ratio = 0.0
    checked = 0
    for _ in range(trials):
        t = sampler.time()
        xi, eta = sampler.contraction_pair()
        mu = sampler.ensemble(8)
        nu = sampler.ensemble(8)
        denom = sup_norm(Segment(xi.values - eta.values, xi.r0)) ** 2 + w2(mu, nu) ** 2
        if denom < 1e-30:
            continue
        num = float(
            np.sum((sigma.evaluate(t, xi, mu) - sigma.evaluate(t, eta, nu)) ** 2)
            + np.sum((sigma_bar.evaluate(t, xi, mu) - sigma_bar.evaluate(t, eta, nu)) ** 2)
        )
        ratio = num / denom
        worst_ratio = max(worst_ratio, ratio)
        worst_excess = max(worst_excess, ratio - _bound_at(bound, t))
        checked += 1
    return CheckReport(
        name="diffusion_lipschitz_uniform",
        passed=checked > 0 and worst_excess <= 1e-9 * (1.0 + abs(worst_ratio)),
        trials=checked,
        metric=worst_ratio,
        threshold=None if callable(bound) else float(bound),
        details={"worst_excess": float(worst_excess)},
    )


def check_growth_at_zero(drift, sigma, sampler: SegmentSampler, trials: int,
                         bound=None) -> CheckReport:
    """Record sup over sampled t of the squared coefficients at the zero
    segment and the point mass at zero; pass when finite (and below the
    declared bound when one is given)."""
    zero = zero_segment(sampler.K, sampler.r0, sampler.n)
    delta0 = Ensemble(zero.values[None], sampler.r0)
    observed = 0.0
    ok = True
    for _ in range(trials):
        t = sampler.time()
        val = float(
            np.sum(drift.evaluate(t, zero, delta0) ** 2)
            + np.sum(sigma.evaluate(t, zero, delta0) ** 2)
        )
        observed = max(observed, val)
        if not np.isfinite(val):
            ok = False
        elif bound is not None and val > _bound_at(bound, t) + 1e-9 * (1 + val):
            ok = False
    return CheckReport(
        name="growth_at_zero",
        passed=ok,
        trials=trials,
        metric=observed,
        threshold=None if bound is None or callable(bound) else float(bound),
    )


def _neutral_agreement(neutral_a, neutral_b, sampler, samples: int = 20) -> float:
    worst = 0.0
    for _ in range(samples):
        seg = sampler.segment()
        worst = max(worst, float(np.max(np.abs(neutral_a.evaluate(seg) - neutral_b.evaluate(seg)))))
    return worst


def check_comparison_conditions(cs: CoefficientSet, cs_bar: CoefficientSet,
                                sampler: SegmentSampler, trials: int,
                                tol: float = 1e-9) -> CheckReport:
    """Sampled test of the two order-preservation conditions.

    Drift: on tuples (t, eta, eta_bar, mu, mu_bar) with eta below eta_bar,
    mu below mu_bar (constant upward shifts) and equal i-th compensated
    coordinates, requires b_i <= b_bar_i.  Diffusion: requires sigma and
    sigma_bar to agree as functions on random inputs, and each to pass the
    compensated-coordinate dependence probe of
    :func:`check_diffusion_structure`.
    """
    neutral = cs.neutral
    if cs_bar.neutral is not neutral:
        disagreement = _neutral_agreement(neutral, cs_bar.neutral, sampler)
        if disagreement > 1e-12:
            raise ValueError(
                "comparison requires a shared neutral term; "
                f"the two differ by up to {disagreement}"
            )
    drift_violations = 0
    min_margin = np.inf
    for _ in range(trials):
        i = int(sampler.rng.integers(cs.n))
        eta, eta_bar = sampler.ordered_pair_equal_compensated(neutral, i)
        mu, mu_bar = sampler.ordered_ensembles(8)
        t = sampler.time()
        margin = float(
            cs_bar.drift.evaluate(t, eta_bar, mu_bar)[i] - cs.drift.evaluate(t, eta, mu)[i]
        )
        min_margin = min(min_margin, margin)
        if margin < -tol:
            drift_violations += 1
    sigma_gap = 0.0
    for _ in range(max(trials // 4, 1)):
        t = sampler.time()
        xi = sampler.segment()
        mu = sampler.ensemble(4)
        sigma_gap = max(sigma_gap, float(np.max(np.abs(
            cs.diffusion.evaluate(t, xi, mu) - cs_bar.diffusion.evaluate(t, xi, mu)
        ))))
    structure = check_diffusion_structure(
        cs.diffusion, neutral, None, sampler, max(trials // 4, 1)
    )
    structure_bar = check_diffusion_structure(
        cs_bar.diffusion, neutral, None, sampler, max(trials // 4, 1)
    )
    passed = (
        drift_violations == 0
        and sigma_gap <= 1e-12
        and structure.passed
        and structure_bar.passed
    )
    return CheckReport(
        name="comparison_conditions",
        passed=passed,
        trials=trials,
        metric=float(min_margin),
        threshold=0.0,
        violations=drift_violations,
        details={
            "drift_violations": drift_violations,
            "min_drift_margin": float(min_margin),
            "sigma_equality_gap": sigma_gap,
            "sigma_structure_ok": structure.passed,
            "sigma_bar_structure_ok": structure_bar.passed,
        },
    )
