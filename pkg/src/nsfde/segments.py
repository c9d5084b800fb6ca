"""Discretized segment space: windows of R^n valued paths on [-r0, 0].

A segment stores the recent past of a path on a uniform theta grid,
theta_j = -r0 + j*dtheta for j = 0..K with theta_K = 0, so row 0 is the
oldest value and the last row is the current state.  Everything here is
immutable and pure: norms, partial orders, the lattice meet, and the two
lower-bound constructions used by the order-preservation diagnostics
(``lower_companion`` and ``common_lower_constant``).

A "neutral term" argument is any object with an ``evaluate(Segment) -> (n,)``
method, a ``kappa`` contraction constant in (0, 1), and ``evaluate(0) = 0``;
see :mod:`nsfde.coefficients` for the built-in families.  The *compensated
state* of a segment is ``seg(0) - neutral(seg)``, the quantity whose
increments the solver integrates, and ``leq_compensated`` is the partial
order that couples the pointwise order with the order of compensated states.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "GridMismatchError",
    "BracketError",
    "Segment",
    "OrderKind",
    "constant_segment",
    "zero_segment",
    "ones_segment",
    "sup_norm",
    "comp_sup_norm",
    "compensated_state",
    "compensated_component",
    "leq",
    "lt",
    "ll",
    "leq_compensated",
    "lt_compensated",
    "compare",
    "meet",
    "compensated_constant",
    "lower_companion",
    "common_lower_constant",
    "shift_component_to_match",
    "segment_to_csv",
    "segment_from_csv",
]


class GridMismatchError(ValueError):
    """Two segments do not share the same (K, n, r0) grid."""


class BracketError(RuntimeError):
    """A guaranteed bisection bracket failed: the supplied neutral term
    violates monotonicity or its declared contraction constant."""


@dataclass(frozen=True)
class Segment:
    """One window of a path on [-r0, 0], on a uniform grid.

    values : (K+1, n) array, row j holds the value at theta_j = -r0 + j*dtheta
    r0     : positive delay horizon, r0 = K * dtheta
    """

    values: np.ndarray
    r0: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 1:
            raise ValueError(f"segment values must be (K+1, n) with K >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("segment values must be finite")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def dtheta(self) -> float:
        return self.r0 / self.K

    @property
    def thetas(self) -> np.ndarray:
        return -self.r0 + self.dtheta * np.arange(self.K + 1)

    def terminal(self) -> np.ndarray:
        """Value at theta = 0 (row K exactly, no interpolation)."""
        return self.values[-1]

    def at(self, theta: float) -> np.ndarray:
        """Evaluate by linear interpolation; exact at grid points."""
        if theta < -self.r0 - 1e-12 or theta > 1e-12:
            raise ValueError(f"theta {theta} outside [-r0, 0]")
        pos = (theta + self.r0) / self.dtheta
        j = int(np.clip(np.floor(pos), 0, self.K - 1))
        frac = pos - j
        if frac <= 0.0:
            return self.values[j]
        if frac >= 1.0:
            return self.values[j + 1]
        return (1.0 - frac) * self.values[j] + frac * self.values[j + 1]

    def shifted_append(self, x: np.ndarray) -> "Segment":
        """Window advanced by one grid step with new terminal value x."""
        x = np.asarray(x, dtype=float).reshape(1, self.n)
        return Segment(np.concatenate([self.values[1:], x]), self.r0)


class OrderKind(Enum):
    LEQ = "leq"
    LT = "lt"
    LL = "ll"
    LEQ_COMPENSATED = "leq_compensated"
    LT_COMPENSATED = "lt_compensated"


def constant_segment(c, K: int, r0: float, n: int | None = None) -> Segment:
    """Segment constant in theta; ``c`` is a scalar or an (n,) vector."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if n is not None and c.size == 1:
        c = np.full(n, c[0])
    return Segment(np.tile(c, (K + 1, 1)), r0)


def zero_segment(K: int, r0: float, n: int) -> Segment:
    return constant_segment(np.zeros(n), K, r0)


def ones_segment(K: int, r0: float, n: int) -> Segment:
    return constant_segment(np.ones(n), K, r0)


def _check_same_grid(a: Segment, b: Segment) -> None:
    if a.values.shape != b.values.shape or a.r0 != b.r0:
        raise GridMismatchError(
            f"grids differ: {a.values.shape}/r0={a.r0} vs {b.values.shape}/r0={b.r0}"
        )


def sup_norm(s: Segment) -> float:
    """Uniform norm: max over theta of the Euclidean norm of s(theta)."""
    return float(np.max(np.linalg.norm(s.values, axis=1)))


def comp_sup_norm(s: Segment) -> float:
    """Componentwise variant: max over components i of sup_theta |s^i(theta)|.

    This is the norm the neutral-term contraction checker measures against;
    ``sup_norm`` is the plain uniform norm.  They coincide for n = 1.
    """
    return float(np.max(np.abs(s.values)))


def compensated_state(seg: Segment, neutral) -> np.ndarray:
    """seg(0) - neutral(seg), as an (n,) vector."""
    return seg.terminal() - np.asarray(neutral.evaluate(seg), dtype=float)


def compensated_component(seg: Segment, neutral, i: int) -> float:
    return float(compensated_state(seg, neutral)[i])


def leq(a: Segment, b: Segment) -> bool:
    """Pointwise partial order: a(theta) <= b(theta) at every grid point."""
    _check_same_grid(a, b)
    return bool(np.all(a.values <= b.values))


def lt(a: Segment, b: Segment) -> bool:
    """leq and not equal."""
    return leq(a, b) and not np.array_equal(a.values, b.values)


def ll(a: Segment, b: Segment) -> bool:
    """Strict pointwise order at every grid point and component."""
    _check_same_grid(a, b)
    return bool(np.all(a.values < b.values))


def leq_compensated(a: Segment, b: Segment, neutral) -> bool:
    """Pointwise order plus order of the compensated states.

    True iff ``leq(a, b)`` and ``a(0) - neutral(a) <= b(0) - neutral(b)``
    componentwise.  Implies ``leq(a, b)`` by construction.
    """
    if not leq(a, b):
        return False
    return bool(np.all(compensated_state(a, neutral) <= compensated_state(b, neutral)))


def lt_compensated(a: Segment, b: Segment, neutral) -> bool:
    return leq_compensated(a, b, neutral) and not np.array_equal(a.values, b.values)


def compare(a: Segment, b: Segment, kind: OrderKind, neutral=None) -> bool:
    """Dispatch over :class:`OrderKind`; compensated kinds need ``neutral``."""
    if kind is OrderKind.LEQ:
        return leq(a, b)
    if kind is OrderKind.LT:
        return lt(a, b)
    if kind is OrderKind.LL:
        return ll(a, b)
    if neutral is None:
        raise ValueError("compensated order comparisons require a neutral term")
    if kind is OrderKind.LEQ_COMPENSATED:
        return leq_compensated(a, b, neutral)
    return lt_compensated(a, b, neutral)


def meet(a: Segment, b: Segment) -> Segment:
    """Componentwise pointwise minimum of two segments."""
    _check_same_grid(a, b)
    return Segment(np.minimum(a.values, b.values), a.r0)


def compensated_constant(neutral, i: int, r: float) -> float:
    """Compensated state of the constant segment r*e in component i.

    Returns ``r - neutral_i(r * e)`` with e the all-ones segment on the
    neutral term's grid.  For a neutral term with D(0) = 0 and contraction
    constant kappa this is >= r*(1-kappa) for r >= 0 and <= r*(1-kappa) for
    r <= 0, which supplies the bisection brackets below.
    """
    seg = constant_segment(float(r) * np.ones(neutral.n), neutral.K, neutral.r0)
    return float(r - np.asarray(neutral.evaluate(seg))[i])


def _bisect_increasing(f, lo: float, hi: float, tol: float, max_iter: int = 200) -> float:
    """Root of an increasing function with f(lo) <= 0 <= f(hi)."""
    flo, fhi = f(lo), f(hi)
    if flo > 0.0 or fhi < 0.0:
        raise BracketError(
            f"bisection bracket failed (f({lo})={flo}, f({hi})={fhi}); "
            "the neutral term violates monotonicity or its contraction constant"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def lower_companion(xi: Segment, eta: Segment, neutral, i: int, tol: float = 1e-12) -> Segment:
    """Common lower bound with a prescribed compensated coordinate.

    Given two segments whose i-th compensated coordinates agree (within
    ``tol``), returns ``zeta`` with ``zeta <= meet(xi, eta)`` exactly and the
    i-th compensated coordinate of ``zeta`` equal to the shared value, within
    ``tol``.  Taking the element with the smaller terminal value in component
    i as the anchor, either the meet already has the anchor's neutral-term
    coordinate (return the meet), or the meet is lowered by v*e where v > 0
    solves ``compensated_constant(neutral, i, v) = gap`` by bisection on the
    bracket [0, gap/(1-kappa)].

    Raises
    ------
    ValueError
        if the compensated coordinates differ by more than ``tol``.
    BracketError
        if the bracket fails, which signals a neutral term violating
        monotonicity or its declared contraction constant.
    """
    _check_same_grid(xi, eta)
    cx = compensated_component(xi, neutral, i)
    ce = compensated_component(eta, neutral, i)
    if abs(cx - ce) > tol:
        raise ValueError(
            f"compensated coordinates differ beyond tol: {cx} vs {ce} (component {i})"
        )
    # anchor on the element with the smaller terminal value in component i,
    # so meet(xi, eta)^i(0) equals the anchor's terminal value
    if eta.values[-1, i] < xi.values[-1, i]:
        xi, eta = eta, xi
    m = meet(xi, eta)
    gap = float(np.asarray(neutral.evaluate(xi))[i] - np.asarray(neutral.evaluate(m))[i])
    if gap <= tol:
        if gap < -tol:
            raise BracketError("neutral term is not monotone: D(meet) > D(anchor)")
        return m
    kappa = neutral.kappa
    hi = gap / (1.0 - kappa) * (1.0 + 1e-9) + 1e-15

    def f(v: float) -> float:
        seg = constant_segment(v * np.ones(m.n), m.K, m.r0)
        return float(v - np.asarray(neutral.evaluate(seg))[i]) - gap

    v = _bisect_increasing(f, 0.0, hi, tol)
    return Segment(m.values - v, m.r0)


def common_lower_constant(xi1: Segment, xi2: Segment, neutral) -> Segment:
    """Constant segment below both inputs in the compensated order.

    Returns ``a * e`` where ``a = min(alpha, min_i alpha_i)`` with
    ``alpha = -|min over grid and components of meet(xi1, xi2)|`` and
    ``alpha_i = -|min over the pair of the i-th compensated coordinates| / (1 - kappa)``.
    The result satisfies ``leq_compensated(out, xi1)`` and
    ``leq_compensated(out, xi2)``.
    """
    _check_same_grid(xi1, xi2)
    m = meet(xi1, xi2)
    alpha = -abs(float(np.min(m.values)))
    c1 = compensated_state(xi1, neutral)
    c2 = compensated_state(xi2, neutral)
    pair_min = np.minimum(c1, c2)
    # tiny relative inflation: the bound is exactly tight at the boundary,
    # and the output's compensated coordinate must not exceed it after rounding
    alphas = -np.abs(pair_min) * (1.0 + 1e-9) / (1.0 - neutral.kappa)
    a = min(alpha, float(np.min(alphas)))
    return constant_segment(a * np.ones(m.n), m.K, m.r0)


def shift_component_to_match(seg: Segment, neutral, i: int, target: float, tol: float = 1e-13) -> Segment:
    """Shift component i by a constant so its compensated coordinate hits ``target``.

    The map c -> (seg + c*e_i)^i(0) - neutral_i(seg + c*e_i) is strictly
    increasing with slope in [1-kappa, 1+kappa], so the root is bracketed by
    |f(0)| / (1-kappa) and found by bisection.
    """
    base = seg.values
    unit = np.zeros_like(base)
    unit[:, i] = 1.0

    def f(c: float) -> float:
        shifted = Segment(base + c * unit, seg.r0)
        return compensated_component(shifted, neutral, i) - target

    f0 = f(0.0)
    if abs(f0) <= tol:
        return seg
    bound = abs(f0) / (1.0 - neutral.kappa) * (1.0 + 1e-9) + 1e-15
    c = _bisect_increasing(f, -bound, bound, tol)
    return Segment(base + c * unit, seg.r0)


def segment_to_csv(seg: Segment, path, precision: int = 17) -> None:
    """Write one row per grid point with columns theta, x_1..x_n."""
    fmt = f"%.{precision}g"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta"] + [f"x_{k + 1}" for k in range(seg.n)])
        for theta, row in zip(seg.thetas, seg.values):
            writer.writerow([fmt % theta] + [fmt % v for v in row])


def segment_from_csv(path) -> Segment:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if not header or header[0] != "theta":
        raise ValueError(f"{path}: expected a 'theta' first column")
    arr = np.array([[float(v) for v in row] for row in data])
    thetas, values = arr[:, 0], arr[:, 1:]
    if len(thetas) < 2:
        raise ValueError(f"{path}: need at least two grid points")
    r0 = -thetas[0]
    spacings = np.diff(thetas)
    if not np.allclose(spacings, spacings[0], rtol=0, atol=1e-12) or abs(thetas[-1]) > 1e-12:
        raise ValueError(f"{path}: theta grid must be uniform and end at 0")
    return Segment(values, float(r0))
