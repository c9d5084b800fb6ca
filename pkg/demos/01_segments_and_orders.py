#!/usr/bin/env python3
"""Segments, norms, partial orders, and the lower-bound constructions.

A segment is the recent past of a path: a function on [-r0, 0] stored on a
uniform grid. The comparison machinery revolves around two orders: the
pointwise order, and the compensated order that additionally compares
x(0) - D(x) where D is the neutral term.
"""

import numpy as np

from nsfde import (
    LinearLagNeutral,
    Segment,
    common_lower_constant,
    compensated_component,
    compensated_state,
    constant_segment,
    leq,
    leq_compensated,
    lower_companion,
    meet,
    sup_norm,
)

K, R0 = 8, 1.0

print("=== segments and norms ===")
ramp = Segment(np.linspace(-1.0, 2.0, K + 1)[:, None], R0)
print(f"ramp from -1 to 2 on [-{R0}, 0]:")
print(f"  value at theta=0     : {ramp.terminal()[0]:+.3f}")
print(f"  value at theta=-0.44 : {ramp.at(-0.44)[0]:+.3f}  (linear interpolation)")
print(f"  uniform norm         : {sup_norm(ramp):.3f}")

print()
print("=== the compensated order is strictly finer than the pointwise order ===")
D = LinearLagNeutral(0.5, K, R0)  # D(x) = 0.5 * x(-r0), contraction constant 0.5
flat = constant_segment(0.0, K, R0, 1)
dipper = Segment(np.linspace(2.0, 0.5, K + 1)[:, None], R0)
print(f"flat = 0 everywhere; dipper falls from 2 to 0.5")
print(f"  flat <= dipper pointwise      : {leq(flat, dipper)}")
print(f"  compensated state of flat     : {compensated_state(flat, D)[0]:+.3f}")
print(f"  compensated state of dipper   : {compensated_state(dipper, D)[0]:+.3f}")
print(f"  flat <= dipper compensated    : {leq_compensated(flat, dipper, D)}")
print("  the dipper's large lagged value drags its compensated state below zero")

print()
print("=== lower companion: a common lower bound with a prescribed coordinate ===")
# two segments sharing the compensated coordinate 0.5
xi = constant_segment(1.0, K, R0, 1)
eta = Segment(np.linspace(0.0, 0.5, K + 1)[:, None], R0)
print(f"xi = 1 (constant), eta ramps 0 -> 0.5; both have coordinate "
      f"{compensated_component(xi, D, 0):.2f}")
zeta = lower_companion(xi, eta, D, 0)
print(f"  zeta <= meet(xi, eta)         : {leq(zeta, meet(xi, eta))}")
print(f"  zeta's compensated coordinate : {compensated_component(zeta, D, 0):+.6f}")

print()
print("=== common lower constant: below both inputs in the compensated order ===")
rng = np.random.default_rng(1)
a = Segment(rng.normal(size=(K + 1, 1)), R0)
b = Segment(rng.normal(size=(K + 1, 1)), R0)
low = common_lower_constant(a, b, D)
print(f"constant level {low.terminal()[0]:+.4f}")
print(f"  below a (compensated): {leq_compensated(low, a, D)}")
print(f"  below b (compensated): {leq_compensated(low, b, D)}")
