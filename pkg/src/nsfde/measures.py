"""Empirical measures on segment space.

An :class:`Ensemble` is N equally weighted segments on a shared grid, stored
as one (N, K+1, n) array.  The Wasserstein-2 distance uses the segment
uniform norm as ground metric and is computed exactly by min-cost assignment;
``w2_bruteforce`` is the independent permutation-enumeration oracle.  The
stochastic order check is the finite analogue of a coupling supported on
ordered pairs: a perfect matching in the bipartite graph of ordered members.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .segments import Segment, compensated_state

__all__ = [
    "Ensemble",
    "second_moment",
    "w2",
    "w2_bruteforce",
    "stochastically_leq",
    "ensemble_to_csv",
    "ensemble_from_csv",
]


@dataclass(frozen=True)
class Ensemble:
    """N equally weighted segments: values (N, K+1, n), delay horizon r0."""

    values: np.ndarray
    r0: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] < 1 or v.shape[1] < 2:
            raise ValueError(f"ensemble values must be (N, K+1, n), got {v.shape}")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1] - 1

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def member(self, k: int) -> Segment:
        return Segment(self.values[k], self.r0)

    def members(self):
        return [self.member(k) for k in range(self.N)]

    @classmethod
    def from_segments(cls, segments) -> "Ensemble":
        segments = list(segments)
        r0 = segments[0].r0
        return cls(np.stack([s.values for s in segments]), r0)

    @classmethod
    def replicate(cls, seg: Segment, N: int) -> "Ensemble":
        return cls(np.tile(seg.values, (N, 1, 1)), seg.r0)

    def shifted(self, amounts) -> "Ensemble":
        """Members shifted by constant-in-theta vectors, one per member.

        ``amounts`` is (N,) for a common shift of all components or (N, n).
        """
        a = np.asarray(amounts, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        return Ensemble(self.values + a[:, None, :], self.r0)

    def terminal_mean(self) -> np.ndarray:
        """Mean over members of the value at theta = 0."""
        return self.values[:, -1, :].mean(axis=0)


def _check_compatible(mu: Ensemble, nu: Ensemble) -> None:
    if mu.values.shape[1:] != nu.values.shape[1:] or mu.r0 != nu.r0:
        raise ValueError("ensembles live on different grids")
    if mu.N != nu.N:
        raise ValueError(f"equal member counts required, got {mu.N} and {nu.N}")


def _sup_dist_matrix(mu: Ensemble, nu: Ensemble) -> np.ndarray:
    """(N, N) matrix of pairwise segment uniform-norm distances."""
    out = np.empty((mu.N, nu.N))
    for i in range(mu.N):
        diff = mu.values[i][None, :, :] - nu.values
        out[i] = np.sqrt((diff**2).sum(axis=2)).max(axis=1)
    return out


def second_moment(mu: Ensemble) -> float:
    """Mean over members of the squared uniform norm."""
    norms = np.sqrt((mu.values**2).sum(axis=2)).max(axis=1)
    return float((norms**2).mean())


def w2(mu: Ensemble, nu: Ensemble) -> float:
    """Exact Wasserstein-2 distance between equal-size empirical measures.

    Ground cost is the squared segment uniform norm; the optimal coupling is
    a min-cost perfect matching found by the assignment solver.  The matched
    costs are summed in sorted order so the result is exactly symmetric.
    """
    _check_compatible(mu, nu)
    cost = _sup_dist_matrix(mu, nu) ** 2
    rows, cols = linear_sum_assignment(cost)
    total = float(np.sort(cost[rows, cols]).sum())
    return float(np.sqrt(total / mu.N))


def w2_bruteforce(mu: Ensemble, nu: Ensemble) -> float:
    """Exhaustive assignment minimum; the test oracle for :func:`w2`.

    Enumerates all N! pairings, so N <= 8 is enforced.
    """
    _check_compatible(mu, nu)
    if mu.N > 8:
        raise ValueError(f"brute force limited to N <= 8, got {mu.N}")
    cost = _sup_dist_matrix(mu, nu) ** 2
    idx = np.arange(mu.N)
    best = min(float(cost[idx, list(perm)].sum()) for perm in itertools.permutations(range(mu.N)))
    return float(np.sqrt(best / mu.N))


def stochastically_leq(mu: Ensemble, nu: Ensemble, neutral):
    """Empirical stochastic order in the compensated sense.

    True iff there is a perfect matching in the bipartite graph with an edge
    (i, j) whenever member i of ``mu`` is below member j of ``nu`` in the
    compensated order; this is the finite-sample version of a coupling
    supported on ordered pairs.  Returns ``(ordered, matching)`` where
    ``matching[i] = j`` is a witness permutation, or ``(False, None)``.
    """
    _check_compatible(mu, nu)
    pointwise = np.all(
        mu.values[:, None, :, :] <= nu.values[None, :, :, :], axis=(2, 3)
    )
    comp_mu = np.stack([compensated_state(mu.member(k), neutral) for k in range(mu.N)])
    comp_nu = np.stack([compensated_state(nu.member(k), neutral) for k in range(nu.N)])
    comp_ok = np.all(comp_mu[:, None, :] <= comp_nu[None, :, :], axis=2)
    adjacency = pointwise & comp_ok
    if not adjacency.any(axis=1).all():
        return False, None
    match = maximum_bipartite_matching(csr_matrix(adjacency), perm_type="column")
    if np.any(match < 0):
        return False, None
    return True, np.asarray(match, dtype=int)


def ensemble_to_csv(mu: Ensemble, path, precision: int = 17) -> None:
    """Columns: member, theta, x_1..x_n; one row per member and grid point."""
    fmt = f"%.{precision}g"
    thetas = -mu.r0 + (mu.r0 / mu.K) * np.arange(mu.K + 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["member", "theta"] + [f"x_{k + 1}" for k in range(mu.n)])
        for k in range(mu.N):
            for theta, row in zip(thetas, mu.values[k]):
                writer.writerow([k, fmt % theta] + [fmt % v for v in row])


def ensemble_from_csv(path) -> Ensemble:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if header[:2] != ["member", "theta"]:
        raise ValueError(f"{path}: expected 'member,theta,...' header")
    members = [int(row[0]) for row in data]
    arr = np.array([[float(v) for v in row[1:]] for row in data])
    N = max(members) + 1
    rows_per = len(data) // N
    if rows_per * N != len(data):
        raise ValueError(f"{path}: ragged member blocks")
    thetas = arr[:rows_per, 0]
    r0 = -thetas[0]
    if abs(thetas[-1]) > 1e-12 or r0 <= 0:
        raise ValueError(f"{path}: theta grid must span [-r0, 0]")
    values = arr[:, 1:].reshape(N, rows_per, -1)
    return Ensemble(values, float(r0))
