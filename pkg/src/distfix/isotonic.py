"""Exact L1 projection onto non-increasing histograms.

Solves   minimize   sum_j |x_j - a_j| * w_j
         subject to x_1 >= x_2 >= ... >= x_l >= 0,  sum_j x_j w_j = total

where a_j is the input level of interval j and w_j its length.  This is both
the projection step of the learning-based monotonicity corrector and the
brute-force oracle behind every distance-to-monotone claim in the test suite,
so exactness matters more than asymptotics; instances are small.

Ties between optimal projections are broken toward the lexicographically
largest level sequence when `canonical=True` (sequential maximization); the
default path returns the deterministic optimum of the LP solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .dist_core import Pmf
from .errors import ParameterError

ORACLE_MAX_N = 10_000
_LEX_MAX_ELL = 32


@dataclass(frozen=True)
class WeightedHistogram:
    """Piecewise-constant function: level x_j on an interval of length w_j."""

    levels: np.ndarray
    lengths: np.ndarray

    @staticmethod
    def make(levels, lengths) -> "WeightedHistogram":
        x = np.asarray(levels, dtype=float)
        w = np.asarray(lengths, dtype=float)
        if x.size != w.size or x.size == 0:
            raise ParameterError("levels and lengths must match and be non-empty")
        if np.any(w <= 0):
            raise ParameterError("lengths must be positive")
        if np.any(x < 0):
            raise ParameterError("levels must be non-negative")
        return WeightedHistogram(levels=x, lengths=w)

    @property
    def total(self) -> float:
        return float(np.dot(self.levels, self.lengths))


def _lp_arrays(a: np.ndarray, w: np.ndarray, total: float):
    l = a.size
    c = np.concatenate([np.zeros(l), w])
    eye = sparse.identity(l, format="csr")
    rows = [sparse.hstack([eye, -eye]), sparse.hstack([-eye, -eye])]
    rhs = [a, -a]
    if l > 1:
        mono = sparse.diags(
            [np.ones(l - 1), -np.ones(l - 1)], offsets=[1, 0], shape=(l - 1, l), format="csr"
        )
        rows.append(sparse.hstack([mono, sparse.csr_matrix((l - 1, l))]))
        rhs.append(np.zeros(l - 1))
    a_ub = sparse.vstack(rows, format="csr")
    b_ub = np.concatenate(rhs)
    a_eq = sparse.hstack([sparse.csr_matrix(w[None, :]), sparse.csr_matrix((1, l))])
    b_eq = np.array([total])
    bounds = [(0.0, 1.0)] * l + [(0.0, None)] * l
    return c, a_ub, b_ub, a_eq, b_eq, bounds


def _solve_lp(a: np.ndarray, w: np.ndarray, total: float):
    c, a_ub, b_ub, a_eq, b_eq, bounds = _lp_arrays(a, w, total)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise ParameterError(f"isotonic LP failed: {res.message}")
    l = a.size
    x = np.minimum.accumulate(np.clip(res.x[:l], 0.0, None))
    return x, float(np.dot(w, np.abs(x - a)))


def _solve_two(a: np.ndarray, w: np.ndarray, total: float):
    # One free variable after the mass constraint; the objective is convex
    # piecewise-linear in x2, so the optimum sits at a kink or an endpoint.
    w1, w2 = w
    a1, a2 = a
    hi = total / (w1 + w2)
    cands = {0.0, hi}
    if 0.0 <= a2 <= hi:
        cands.add(a2)
    x2_at_kink1 = (total - w1 * a1) / w2
    if 0.0 <= x2_at_kink1 <= hi:
        cands.add(x2_at_kink1)
    best = None
    for x2 in cands:
        x1 = (total - w2 * x2) / w1
        cost = w1 * abs(x1 - a1) + w2 * abs(x2 - a2)
        key = (cost, -x1)  # prefer the lexicographically larger sequence on ties
        if best is None or key < best[0]:
            best = (key, np.array([x1, x2]), cost)
    return best[1], best[2]


def _solve(a: np.ndarray, w: np.ndarray, total: float):
    if a.size == 1:
        x = np.array([total / w[0]])
        return x, float(w[0] * abs(x[0] - a[0]))
    if a.size == 2:
        return _solve_two(a, w, total)
    return _solve_lp(a, w, total)


def closest_monotone_histogram(
    h: WeightedHistogram, total: float | None = None, canonical: bool = False
) -> tuple[WeightedHistogram, float]:
    """L1-closest non-increasing histogram with the prescribed total mass.

    Returns (projection, cost) where cost is the length-weighted L1 value of
    the objective (twice the total variation distance when the histograms are
    distributions).
    """
    if total is None:
        total = h.total
    if total <= 0:
        raise ParameterError("cannot normalize an all-zero histogram")
    x, cost = _solve(h.levels, h.lengths, total)
    if canonical:
        x, cost = _lex_canonicalize(h.levels, h.lengths, total, cost)
    return WeightedHistogram(levels=x, lengths=h.lengths.copy()), cost


def _lex_canonicalize(a: np.ndarray, w: np.ndarray, total: float, opt_cost: float):
    """Among optimal projections, pick the lexicographically largest one."""
    l = a.size
    if l > _LEX_MAX_ELL:
        raise ParameterError(f"canonical tie-break supported only for ell <= {_LEX_MAX_ELL}")
    c, a_ub, b_ub, a_eq, b_eq, bounds = _lp_arrays(a, w, total)
    # cost row: sum w_j u_j <= opt_cost (+ slack for solver tolerance)
    cost_row = sparse.hstack([sparse.csr_matrix((1, l)), sparse.csr_matrix(w[None, :])])
    a_ub = sparse.vstack([a_ub, cost_row], format="csr")
    b_ub = np.concatenate([b_ub, [opt_cost + 1e-11]])
    fixed_rows, fixed_vals = [], []
    x = np.zeros(l)
    for j in range(l):
        obj = np.zeros(2 * l)
        obj[j] = -1.0
        if fixed_rows:
            extra = sparse.csr_matrix(
                (np.ones(len(fixed_rows)), (range(len(fixed_rows)), fixed_rows)),
                shape=(len(fixed_rows), 2 * l),
            )
            res = linprog(
                obj, A_ub=a_ub, b_ub=b_ub,
                A_eq=sparse.vstack([a_eq, extra], format="csr"),
                b_eq=np.concatenate([b_eq, fixed_vals]),
                bounds=bounds, method="highs",
            )
        else:
            res = linprog(obj, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                          bounds=bounds, method="highs")
        if res.status != 0:
            raise ParameterError(f"lex pass failed at {j}: {res.message}")
        x[j] = res.x[j]
        fixed_rows.append(j)
        fixed_vals.append(x[j])
    x = np.minimum.accumulate(np.clip(x, 0.0, None))
    return x, float(np.dot(w, np.abs(x - a)))


def distance_to_monotone_exact(d: Pmf) -> float:
    """min over monotone distributions M of TV(d, M); test-scale oracle."""
    if d.n > ORACLE_MAX_N:
        raise ParameterError(f"oracle restricted to n <= {ORACLE_MAX_N}")
    if d.n == 1:
        return 0.0
    if d.is_monotone(tol=0.0):
        return 0.0
    _, cost = closest_monotone_histogram(
        WeightedHistogram(levels=d.p, lengths=np.ones(d.n)), total=1.0
    )
    return 0.5 * cost


def closest_monotone_pmf(d: Pmf) -> tuple[Pmf, float]:
    """Materialized argmin of distance_to_monotone_exact, with its distance."""
    if d.n > ORACLE_MAX_N:
        raise ParameterError(f"oracle restricted to n <= {ORACLE_MAX_N}")
    proj, cost = closest_monotone_histogram(
        WeightedHistogram(levels=d.p, lengths=np.ones(d.n)), total=1.0
    )
    return Pmf.make(proj.levels, renormalize=True), 0.5 * cost
