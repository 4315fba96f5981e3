"""Monotonicity correctors: correct-by-learning, the oblivious mixture, and
the cdf-query water-filling corrector.

All three assume the unknown distribution on {1..n} is promised to be close
(in total variation) to some non-increasing distribution, and differ in what
access they need and how much closeness they demand:

* `learned_corrector_build` learns a flattened histogram and projects it onto
  the monotone cone; works for any promise, costs a full learning pass.
* `oblivious_correct` adds a fixed arithmetic staircase to the histogram so
  every possible violation is drowned; constant work per sample but only
  valid when the promise is O(eps'^3 / log^2 n).
* `waterfill_preprocess` / `waterfill_sample` use cdf queries to correct a
  two-level bucket decomposition on the fly, paying o(ell) queries per
  sample: local violations are projected exactly, boundary violations are
  repaired by pouring surplus into the left neighbour's valleys against a
  per-superbucket budget, and unused budget is returned by restarting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .birge import IntervalPartition, birge_partition, flatten_masses_to_pmf, interval_masses
from .dist_core import DistAccess, Pmf, dkw_sample_count
from .errors import (
    CapabilityError,
    InsufficientSamplesError,
    OutOfRegimeError,
    ParameterError,
    PromiseViolationError,
)
from .isotonic import WeightedHistogram, closest_monotone_histogram

_TOL = 1e-12


# ---------------------------------------------------------------------------
# Correct by learning


def learned_sample_count(eps: float, delta: float) -> int:
    """Draws used by the learning corrector: DKW at Kolmogorov budget eps/6."""
    return dkw_sample_count(eps / 6.0, delta)


@dataclass
class LearnedCorrection:
    pmf: Pmf
    partition: IntervalPartition
    draws: int
    projection_cost: float


def learned_corrector_build(
    access: DistAccess,
    eps: float,
    c: float = 1.0,
    delta: float = 0.1,
    exact: bool = False,
    budget: int | None = None,
) -> LearnedCorrection:
    """Learn the flattened histogram (alpha = c*eps/3), project it monotone.

    In exact mode the true pmf is flattened instead of sampling.  The output
    is always monotone; under the promise TV(D, monotone) <= eps it is
    (3+c)*eps-close to D.
    """
    if not (0 < eps < 1):
        raise ParameterError("eps must be in (0,1)")
    if c <= 0:
        raise ParameterError("c must be > 0")
    alpha = c * eps / 3.0
    part = birge_partition(access.n, alpha)
    if exact:
        if access.exact is None:
            raise CapabilityError("exact mode needs an exact pmf")
        masses = interval_masses(access.exact, part)
        draws = 0
    else:
        m = learned_sample_count(eps, delta)
        if budget is not None and m > budget:
            raise InsufficientSamplesError(m, budget)
        samples = access.draw_many(m)
        idx = np.searchsorted(part.bounds, samples)
        masses = np.bincount(idx, minlength=part.ell).astype(float) / m
        draws = m
    hist = WeightedHistogram(levels=masses / part.sizes, lengths=part.sizes.astype(float))
    proj, cost = closest_monotone_histogram(hist, total=1.0)
    out = Pmf.make(np.repeat(proj.levels, part.sizes), renormalize=True)
    return LearnedCorrection(pmf=out, partition=part, draws=draws, projection_cost=cost)


# ---------------------------------------------------------------------------
# Oblivious mixture corrector


@dataclass(frozen=True)
class ObliviousPlan:
    """Mixture plan: corrected mass of interval j is lam * (D(I_j) + additive_j).

    additive_j = eps * sum_{i >= j} (1 + |I_{i+1}|/|I_i|), which decreases
    strictly in j by at least (2+c_i)*eps, enough to drown any violation a
    distribution eps-close to monotone can exhibit.  lam normalizes the total
    back to 1 and is independent of the input, so the result is the mixture
    lam * D + (1 - lam) * P with P an explicit staircase.
    """

    eps: float
    sizes: np.ndarray
    additive: np.ndarray
    lam: float

    @property
    def k(self) -> int:
        return int(self.sizes.size)

    @property
    def c(self) -> float:
        r = self.sizes[1:] / self.sizes[:-1]
        return float(r.max() - 1.0) if r.size else 0.0


def build_oblivious_plan(sizes, eps: float) -> ObliviousPlan:
    s = np.asarray(sizes, dtype=float)
    if np.any(s < 1):
        raise ParameterError("interval sizes must be positive")
    if eps < 0:
        raise ParameterError("eps must be >= 0")
    ratios = s[1:] / s[:-1]
    if np.any(ratios < 1.0 - _TOL):
        raise ParameterError("interval sizes must be non-decreasing")
    # additive_j = eps * sum_{i=j}^{k-2} (1 + ratio_i), zero on the last interval
    tail = np.concatenate([np.cumsum((1.0 + ratios)[::-1])[::-1], [0.0]])
    additive = eps * tail
    total_add = float(additive.sum())
    if total_add >= 1.0:
        raise OutOfRegimeError(
            f"additive mass {total_add:.3g} >= 1: eps too large for this interval count"
        )
    lam = 1.0 / (1.0 + total_add)
    return ObliviousPlan(eps=eps, sizes=s, additive=additive, lam=lam)


def oblivious_correct(hist_masses, plan: ObliviousPlan, check_promise: bool = True) -> np.ndarray:
    """Corrected interval masses lam * (mass_j + additive_j).

    With `check_promise`, rejects inputs that provably were not eps-close to
    monotone: an eps-close histogram satisfies
    D(I_{j+1}) <= (1+c_j) D(I_j) + eps (2+c_j) for every j.
    """
    masses = np.asarray(hist_masses, dtype=float)
    if masses.size != plan.k:
        raise ParameterError("one mass per interval required")
    if check_promise and plan.k > 1:
        ratios = plan.sizes[1:] / plan.sizes[:-1]
        bound = ratios * masses[:-1] + plan.eps * (1.0 + ratios)
        bad = np.nonzero(masses[1:] > bound + 1e-9)[0]
        if bad.size:
            j = int(bad[0])
            raise PromiseViolationError(
                f"interval {j + 1} mass {masses[j + 1]:.4g} exceeds "
                f"{bound[j]:.4g}; input is not {plan.eps:.3g}-close to monotone"
            )
    out = plan.lam * (masses + plan.additive)
    return out


def oblivious_regime_eps(eps_prime: float, n: int) -> float:
    """Promise the oblivious corrector assumes: eps'^3 / (10 log2(n)^2)."""
    return eps_prime**3 / (10.0 * math.log2(max(n, 2)) ** 2)


def _oblivious_setup(n: int, eps_prime: float):
    if not (0 < eps_prime < 1):
        raise ParameterError("eps' must be in (0,1)")
    part = birge_partition(n, eps_prime / 2.0)
    plan = build_oblivious_plan(part.sizes, oblivious_regime_eps(eps_prime, n))
    return part, plan


def oblivious_corrected_pmf(d: Pmf, eps_prime: float) -> Pmf:
    """Exact-mode output of the oblivious corrector (Birgé alpha = eps'/2)."""
    part, plan = _oblivious_setup(d.n, eps_prime)
    masses = oblivious_correct(interval_masses(d, part), plan, check_promise=False)
    return flatten_masses_to_pmf(masses, part)


def oblivious_corrector_sample(
    access: DistAccess, n: int, eps_prime: float, rng: np.random.Generator, count: int = 1
) -> np.ndarray:
    """Sample-mode oblivious corrector; 0 or 1 input draw per output.

    With probability lam the output is a flattened input draw (draw, then
    resample uniformly inside its interval); otherwise it comes from the
    explicit staircase and costs no draw.
    """
    part, plan = _oblivious_setup(n, eps_prime)
    add_total = plan.additive.sum()
    stair = plan.additive / add_total if add_total > 0 else None
    lefts = np.concatenate([[1], part.bounds[:-1] + 1])
    out = np.empty(count, dtype=np.int64)
    for t in range(count):
        if stair is not None and rng.random() >= plan.lam:
            k = int(rng.choice(part.ell, p=stair))
        else:
            k = part.index_of(access.draw())
        out[t] = int(rng.integers(lefts[k], part.bounds[k] + 1))
    return out


# ---------------------------------------------------------------------------
# Water-filling corrector (CDF-SAMP access)


@dataclass
class SuperbucketLocal:
    """Locally corrected levels of one superbucket, all in pre-normalization
    mass units (the lam3 factor cancels in exact mode)."""

    levels: np.ndarray          # per-element level of each bucket, non-increasing
    bucket_sizes: np.ndarray
    mu: float                   # real average: mass / |S_j|
    queries: int

    @property
    def mass(self) -> float:
        return float(np.dot(self.levels, self.bucket_sizes))


@dataclass
class BoundaryRecord:
    """Outcome of water-boundary-correction between S_{j-1} and S_j."""

    j: int
    nu: float                   # final water level at the boundary
    eps_unused: float           # unused budget, in [0, b_j]
    front_fill: float           # mass moved to the first bucket of the domain
    budget_used: float
    fill_amounts: np.ndarray    # mass added per bucket of S_{j-1}
    prev_levels: np.ndarray     # S_{j-1} levels after the fill
    cur_levels: np.ndarray      # S_j levels after the shave
    weights: np.ndarray         # lam3-scaled output weights on T = L_{j-1} u S_j


@dataclass
class WaterfillState:
    """Superbucket state for the cdf-query corrector; single-threaded.

    Deterministic function of (D, n, eps, m): two states built with different
    seeds materialize the identical corrected distribution.
    """

    access: DistAccess
    n: int
    eps: float
    m: int
    part: IntervalPartition
    sb_start: np.ndarray        # first bucket index of each superbucket
    sb_end: np.ndarray          # one-past-last bucket index
    sb_sizes: np.ndarray        # element counts
    K: int
    L: int
    d1_sb: np.ndarray
    d2_sb: np.ndarray
    budgets: np.ndarray
    lam3: float
    m3: np.ndarray              # budget-inclusive averages, non-increasing
    local: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=dict)
    emitted: int = 0
    restarts: int = 0

    @property
    def queries_used(self) -> int:
        return self.access.cdf_queries

    def bucket_bounds(self, b: int) -> tuple[int, int]:
        return self.part.left(b), self.part.right(b)


def waterfill_parameters(n: int, eps: float, m: int) -> tuple[int, int, int]:
    """(ell, K, L) for the two-level decomposition, K ~ sqrt(m * ell)."""
    ell = birge_partition(n, eps).ell
    k_target = max(1, math.ceil(math.sqrt(m * ell)))
    L = max(1, math.ceil(ell / k_target))
    K = math.ceil(ell / L)
    return ell, K, L


def waterfill_preprocess(access: DistAccess, n: int, eps: float, m: int) -> WaterfillState:
    """Learn and correct the coarse superbucket distribution with K queries.

    Builds the flattening implicitly, reweights superbucket masses to make
    their averages non-increasing (conditionals unchanged), and allocates the
    budget b_j = D2(S_j)/(1+eps) each superbucket may pour into its left
    neighbour, normalized by lam3 = 1/(1 + sum b_j).
    """
    if not access.has_ceval:
        raise CapabilityError("waterfill corrector needs cdf-query access")
    if not (0 < eps <= 1):
        raise ParameterError("eps must be in (0,1]")
    if m < 1:
        raise ParameterError("m must be >= 1")
    part = birge_partition(n, eps)
    ell, K, L = waterfill_parameters(n, eps, m)
    sb_start = np.arange(K) * L
    sb_end = np.minimum(sb_start + L, ell)
    sb_end[-1] = ell  # remainder buckets join the last superbucket
    right = part.bounds[sb_end - 1]
    cdf = np.array([access.ceval(int(r)) for r in right])
    d1_sb = np.diff(cdf, prepend=0.0)
    sb_sizes = np.diff(np.concatenate([[0], right]))

    hist = WeightedHistogram(levels=d1_sb / sb_sizes, lengths=sb_sizes.astype(float))
    proj, _ = closest_monotone_histogram(hist, total=1.0)
    d2_sb = proj.levels * sb_sizes
    budgets = d2_sb / (1.0 + eps)
    lam3 = 1.0 / (1.0 + budgets.sum())
    m3 = lam3 * (d2_sb + budgets) / sb_sizes
    return WaterfillState(
        access=access, n=n, eps=eps, m=m, part=part,
        sb_start=sb_start, sb_end=sb_end, sb_sizes=sb_sizes, K=K, L=L,
        d1_sb=d1_sb, d2_sb=d2_sb, budgets=budgets, lam3=lam3, m3=m3,
    )


def _ensure_local(state: WaterfillState, j: int) -> SuperbucketLocal:
    """Bucket masses of S_j via cdf queries (cached), locally made monotone."""
    if j in state.local:
        return state.local[j]
    lo_b, hi_b = int(state.sb_start[j]), int(state.sb_end[j])
    before = state.access.cdf_queries
    left_cdf = state.access.ceval(int(state.part.bounds[lo_b - 1])) if lo_b > 0 else 0.0
    # interior bucket endpoints; the superbucket's own right endpoint was
    # already queried during preprocessing, so reuse the known total instead
    cuts = [left_cdf]
    for b in range(lo_b, hi_b - 1):
        cuts.append(state.access.ceval(int(state.part.bounds[b])))
    cuts.append(left_cdf + state.d1_sb[j])
    d1_buckets = np.diff(np.array(cuts))
    bucket_sizes = state.part.sizes[lo_b:hi_b].astype(float)
    if state.d1_sb[j] > 0:
        d2_buckets = d1_buckets * (state.d2_sb[j] / state.d1_sb[j])
    else:
        d2_buckets = np.full(d1_buckets.size, state.d2_sb[j] / d1_buckets.size)
    total = float(state.d2_sb[j])
    if total > 0:
        hist = WeightedHistogram(levels=np.clip(d2_buckets, 0, None) / bucket_sizes,
                                 lengths=bucket_sizes)
        proj, _ = closest_monotone_histogram(hist, total=total)
        levels = proj.levels
    else:
        levels = np.zeros(d1_buckets.size)
    loc = SuperbucketLocal(
        levels=levels, bucket_sizes=bucket_sizes,
        mu=total / float(state.sb_sizes[j]),
        queries=state.access.cdf_queries - before,
    )
    state.local[j] = loc
    return loc


def _shave_fn(levels, sizes):
    def r(nu):
        return float(np.dot(np.clip(levels - nu, 0.0, None), sizes))
    return r


def _fill_fn(levels, sizes):
    def f(nu):
        return float(np.dot(np.clip(nu - levels, 0.0, None), sizes))
    return f


def water_boundary_correction(state: WaterfillState, j: int) -> BoundaryRecord:
    """Repair the boundary between S_{j-1} and S_j in closed form.

    The infinitesimal pouring of the water-fill procedure reduces to finding
    one level nu: S_j's levels above nu are shaved down to it and S_{j-1}'s
    levels below are raised to it.  nu is capped below by S_j's own average
    (past that the superbucket is dry and only budget mass may keep filling)
    and above by S_{j-1}'s average (past that the valleys are full and the
    remaining surplus is front-filled to the first bucket of the domain).
    Returns the redistribution record satisfying
    lam3 * eps_unused + front_fill + sum(weights) = D3(S_j).
    """
    if not (1 <= j <= state.K - 1):
        raise ParameterError("boundary index must name a superbucket with a left neighbour")
    if j in state.boundary:
        return state.boundary[j]
    prev = _ensure_local(state, j - 1)
    cur = _ensure_local(state, j)
    b_j = float(state.budgets[j])
    lo = cur.mu
    cap = prev.mu
    if lo > cap + 1e-12:
        raise PromiseViolationError("superbucket averages increased; promise violated")
    shave = _shave_fn(cur.levels, cur.bucket_sizes)
    fill = _fill_fn(prev.levels, prev.bucket_sizes)
    max_cur = float(cur.levels.max()) if cur.levels.size else 0.0
    min_prev = float(prev.levels.min()) if prev.levels.size else 0.0

    used = 0.0
    front = 0.0
    if max_cur <= min_prev + _TOL:
        nu = min_prev  # boundary already monotone: nothing moves
    else:
        hi = min(cap, max_cur)
        if shave(lo) - fill(lo) < 0:
            # S_j runs dry before the valleys reach its level: top up from the
            # budget until min_prev == max_cur == lo.
            nu = lo
            used = fill(lo) - shave(lo)
            if used > b_j + 1e-9:
                raise PromiseViolationError(
                    f"boundary {j}: fill needs {used:.4g} > budget {b_j:.4g}"
                )
            used = min(used, b_j)
        elif shave(hi) - fill(hi) > 0:
            # valleys full at S_{j-1}'s average; shave the rest to the front
            nu = hi
            front = shave(hi) - fill(hi)
        else:
            nu = _crossing_level(cur, prev, lo, hi)
    new_prev = np.maximum(prev.levels, nu)
    new_cur = np.minimum(cur.levels, nu)
    fill_amounts = (new_prev - prev.levels) * prev.bucket_sizes
    weights = state.lam3 * np.concatenate([fill_amounts, new_cur * cur.bucket_sizes])
    rec = BoundaryRecord(
        j=j, nu=nu, eps_unused=b_j - used, front_fill=front, budget_used=used,
        fill_amounts=fill_amounts, prev_levels=new_prev, cur_levels=new_cur,
        weights=weights,
    )
    state.boundary[j] = rec
    return rec


def _crossing_level(cur: SuperbucketLocal, prev: SuperbucketLocal, lo: float, hi: float) -> float:
    """Level where shaved surplus equals filled deficit; piecewise linear scan."""
    shave = _shave_fn(cur.levels, cur.bucket_sizes)
    fill = _fill_fn(prev.levels, prev.bucket_sizes)
    pts = np.unique(np.concatenate([[lo, hi], cur.levels, prev.levels]))
    pts = pts[(pts >= lo - _TOL) & (pts <= hi + _TOL)]
    g = np.array([shave(p) - fill(p) for p in pts])
    idx = int(np.searchsorted(-g, 0.0, side="left"))  # g is non-increasing
    if idx == 0:
        return float(pts[0])
    if idx >= pts.size:
        return float(pts[-1])
    a, b = pts[idx - 1], pts[idx]
    ga, gb = g[idx - 1], g[idx]
    if abs(ga - gb) < _TOL:
        return float(b)
    return float(a + (b - a) * ga / (ga - gb))


def waterfill_sample(state: WaterfillState, rng: np.random.Generator) -> int:
    """One sample from the corrected distribution; lazy queries, cached.

    Draws a superbucket by its budget-inclusive mass, resolves its left
    boundary, then restarts with the unused-budget probability, emits from
    the front bucket with the front-fill probability, or emits from the
    redistributed conditional on L_{j-1} u S_j.
    """
    if state.emitted >= state.m:
        raise ParameterError(f"batch of {state.m} samples exhausted")
    probs = state.lam3 * (state.d2_sb + state.budgets)
    probs = probs / probs.sum()
    while True:
        j = int(rng.choice(state.K, p=probs))
        d3_j = state.lam3 * (state.d2_sb[j] + state.budgets[j])
        if j == 0:
            # first superbucket: correct locally only; its budget is unused
            if rng.random() < state.lam3 * state.budgets[0] / d3_j:
                state.restarts += 1
                continue
            loc = _ensure_local(state, 0)
            masses = loc.levels * loc.bucket_sizes
            b = int(rng.choice(masses.size, p=masses / masses.sum()))
            out = _uniform_in_bucket(state, int(state.sb_start[0]) + b, rng)
            break
        rec = water_boundary_correction(state, j)
        r = rng.random()
        p_restart = state.lam3 * rec.eps_unused / d3_j
        q_front = state.lam3 * rec.front_fill / d3_j
        if r < p_restart:
            state.restarts += 1
            continue
        if r < p_restart + q_front:
            out = _uniform_in_bucket(state, 0, rng)
            break
        w = rec.weights / rec.weights.sum()
        t = int(rng.choice(w.size, p=w))
        nprev = rec.fill_amounts.size
        if t < nprev:
            bucket = int(state.sb_start[j - 1]) + t
        else:
            bucket = int(state.sb_start[j]) + (t - nprev)
        out = _uniform_in_bucket(state, bucket, rng)
        break
    state.emitted += 1
    return out


def _uniform_in_bucket(state: WaterfillState, bucket: int, rng: np.random.Generator) -> int:
    lo, hi = state.bucket_bounds(bucket)
    return int(rng.integers(lo, hi + 1))


def waterfill_exact_pmf(state: WaterfillState) -> Pmf:
    """Materialize the corrected distribution by resolving every boundary.

    Elementwise: clip each superbucket's locally corrected levels to the
    shave level of its own boundary and the fill level poured in by its right
    neighbour, add the front-filled mass to the first bucket, and renormalize
    by one plus the total budget actually used.
    """
    for j in range(state.K):
        _ensure_local(state, j)
    for j in range(1, state.K):
        water_boundary_correction(state, j)
    out = np.empty(state.n)
    front_extra = sum(rec.front_fill for rec in state.boundary.values())
    for j in range(state.K):
        local = state.local[j].levels
        # each element is touched by at most one of: the shave of boundary j,
        # the fill of boundary j+1 (shave floors never drop below the fill caps)
        shaved = state.boundary[j].cur_levels if j in state.boundary else local
        filled = state.boundary[j + 1].prev_levels if j + 1 in state.boundary else local
        levels = np.where(shaved < local - _TOL, shaved, filled)
        for t, b in enumerate(range(int(state.sb_start[j]), int(state.sb_end[j]))):
            lo, hi = state.bucket_bounds(b)
            out[lo - 1 : hi] = levels[t]
    lo, hi = state.bucket_bounds(0)
    out[lo - 1 : hi] += front_extra / (hi - lo + 1)
    return Pmf.make(out, renormalize=True)
