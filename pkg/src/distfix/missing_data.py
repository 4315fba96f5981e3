"""The missing-data error model: an interval [i,j] of a monotone distribution
loses all its mass, which the sampling process silently renormalizes away.

The improver does not relearn the whole distribution.  It locates the gap
with a big-element scan plus prefix monotonicity tests, estimates how much
weight belongs in the gap from the window right after it, and then fixes
samples on the fly: tail mass is recycled into the gap and the window after
the gap is uniformized, leaving everything else untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dist_core import DistAccess, Pmf, dkw_sample_count, empirical_pmf
from .errors import (
    CapabilityError,
    OverlapError,
    ParameterError,
    PromiseViolationError,
)
from .isotonic import distance_to_monotone_exact

# sample-mode prefix testing does a quadratic window scan
_SAMPLE_MODE_MAX_N = 4096

CLOSE = "close"
GAP = "gap"


@dataclass
class MissingDataReport:
    """Outcome of the preprocessing stage.

    kind is "gap" or "close"; for a gap, [a, b] covers the deleted interval,
    gamma estimates the weight of the window J = [b+1, 2b-a+1] right after
    it, c is the tail cut point and gamma_prime estimates D'([c, n]).
    """

    kind: str
    a: int = 0
    b: int = 0
    gamma: float = 0.0
    gamma_prime: float = 0.0
    c: int = 0

    @property
    def is_gap(self) -> bool:
        return self.kind == GAP

    def window_j(self, n: int) -> tuple[int, int]:
        return self.b + 1, min(2 * self.b - self.a + 1, n)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind, "a": self.a, "b": self.b,
            "gamma": self.gamma, "gamma_prime": self.gamma_prime, "c": self.c,
        }


def inject_missing(d: Pmf, i: int, j: int) -> tuple[Pmf, float]:
    """Delete all mass on [i, j] and renormalize, as rejection sampling would.

    Returns the faulty distribution and the deleted weight w = D([i,j]).
    """
    if not (1 <= i <= j <= d.n):
        raise ParameterError(f"need 1 <= i <= j <= {d.n}")
    w = d.mass(i, j)
    if w >= 1.0 - 1e-12:
        raise ParameterError("cannot delete the entire support")
    p = d.p.copy()
    p[i - 1 : j] = 0.0
    return Pmf.make(p / (1.0 - w), renormalize=True), w


# ---------------------------------------------------------------------------
# Stage (i): locating the gap


def _pmf_estimate(access: DistAccess, tol: float, delta: float, exact: bool):
    if exact:
        if access.exact is None:
            raise CapabilityError("exact mode needs an exact pmf")
        return access.exact, 0
    m = dkw_sample_count(tol, delta)
    return empirical_pmf(access.draw_many(m), access.n), m


def _conditional_dist_to_monotone(d: Pmf, hi: int) -> float:
    """Distance to monotone of d conditioned on the prefix [1..hi]."""
    mass = d.mass(1, hi)
    if mass <= 0:
        return 0.0
    cond = Pmf.make(d.p[:hi] / mass, renormalize=True)
    return distance_to_monotone_exact(cond)


def _window_statistic(cdf: np.ndarray) -> float:
    """Max over adjacent equal-length windows of (later - earlier) mass / 2.

    A monotone distribution never has a later window outheavier than the
    adjacent earlier one of the same length, and moving mass to fix such a
    violation costs at least half the excess, so this lower-bounds the
    distance to monotonicity.
    """
    p = cdf.size
    best = 0.0
    full = np.concatenate([[0.0], cdf])
    for length in range(1, p // 2 + 1):
        w_end = full[2 * length :] - full[length:-length]
        w_start = full[length:-length] - full[: -2 * length]
        diff = w_end - w_start
        m = float(diff.max()) if diff.size else 0.0
        if m > best:
            best = m
    return best / 2.0


def _prefix_rejects_exact(dhat: Pmf, hi: int, alpha: float) -> bool:
    return _conditional_dist_to_monotone(dhat, hi) > alpha**2 / 8.0


def _prefix_rejects_sampled(
    access: DistAccess, hi: int, prefix_mass: float, alpha: float, delta: float
) -> bool:
    """Rejection-sample the conditional on [1..hi], test via the window stat."""
    tol = alpha**2 / 24.0
    need = dkw_sample_count(tol, delta)
    hits = np.empty(0, dtype=np.int64)
    for _ in range(64):
        batch = access.draw_many(int(need / max(prefix_mass, 1e-3) * 1.3) + 64)
        hits = np.concatenate([hits, batch[batch <= hi]])
        if hits.size >= need:
            break
    if hits.size < need:
        raise PromiseViolationError(
            f"prefix [1..{hi}] weight far below its partition estimate"
        )
    cond = empirical_pmf(hits[:need], hi)
    return _window_statistic(cond.cdf()) > alpha**2 / 8.0


def detect_gap(
    access: DistAccess, alpha: float, delta: float, exact: bool = False
) -> MissingDataReport:
    """Output (a, b) covering the deleted interval, or close.

    Big elements (mass >= 3 alpha^3 / 5) sit at the head of any distribution
    from this error model, so a gap among them shows up as exact zeros in the
    DKW estimate.  Otherwise the remaining domain is split into intervals of
    weight ~alpha^2 and prefixes are tested for monotonicity until one
    rejects; the gap then sits in the last two intervals.  On a gap report,
    D'([a,b]) <= 3 alpha^2; on close, D' is alpha^2-close to monotone.
    """
    if not (0 < alpha < 1.0 / 3.0):
        raise ParameterError("alpha must be in (0, 1/3)")
    n = access.n
    if not exact and n > _SAMPLE_MODE_MAX_N:
        raise ParameterError(f"sample-mode detection limited to n <= {_SAMPLE_MODE_MAX_N}")
    tol = alpha**3 / 5.0
    dhat, _ = _pmf_estimate(access, tol, delta / 2.0, exact)

    big = np.nonzero(dhat.p >= 4.0 * tol)[0]
    r = int(big.max()) + 1 if big.size else 0
    if r:
        zeros = np.nonzero(dhat.p[:r] <= tol)[0]
        if zeros.size:
            return MissingDataReport(kind=GAP, a=int(zeros.min()) + 1, b=int(zeros.max()) + 1)
    if r == n:
        return MissingDataReport(kind=CLOSE)

    # equal-weight partition of the light region [r+1 .. n]
    cdf = dhat.cdf()
    base = cdf[r - 1] if r else 0.0
    cuts = []
    cur = base
    for x in range(r + 1, n + 1):
        if cdf[x - 1] - cur >= alpha**2 and x < n:
            cuts.append(x)
            cur = cdf[x - 1]
    cuts.append(n)
    lefts = [r + 1] + [c + 1 for c in cuts[:-1]]

    delta_per = delta / (2.0 * max(len(cuts), 1))
    for idx, hi in enumerate(cuts):
        if exact:
            reject = _prefix_rejects_exact(dhat, hi, alpha)
        else:
            prefix_mass = cdf[hi - 1]
            reject = _prefix_rejects_sampled(access, hi, prefix_mass, alpha, delta_per)
        if reject:
            a = lefts[idx - 1] if idx > 0 else lefts[0]
            return MissingDataReport(kind=GAP, a=int(a), b=int(hi))
    return MissingDataReport(kind=CLOSE)


# ---------------------------------------------------------------------------
# Stage (ii): estimating the missing weight


def estimate_weights(
    access: DistAccess,
    a: int,
    b: int,
    alpha: float,
    delta: float,
    exact: bool = False,
    eps: float | None = None,
) -> MissingDataReport:
    """Complete a gap report with gamma, gamma' and the tail cut c.

    One DKW pass at Kolmogorov budget alpha^3/2 estimates the weight gamma of
    the window J right after the gap; c is the last point whose tail weight
    still reaches gamma, so recycling a gamma/gamma' fraction of the tail
    [c, n] refills the gap.  If an eps promise is supplied, gamma is checked
    against its provable cap 2 eps + 4 alpha^3.
    """
    n = access.n
    if not (1 <= a <= b <= n):
        raise ParameterError("invalid gap endpoints")
    dhat, _ = _pmf_estimate(access, alpha**3 / 2.0, delta, exact)
    j_lo, j_hi = b + 1, min(2 * b - a + 1, n)
    gamma = dhat.mass(j_lo, j_hi) if j_lo <= j_hi else 0.0
    gamma = min(max(gamma, 0.0), 1.0)
    if eps is not None and gamma > 2.0 * eps + 4.0 * alpha**3 + 1e-12:
        raise PromiseViolationError(
            f"gamma {gamma:.4g} exceeds 2*eps + 4*alpha^3; promise violated"
        )
    tails = np.concatenate([np.cumsum(dhat.p[::-1])[::-1], [0.0]])
    ok = np.nonzero(tails[:n] >= gamma)[0]
    c = int(ok.max()) + 1 if ok.size else 1
    gamma_prime = float(tails[c - 1])
    return MissingDataReport(
        kind=GAP, a=a, b=b, gamma=float(gamma), gamma_prime=gamma_prime, c=c
    )


# ---------------------------------------------------------------------------
# The corrected distribution and the batch improver


def corrected_pmf_exact(dprime: Pmf, report: MissingDataReport) -> Pmf:
    """Materialize the improver's output distribution for an exact report.

    On I = [a,b] add the recycled tail share; on J flatten to the average; on
    K = [c,n] scale down by (1 - gamma/gamma'); elsewhere leave D' alone.
    """
    if not report.is_gap or report.gamma <= 0.0:
        return dprime
    n = dprime.n
    a, b, c = report.a, report.b, report.c
    j_lo, j_hi = report.window_j(n)
    if j_hi >= c:
        raise OverlapError(f"window [{j_lo},{j_hi}] overlaps tail [{c},{n}]")
    mass_k = dprime.mass(c, n)
    if mass_k <= 0:
        raise ParameterError("tail [c,n] carries no mass to recycle")
    ratio = min(report.gamma / report.gamma_prime, 1.0)
    p = dprime.p.copy()
    p[a - 1 : b] += ratio * mass_k / (b - a + 1)
    if j_lo <= j_hi:
        p[j_lo - 1 : j_hi] = dprime.mass(j_lo, j_hi) / (j_hi - j_lo + 1)
    p[c - 1 : n] *= 1.0 - ratio
    return Pmf.make(p, renormalize=True)


@dataclass
class MissingDataBatch:
    """Per-query sampling filter driven by a preprocessing report."""

    access: DistAccess
    report: MissingDataReport
    eps2: float
    rng: np.random.Generator
    budget: int
    emitted: int = 0

    @property
    def pass_through(self) -> bool:
        return (not self.report.is_gap) or self.report.gamma < 5.0 * self.eps2**1.5

    def exact_pmf(self) -> Pmf:
        if self.access.exact is None:
            raise CapabilityError("exact mode needs an exact pmf")
        if self.pass_through:
            return self.access.exact
        return corrected_pmf_exact(self.access.exact, self.report)

    def draw(self) -> int:
        if self.emitted >= self.budget:
            raise ParameterError(f"batch of {self.budget} samples exhausted")
        self.emitted += 1
        s = self.access.draw()
        if self.pass_through:
            return s
        rep = self.report
        n = self.access.n
        j_lo, j_hi = rep.window_j(n)
        if s >= rep.c:
            if self.rng.random() < rep.gamma / rep.gamma_prime:
                return int(self.rng.integers(rep.a, rep.b + 1))
            return s
        if j_lo <= s <= j_hi:
            return int(self.rng.integers(j_lo, j_hi + 1))
        return s

    def take(self, q: int) -> np.ndarray:
        return np.array([self.draw() for _ in range(q)], dtype=np.int64)


def missing_data_improver(
    access: DistAccess,
    eps: float,
    eps2: float,
    delta: float = 0.1,
    batch: int = 1,
    rng: np.random.Generator | None = None,
    exact: bool = False,
) -> MissingDataBatch:
    """Preprocess (gap detection + weight estimation), then filter samples.

    alpha is tied to the residual budget as sqrt(eps2).  With probability at
    least 1 - delta the output distribution is O(eps2)-close to monotone and
    O(eps)-close to the faulty input.
    """
    if not (0 < eps2 < eps):
        raise ParameterError("need 0 < eps2 < eps")
    alpha = math.sqrt(eps2)
    if alpha >= 1.0 / 3.0:
        alpha = min(alpha, 0.33333)
    report = detect_gap(access, alpha, delta / 2.0, exact=exact)
    if report.is_gap:
        report = estimate_weights(
            access, report.a, report.b, alpha, delta / 2.0, exact=exact, eps=eps
        )
    if rng is None:
        rng = np.random.default_rng(0)
    return MissingDataBatch(access=access, report=report, eps2=eps2, rng=rng, budget=batch)
