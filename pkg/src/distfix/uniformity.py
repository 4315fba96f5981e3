"""Randomness-scarce correctors and improvers for uniformity on Z_n.

None of these procedures consumes randomness of its own: every coin they
flip is manufactured from input draws, which is the point.  FAIL and
POINT_MASS are enumerated outcomes, never exceptions, because the contracts
explicitly permit a delta probability of failure.

Domain elements x in {1..n} are identified with the group elements x-1 of
Z_n, matching `dist_core.convolve`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dist_core import DistAccess, Pmf, convolve_power, dkw_sample_count, empirical_pmf
from .errors import CapabilityError, OutOfRegimeError, ParameterError


class Special(enum.Enum):
    FAIL = "FAIL"
    POINT_MASS = "POINT_MASS"


FAIL = Special.FAIL
POINT_MASS = Special.POINT_MASS


@dataclass(frozen=True)
class GroupSpec:
    """Z_n, optionally with the subgroup generated by h (h must divide n)."""

    n: int
    subgroup_gen: int | None = None

    def __post_init__(self):
        if self.subgroup_gen is not None:
            if self.n % self.subgroup_gen != 0:
                raise ParameterError("subgroup generator must divide n")

    @property
    def subgroup_order(self) -> int:
        if self.subgroup_gen is None:
            return self.n
        return self.n // self.subgroup_gen

    def subgroup_elements(self) -> np.ndarray:
        """Domain elements {g+1 : g in H}, ascending."""
        h = self.subgroup_gen or self.n
        return np.arange(0, self.n, h) + 1

    def uniform_on_subgroup(self) -> Pmf:
        p = np.zeros(self.n)
        p[self.subgroup_elements() - 1] = 1.0 / self.subgroup_order
        return Pmf(n=self.n, p=p)


# ---------------------------------------------------------------------------
# Improver schedules


def convolution_order(eps: float, eps2: float) -> int:
    """Samples to sum so that (1/2)(2 eps)^k <= eps2; 1 when already there."""
    if eps2 <= 0:
        raise ParameterError("eps2 must be > 0")
    if eps >= 1.0 / math.sqrt(2.0):
        raise OutOfRegimeError("convolution improver needs eps < 1/sqrt(2)")
    if eps <= 0 or 0.5 * (2.0 * eps) ** 1 <= eps2:
        return 1
    if eps < 0.5:
        k = math.ceil((math.log2(1.0 / eps2) - 1.0) / (math.log2(1.0 / eps) - 1.0))
        return max(int(k), 1)
    # eps in [1/2, 1/sqrt(2)): the linear bound stalls but squaring does not
    bound, k = eps, 1
    while 2.0 * bound * bound < bound:
        bound, k = 2.0 * bound * bound, 2 * k
        if bound <= eps2:
            return k
    raise OutOfRegimeError("convolution bound does not contract at this eps")


def bootstrap_schedule(eps: float, eps2: float) -> tuple[int, float]:
    """(depth, internal alpha) for the bootstrapped hybrid improver."""
    if not (0 < eps2 < eps <= 0.5):
        raise ParameterError("need 0 < eps2 < eps <= 1/2")
    boot_k = max(1, math.ceil(math.log2(eps / (eps2 * (1.0 - eps * eps)))))
    boot_alpha = 0.5 * eps2 * eps * eps
    return boot_k, boot_alpha


@dataclass(frozen=True)
class ImproverSchedule:
    """Derived parameters shared by the convolution-based improvers.

    p0 is the same-half collision probability d0^2 + d1^2; it depends on the
    unknown distribution and is only filled in by the exact-mode paths.
    """

    k: int
    boot_k: int = 0
    boot_alpha: float = 0.0
    p0: float | None = None


def make_schedule(eps: float, eps2: float) -> ImproverSchedule:
    boot_k, boot_alpha = bootstrap_schedule(eps, eps2) if 0 < eps2 < eps <= 0.5 else (0, 0.0)
    return ImproverSchedule(k=convolution_order(eps, eps2), boot_k=boot_k, boot_alpha=boot_alpha)


# ---------------------------------------------------------------------------
# von Neumann extraction


def _halves_threshold(n: int) -> int:
    return n // 2


def _vn_bit(access: DistAccess, threshold: int, max_pairs: int):
    """One unbiased bit from disjoint draw pairs; FAIL after max_pairs ties.

    P(low, high) = P(high, low) exactly, whatever the half-weight p is, so
    the bit is exactly unbiased whenever the draws are i.i.d.
    """
    for _ in range(max_pairs):
        a = access.draw() <= threshold
        b = access.draw() <= threshold
        if a != b:
            return 0 if a else 1
    return FAIL


def _pairs_budget(stop_prob: float, delta: float) -> int:
    stop_prob = min(max(stop_prob, 1e-6), 1.0 - 1e-12)
    return max(1, math.ceil(math.log(1.0 / delta) / -math.log1p(-stop_prob)))


def _extract_value(access: DistAccess, n: int, threshold: int, p_lo: float,
                   p_hi: float, delta: float):
    """Assemble ceil(log2 n) unbiased bits into a uniform element of {1..n},
    rejecting assembled values beyond n."""
    nbits = max(1, math.ceil(math.log2(n)))
    value_tries = 40
    delta_bit = delta / (2.0 * nbits)
    q = min(p_lo, 1.0 - p_hi)
    q = min(max(q, 1e-4), 0.5)
    budget = _pairs_budget(2.0 * q * (1.0 - q), delta_bit)
    for _ in range(value_tries):
        value = 0
        for _ in range(nbits):
            bit = _vn_bit(access, threshold, budget)
            if bit is FAIL:
                return FAIL
            value = (value << 1) | bit
        if value < n:
            return value + 1
    return FAIL


def vn_sample(access: DistAccess, n: int, eps: float, delta: float):
    """Uniform element of {1..n} with probability >= 1 - delta, else FAIL.

    Views each draw as a coin (landed in the lower or upper half) and runs
    von Neumann extraction on disjoint pairs; eps < 0.49 keeps the coin
    non-degenerate, and the closer to uniform the cheaper the extraction
    (about two pairs per bit at p = 1/2).
    """
    if not (0 <= eps < 0.49):
        raise ParameterError("vn corrector needs eps < 0.49")
    slack = 0.5 / n  # odd n: the halves differ by one element
    p_lo = max(0.5 - eps - slack, 0.01)
    p_hi = min(0.5 + eps + slack, 0.99)
    return _extract_value(access, n, _halves_threshold(n), p_lo, p_hi, delta)


def randomness_from_monotone(access: DistAccess, n: int, eps: float, delta: float):
    """Uniform sample manufactured from an almost-monotone source, or
    POINT_MASS when the source is eps-close to the all-on-1 distribution.

    A DKW pass at budget eps/4 finds the (1 - eps/2)-quantile; if it is the
    first element the distribution is learnt (point mass), otherwise the
    split yields a coin with bias in [1/2 - 3 eps, 1 - eps/4] and the von
    Neumann machinery takes over.
    """
    if not (0 <= eps < 1.0 / 3.0):
        raise ParameterError("need eps in [0, 1/3)")
    if eps == 0:
        if access.exact is None:
            raise CapabilityError("eps = 0 requires exact access")
        fhat = access.exact.cdf()
    else:
        m = dkw_sample_count(eps / 4.0, delta / 2.0)
        fhat = empirical_pmf(access.draw_many(m), n).cdf()
    mhat = int(np.argmax(fhat >= 1.0 - eps / 2.0)) + 1
    if mhat == 1:
        return POINT_MASS
    threshold = mhat - 1
    p_lo = max(0.5 - 3.0 * eps, eps / 32.0, 1e-3)
    p_hi = 1.0 - eps / 4.0
    return _extract_value(access, n, threshold, p_lo, p_hi, delta / 2.0)


# ---------------------------------------------------------------------------
# Convolution-based improvers


def _sum_draws(access: DistAccess, n: int, k: int) -> int:
    total = 0
    for _ in range(k):
        total += access.draw() - 1
    return total % n + 1


def convolution_improve(access: DistAccess, n: int, eps: float, eps2: float) -> int:
    """Sum of k i.i.d. draws in Z_n; exponentially closer to uniform.

    The output distribution is the k-fold convolution, (1/2)(2 eps)^k-close
    to uniform; its distance to the input is at most eps + eps2 by the
    triangle inequality (and genuinely can overshoot eps).
    """
    return _sum_draws(access, n, convolution_order(eps, eps2))


def _half_masses(d: Pmf) -> tuple[float, float]:
    t = _halves_threshold(d.n)
    d0 = float(d.p[:t].sum())
    return d0, 1.0 - d0


def hybrid_collision_p0(d: Pmf) -> float:
    d0, d1 = _half_masses(d)
    return d0 * d0 + d1 * d1


def hybrid_exact_pmf(d: Pmf, k: int = 3) -> Pmf:
    """Materialized hybrid output: (1-p0) D + p0 D^(k)."""
    p0 = hybrid_collision_p0(d)
    mix = (1.0 - p0) * d.p + p0 * convolve_power(d, k).p
    return Pmf.make(mix, renormalize=True)


def hybrid_improve(access: DistAccess, n: int, eps: float, k: int = 3) -> int:
    """Land midway between the input and uniform using no external coins.

    Two draws decide the branch (the same-half collision happens with
    probability p0 = d0^2 + d1^2 in [1/2, 1/2 + 2 eps^2]); on a collision the
    output is a k-fold convolution sample, otherwise one fresh draw.  At most
    k + 2 draws per output.
    """
    if eps > 0.5:
        raise ParameterError("hybrid improver needs eps <= 1/2")
    t = _halves_threshold(n)
    same = (access.draw() <= t) == (access.draw() <= t)
    if same:
        return _sum_draws(access, n, k)
    return access.draw()


def bootstrap_exact_pmf(d: Pmf, eps: float, eps2: float) -> tuple[Pmf, ImproverSchedule]:
    """Materialized bootstrap: iterate the hybrid construction boot_k times.

    Stage j mixes D_j with its own k_j-fold convolution, where k_j pushes the
    convolution residue below the fixed internal alpha = eps2 eps^2 / 2; the
    distance-to-uniform bound halves each stage (u_{j+1} = u_j/2 + alpha).
    """
    boot_k, alpha = bootstrap_schedule(eps, eps2)
    cur = d
    u = eps
    for _ in range(boot_k):
        k_j = convolution_order(min(u, 0.5), alpha) if u > alpha else 1
        cur = hybrid_exact_pmf(cur, k=k_j)
        u = 0.5 * u + alpha
    return cur, ImproverSchedule(k=0, boot_k=boot_k, boot_alpha=alpha, p0=hybrid_collision_p0(d))


def bootstrap_improve(access: DistAccess, n: int, eps: float, eps2: float) -> int:
    """Sample-mode bootstrap; recursion mirrors the exact-mode mixture."""
    boot_k, alpha = bootstrap_schedule(eps, eps2)
    u_bounds = []
    u = eps
    for _ in range(boot_k):
        u_bounds.append(u)
        u = 0.5 * u + alpha
    t = _halves_threshold(n)

    def stage(j: int) -> int:
        if j == 0:
            return access.draw()
        u_j = u_bounds[j - 1]
        k_j = convolution_order(min(u_j, 0.5), alpha) if u_j > alpha else 1
        same = (stage(j - 1) <= t) == (stage(j - 1) <= t)
        if same:
            total = 0
            for _ in range(k_j):
                total += stage(j - 1) - 1
            return total % n + 1
        return stage(j - 1)

    return stage(boot_k)


# ---------------------------------------------------------------------------
# Subgroups


def generator_from_samples(group_elements, n: int) -> int:
    """gcd of the samples and n, so the output always divides n."""
    h = n
    for g in group_elements:
        h = math.gcd(h, int(g) % n)
    return h if h > 0 else n


def find_subgroup_generator(access: DistAccess, n: int, eps: float) -> int:
    """Guess the support subgroup's generator from O(log 1/eps) draws.

    When the input is eps-close to uniform on some subgroup H, the gcd of a
    few samples (as group elements) generates H except with probability
    O~(eps); all-identity draws return n, the trivial subgroup {0}.
    """
    if not (0 < eps < 0.49):
        raise ParameterError("need eps in (0, 0.49)")
    k = max(2, math.ceil(math.log2(1.0 / eps)) + 2)
    return generator_from_samples([access.draw() - 1 for _ in range(k)], n)


@dataclass
class SubgroupImprover:
    """Rejection-samples into the discovered subgroup, improves uniformity on
    its index space, and maps back.  FAIL per query is probability-bounded."""

    access: DistAccess
    n: int
    eps: float
    eps2: float
    h: int
    retries: int
    fail_count: int = 0

    @property
    def order(self) -> int:
        return self.n // self.h

    def _draw_index(self):
        for _ in range(self.retries):
            g = self.access.draw() - 1
            if g % self.h == 0:
                return g // self.h + 1
        return FAIL

    def draw(self):
        if self.order == 1:
            return 1  # trivial subgroup {0}: the identity is the only output
        idx_access = DistAccess(n=self.order, sampler=self._draw_index_strict)
        try:
            out = convolution_improve(idx_access, self.order, self.eps, self.eps2)
        except _RejectionExhausted:
            self.fail_count += 1
            return FAIL
        return (out - 1) * self.h + 1

    def _draw_index_strict(self) -> int:
        idx = self._draw_index()
        if idx is FAIL:
            raise _RejectionExhausted()
        return int(idx)


class _RejectionExhausted(Exception):
    pass


def subgroup_uniformity_improve(
    access: DistAccess, n: int, eps: float, eps2: float, batch: int = 1
) -> SubgroupImprover:
    """Find the subgroup once, then serve improved samples from it.

    The conditional distribution on H is at least as close to uniform-on-H
    as the input was, so the wrapped improver's guarantee carries over; each
    query tolerates O(log batch) rejection retries before declaring FAIL.
    """
    if not (0 < eps < 0.49):
        raise ParameterError("need eps in (0, 0.49)")
    h = find_subgroup_generator(access, n, eps)
    miss = min(2.0 * eps, 0.9)
    retries = max(4, math.ceil(math.log(10.0 * max(batch, 1)) / -math.log(miss)))
    return SubgroupImprover(access=access, n=n, eps=eps, eps2=eps2, h=h, retries=retries)
