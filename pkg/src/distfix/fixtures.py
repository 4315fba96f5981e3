"""Deterministic fixture generators used by the CLI, the tests and the
acceptance suite.  Every generator is a pure function of its parameters and
seed."""

from __future__ import annotations

import numpy as np

from .dist_core import Pmf, make_rng, tv_distance
from .errors import ParameterError
from .isotonic import distance_to_monotone_exact

KINDS = (
    "uniform",
    "zipf-monotone",
    "geometric-monotone",
    "staircase",
    "interval-uniform",
    "perturbed-monotone",
)


def make_uniform(n: int) -> Pmf:
    return Pmf.uniform(n)


def make_zipf(n: int, s: float = 1.1) -> Pmf:
    w = np.arange(1, n + 1, dtype=float) ** (-s)
    return Pmf.make(w, renormalize=True)


def make_geometric(n: int, r: float = 0.5) -> Pmf:
    if not (0 < r < 1):
        raise ParameterError("ratio must be in (0,1)")
    w = r ** np.arange(n, dtype=float)
    return Pmf.make(w, renormalize=True)


def make_staircase(n: int, steps: int = 8, seed: int = 0) -> Pmf:
    rng = make_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(steps - 1, n - 1), replace=False))
    bounds = np.concatenate([cuts, [n]])
    sizes = np.diff(bounds, prepend=0)
    levels = np.sort(rng.random(bounds.size))[::-1]
    return Pmf.make(np.repeat(levels, sizes), renormalize=True)


def make_interval_uniform(n: int, eps: float) -> Pmf:
    """Uniform on an interval of (1-eps) n elements centered at n/2.

    Exactly eps-far from uniform on Z_n, and the witness that one round of
    self-convolution drifts eps + (3/4) eps^2 away from the input.
    """
    if not (0 < eps < 0.5):
        raise ParameterError("eps must be in (0, 1/2)")
    size = int(round((1.0 - eps) * n))
    lo = int(round((eps / 2.0) * n))  # group element (1-delta)n/2 with delta = 1-eps
    p = np.zeros(n)
    p[lo : lo + size] = 1.0 / size
    return Pmf(n=n, p=p)


def random_monotone(n: int, rng: np.random.Generator) -> Pmf:
    kind = rng.integers(0, 3)
    if kind == 0:
        return make_zipf(n, s=float(rng.uniform(0.6, 2.0)))
    if kind == 1:
        return make_geometric(n, r=float(rng.uniform(0.9, 1.0 - 1.0 / (4 * n))))
    return make_staircase(n, steps=int(rng.integers(4, 16)), seed=int(rng.integers(2**32)))


def perturb_by_tv(base: Pmf, dist: float, rng: np.random.Generator) -> Pmf:
    """Move exactly `dist` mass from one random set of points to another, so
    TV(result, base) == dist; receiving points sit later than giving points,
    which is what creates monotonicity violations on a monotone base."""
    if dist <= 0:
        return base
    n = base.n
    eligible = np.nonzero(base.p > 0)[0]
    eligible = eligible[eligible < n - 1]
    if eligible.size == 0:
        raise ParameterError("base carries no movable mass")
    size = min(max(4, n // 16), eligible.size)
    weights = base.p[eligible] / base.p[eligible].sum()
    g = rng.choice(eligible, size=size, replace=False, p=weights)
    caps = 0.9 * base.p[g]
    if caps.sum() < dist:
        g = eligible
        caps = 0.9 * base.p[g]
        if caps.sum() < dist:
            raise ParameterError("perturbation larger than the movable mass")
    take = caps * (dist / caps.sum())
    pool = np.setdiff1d(np.arange(int(g.min()) + 1, n), g)
    if pool.size == 0:
        raise ParameterError("no room to receive the perturbation")
    receivers = rng.choice(pool, size=g.size, replace=True)
    p = base.p.copy()
    np.subtract.at(p, g, take)
    np.add.at(p, receivers, take)
    out = Pmf.make(p, renormalize=True)
    if abs(tv_distance(out, base) - dist) > 1e-9:
        raise ParameterError("perturbation construction lost mass; wrong sets")
    return out


def perturbed_monotone_certified(
    n: int, dist: float, seed: int
) -> tuple[Pmf, Pmf]:
    """(pmf, monotone witness): distance-to-monotone <= dist by construction."""
    rng = make_rng(seed)
    base = random_monotone(n, rng)
    return perturb_by_tv(base, dist, rng), base


def perturbed_monotone_oracle(
    n: int, dist: float, seed: int, tol: float = 1e-6
) -> tuple[Pmf, float]:
    """(pmf, exact distance): bisect the perturbation scale against the
    isotonic oracle until the distance matches `dist` within tol."""
    rng = make_rng(seed)
    base = random_monotone(n, rng)
    direction_seed = rng.integers(2**32)

    def candidate(scale: float) -> Pmf:
        return perturb_by_tv(base, scale, make_rng(int(direction_seed)))

    lo, hi = 0.0, min(4.0 * dist, 0.49)
    d_hi = distance_to_monotone_exact(candidate(hi))
    for _ in range(40):
        if d_hi >= dist or hi >= 0.49:
            break
        hi = min(2.0 * hi, 0.49)
        d_hi = distance_to_monotone_exact(candidate(hi))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        d_mid = distance_to_monotone_exact(candidate(mid))
        if abs(d_mid - dist) <= tol:
            return candidate(mid), d_mid
        if d_mid < dist:
            lo = mid
        else:
            hi = mid
    out = candidate(0.5 * (lo + hi))
    return out, distance_to_monotone_exact(out)


def perturbed_uniform(n: int, dist: float, seed: int) -> Pmf:
    """Exactly `dist` from uniform in total variation."""
    rng = make_rng(seed)
    if dist <= 0:
        return Pmf.uniform(n)
    if dist > 0.5:
        raise ParameterError("dist must be <= 1/2")
    perm = rng.permutation(n)
    give, get = perm[: n // 2], perm[n // 2 :]
    w_give = rng.random(give.size)
    w_give *= dist / w_give.sum()
    for _ in range(64):
        if not np.any(w_give > 1.0 / n):
            break
        w_give = np.minimum(w_give, 1.0 / n)
        short = dist - w_give.sum()
        room = (1.0 / n - w_give) > 1e-15
        if short <= 1e-15 or not room.any():
            break
        w_give[room] += short / room.sum()
    w_get = rng.random(get.size)
    w_get *= dist / w_get.sum()
    p = np.full(n, 1.0 / n)
    p[give] -= w_give
    p[get] += w_get
    return Pmf.make(p, renormalize=True)


def perturbed_subgroup_uniform(
    n: int, h: int, dist: float, seed: int, outside_fraction: float = 0.5
) -> Pmf:
    """Exactly `dist` from uniform on the subgroup generated by h.

    `outside_fraction` of the moved mass leaks off the subgroup (samples
    there defeat the gcd step with the corresponding probability); the rest
    is shuffled between subgroup members.
    """
    rng = make_rng(seed)
    members = np.arange(0, n, h)
    order = members.size
    p = np.zeros(n)
    p[members] = 1.0 / order
    if dist <= 0:
        return Pmf(n=n, p=p)
    give = rng.choice(members, size=max(1, order // 2), replace=False)
    w = rng.random(give.size)
    w *= dist / w.sum()
    for _ in range(64):
        if not np.any(w > 1.0 / order):
            break
        w = np.minimum(w, 1.0 / order)
        short = dist - w.sum()
        room = (1.0 / order - w) > 1e-15
        if short <= 1e-15 or not room.any():
            break
        w[room] += short / room.sum()
    p[give] -= w
    leak = outside_fraction * dist
    outside = np.setdiff1d(np.arange(n), members)
    if leak > 0 and outside.size:
        get_out = rng.choice(outside, size=min(outside.size, give.size), replace=False)
        p[get_out] += leak / get_out.size
    stay = np.setdiff1d(members, give)
    get_in = stay if stay.size else members
    p[get_in] += (dist - leak) / get_in.size
    return Pmf.make(p, renormalize=True)


def generate(kind: str, n: int, seed: int = 0, **params) -> Pmf:
    """Dispatch used by the `gen` CLI command."""
    if kind == "uniform":
        return make_uniform(n)
    if kind == "zipf-monotone":
        return make_zipf(n, s=params.get("s", 1.1))
    if kind == "geometric-monotone":
        return make_geometric(n, r=params.get("r", 0.5))
    if kind == "staircase":
        return make_staircase(n, steps=int(params.get("steps", 8)), seed=seed)
    if kind == "interval-uniform":
        return make_interval_uniform(n, eps=params["eps"])
    if kind == "perturbed-monotone":
        pmf, _ = perturbed_monotone_oracle(n, dist=params["dist"], seed=seed)
        return pmf
    raise ParameterError(f"unknown generator kind {kind!r}; choose from {KINDS}")
