"""Exact discrete-distribution arithmetic, distances and oracle access.

Distributions live on the ordered domain {1..n}.  Everything downstream
(flattening, correctors, improvers) is built on the primitives here: total
variation and Kolmogorov distances, empirical estimation with its DKW sample
count, cyclic convolution over Z_n, and `DistAccess`, which bundles the
sampling / cdf-query capabilities an algorithm is granted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DomainMismatchError, ParameterError

MASS_TOL = 1e-9
# Direct O(n^2) convolution up to this size; FFT-based beyond (error ~1e-12,
# inside the 1e-9 accumulated-error budget).
_DIRECT_CONV_LIMIT = 16384


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; split substreams with `split_rng`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def split_rng(rng: np.random.Generator, n: int = 2) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.Philox(s)) for s in rng.bit_generator.seed_seq.spawn(n)]


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on {1..n}; p[i] is the mass of element i+1.

    Entries may be zero; no smoothing is ever applied implicitly.  If the
    input summed to 1 only within `MASS_TOL` the constructor renormalizes and
    records the adjustment in `renorm`.
    """

    n: int
    p: np.ndarray
    renorm: float = 0.0

    @staticmethod
    def make(values, renormalize: bool = False) -> "Pmf":
        p = np.asarray(values, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ParameterError("pmf must be a non-empty vector")
        if np.any(p < -MASS_TOL):
            raise ParameterError("pmf entries must be non-negative")
        p = np.clip(p, 0.0, None)
        total = float(p.sum())
        if abs(total - 1.0) > (np.inf if renormalize else MASS_TOL):
            raise ParameterError(f"pmf mass {total} is not 1")
        if total <= 0:
            raise ParameterError("pmf mass is zero")
        drift = abs(total - 1.0)
        if drift > 0:
            p = p / total
        return Pmf(n=p.size, p=p, renorm=drift)

    @staticmethod
    def uniform(n: int) -> "Pmf":
        return Pmf(n=n, p=np.full(n, 1.0 / n))

    @staticmethod
    def point_mass(n: int, x: int = 1) -> "Pmf":
        p = np.zeros(n)
        p[x - 1] = 1.0
        return Pmf(n=n, p=p)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.p)

    def mass(self, lo: int, hi: int) -> float:
        """Total weight of the interval [lo, hi], 1-based inclusive."""
        if lo > hi:
            return 0.0
        return float(self.p[lo - 1 : hi].sum())

    def is_monotone(self, tol: float = MASS_TOL) -> bool:
        return bool(np.all(np.diff(self.p) <= tol))

    def to_json_dict(self) -> dict:
        return {"n": self.n, "p": [float(v) for v in self.p]}


def load_pmf_dict(d: dict, renormalize: bool = False) -> Pmf:
    """Loader for the `{"n": ..., "p": [...]}` wire format.

    Rejects |sum(p) - 1| > 1e-6 unless `renormalize` is set.
    """
    p = np.asarray(d["p"], dtype=float)
    if int(d["n"]) != p.size:
        raise ParameterError("declared n does not match len(p)")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-6 and not renormalize:
        raise ParameterError(
            f"pmf mass {total} deviates from 1 by more than 1e-6; pass renormalize"
        )
    return Pmf.make(p, renormalize=True)


def tv_distance(p: Pmf, q: Pmf) -> float:
    """Total variation distance, half the L1 distance between the pmfs."""
    if p.n != q.n:
        raise DomainMismatchError(f"domain sizes differ: {p.n} vs {q.n}")
    return 0.5 * float(np.abs(p.p - q.p).sum())


def kolmogorov_distance(p: Pmf, q: Pmf) -> float:
    """Sup-norm distance between the cdfs; never exceeds tv_distance."""
    if p.n != q.n:
        raise DomainMismatchError(f"domain sizes differ: {p.n} vs {q.n}")
    return float(np.max(np.abs(p.cdf() - q.cdf())))


def empirical_pmf(samples, n: int) -> Pmf:
    """Empirical distribution of the samples: count(i)/m for each i in {1..n}."""
    s = np.asarray(samples, dtype=np.int64)
    if s.size == 0:
        raise ParameterError("need at least one sample")
    if s.min() < 1 or s.max() > n:
        raise ParameterError("sample out of range {1..n}")
    counts = np.bincount(s - 1, minlength=n).astype(float)
    return Pmf(n=n, p=counts / s.size)


def dkw_sample_count(eps: float, delta: float) -> int:
    """Samples sufficient for Kolmogorov error <= eps with prob >= 1 - delta.

    Solves 2 exp(-2 m eps^2) <= delta.
    """
    if eps <= 0 or not (0 < delta < 1):
        raise ParameterError("need eps > 0 and delta in (0,1)")
    return int(np.ceil(np.log(2.0 / delta) / (2.0 * eps * eps)))


def convolve(p: Pmf, q: Pmf) -> Pmf:
    """Cyclic convolution on Z_n, with domain element x identified with x-1.

    (p*q)(x) = sum_g p(x-g mod n) q(g).  Commutative; the uniform
    distribution is absorbing.
    """
    if p.n != q.n:
        raise DomainMismatchError(f"domain sizes differ: {p.n} vs {q.n}")
    n = p.n
    if n <= _DIRECT_CONV_LIMIT:
        full = np.convolve(p.p, q.p)
        out = full[:n].copy()
        out[: n - 1] += full[n:]
    else:
        out = np.fft.irfft(np.fft.rfft(p.p) * np.fft.rfft(q.p), n)
        out = np.clip(out, 0.0, None)
    return Pmf.make(out, renormalize=True)


def convolve_power(d: Pmf, k: int) -> Pmf:
    """k-fold self-convolution; k = 1 is the identity."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    out = d
    for _ in range(k - 1):
        out = convolve(out, d)
    return out


@dataclass
class CorrectorParams:
    """Budgets a corrector/improver run is sold under.

    eps: promised distance to the property; eps1: allowed distance between
    output and input; eps2: allowed residual distance of the output to the
    property (0 for a corrector); delta: failure probability; batch: number
    of queries committed in advance.
    """

    eps: float
    eps1: float
    eps2: float = 0.0
    delta: float = 1.0 / 3.0
    batch: int = 1

    def __post_init__(self):
        if not (0 < self.eps <= 1):
            raise ParameterError("eps must be in (0,1]")
        if not (0 <= self.delta <= 1):
            raise ParameterError("delta must be in [0,1]")
        if self.batch < 1:
            raise ParameterError("batch must be >= 1")
        if self.eps1 + self.eps2 < self.eps - 1e-12:
            raise ParameterError("infeasible budgets: eps1 + eps2 < eps")


_BUFFER = 8192


@dataclass
class DistAccess:
    """Capability bundle over an unknown distribution.

    `sampler` draws one element of {1..n} per call; `ceval(j)` returns
    D([1..j]) when the cdf-query capability is present.  When `exact` is set,
    both are derived from it and mutually consistent.  Draws and cdf queries
    are counted, so composites can report exact costs.  Single consumer; use
    `split_rng` seeds for concurrent instances.
    """

    n: int
    exact: Pmf | None = None
    rng: np.random.Generator | None = None
    sampler: object | None = None          # callable () -> int, optional
    ceval_fn: object | None = None         # callable (j) -> float, optional
    draws: int = 0
    cdf_queries: int = 0
    _cdf: np.ndarray | None = None
    _buf: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    _pos: int = 0

    @staticmethod
    def from_pmf(pmf: Pmf, seed: int = 0, with_ceval: bool = True) -> "DistAccess":
        acc = DistAccess(n=pmf.n, exact=pmf, rng=make_rng(seed))
        acc._cdf = pmf.cdf()
        if not with_ceval:
            acc._cdf_hidden = True
        acc._with_ceval = with_ceval
        return acc

    @staticmethod
    def from_stream(samples, n: int, cdf_table=None) -> "DistAccess":
        it = iter(samples)

        def pull():
            try:
                return int(next(it))
            except StopIteration:
                raise CapabilityError("sample stream exhausted") from None

        acc = DistAccess(n=n, sampler=pull)
        if cdf_table is not None:
            table = np.asarray(cdf_table, dtype=float)
            if table.size != n:
                raise ParameterError("cdf table must have n entries")
            acc.ceval_fn = lambda j: float(table[j - 1])
        return acc

    @property
    def has_ceval(self) -> bool:
        if self.exact is not None:
            return getattr(self, "_with_ceval", True)
        return self.ceval_fn is not None

    def draw(self) -> int:
        self.draws += 1
        if self.exact is not None:
            if self._pos >= self._buf.size:
                self._buf = self.rng.choice(self.n, size=_BUFFER, p=self.exact.p) + 1
                self._pos = 0
            x = int(self._buf[self._pos])
            self._pos += 1
            return x
        if self.sampler is None:
            raise CapabilityError("no sampling capability")
        return self.sampler()

    def draw_many(self, k: int) -> np.ndarray:
        if self.exact is not None:
            self.draws += k
            return self.rng.choice(self.n, size=k, p=self.exact.p) + 1
        return np.array([self.draw() for _ in range(k)], dtype=np.int64)

    def ceval(self, j: int) -> float:
        """Cumulative mass D([1..j]).  Counts as one cdf query."""
        if not (1 <= j <= self.n):
            raise ParameterError(f"ceval index {j} outside 1..{self.n}")
        if not self.has_ceval:
            raise CapabilityError("no cdf-query capability")
        self.cdf_queries += 1
        if self.exact is not None:
            return float(self._cdf[j - 1])
        return self.ceval_fn(j)
