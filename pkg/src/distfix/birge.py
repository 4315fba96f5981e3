"""Oblivious interval decomposition of {1..n} and the flattening map.

The partition is data-independent: interval k has |I_k| = floor((1+alpha)^k)
elements, emitted greedily; the final interval absorbs whatever remainder is
smaller than the next prescribed size.  Flattening averages a pmf within each
interval, which never increases the distance between two distributions and
moves a monotone distribution by at most alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist_core import Pmf
from .errors import DomainMismatchError, ParameterError


@dataclass(frozen=True)
class IntervalPartition:
    """Consecutive intervals covering {1..n}; bounds are right endpoints."""

    n: int
    alpha: float
    bounds: np.ndarray

    @property
    def ell(self) -> int:
        return int(self.bounds.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.bounds, prepend=0)

    def left(self, k: int) -> int:
        """1-based left endpoint of interval k (0-based index)."""
        return 1 if k == 0 else int(self.bounds[k - 1]) + 1

    def right(self, k: int) -> int:
        return int(self.bounds[k])

    def index_of(self, x: int) -> int:
        """0-based interval index containing domain element x."""
        return int(np.searchsorted(self.bounds, x))

    def to_json_list(self) -> list[int]:
        return [int(b) for b in self.bounds]


def birge_partition(n: int, alpha: float) -> IntervalPartition:
    if n < 1:
        raise ParameterError("n must be >= 1")
    if alpha <= 0:
        raise ParameterError("alpha must be > 0")
    sizes = []
    rem = n
    k = 1
    while rem > 0:
        s = max(1, int((1.0 + alpha) ** k))
        if s > rem:
            break
        sizes.append(s)
        rem -= s
        k += 1
    if rem:
        if sizes:
            sizes[-1] += rem
        else:
            sizes.append(rem)
    return IntervalPartition(n=n, alpha=alpha, bounds=np.cumsum(sizes))


def interval_masses(d: Pmf, part: IntervalPartition) -> np.ndarray:
    if d.n != part.n:
        raise DomainMismatchError(f"pmf on {d.n} but partition on {part.n}")
    cdf = np.concatenate([[0.0], d.cdf()])
    return np.diff(cdf[np.concatenate([[0], part.bounds])])


def flatten(d: Pmf, part: IntervalPartition) -> Pmf:
    """Replace d by its within-interval average; idempotent, mass-preserving."""
    masses = interval_masses(d, part)
    sizes = part.sizes
    return Pmf(n=d.n, p=np.repeat(masses / sizes, sizes))


def flatten_masses_to_pmf(masses, part: IntervalPartition) -> Pmf:
    """Pmf that is constant on each interval with the given interval masses."""
    m = np.asarray(masses, dtype=float)
    if m.size != part.ell:
        raise DomainMismatchError("one mass per interval required")
    return Pmf.make(np.repeat(m / part.sizes, part.sizes), renormalize=True)
