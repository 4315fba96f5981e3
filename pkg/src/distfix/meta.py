"""Reductions between correcting, learning and tolerant testing.

A corrector is built from any learner by projecting the hypothesis onto the
property; an agnostic learner is built from a corrector when a constant-
factor estimate of OPT is available; and a corrector plus a distance
estimator upgrades any tester to a tolerant one.  The estimator and tester
slots are filled by simple DKW-based surrogates operating on interval
histograms, standing in for the specialized external algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .birge import IntervalPartition, birge_partition, flatten_masses_to_pmf, interval_masses
from .dist_core import DistAccess, Pmf, dkw_sample_count, empirical_pmf
from .errors import ParameterError
from .isotonic import WeightedHistogram, closest_monotone_histogram
from .mono_correct import learned_sample_count

ACCEPT = "ACCEPT"
REJECT = "REJECT"


@dataclass
class LearnerSpec:
    """run(access, eps, delta) -> Pmf; sample_count(eps, delta) -> draws used."""

    run: object
    sample_count: object
    proper: bool = False


@dataclass
class TesterSpec:
    """run(access, eps, delta) -> bool (accept); plus its sample count."""

    run: object
    sample_count: object


@dataclass
class EstimatorSpec:
    """run(access1, access2, eps, delta) -> TV estimate; plus sample count."""

    run: object
    sample_count: object


@dataclass
class CorrectedStream:
    """Sampling access to a corrected distribution.

    Samples drawn here cost no further input draws; `input_draws` is the
    total the corrector consumed while building the stream.
    """

    access: DistAccess
    pmf: Pmf
    input_draws: int

    def draw(self) -> int:
        return self.access.draw()

    def draw_many(self, k: int) -> np.ndarray:
        return self.access.draw_many(k)


def corrector_from_learner(
    learner: LearnerSpec,
    project,
    access: DistAccess,
    eps: float,
    eps1: float,
    delta: float,
    seed: int = 0,
) -> CorrectedStream:
    """Learn a hypothesis to accuracy (eps1 - eps)/2, project it onto the
    property, and serve i.i.d. samples from the projection."""
    if eps1 <= eps:
        raise ParameterError("corrector-from-learner needs eps1 > eps")
    before = access.draws
    hypothesis = learner.run(access, (eps1 - eps) / 2.0, delta)
    corrected = hypothesis if learner.proper else project(hypothesis)
    return CorrectedStream(
        access=DistAccess.from_pmf(corrected, seed=seed),
        pmf=corrected,
        input_draws=access.draws - before,
    )


# ---------------------------------------------------------------------------
# Monotonicity instantiations


def monotone_birge_learner(eps: float, c: float = 1.0) -> LearnerSpec:
    """Flattened-histogram learner matching the learning corrector's budget."""
    alpha = c * eps / 3.0

    def run(access: DistAccess, _eps: float, delta: float) -> Pmf:
        m = learned_sample_count(eps, delta)
        part = birge_partition(access.n, alpha)
        idx = np.searchsorted(part.bounds, access.draw_many(m))
        masses = np.bincount(idx, minlength=part.ell).astype(float) / m
        return flatten_masses_to_pmf(masses, part)

    return LearnerSpec(
        run=run, sample_count=lambda _e, d: learned_sample_count(eps, d), proper=False
    )


def monotone_projection(alpha: float):
    """Project a pmf onto monotone distributions, histogram-wise on the
    alpha-decomposition (exact for hypotheses that are flat on it)."""

    def project(d: Pmf) -> Pmf:
        part = birge_partition(d.n, alpha)
        hist = WeightedHistogram(
            levels=interval_masses(d, part) / part.sizes, lengths=part.sizes.astype(float)
        )
        proj, _ = closest_monotone_histogram(hist, total=1.0)
        return Pmf.make(np.repeat(proj.levels, part.sizes), renormalize=True)

    return project


def monotone_batch_corrector(
    access: DistAccess, eps: float, eps1: float, delta: float, seed: int = 0, c: float = 1.0
) -> CorrectedStream:
    """Batch corrector for monotonicity via the learning route."""
    learner = monotone_birge_learner(eps, c)
    return corrector_from_learner(
        learner, monotone_projection(c * eps / 3.0), access, eps, eps1, delta, seed=seed
    )


# ---------------------------------------------------------------------------
# Agnostic learning from correcting


def agnostic_from_corrector(
    corrector,
    learner: LearnerSpec,
    opt_hat: float,
    eps: float,
    delta: float,
    access: DistAccess,
    seed: int = 0,
) -> tuple[Pmf, int]:
    """Correct with budgets (opt_hat, opt_hat + eps), then learn from the
    corrected stream; the hypothesis lands within opt_hat + 2 eps of the
    input (so within c OPT + 2 eps for a c-factor estimate)."""
    stream: CorrectedStream = corrector(
        access, eps=opt_hat, eps1=opt_hat + eps, delta=delta / 2.0, seed=seed
    )
    hypothesis = learner.run(stream.access, eps, delta / 2.0)
    return hypothesis, stream.input_draws


# ---------------------------------------------------------------------------
# Tolerant testing from correcting


def surrogate_distance_estimator(part: IntervalPartition) -> EstimatorSpec:
    """TV estimate between two sampled distributions via their flattened
    empirical histograms; within +-alpha when both are histogram-structured
    on `part` (DKW at Kolmogorov budget alpha / (2 ell) per side)."""

    def count(alpha: float, delta: float) -> int:
        return dkw_sample_count(alpha / (2.0 * part.ell), delta / 2.0)

    def run(access1: DistAccess, access2: DistAccess, alpha: float, delta: float) -> float:
        m = count(alpha, delta)
        m1 = interval_masses(empirical_pmf(access1.draw_many(m), access1.n), part)
        m2 = interval_masses(empirical_pmf(access2.draw_many(m), access2.n), part)
        return 0.5 * float(np.abs(m1 - m2).sum())

    return EstimatorSpec(run=run, sample_count=count)


def surrogate_monotonicity_tester(part: IntervalPartition) -> TesterSpec:
    """Accept iff the flattened empirical histogram sits within alpha/2 of
    its own monotone projection."""

    def count(alpha: float, delta: float) -> int:
        return dkw_sample_count(alpha / (4.0 * part.ell), delta)

    def run(access: DistAccess, alpha: float, delta: float) -> bool:
        m = count(alpha, delta)
        masses = interval_masses(empirical_pmf(access.draw_many(m), access.n), part)
        hist = WeightedHistogram(levels=masses / part.sizes, lengths=part.sizes.astype(float))
        _, cost = closest_monotone_histogram(hist, total=1.0)
        return 0.5 * cost <= alpha / 2.0

    return TesterSpec(run=run, sample_count=count)


@dataclass
class TolerantResult:
    verdict: str
    estimate: float
    input_draws: int


def tolerant_tester_from_corrector(
    corrector,
    estimator: EstimatorSpec,
    tester: TesterSpec,
    eps_lo: float,
    eps_hi: float,
    delta: float,
    access: DistAccess,
    seed: int = 0,
) -> TolerantResult:
    """Distinguish distance <= eps_lo from distance >= eps_hi.

    Correct the input, estimate how far the corrected stream drifted (reject
    past (eps_hi + eps_lo)/2), then run the plain tester on the corrected
    stream at the margin beta = (eps_hi - eps_lo)/4.
    """
    if not (0 <= eps_lo < eps_hi <= 1):
        raise ParameterError("need 0 <= eps_lo < eps_hi <= 1")
    beta = (eps_hi - eps_lo) / 4.0
    eps1 = eps_lo + beta
    before = access.draws
    stream: CorrectedStream = corrector(
        access, eps=eps_lo, eps1=eps1, delta=delta / 3.0, seed=seed
    )
    estimate = estimator.run(access, stream.access, beta, delta / 3.0)
    if estimate > (eps_hi + eps_lo) / 2.0:
        return TolerantResult(REJECT, estimate, access.draws - before)
    accept = tester.run(stream.access, beta, delta / 3.0)
    return TolerantResult(ACCEPT if accept else REJECT, estimate, access.draws - before)
