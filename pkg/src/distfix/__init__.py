"""Sampling correctors and improvers for distributions on {1..n}."""

from .birge import IntervalPartition, birge_partition, flatten
from .dist_core import (
    CorrectorParams,
    DistAccess,
    Pmf,
    convolve,
    convolve_power,
    dkw_sample_count,
    empirical_pmf,
    kolmogorov_distance,
    make_rng,
    tv_distance,
)
from .isotonic import (
    WeightedHistogram,
    closest_monotone_histogram,
    closest_monotone_pmf,
    distance_to_monotone_exact,
)

__all__ = [
    "CorrectorParams",
    "DistAccess",
    "IntervalPartition",
    "Pmf",
    "WeightedHistogram",
    "birge_partition",
    "closest_monotone_histogram",
    "closest_monotone_pmf",
    "convolve",
    "convolve_power",
    "distance_to_monotone_exact",
    "dkw_sample_count",
    "empirical_pmf",
    "flatten",
    "kolmogorov_distance",
    "make_rng",
    "tv_distance",
]

__version__ = "0.1.0"
