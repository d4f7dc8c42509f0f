"""Static sample designs and MCMC samplers."""

from .mcmc import ChainHistory, mcmc_mh, mcmc_mmh, mcmc_stretch, mmh_candidates
from .static import (
    RectangularStrata,
    importance_sampling,
    latin_hypercube,
    min_distance,
    monte_carlo,
    resample,
    simplex,
    stratified,
)

__all__ = [
    "ChainHistory",
    "RectangularStrata",
    "importance_sampling",
    "latin_hypercube",
    "mcmc_mh",
    "mcmc_mmh",
    "mcmc_stretch",
    "min_distance",
    "mmh_candidates",
    "monte_carlo",
    "resample",
    "simplex",
    "stratified",
]
