"""Moment and tail bounds for functions of independent random variables,
with exact and Monte Carlo verification at desk scale."""

from .constants import KAPPA, K, all_constants, constant, kappa_q, lemma6_x
from .increments import (
    Functional,
    IncrementProfile,
    IncrementTable,
    MomentEstimate,
    Reduction,
    efron_stein_gap,
    exact_norm,
    mc_norm,
    profile_at,
)
from .product_space import (
    EnumerationUnavailable,
    Marginal,
    ProductSpace,
    bernoulli,
    build_space,
    enumerate_outcomes,
    rademacher,
    sample_outcomes,
)

__version__ = "0.1.0"
