"""Ising multi-purchase choice model: probabilities, estimation, sampling and
assortment optimization."""

from .core import (
    EXACT_LIMIT,
    Domain,
    Instance,
    IsingModel,
    basket_distribution,
    basket_probability,
    binary_to_spin,
    conditional_marginal,
    energy,
    expected_profit_exact,
    log_partition,
    marginal_probabilities,
    marginal_probability,
    spin_to_binary,
)

__version__ = "0.1.0"
