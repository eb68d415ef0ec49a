"""Trade-off analysis toolkit for discrete object-naming systems."""

__version__ = "0.1.0"

from .info import (  # noqa: F401
    ConditionalDistribution,
    Distribution,
    NamingSystem,
    TradeoffPoint,
    accuracy,
    bayesian_decoder,
    complexity,
    decompose_information_loss,
    distance_to_optimal,
    entropy,
    evaluate_system,
    ib_objective_discrete,
    information_loss,
    word_marginal,
)
