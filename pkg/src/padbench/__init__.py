"""Diagnostics for evaluating probabilistic models and their posterior
approximators across recoverability, calibration, prediction, parsimony,
robustness, fairness, causal consistency and convergence."""

__version__ = "0.1.0"

from .draws import DrawsTensor, Pushforward, SummaryStatistic  # noqa: E402
from .models import Dataset, ExactPosterior, RandomWalkMetropolis, get_approximator, get_model  # noqa: E402

__all__ = [
    "DrawsTensor",
    "Pushforward",
    "SummaryStatistic",
    "Dataset",
    "ExactPosterior",
    "RandomWalkMetropolis",
    "get_approximator",
    "get_model",
    "__version__",
]
