"""Group-based prediction of momentary negative affect from phone sensing data.

Pipeline: raw behavioral streams -> semantic mobility timelines -> per-EMA
features and per-participant behavior profiles -> participant grouping
(G-means / questionnaire cutoffs) -> per-group regression models evaluated
against a generalized model by weighted RMSE.
"""

__version__ = "0.1.0"

from groupaffect.errors import GroupAffectError, ValidationError

__all__ = ["GroupAffectError", "ValidationError", "__version__"]
