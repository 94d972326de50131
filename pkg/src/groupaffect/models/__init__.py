"""Regression back-ends: exact GP, lasso, random forest, linear eps-SVR."""

from groupaffect.models.api import (
    MIN_TRAIN,
    MeanModel,
    Prediction,
    TrainedModel,
    dump_model,
    fit,
    fit_predict,
    inner_cv_rmse,
    lasso_lambda_grid,
    load_model,
)
from groupaffect.models.forest import ForestModel, rf_fit
from groupaffect.models.gp import (
    Degenerate,
    DimensionMismatch,
    GpHyper,
    GpModel,
    NotPositiveDefinite,
    gp_fit,
    gp_predict,
    lml_and_grad,
    se_gram,
    se_kernel,
)
from groupaffect.models.lasso import (
    LassoModel,
    lasso_fit,
    lasso_kkt_residuals,
    lasso_lambda_max,
)
from groupaffect.models.svr import SvrModel, svr_fit

__all__ = [
    "MIN_TRAIN", "MeanModel", "Prediction", "TrainedModel", "dump_model",
    "fit", "fit_predict", "inner_cv_rmse", "lasso_lambda_grid", "load_model",
    "ForestModel", "rf_fit", "Degenerate", "DimensionMismatch", "GpHyper",
    "GpModel", "NotPositiveDefinite", "gp_fit", "gp_predict", "lml_and_grad",
    "se_gram", "se_kernel", "LassoModel", "lasso_fit", "lasso_kkt_residuals",
    "lasso_lambda_max", "SvrModel", "svr_fit",
]
