"""Uniform training interface over the four regression back-ends.

fit() standardizes features on training statistics, tunes the model's
hyperparameter grid by inner 3-fold cross-validation (lambda for lasso,
C for SVR; GP and forest have no grid), refits on the full training split,
and returns a TrainedModel whose predict() yields means plus variances
(variance is NaN for every kind except the GP). Training sets smaller than
MIN_TRAIN fall back to a training-mean predictor with a flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from groupaffect.config import MODEL_KINDS, derive_seed
from groupaffect.errors import ValidationError
from groupaffect.models.forest import ForestModel, rf_fit
from groupaffect.models.gp import GpHyper, GpModel, _chol_jitter, gp_fit, se_gram
from groupaffect.models.lasso import LassoModel, lasso_fit, lasso_lambda_max
from groupaffect.models.svr import SvrModel, svr_fit

MIN_TRAIN = 8
SVR_C_GRID = (0.01, 0.1, 1.0, 10.0)
LASSO_GRID_SIZE = 10
MODEL_FORMAT = "groupaffect-model"
MODEL_FORMAT_VERSION = 1


@dataclass
class MeanModel:
    kind: str
    y_mean: float

    def predict(self, Xte: np.ndarray) -> np.ndarray:
        return np.full(len(np.atleast_2d(Xte)), self.y_mean)


@dataclass
class TrainedModel:
    kind: str
    scaler_mean: np.ndarray
    scaler_scale: np.ndarray
    inner: object
    chosen: dict
    seed: int
    flags: list[str] = field(default_factory=list)

    def predict(self, Xte: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mean, variance); variance is NaN except for the GP."""
        Xte = np.atleast_2d(np.asarray(Xte, dtype=float))
        Xs = (Xte - self.scaler_mean) / self.scaler_scale
        if isinstance(self.inner, GpModel):
            return self.inner.predict(Xs)
        mean = self.inner.predict(Xs)
        return mean, np.full(len(mean), np.nan)


@dataclass
class Prediction:
    mean: np.ndarray
    variance: np.ndarray
    kind: str
    chosen: dict
    flags: list[str]


def _standardizer(Xtr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = Xtr.mean(axis=0)
    scale = Xtr.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def lasso_lambda_grid(Xs: np.ndarray, y: np.ndarray) -> np.ndarray:
    lam_max = lasso_lambda_max(Xs, y)
    if lam_max <= 0:
        return np.array([0.0])
    return np.geomspace(1e-4 * lam_max, lam_max, LASSO_GRID_SIZE)


def inner_cv_rmse(fit_one, Xs: np.ndarray, y: np.ndarray, grid,
                  seed: int, folds: int = 3) -> tuple[np.ndarray, int]:
    """Pooled validation RMSE per grid value over seeded inner folds.

    Returns (scores, argmin index); ties resolve to the first minimum.
    """
    n = len(y)
    perm = np.random.default_rng(seed).permutation(n)
    splits = np.array_split(perm, min(folds, n))
    scores = np.empty(len(grid))
    for gi, value in enumerate(grid):
        sq_errors = []
        for va in splits:
            tr = np.setdiff1d(perm, va)
            model = fit_one(Xs[tr], y[tr], value)
            pred = model.predict(Xs[va])
            sq_errors.append((pred - y[va]) ** 2)
        scores[gi] = float(np.sqrt(np.mean(np.concatenate(sq_errors))))
    return scores, int(np.argmin(scores))


def fit(kind: str, Xtr: np.ndarray, ytr: np.ndarray, seed: int = 0,
        cv_folds: int = 3, gp_restarts: int = 5, gp_max_iter: int = 50,
        rf_trees: int = 200, epsilon: float = 1.0) -> TrainedModel:
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; expected {MODEL_KINDS}")
    Xtr = np.atleast_2d(np.asarray(Xtr, dtype=float))
    ytr = np.asarray(ytr, dtype=float)
    if len(ytr) == 0:
        raise ValidationError("empty training set")
    if Xtr.shape[0] != len(ytr):
        raise ValidationError("X and y length mismatch")

    if len(ytr) < MIN_TRAIN:
        return TrainedModel(kind, np.zeros(Xtr.shape[1]), np.ones(Xtr.shape[1]),
                            MeanModel("mean", float(ytr.mean())), {}, seed,
                            ["train_too_small"])

    mean, scale = _standardizer(Xtr)
    Xs = (Xtr - mean) / scale
    cv_seed = derive_seed(seed, "innercv")

    if kind == "gp":
        inner = gp_fit(Xs, ytr, seed=seed, restarts=gp_restarts,
                       max_iter=gp_max_iter)
        chosen = {"theta_s": inner.hyper.theta_s, "theta_l": inner.hyper.theta_l,
                  "sigma_n": inner.hyper.sigma_n, "lml": inner.lml}
        flags = list(inner.flags)
    elif kind == "lasso":
        grid = lasso_lambda_grid(Xs, ytr)
        _, best = inner_cv_rmse(lambda X, y, lam: lasso_fit(X, y, lam),
                                Xs, ytr, grid, cv_seed, cv_folds)
        inner = lasso_fit(Xs, ytr, float(grid[best]))
        chosen = {"lambda": float(grid[best])}
        flags = []
    elif kind == "rf":
        inner = rf_fit(Xs, ytr, n_trees=rf_trees, seed=seed)
        chosen = {"n_trees": rf_trees, "mtry": inner.mtry,
                  "min_leaf": inner.min_leaf}
        flags = []
    else:  # svr
        grid = np.array(SVR_C_GRID)
        _, best = inner_cv_rmse(
            lambda X, y, C: svr_fit(X, y, C=C, epsilon=epsilon),
            Xs, ytr, grid, cv_seed, cv_folds)
        inner = svr_fit(Xs, ytr, C=float(grid[best]), epsilon=epsilon)
        chosen = {"C": float(grid[best]), "epsilon": epsilon}
        flags = []
    return TrainedModel(kind, mean, scale, inner, chosen, seed, flags)


def fit_predict(kind: str, Xtr: np.ndarray, ytr: np.ndarray, Xte: np.ndarray,
                seed: int = 0, **kwargs) -> Prediction:
    model = fit(kind, Xtr, ytr, seed=seed, **kwargs)
    mean, variance = model.predict(Xte)
    return Prediction(mean, variance, kind, model.chosen, model.flags)


def dump_model(model: TrainedModel, path: Path | str) -> None:
    """Serialize as self-describing JSON; the GP stores its training inputs,
    dual weights, and hyperparameters and rebuilds the factorization at load."""
    inner = model.inner
    if isinstance(inner, GpModel):
        params = {"hyper": [inner.hyper.theta_s, inner.hyper.theta_l,
                            inner.hyper.sigma_n],
                  "X_train": inner.X_train.tolist(),
                  "alpha": inner.alpha.tolist(), "y_mean": inner.y_mean,
                  "lml": inner.lml}
    elif isinstance(inner, LassoModel):
        params = {"coef": inner.coef_.tolist(), "intercept": inner.intercept_,
                  "lambda": inner.lam, "beta_std": inner.beta_std.tolist(),
                  "col_mean": inner.col_mean.tolist(),
                  "col_scale": inner.col_scale.tolist(), "y_mean": inner.y_mean,
                  "n_sweeps": inner.n_sweeps}
    elif isinstance(inner, ForestModel):
        params = {"n_trees": inner.n_trees, "mtry": inner.mtry,
                  "min_leaf": inner.min_leaf,
                  "trees": [[arr.tolist() for arr in tree]
                            for tree in inner.trees]}
    elif isinstance(inner, SvrModel):
        params = {"w": inner.w.tolist(), "intercept": inner.intercept_,
                  "C": inner.C, "epsilon": inner.epsilon, "gap": inner.gap,
                  "n_sweeps": inner.n_sweeps}
    elif isinstance(inner, MeanModel):
        params = {"y_mean": inner.y_mean}
    else:
        raise ValidationError(f"cannot serialize model of type {type(inner)}")
    doc = {"format": MODEL_FORMAT, "version": MODEL_FORMAT_VERSION,
           "kind": model.kind, "inner_kind": inner.kind,
           "scaler_mean": model.scaler_mean.tolist(),
           "scaler_scale": model.scaler_scale.tolist(),
           "chosen": model.chosen, "seed": model.seed, "flags": model.flags,
           "params": params}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path: Path | str) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValidationError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported version {doc.get('version')}")
    params = doc["params"]
    inner_kind = doc["inner_kind"]
    if inner_kind == "gp":
        hyper = GpHyper(*params["hyper"])
        X_train = np.array(params["X_train"])
        y_mean = float(params["y_mean"])
        Ky = se_gram(X_train, X_train, hyper)
        Ky[np.diag_indices_from(Ky)] += hyper.sigma_n**2
        L = _chol_jitter(Ky)
        inner = GpModel("gp", hyper, X_train, y_mean,
                        np.array(params["alpha"]), L, float(params["lml"]),
                        doc["seed"])
    elif inner_kind == "lasso":
        inner = LassoModel("lasso", np.array(params["coef"]),
                           float(params["intercept"]), float(params["lambda"]),
                           np.array(params["beta_std"]),
                           np.array(params["col_mean"]),
                           np.array(params["col_scale"]),
                           float(params["y_mean"]), int(params["n_sweeps"]))
    elif inner_kind == "rf":
        trees = [(np.array(f, dtype=np.int64), np.array(t, dtype=float),
                  np.array(l, dtype=np.int64), np.array(r, dtype=np.int64),
                  np.array(v, dtype=float))
                 for f, t, l, r, v in params["trees"]]
        inner = ForestModel("rf", trees, int(params["n_trees"]),
                            int(params["mtry"]), int(params["min_leaf"]),
                            doc["seed"])
    elif inner_kind == "svr":
        inner = SvrModel("svr", np.array(params["w"]),
                         float(params["intercept"]), float(params["C"]),
                         float(params["epsilon"]), float(params["gap"]),
                         int(params["n_sweeps"]))
    elif inner_kind == "mean":
        inner = MeanModel("mean", float(params["y_mean"]))
    else:
        raise ValidationError(f"{path}: unknown inner kind {inner_kind!r}")
    return TrainedModel(doc["kind"], np.array(doc["scaler_mean"]),
                        np.array(doc["scaler_scale"]), inner, doc["chosen"],
                        doc["seed"], doc["flags"])
