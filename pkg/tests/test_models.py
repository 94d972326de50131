import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupaffect.config import derive_seed
from groupaffect.errors import ValidationError
from groupaffect.models import (
    Degenerate,
    DimensionMismatch,
    GpHyper,
    GpModel,
    MeanModel,
    dump_model,
    fit,
    fit_predict,
    gp_fit,
    lasso_fit,
    lasso_kkt_residuals,
    lasso_lambda_grid,
    lasso_lambda_max,
    lml_and_grad,
    load_model,
    rf_fit,
    se_gram,
    se_kernel,
    svr_fit,
)
from groupaffect.models.gp import _chol_jitter
from scipy.linalg import cho_solve
from scipy.spatial.distance import cdist


def test_se_kernel_examples():
    h = GpHyper(2.0, 1.0, 0.1)
    assert se_kernel([1.0, 2.0], [1.0, 2.0], h) == 4.0
    h1 = GpHyper(1.0, 1.0, 0.1)
    assert se_kernel([0.0], [1.0], h1) == pytest.approx(np.exp(-0.5), abs=1e-12)
    vals = [se_kernel([0.0], [d], h1) for d in (1.0, 2.0, 5.0, 20.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(DimensionMismatch):
        se_kernel([0.0, 1.0], [0.0], h1)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_gram_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rng.integers(2, 40), rng.integers(1, 6)))
    h = GpHyper(float(rng.uniform(0.2, 5)), float(rng.uniform(0.2, 5)), 0.1)
    K = se_gram(X, X, h)
    assert float(np.max(np.abs(K - K.T))) <= 1e-12
    assert float(np.linalg.eigvalsh(K).min()) >= -1e-8


def test_lml_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, d = int(rng.integers(10, 60)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n) * float(rng.uniform(0.5, 3))
        yc = y - y.mean()
        D2 = cdist(X, X, "sqeuclidean")
        log_h = rng.uniform(np.log(0.3), np.log(3.0), size=3)
        _, grad = lml_and_grad(D2, yc, log_h)
        h = 1e-5
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            f_plus, _ = lml_and_grad(D2, yc, log_h + e)
            f_minus, _ = lml_and_grad(D2, yc, log_h - e)
            fd = (f_plus - f_minus) / (2 * h)
            denom = max(abs(fd), abs(grad[i]), 1e-10)
            assert abs(grad[i] - fd) / denom <= 1e-4


def gp_from_hyper(X, y, hyper: GpHyper) -> GpModel:
    """Build a GP posterior directly from fixed hyperparameters."""
    y_mean = float(np.mean(y))
    Ky = se_gram(X, X, hyper)
    Ky[np.diag_indices_from(Ky)] += hyper.sigma_n**2
    L = _chol_jitter(Ky)
    alpha = cho_solve((L, True), y - y_mean)
    return GpModel("gp", hyper, np.atleast_2d(X), y_mean, alpha, L, 0.0, 0)


def test_gp_interpolates_training_points():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 5, size=(25, 1))
    y = np.sin(X[:, 0]) * 3 + 10
    model = gp_from_hyper(X, y, GpHyper(3.0, 1.0, 1e-6))
    mean, var = model.predict(X)
    np.testing.assert_allclose(mean, y, atol=1e-3)
    assert np.all(var >= 0)


def test_gp_prior_reversion_far_away():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, size=(30, 2))
    y = rng.normal(10, 2, size=30)
    hyper = GpHyper(2.5, 0.5, 0.3)
    model = gp_from_hyper(X, y, hyper)
    mean, var = model.predict(np.array([[50.0, 50.0]]))
    assert mean[0] == pytest.approx(np.mean(y), abs=1e-9)
    assert var[0] == pytest.approx(hyper.theta_s**2, abs=1e-9)


def test_gp_posterior_matches_dense_oracle():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30) * 2 + 5
    Xte = rng.normal(size=(7, 3))
    hyper = GpHyper(1.7, 1.2, 0.4)
    model = gp_from_hyper(X, y, hyper)
    mean, var = model.predict(Xte)
    # independent dense recomputation
    Ky = se_gram(X, X, hyper) + hyper.sigma_n**2 * np.eye(30)
    Ks = se_gram(Xte, X, hyper)
    yc = y - y.mean()
    want_mean = Ks @ np.linalg.solve(Ky, yc) + y.mean()
    want_var = hyper.theta_s**2 - np.einsum(
        "ij,ij->i", Ks, (np.linalg.inv(Ky) @ Ks.T).T)
    np.testing.assert_allclose(mean, want_mean, atol=1e-8)
    np.testing.assert_allclose(var, np.maximum(want_var, 0), atol=1e-8)


def test_gp_fit_recovers_hyper():
    truth = GpHyper(2.0, 1.5, 0.05)
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 5, size=(50, 1))
        K = se_gram(X, X, truth)
        y = rng.multivariate_normal(np.zeros(50), K + 1e-10 * np.eye(50))
        model = gp_fit(X, y, seed=seed)
        ok = (abs(np.log(model.hyper.theta_s) - np.log(truth.theta_s)) <= 0.5
              and abs(np.log(model.hyper.theta_l) - np.log(truth.theta_l)) <= 0.5)
        hits += ok
    assert hits >= 16


def test_gp_constant_target():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 2))
    y = np.full(20, 42.0)
    model = gp_fit(X, y, seed=0)
    mean, var = model.predict(X)
    np.testing.assert_allclose(mean, 42.0, atol=1e-6)
    assert np.all(var <= 1e-6)


def test_gp_degenerate():
    with pytest.raises(Degenerate):
        gp_fit(np.array([[1.0]]), np.array([2.0]))


def test_gp_subsample_cap():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(60, 1))
    y = rng.normal(size=60)
    model = gp_fit(X, y, seed=0, max_n=40)
    assert model.flags == ["subsampled_60_to_40"]
    assert len(model.X_train) == 40


def test_lasso_zero_lambda_equals_least_squares():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(80, 5))
    y = X @ np.array([1.5, -2.0, 0.0, 3.0, 0.5]) + rng.normal(0, 0.3, 80) + 4
    model = lasso_fit(X, y, lam=0.0)
    A = np.hstack([np.ones((80, 1)), X])
    ls = np.linalg.lstsq(A, y, rcond=None)[0]
    assert model.intercept_ == pytest.approx(ls[0], abs=1e-6)
    np.testing.assert_allclose(model.coef_, ls[1:], atol=1e-6)


def test_lasso_full_shrinkage_at_lambda_max():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, 4))
    y = X[:, 0] * 2 + rng.normal(size=50)
    lam_max = lasso_lambda_max(X, y)
    model = lasso_fit(X, y, lam=lam_max)
    np.testing.assert_allclose(model.coef_, 0.0, atol=1e-12)
    np.testing.assert_allclose(model.predict(X), y.mean(), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_lasso_kkt_residuals(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(20, 80)), int(rng.integers(2, 8))
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + rng.normal(0, 0.5, n)
    lam = float(rng.uniform(0, 1.2)) * lasso_lambda_max(X, y)
    model = lasso_fit(X, y, lam)
    assert float(lasso_kkt_residuals(model, X, y).max()) <= 1e-6


def test_lasso_objective_non_increasing():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(60, 6))
    y = X @ rng.normal(size=6) + rng.normal(size=60)
    trace: list[float] = []
    lasso_fit(X, y, lam=0.05 * lasso_lambda_max(X, y), trace=trace)
    assert all(a >= b - 1e-12 for a, b in zip(trace, trace[1:]))


def test_rf_constant_target():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(50, 3))
    model = rf_fit(X, np.full(50, 7.5), n_trees=20, seed=0)
    np.testing.assert_allclose(model.predict(X), 7.5, atol=1e-12)


def test_rf_step_function():
    rng = np.random.default_rng(11)
    X = rng.uniform(-1, 1, size=(500, 4))
    h = 10.0
    y = np.where(X[:, 0] > 0, h, 0.0)
    model = rf_fit(X, y, n_trees=100, seed=3)
    Xte = rng.uniform(-1, 1, size=(300, 4))
    yte = np.where(Xte[:, 0] > 0, h, 0.0)
    rmse = float(np.sqrt(np.mean((model.predict(Xte) - yte) ** 2)))
    assert rmse <= 0.1 * h


def test_rf_deterministic():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(100, 5))
    y = X[:, 1] * 2 + rng.normal(size=100)
    p1 = rf_fit(X, y, n_trees=30, seed=7).predict(X)
    p2 = rf_fit(X, y, n_trees=30, seed=7).predict(X)
    np.testing.assert_array_equal(p1, p2)


def test_svr_linear_inside_tube():
    rng = np.random.default_rng(13)
    X = rng.uniform(-3, 3, size=(80, 2))
    y = X @ np.array([0.5, -0.3]) + 20
    model = svr_fit(X, y, C=10.0, epsilon=1.0)
    resid = np.abs(model.predict(X) - y)
    loss = float(np.maximum(resid - model.epsilon, 0).sum())
    assert loss == 0.0


def test_svr_duality_gap():
    rng = np.random.default_rng(14)
    n = 120
    X = rng.normal(size=(n, 4))
    y = X @ rng.normal(size=4) * 3 + rng.normal(0, 1.0, n) + 30
    model = svr_fit(X, y, C=1.0, epsilon=1.0)
    assert model.gap <= 1e-4 * n
    # independent gap recomputation from the returned primal/dual variables
    yc = y - model.intercept_
    w, beta, C, eps = model.w, model.beta, model.C, model.epsilon
    primal = 0.5 * w @ w + C * np.maximum(np.abs(yc - X @ w) - eps, 0).sum()
    dual = -0.5 * w @ w - eps * np.abs(beta).sum() + yc @ beta
    assert primal - dual == pytest.approx(model.gap, rel=1e-9, abs=1e-12)
    assert np.all(np.abs(beta) <= C + 1e-12)


def test_svr_c_to_zero_reverts_to_intercept():
    rng = np.random.default_rng(15)
    X = rng.normal(size=(40, 3))
    y = X @ np.array([5.0, 1.0, -2.0]) + 50
    model = svr_fit(X, y, C=1e-8, epsilon=1.0)
    np.testing.assert_allclose(model.predict(X), y.mean(), atol=1e-5)


def test_fit_small_training_set_falls_back_to_mean():
    X = np.arange(6, dtype=float).reshape(3, 2)
    y = np.array([10.0, 20.0, 30.0])
    for kind in ("gp", "lasso", "rf", "svr"):
        pred = fit_predict(kind, X, y, X, seed=0)
        assert pred.flags == ["train_too_small"]
        np.testing.assert_allclose(pred.mean, 20.0, atol=1e-12)


def test_fit_predict_linear_data():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(120, 4))
    y = X @ np.array([4.0, -3.0, 2.0, 1.0]) + 50
    for kind, bound in (("lasso", 0.5), ("svr", 1.5)):
        pred = fit_predict(kind, X, y, X, seed=1)
        rmse = float(np.sqrt(np.mean((pred.mean - y) ** 2)))
        assert rmse <= bound, (kind, rmse)


def test_lasso_grid_choice_matches_exhaustive_oracle():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(90, 6))
    y = X @ np.array([3.0, 0, 0, -2.0, 0, 1.0]) + rng.normal(0, 2.0, 90) + 40
    seed = 5
    model = fit("lasso", X, y, seed=seed)
    # re-derive the inner-CV scores from scratch with the same fold plan
    mean, scale = X.mean(axis=0), np.where(X.std(axis=0) > 0, X.std(axis=0), 1)
    Xs = (X - mean) / scale
    grid = lasso_lambda_grid(Xs, y)
    perm = np.random.default_rng(derive_seed(seed, "innercv")).permutation(len(y))
    splits = np.array_split(perm, 3)
    scores = []
    for lam in grid:
        errs = []
        for va in splits:
            tr = np.setdiff1d(perm, va)
            m = lasso_fit(Xs[tr], y[tr], float(lam))
            errs.append((m.predict(Xs[va]) - y[va]) ** 2)
        scores.append(np.sqrt(np.mean(np.concatenate(errs))))
    assert model.chosen["lambda"] == pytest.approx(float(grid[int(np.argmin(scores))]))


def test_fit_predict_deterministic_and_sane():
    rng = np.random.default_rng(18)
    X = rng.normal(size=(60, 5))
    y = np.clip(rng.normal(50, 20, size=60), 1, 100)
    lo, hi = 1 - 3 * y.std(), 100 + 3 * y.std()
    for kind in ("gp", "lasso", "rf", "svr"):
        p1 = fit_predict(kind, X, y, X, seed=9)
        p2 = fit_predict(kind, X, y, X, seed=9)
        np.testing.assert_array_equal(p1.mean, p2.mean)
        assert np.all(p1.mean >= lo) and np.all(p1.mean <= hi)
        if kind == "gp":
            assert np.all(p1.variance >= 0)
        else:
            assert np.all(np.isnan(p1.variance))


def test_model_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(19)
    X = rng.normal(size=(40, 3))
    y = X @ np.array([2.0, -1.0, 0.5]) + rng.normal(0, 1, 40) + 30
    Xte = rng.normal(size=(15, 3))
    for kind in ("gp", "lasso", "rf", "svr"):
        model = fit(kind, X, y, seed=2, rf_trees=20)
        path = tmp_path / f"{kind}.model.json"
        dump_model(model, path)
        again = load_model(path)
        m1, v1 = model.predict(Xte)
        m2, v2 = again.predict(Xte)
        np.testing.assert_allclose(m2, m1, atol=1e-12)
        if kind == "gp":
            np.testing.assert_allclose(v2, v1, atol=1e-9)


def test_model_load_rejects_other_files(tmp_path):
    path = tmp_path / "nope.json"
    path.write_text('{"format": "something-else"}', encoding="utf-8")
    with pytest.raises(ValidationError):
        load_model(path)


def test_mean_model_dump_load(tmp_path):
    X = np.zeros((3, 2))
    model = fit("lasso", X, np.array([1.0, 2.0, 3.0]), seed=0)
    assert isinstance(model.inner, MeanModel)
    path = tmp_path / "mean.model.json"
    dump_model(model, path)
    np.testing.assert_allclose(load_model(path).predict(X)[0], 2.0)
