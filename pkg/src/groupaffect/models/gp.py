"""Exact Gaussian-process regression with the squared-exponential kernel

    K(x, x') = theta_s^2 exp(-||x - x'||^2 / (2 theta_l^2))

trained by maximizing the log marginal likelihood over log hyperparameters
(y-scale, x-scale, noise std) with analytic gradients and random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import cho_solve, cholesky, lapack
from scipy.spatial.distance import cdist

from groupaffect.errors import ValidationError

JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
MAX_TRAIN_N = 4000


class DimensionMismatch(ValidationError):
    def __init__(self, d1: int, d2: int):
        super().__init__(f"input dimensions differ: {d1} vs {d2}")


class NotPositiveDefinite(ValidationError):
    def __init__(self):
        super().__init__(f"kernel matrix not positive definite at max jitter {JITTERS[-1]}")


class Degenerate(ValidationError):
    def __init__(self, n: int):
        super().__init__(f"GP needs at least 2 training rows, got {n}")


@dataclass(frozen=True)
class GpHyper:
    theta_s: float  # y-scale
    theta_l: float  # x-scale
    sigma_n: float  # observation noise std

    def __post_init__(self):
        for name in ("theta_s", "theta_l", "sigma_n"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")

    def log_array(self) -> np.ndarray:
        return np.log([self.theta_s, self.theta_l, self.sigma_n])


def se_kernel(x, xp, hyper: GpHyper) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if x.shape != xp.shape:
        raise DimensionMismatch(x.shape[-1], xp.shape[-1])
    d2 = float(np.sum((x - xp) ** 2))
    return hyper.theta_s**2 * float(np.exp(-d2 / (2.0 * hyper.theta_l**2)))


def se_gram(X, X2, hyper: GpHyper) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X.shape[1] != X2.shape[1]:
        raise DimensionMismatch(X.shape[1], X2.shape[1])
    d2 = cdist(X, X2, "sqeuclidean")
    return hyper.theta_s**2 * np.exp(-d2 / (2.0 * hyper.theta_l**2))


def _chol_jitter(K: np.ndarray) -> np.ndarray:
    for jitter in JITTERS:
        try:
            return cholesky(K + jitter * np.eye(len(K)), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite()


def _spd_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of L L^T from its Cholesky factor."""
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise NotPositiveDefinite()
    return np.tril(inv) + np.tril(inv, -1).T


def lml_and_grad(D2: np.ndarray, yc: np.ndarray,
                 log_hyper: np.ndarray) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient w.r.t. log(theta_s, theta_l,
    sigma_n). D2 is the precomputed squared-distance matrix of the inputs."""
    theta_s, theta_l, sigma_n = np.exp(log_hyper)
    n = len(yc)
    K = theta_s**2 * np.exp(-D2 / (2.0 * theta_l**2))
    Ky = K + sigma_n**2 * np.eye(n)
    L = _chol_jitter(Ky)
    alpha = cho_solve((L, True), yc)
    lml = (-0.5 * float(yc @ alpha)
           - float(np.sum(np.log(np.diag(L))))
           - 0.5 * n * np.log(2.0 * np.pi))
    A = np.outer(alpha, alpha) - _spd_inverse(L)
    # dK/dlog(theta_s) = 2K ; dK/dlog(theta_l) = K * D2 / theta_l^2 ;
    # dKy/dlog(sigma_n) = 2 sigma_n^2 I ; grad_i = 0.5 tr(A dK_i)
    grad_s = float(np.sum(A * K))
    grad_l = 0.5 * float(np.sum(A * K * D2)) / theta_l**2
    grad_n = sigma_n**2 * float(np.trace(A))
    return lml, np.array([grad_s, grad_l, grad_n])


@dataclass
class GpModel:
    kind: str
    hyper: GpHyper
    X_train: np.ndarray
    y_mean: float
    alpha: np.ndarray
    L: np.ndarray
    lml: float
    seed: int
    flags: list[str] = field(default_factory=list)

    def predict(self, Xte: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and (latent, noise-free) variance, clamped at 0."""
        Kts = se_gram(np.atleast_2d(Xte), self.X_train, self.hyper)
        mean = Kts @ self.alpha + self.y_mean
        v = np.linalg.solve(self.L, Kts.T)
        var = self.hyper.theta_s**2 - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)


def _search_bounds(D2: np.ndarray, yc: np.ndarray) -> list[tuple[float, float]]:
    sy = max(float(np.std(yc)), 1e-8)
    off_diag = D2[D2 > 0]
    ell = float(np.sqrt(np.median(off_diag))) if len(off_diag) else 1.0
    ell = max(ell, 1e-8)
    return [(np.log(1e-3 * sy), np.log(10.0 * sy)),
            (np.log(1e-3 * ell), np.log(1e3 * ell)),
            (np.log(1e-4 * sy), np.log(10.0 * sy))]


def gp_fit(X: np.ndarray, y: np.ndarray, seed: int = 0, restarts: int = 5,
           max_iter: int = 50, max_n: int = MAX_TRAIN_N) -> GpModel:
    """Type-II maximum likelihood fit with `restarts` L-BFGS-B starts in
    log-hyperparameter space; the first start is data-driven, the rest are
    drawn uniformly inside the search box."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2:
        raise Degenerate(n)
    flags = []
    rng = np.random.default_rng(seed)
    if n > max_n:
        keep = np.sort(rng.choice(n, size=max_n, replace=False))
        X, y = X[keep], y[keep]
        flags.append(f"subsampled_{n}_to_{max_n}")
        n = max_n
    y_mean = float(np.mean(y))
    yc = y - y_mean
    D2 = cdist(X, X, "sqeuclidean")
    bounds = _search_bounds(D2, yc)

    def objective(log_hyper: np.ndarray) -> tuple[float, np.ndarray]:
        try:
            lml, grad = lml_and_grad(D2, yc, log_hyper)
        except NotPositiveDefinite:
            return 1e25, np.zeros(3)
        return -lml, -grad

    sy = max(float(np.std(yc)), 1e-8)
    ell0 = np.exp(0.5 * (bounds[1][0] + bounds[1][1]))  # median pairwise distance
    starts = [np.log([sy, ell0, 0.1 * sy])]
    for _ in range(max(0, restarts - 1)):
        starts.append(np.array([rng.uniform(lo, hi) for lo, hi in bounds]))

    best = None
    for x0 in starts:
        res = optimize.minimize(objective, x0, jac=True, method="L-BFGS-B",
                                bounds=bounds, options={"maxiter": max_iter})
        if best is None or res.fun < best.fun:
            best = res
    theta_s, theta_l, sigma_n = np.exp(best.x)
    hyper = GpHyper(theta_s, theta_l, sigma_n)
    Ky = theta_s**2 * np.exp(-D2 / (2.0 * theta_l**2)) + sigma_n**2 * np.eye(n)
    L = _chol_jitter(Ky)
    alpha = cho_solve((L, True), yc)
    return GpModel("gp", hyper, X, y_mean, alpha, L, -float(best.fun), seed, flags)


def gp_predict(model: GpModel, Xte: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(Xte)
