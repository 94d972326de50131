"""Linear epsilon-insensitive SVR trained by dual coordinate descent.

Minimizes 1/2 ||w||^2 + C sum max(0, |y_i - w.x_i| - eps) on centered
targets; the intercept is the target mean, so as C -> 0 predictions revert
to it. Convergence is declared when the duality gap drops below tol * n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from groupaffect.errors import ValidationError

GAP_TOL_PER_ROW = 1e-4
MAX_SWEEPS = 2000


@njit(cache=True)
def _dual_cd(X, y, C, eps, tol_gap, max_sweeps):
    """Coordinate descent on the beta formulation of the SVR dual.

    min_beta 1/2 beta^T Q beta + eps ||beta||_1 - y^T beta,
    Q = X X^T, beta_i in [-C, C]; w = X^T beta maintained incrementally.
    """
    n, d = X.shape
    beta = np.zeros(n)
    w = np.zeros(d)
    qii = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += X[i, j] * X[i, j]
        qii[i] = s
    gap = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        for i in range(n):
            wx = 0.0
            for j in range(d):
                wx += w[j] * X[i, j]
            target = qii[i] * beta[i] - (wx - y[i])
            mag = abs(target) - eps
            if mag <= 0.0:
                z = 0.0
            elif qii[i] > 0.0:
                z = np.sign(target) * mag / qii[i]
            else:
                z = np.sign(target) * C
            if z > C:
                z = C
            elif z < -C:
                z = -C
            delta = z - beta[i]
            if delta != 0.0:
                beta[i] = z
                for j in range(d):
                    w[j] += delta * X[i, j]
        # duality gap: primal(w) - dual(beta)
        primal = 0.0
        dual = 0.0
        for j in range(d):
            primal += 0.5 * w[j] * w[j]
            dual -= 0.5 * w[j] * w[j]
        for i in range(n):
            wx = 0.0
            for j in range(d):
                wx += w[j] * X[i, j]
            slack = abs(y[i] - wx) - eps
            if slack > 0.0:
                primal += C * slack
            dual += y[i] * beta[i] - eps * abs(beta[i])
        gap = primal - dual
        if gap <= tol_gap:
            break
    return w, beta, gap, sweeps


@dataclass
class SvrModel:
    kind: str
    w: np.ndarray
    intercept_: float
    C: float
    epsilon: float
    gap: float
    n_sweeps: int
    flags: list[str] = field(default_factory=list)
    beta: np.ndarray | None = None  # dual variables; absent after load

    def predict(self, Xte: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(Xte, dtype=float)) @ self.w + self.intercept_


def svr_fit(X: np.ndarray, y: np.ndarray, C: float = 1.0, epsilon: float = 1.0,
            gap_tol_per_row: float = GAP_TOL_PER_ROW,
            max_sweeps: int = MAX_SWEEPS) -> SvrModel:
    if C <= 0:
        raise ValidationError(f"C must be > 0, got {C}")
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    y = np.asarray(y, dtype=float)
    n = len(y)
    if X.shape[0] != n or n == 0:
        raise ValidationError("X and y length mismatch or empty")
    y_mean = float(y.mean())
    yc = np.ascontiguousarray(y - y_mean)
    w, beta, gap, sweeps = _dual_cd(X, yc, C, epsilon, gap_tol_per_row * n,
                                    max_sweeps)
    return SvrModel("svr", w, y_mean, C, epsilon, float(gap), int(sweeps),
                    beta=beta)
