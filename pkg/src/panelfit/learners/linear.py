"""Linear least squares and its penalized variants.

All three fitters share the same standardization contract: ridge and
lasso operate on zero-mean, unit-sd feature columns with the response
centered, keep the intercept unpenalized, and report coefficients back
on the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, RankDeficientError
from .base import DesignMatrix, check_features

LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 10_000


@dataclass
class FittedLinear:
    """Intercept plus one coefficient per feature, on the original scale."""

    intercept: float
    coefficients: np.ndarray
    feature_names: list[str]
    kind: str = "ols"
    hyperparameters: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, features) -> np.ndarray:
        x = check_features(self, features)
        return self.intercept + x @ self.coefficients


def fit_ols(d: DesignMatrix) -> FittedLinear:
    """Ordinary least squares via QR on the intercept-augmented design.

    Raises RankDeficientError naming the collinear columns when the
    design has no unique solution.
    """
    x = np.column_stack([np.ones(d.n_rows), d.features])
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(float).eps * diag.max()
    bad = np.flatnonzero(diag <= tol)
    if bad.size:
        names = ["(intercept)" if j == 0 else d.feature_names[j - 1] for j in bad]
        raise RankDeficientError(names)
    beta = np.linalg.solve(r, q.T @ d.response)
    return FittedLinear(intercept=float(beta[0]), coefficients=beta[1:],
                        feature_names=list(d.feature_names), kind="ols")


def _standardize(d: DesignMatrix):
    means = d.features.mean(axis=0)
    sds = d.features.std(axis=0)
    dead = np.flatnonzero(sds == 0)
    if dead.size:
        raise RankDeficientError([d.feature_names[j] for j in dead])
    z = (d.features - means) / sds
    ybar = float(d.response.mean())
    return z, d.response - ybar, means, sds, ybar


def _unstandardize(beta_std, means, sds, ybar):
    coef = beta_std / sds
    intercept = ybar - float(coef @ means)
    return intercept, coef


def fit_ridge(d: DesignMatrix, lam: float = 1.0) -> FittedLinear:
    """L2-penalized least squares on standardized features.

    Minimizes sum((y - yhat)^2) + lam * sum(beta_j^2) with the penalty on
    the standardized-scale coefficients and no penalty on the intercept.
    Solved as an augmented least-squares system rather than by forming
    the normal equations.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    z, yc, means, sds, ybar = _standardize(d)
    m = d.n_features
    a = np.vstack([z, np.sqrt(lam) * np.eye(m)])
    b = np.concatenate([yc, np.zeros(m)])
    beta_std, *_ = np.linalg.lstsq(a, b, rcond=None)
    intercept, coef = _unstandardize(beta_std, means, sds, ybar)
    return FittedLinear(intercept=intercept, coefficients=coef,
                        feature_names=list(d.feature_names), kind="ridge",
                        hyperparameters={"lambda": lam})


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def lasso_lambda_max(d: DesignMatrix) -> float:
    """Smallest penalty that zeroes every coefficient: max_j |z_j . yc| / n."""
    z, yc, *_ = _standardize(d)
    return float(np.max(np.abs(z.T @ yc)) / d.n_rows)


def fit_lasso(d: DesignMatrix, lam: float = 0.01) -> FittedLinear:
    """L1-penalized least squares by cyclic coordinate descent.

    Minimizes (1/(2n)) * sum((y - yhat)^2) + lam * sum(|beta_j|) on
    standardized features. Each pass soft-thresholds one coordinate at a
    time against the current residual; convergence is declared when the
    largest coefficient change in a sweep drops below 1e-7.

    Raises ConvergenceError (carrying the last iterate and the sweep
    count) if 10,000 sweeps do not converge.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    z, yc, means, sds, ybar = _standardize(d)
    n, m = z.shape
    beta = np.zeros(m)
    resid = yc.copy()
    # unit-variance columns make every coordinate update a plain
    # soft-threshold: z_j . z_j / n == 1
    for sweep in range(1, LASSO_MAX_SWEEPS + 1):
        max_change = 0.0
        for j in range(m):
            old = beta[j]
            rho = float(z[:, j] @ resid) / n + old
            new = soft_threshold(rho, lam)
            if new != old:
                resid -= (new - old) * z[:, j]
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < LASSO_TOL:
            break
    else:
        intercept, coef = _unstandardize(beta, means, sds, ybar)
        err = ConvergenceError(
            f"lasso did not converge in {LASSO_MAX_SWEEPS} sweeps "
            f"(last max change {max_change:.3e})",
            last_coefficients=coef,
            sweeps=LASSO_MAX_SWEEPS,
        )
        raise err
    intercept, coef = _unstandardize(beta, means, sds, ybar)
    return FittedLinear(intercept=intercept, coefficients=coef,
                        feature_names=list(d.feature_names), kind="lasso",
                        hyperparameters={"lambda": lam, "sweeps": sweep})
