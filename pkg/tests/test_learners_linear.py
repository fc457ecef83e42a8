"""OLS / ridge / lasso against closed-form reference solutions."""

import numpy as np
import pytest

from panelfit.errors import RankDeficientError
from panelfit.learners import (
    DesignMatrix,
    fit_lasso,
    fit_null,
    fit_ols,
    fit_ridge,
    lasso_lambda_max,
    soft_threshold,
)


def design(n=80, m=5, seed=0, beta=None, noise=0.1):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, m))
    if beta is None:
        beta = rng.normal(size=m)
    y = 2.5 + x @ beta + rng.normal(size=n) * noise
    names = [f"f{j}" for j in range(m)]
    return DesignMatrix(x, names, y), beta


def test_null_model_predicts_mean():
    d, _ = design()
    model = fit_null(d)
    assert model.mean == pytest.approx(d.response.mean(), abs=1e-14)
    pred = model.predict(d.features[:7])
    assert np.all(pred == model.mean)


# -- OLS ----------------------------------------------------------------------

def test_ols_matches_normal_equations():
    d, _ = design(n=120, m=6, seed=1)
    model = fit_ols(d)
    a = np.column_stack([np.ones(d.n_rows), d.features])
    ref = np.linalg.solve(a.T @ a, a.T @ d.response)
    assert abs(model.intercept - ref[0]) < 1e-9
    np.testing.assert_allclose(model.coefficients, ref[1:], atol=1e-9)
    pred = model.predict(d.features)
    np.testing.assert_allclose(pred, a @ ref, atol=1e-9)


def test_ols_recovers_noiseless_coefficients():
    d, beta = design(n=60, m=4, seed=2, noise=0.0)
    model = fit_ols(d)
    np.testing.assert_allclose(model.coefficients, beta, atol=1e-10)
    assert model.intercept == pytest.approx(2.5, abs=1e-10)


def test_ols_flags_rank_deficiency_by_name():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 3))
    x = np.column_stack([x, x[:, 0] * 2.0])      # f3 = 2*f0
    y = rng.normal(size=40)
    d = DesignMatrix(x, ["f0", "f1", "f2", "f3"], y)
    with pytest.raises(RankDeficientError) as ei:
        fit_ols(d)
    assert "f3" in str(ei.value) or "f0" in str(ei.value)


# -- ridge ---------------------------------------------------------------------

def ridge_closed_form(d, lam):
    # standardized closed form: (Z'Z + lam*I)^-1 Z'yc, then unstandardize
    mu = d.features.mean(axis=0)
    sd = d.features.std(axis=0)
    z = (d.features - mu) / sd
    yc = d.response - d.response.mean()
    m = d.n_features
    beta_z = np.linalg.solve(z.T @ z + lam * np.eye(m), z.T @ yc)
    beta = beta_z / sd
    intercept = d.response.mean() - mu @ beta
    return intercept, beta


@pytest.mark.parametrize("lam", [0.1, 1.0, 25.0])
def test_ridge_matches_closed_form(lam):
    d, _ = design(n=90, m=5, seed=4)
    model = fit_ridge(d, lam=lam)
    b0, beta = ridge_closed_form(d, lam)
    assert abs(model.intercept - b0) < 1e-8
    np.testing.assert_allclose(model.coefficients, beta, atol=1e-8)


def test_ridge_zero_lambda_equals_ols():
    d, _ = design(n=70, m=4, seed=5)
    ridge = fit_ridge(d, lam=0.0)
    ols = fit_ols(d)
    assert abs(ridge.intercept - ols.intercept) < 1e-8
    np.testing.assert_allclose(ridge.coefficients, ols.coefficients, atol=1e-8)


def test_ridge_shrinks_toward_zero():
    d, _ = design(n=50, m=3, seed=6)
    small = np.linalg.norm(fit_ridge(d, lam=0.01).coefficients)
    big = np.linalg.norm(fit_ridge(d, lam=1000.0).coefficients)
    assert big < small
    with pytest.raises(ValueError):
        fit_ridge(d, lam=-1.0)


def test_ridge_rejects_constant_column():
    x = np.column_stack([np.ones(30), np.arange(30.0)])
    d = DesignMatrix(x, ["c", "t"], np.arange(30.0))
    with pytest.raises(RankDeficientError):
        fit_ridge(d, lam=1.0)


# -- lasso ---------------------------------------------------------------------

def test_soft_threshold_cases():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(2.0, 0.0) == 2.0


def test_lasso_lambda_max_kills_every_coefficient():
    d, _ = design(n=100, m=6, seed=7)
    lam_max = lasso_lambda_max(d)
    for lam in (lam_max, lam_max * 1.5):
        model = fit_lasso(d, lam=lam)
        assert np.all(model.coefficients == 0.0)
        assert model.intercept == pytest.approx(d.response.mean(), abs=1e-12)
    # just below the knee at least one coefficient activates
    below = fit_lasso(d, lam=lam_max * 0.99)
    assert np.any(below.coefficients != 0.0)


def test_lasso_orthonormal_equals_soft_thresholded_ols():
    # build features with Z'Z/n = I on the standardized scale
    rng = np.random.default_rng(8)
    n, m = 64, 5
    q, _ = np.linalg.qr(rng.normal(size=(n, m)))
    z = (q - q.mean(axis=0)) / q.std(axis=0)
    q2, _ = np.linalg.qr(z)
    z = q2 * np.sqrt(n)                      # columns: mean ~0, Z'Z = n*I
    z = (z - z.mean(axis=0))
    z = z / z.std(axis=0)
    # force exact orthonormality of the standardized design
    u, _, vt = np.linalg.svd(z, full_matrices=False)
    z = u @ vt * np.sqrt(n)
    z = (z - z.mean(axis=0)) / z.std(axis=0)
    y = z @ np.array([3.0, -2.0, 1.0, 0.5, 0.0]) + rng.normal(size=n) * 0.05
    d = DesignMatrix(z, [f"f{j}" for j in range(m)], y)

    gram = (d.features - d.features.mean(0)) / d.features.std(0)
    gram = gram.T @ gram / n
    if not np.allclose(gram, np.eye(m), atol=1e-6):
        pytest.skip("fixture failed to orthonormalize")

    lam = 0.4
    model = fit_lasso(d, lam=lam)
    # reference: soft-threshold the standardized OLS solution
    zc = (d.features - d.features.mean(0)) / d.features.std(0)
    yc = y - y.mean()
    beta_ols_z = zc.T @ yc / n               # since Z'Z/n = I
    expect_z = np.array([soft_threshold(b, lam) for b in beta_ols_z])
    got_z = model.coefficients * d.features.std(0)
    np.testing.assert_allclose(got_z, expect_z, atol=1e-6)


def test_lasso_zero_lambda_approaches_ols():
    d, _ = design(n=80, m=4, seed=9)
    lasso = fit_lasso(d, lam=1e-10)
    ols = fit_ols(d)
    np.testing.assert_allclose(lasso.coefficients, ols.coefficients, atol=1e-5)


def test_lasso_records_sweeps_and_rejects_negative_lambda():
    d, _ = design(n=50, m=3, seed=10)
    model = fit_lasso(d, lam=0.05)
    assert model.hyperparameters["sweeps"] >= 1
    assert model.hyperparameters["lambda"] == 0.05
    with pytest.raises(ValueError):
        fit_lasso(d, lam=-0.1)


def test_linear_predict_shape_checks():
    d, _ = design(n=40, m=3, seed=11)
    model = fit_ols(d)
    with pytest.raises(ValueError):
        model.predict(np.ones((5, 2)))
    with pytest.raises(ValueError):
        model.predict(np.array([[1.0, np.nan, 2.0]]))
