import numpy as np
import pytest
from sklearn.base import clone

from wtdl import DataError, ObservationSet, WtdlCate, fit_wtdl
from wtdl.dgp import DgpConfig, generate


def _obs(n=120, p=6, seed=0):
    config = DgpConfig(n=n, p=p, s0=2, beta_values=(2.0, 1.0), seed=seed)
    return generate(config)


def test_pipeline_produces_consistent_artifacts():
    obs, _ = _obs()
    result = fit_wtdl(obs, seed=3)
    est = result.estimate
    assert est.p == obs.p
    assert est.n == obs.n
    assert result.lam == est.lam
    assert np.array_equal(result.lasso_fit.beta, est.beta_lasso)
    assert result.theta.p == obs.p
    assert len(result.fits) == result.folds.m == 2
    assert result.wp.w.shape == (obs.n, obs.p)
    assert np.all(est.se > 0)
    assert np.all(est.ci[:, 0] < est.ci[:, 1])


def test_pipeline_is_deterministic_in_seed():
    obs, _ = _obs(seed=5)
    a = fit_wtdl(obs, seed=7)
    b = fit_wtdl(obs, seed=7)
    c = fit_wtdl(obs, seed=8)
    assert np.array_equal(a.estimate.b, b.estimate.b)
    assert np.array_equal(a.folds.fold_of, b.folds.fold_of)
    assert not np.array_equal(a.folds.fold_of, c.folds.fold_of)


def test_pipeline_estimates_strong_signal():
    config = DgpConfig(n=500, p=10, s0=2, beta_values=(3.0, 2.0), seed=21)
    obs, gt = generate(config)
    result = fit_wtdl(obs, seed=1)
    assert result.estimate.b[:2] == pytest.approx(gt.beta0[:2], abs=0.6)
    # the penalty kills most of the noise coordinates in the pilot
    assert np.count_nonzero(result.lasso_fit.beta[2:]) <= 5


def test_pipeline_rejects_invalid_observations():
    obs, _ = _obs(n=20, p=3, seed=2)
    bad = ObservationSet(y=obs.y, d=np.full(20, 1.0), x=obs.x)
    with pytest.raises(DataError):
        fit_wtdl(bad)
    with pytest.raises(DataError, match="n >= 2m"):
        fit_wtdl(obs, m=11)


def test_pipeline_accepts_cv_penalty():
    obs, _ = _obs(n=150, p=5, seed=9)
    result = fit_wtdl(obs, lambda_method="cv", seed=2)
    assert result.lam > 0
    with pytest.raises(ValueError, match="unknown lambda selection method"):
        fit_wtdl(obs, lambda_method="aic")


def test_sklearn_wrapper_fit_predict():
    obs, gt = _obs(n=200, p=5, seed=4)
    model = WtdlCate(seed=11)
    fitted = model.fit(obs.x, obs.y, obs.d)
    assert fitted is model
    assert model.coef_.shape == (5,)
    assert model.lasso_coef_.shape == (5,)
    assert model.se_.shape == (5,)
    assert model.ci_.shape == (5, 2)
    assert model.lambda_ > 0
    assert model.n_features_in_ == 5
    grid = np.eye(5)
    assert model.predict(grid) == pytest.approx(model.coef_)
    assert model.result_.estimate.alpha == 0.05


def test_sklearn_wrapper_matches_functional_pipeline():
    obs, _ = _obs(n=150, p=4, seed=6)
    model = WtdlCate(seed=3).fit(obs.x, obs.y, obs.d)
    result = fit_wtdl(obs, seed=3)
    assert np.array_equal(model.coef_, result.estimate.b)
    assert model.lambda_ == result.lam


def test_sklearn_params_round_trip():
    model = WtdlCate(m=3, lambda_method="cv", alpha=0.1, clip=0.02)
    params = model.get_params()
    assert params["m"] == 3
    assert params["lambda_method"] == "cv"
    assert params["alpha"] == 0.1
    assert params["clip"] == 0.02
    twin = clone(model)
    assert twin.get_params() == params
    model.set_params(m=4)
    assert model.m == 4


def test_predict_requires_fit_and_matching_width():
    model = WtdlCate()
    with pytest.raises(Exception):
        model.predict(np.ones((2, 3)))
    obs, _ = _obs(n=100, p=3, seed=8)
    model.fit(obs.x, obs.y, obs.d)
    with pytest.raises(ValueError, match=r"shape \(k, 3\)"):
        model.predict(np.ones((2, 4)))


def test_wrapper_forwards_nuisance_settings():
    obs, _ = _obs(n=120, p=4, seed=10)
    model = WtdlCate(ridge_outcome=0.5, ridge_propensity=0.25, clip=0.2, seed=5)
    model.fit(obs.x, obs.y, obs.d)
    diags = [f.diagnostics for f in model.result_.fits]
    assert all(d["ridge_outcome"] == 0.5 for d in diags)
    assert all(d["ridge_propensity"] == 0.25 for d in diags)
    probs = model.result_.fits[0].propensity.predict_proba1(obs.x)
    assert probs.min() >= 0.2
