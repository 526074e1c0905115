"""End-to-end pipeline and scikit-learn style wrapper.

The feasible pipeline chains the stages in order: fold assignment,
cross-fitted nuisances, doubly robust pseudo-outcomes, variance weights,
penalty selection, Lasso, nodewise inverse, debiasing, and intervals.
:func:`fit_wtdl` exposes every intermediate product; :class:`WtdlCate`
wraps it behind the usual fit/predict interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import ObservationSet, validate
from .errors import DataError
from .inference import EstimationParts, WtdlEstimate, estimate_from_weighted
from .lasso import LassoFit, select_lambda
from .nodewise import NodewiseInverse
from .nuisance import FoldAssignment, NuisanceFit, NuisanceSettings, assign_folds, cross_fit
from .scores import (
    WeightedProblem,
    build_pseudo_outcomes,
    build_weighted,
    estimate_weights,
)

__all__ = ["WtdlResult", "fit_wtdl", "WtdlCate"]


@dataclass(frozen=True)
class WtdlResult:
    """All artifacts of one feasible pipeline run."""

    folds: FoldAssignment
    fits: list[NuisanceFit]
    parts: EstimationParts

    @property
    def wp(self) -> WeightedProblem:
        return self.parts.wp

    @property
    def lam(self) -> float:
        return self.parts.lam

    @property
    def lasso_fit(self) -> LassoFit:
        return self.parts.fit

    @property
    def theta(self) -> NodewiseInverse:
        return self.parts.theta

    @property
    def estimate(self) -> WtdlEstimate:
        return self.parts.estimate


def fit_wtdl(
    obs: ObservationSet,
    m: int = 2,
    lambda_method: str = "theory",
    lambda_constant: float = 1.0,
    cv_folds: int = 5,
    weight_mode: str = "constant_per_arm",
    weight_floor: float = 1e-3,
    alpha: float = 0.05,
    seed: int = 0,
    nuisance_settings: NuisanceSettings | None = None,
    nodewise_constant: float | None = None,
    lasso_tol: float = 1e-7,
    nodewise_tol: float = 1e-10,
    max_iter: int = 100_000,
) -> WtdlResult:
    """Run the full feasible pipeline on one observation set.

    ``seed`` drives fold assignment and, when ``lambda_method="cv"``, the
    cross-validation shuffle; everything else is deterministic.  The
    nodewise penalties use the theory rule with ``nodewise_constant``
    (defaulting to ``lambda_constant``).

    Raises
    ------
    DataError
        If the observations fail :func:`wtdl.data.validate` or are too
        few to split into m folds.
    """
    problems = validate(obs)
    if problems:
        raise DataError("; ".join(problems))
    if obs.n < 2 * m:
        raise DataError(f"need n >= 2m observations, got n={obs.n}, m={m}")

    folds = assign_folds(obs.n, m, seed)
    fits = cross_fit(obs, folds, nuisance_settings)
    q_dml = build_pseudo_outcomes(obs, folds, fits)
    sigma = estimate_weights(obs, folds, fits, mode=weight_mode, floor=weight_floor)
    wp = build_weighted(obs, q_dml, sigma)
    lam = select_lambda(
        wp.w, wp.q_wdml, lambda_method,
        cv_folds=cv_folds, seed=seed, constant=lambda_constant,
    )
    parts = estimate_from_weighted(
        wp, lam, alpha=alpha,
        nodewise_constant=lambda_constant if nodewise_constant is None else nodewise_constant,
        lasso_tol=lasso_tol, nodewise_tol=nodewise_tol, max_iter=max_iter,
    )
    return WtdlResult(folds=folds, fits=fits, parts=parts)


class WtdlCate(BaseEstimator):
    """Treatment effect coefficients with debiased intervals.

    Fits a linear conditional average treatment effect model
    tau(x) = x @ beta under sparsity, using cross-fitted doubly robust
    scores, variance weighting, a Lasso selection stage, and a nodewise
    debiasing stage that yields per-coefficient normal intervals.

    Parameters
    ----------
    m : int
        Number of cross-fitting folds.
    lambda_method : {"theory", "cv"}
        Penalty selection rule for the Lasso stage.
    lambda_constant : float
        Multiplier of the theory rate sqrt(log(p)/n) * sd(response).
    cv_folds : int
        Folds for penalty cross-validation when lambda_method="cv".
    weight_mode : {"constant_per_arm", "covariate_dependent"}
        How conditional noise scales are estimated.
    weight_floor : float
        Lower bound on the estimated noise scale.
    alpha : float
        Miscoverage level of the reported intervals.
    seed : int
        Seed for fold assignment and cross-validation shuffles.
    ridge_outcome, ridge_propensity : float or None
        Nuisance penalties; None means 1/sqrt(n).
    clip : float
        Propensity clipping constant.

    Attributes
    ----------
    coef_ : ndarray of shape (p,)
        Debiased coefficient estimates.
    lasso_coef_ : ndarray of shape (p,)
        Coefficients of the selection stage.
    se_ : ndarray of shape (p,)
        Standard errors of ``coef_``.
    ci_ : ndarray of shape (p, 2)
        Confidence interval rows [lower, upper].
    lambda_ : float
        Penalty used by the selection stage.
    result_ : WtdlResult
        Full pipeline artifacts.
    """

    def __init__(
        self,
        m: int = 2,
        lambda_method: str = "theory",
        lambda_constant: float = 1.0,
        cv_folds: int = 5,
        weight_mode: str = "constant_per_arm",
        weight_floor: float = 1e-3,
        alpha: float = 0.05,
        seed: int = 0,
        ridge_outcome: float | None = None,
        ridge_propensity: float | None = None,
        clip: float = 0.05,
    ):
        self.m = m
        self.lambda_method = lambda_method
        self.lambda_constant = lambda_constant
        self.cv_folds = cv_folds
        self.weight_mode = weight_mode
        self.weight_floor = weight_floor
        self.alpha = alpha
        self.seed = seed
        self.ridge_outcome = ridge_outcome
        self.ridge_propensity = ridge_propensity
        self.clip = clip

    def fit(self, X, y, d):
        """Fit on covariates X, outcomes y, and binary treatments d."""
        obs = ObservationSet(
            y=np.asarray(y, dtype=np.float64),
            d=np.asarray(d, dtype=np.float64),
            x=np.asarray(X, dtype=np.float64),
        )
        settings = NuisanceSettings(
            ridge_outcome=self.ridge_outcome,
            ridge_propensity=self.ridge_propensity,
            clip=self.clip,
        )
        result = fit_wtdl(
            obs,
            m=self.m,
            lambda_method=self.lambda_method,
            lambda_constant=self.lambda_constant,
            cv_folds=self.cv_folds,
            weight_mode=self.weight_mode,
            weight_floor=self.weight_floor,
            alpha=self.alpha,
            seed=self.seed,
            nuisance_settings=settings,
        )
        est = result.estimate
        self.result_ = result
        self.coef_ = est.b
        self.lasso_coef_ = est.beta_lasso
        self.se_ = est.se
        self.ci_ = est.ci
        self.lambda_ = est.lam
        self.n_features_in_ = obs.p
        return self

    def predict(self, X):
        """Predict treatment effects x @ coef_ for new covariate rows."""
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X must have shape (k, {self.n_features_in_}), got {X.shape}"
            )
        return X @ self.coef_
