"""Cross-fitted nuisance models: outcome regressions and propensity.

Outcome means are fit per treatment arm by ridge-penalized least squares
with an unpenalized intercept.  The propensity is fit by ridge-penalized
logistic regression solved with Newton steps and step halving.  Fold
assignment is a uniformly random balanced partition; each fold's models
are trained only on the complement of that fold, so predictions for a
row never touch the row itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import ObservationSet
from .errors import DataError, NumericalError

__all__ = [
    "LinearModel",
    "LogisticModel",
    "NuisanceModels",
    "NuisanceFit",
    "FoldAssignment",
    "NuisanceSettings",
    "assign_folds",
    "ridge_solve",
    "fit_outcome",
    "fit_propensity",
    "fit_all",
    "cross_fit",
]

IRLS_MAX_ITER = 100
IRLS_GRAD_TOL = 1e-8


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor ``x @ coef + intercept``."""

    intercept: float
    coef: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.coef + self.intercept


@dataclass(frozen=True)
class LogisticModel:
    """Clipped logistic predictor for P(D=1 | x).

    Probabilities are clipped to [clip, 1 - clip] so inverse-propensity
    terms stay bounded.
    """

    intercept: float
    coef: np.ndarray
    clip: float

    def predict_proba1(self, x: np.ndarray) -> np.ndarray:
        raw = expit(np.asarray(x) @ self.coef + self.intercept)
        return np.clip(raw, self.clip, 1.0 - self.clip)


@dataclass(frozen=True)
class NuisanceModels:
    """Bundle of both arm means and the propensity model."""

    mu1: LinearModel
    mu0: LinearModel
    propensity: LogisticModel


@dataclass(frozen=True)
class NuisanceFit(NuisanceModels):
    """Nuisance models trained on the complement of one fold."""

    fold: int = 0
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of row indices into m folds, labeled 1..m."""

    m: int
    fold_of: np.ndarray

    def rows_in(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def rows_out(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


@dataclass(frozen=True)
class NuisanceSettings:
    """Penalties and clipping for nuisance fitting.

    Ridge penalties default to 1/sqrt(n) of the full sample when left as
    None.  ``clip`` bounds fitted propensities away from 0 and 1.
    """

    ridge_outcome: float | None = None
    ridge_propensity: float | None = None
    clip: float = 0.05

    def resolved(self, n: int) -> tuple[float, float]:
        default = 1.0 / math.sqrt(n) if n > 0 else 1.0
        r_out = default if self.ridge_outcome is None else float(self.ridge_outcome)
        r_prop = default if self.ridge_propensity is None else float(self.ridge_propensity)
        return r_out, r_prop


def assign_folds(n: int, m: int, seed: int) -> FoldAssignment:
    """Randomly split ``n`` rows into ``m`` folds of near-equal size.

    Fold sizes differ by at most one.  Requires n >= 2m so every training
    complement keeps a nontrivial share of the data.
    """
    if m < 2:
        raise ValueError(f"m must be at least 2, got {m}")
    if n < 2 * m:
        raise ValueError(f"insufficient samples per fold: need n >= 2m, got n={n}, m={m}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = (np.arange(n) % m) + 1
    return FoldAssignment(m=m, fold_of=fold_of)


def ridge_solve(x: np.ndarray, y: np.ndarray, ridge_penalty: float) -> LinearModel:
    """Least squares of y on x with an unpenalized intercept.

    Minimizes mean squared error plus ``ridge_penalty * ||coef||^2``.
    With ridge_penalty 0 the minimum-norm least squares solution is
    returned, which covers rank-deficient designs.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k, p = x.shape
    xc = np.column_stack([np.ones(k), x])
    if ridge_penalty == 0.0:
        theta, *_ = np.linalg.lstsq(xc, y, rcond=None)
    else:
        gram = xc.T @ xc / k
        gram[1:, 1:] += ridge_penalty * np.eye(p)
        rhs = xc.T @ y / k
        try:
            theta = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"ridge system is singular: {exc}") from exc
    return LinearModel(intercept=float(theta[0]), coef=theta[1:])


def fit_outcome(
    obs: ObservationSet, rows: np.ndarray, arm: int, ridge_penalty: float
) -> LinearModel:
    """Ridge regression of y on x over ``rows`` restricted to one arm.

    Minimizes mean squared error on the selected rows plus
    ``ridge_penalty * ||coef||^2``; the intercept is not penalized.  With
    ridge_penalty 0 the minimum-norm least squares solution is returned.
    """
    rows = np.asarray(rows, dtype=np.int64)
    sub = rows[obs.d[rows] == arm]
    if sub.size == 0:
        raise DataError(f"no training observations with arm {arm}")
    return ridge_solve(obs.x[sub], obs.y[sub], ridge_penalty)


def _penalized_loglik(eta: np.ndarray, d: np.ndarray, theta: np.ndarray, r: float) -> float:
    loglik = float(np.mean(d * eta - np.logaddexp(0.0, eta)))
    return loglik - 0.5 * r * float(theta[1:] @ theta[1:])


def fit_propensity(
    obs: ObservationSet, rows: np.ndarray, ridge_penalty: float, clip: float
) -> LogisticModel:
    """Ridge-penalized logistic regression of d on x over ``rows``.

    Newton iterations with step halving maximize the mean Bernoulli
    log-likelihood minus ``ridge_penalty/2 * ||coef||^2`` (intercept
    unpenalized), stopping at gradient norm 1e-8 or 100 iterations.
    """
    if not 0.0 < clip < 0.5:
        raise ValueError(f"clip must lie in (0, 0.5), got {clip}")
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise DataError("no training observations for propensity fit")
    x = obs.x[rows]
    d = obs.d[rows]
    k, p = x.shape
    xc = np.column_stack([np.ones(k), x])
    pen = np.zeros(p + 1)
    pen[1:] = ridge_penalty

    theta = np.zeros(p + 1)
    eta = xc @ theta
    obj = _penalized_loglik(eta, d, theta, ridge_penalty)
    for _ in range(IRLS_MAX_ITER):
        prob = expit(eta)
        grad = xc.T @ (d - prob) / k - pen * theta
        if np.linalg.norm(grad) <= IRLS_GRAD_TOL:
            break
        w = prob * (1.0 - prob)
        hess = (xc * w[:, None]).T @ xc / k
        hess[np.diag_indices_from(hess)] += pen
        try:
            direction = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"propensity Hessian is singular: {exc}") from exc

        step = 1.0
        improved = False
        for _ in range(30):
            cand = theta + step * direction
            cand_eta = xc @ cand
            cand_obj = _penalized_loglik(cand_eta, d, cand, ridge_penalty)
            if cand_obj > obj:
                theta, eta, obj = cand, cand_eta, cand_obj
                improved = True
                break
            step *= 0.5
        if not improved:
            grad_norm = float(np.linalg.norm(grad))
            if grad_norm > 1e-6:
                raise NumericalError(
                    f"propensity fit diverged: no step improves the objective "
                    f"(gradient norm {grad_norm:.2e})"
                )
            break
    return LogisticModel(intercept=float(theta[0]), coef=theta[1:], clip=clip)


def fit_all(
    obs: ObservationSet, settings: NuisanceSettings | None = None
) -> NuisanceModels:
    """Train nuisance models once on the full sample, without folds.

    This deliberately reuses every row for both training and prediction;
    it exists as the leaky baseline against which cross-fitting is
    compared.
    """
    settings = settings or NuisanceSettings()
    r_out, r_prop = settings.resolved(obs.n)
    all_rows = np.arange(obs.n)
    return NuisanceModels(
        mu1=fit_outcome(obs, all_rows, arm=1, ridge_penalty=r_out),
        mu0=fit_outcome(obs, all_rows, arm=0, ridge_penalty=r_out),
        propensity=fit_propensity(obs, all_rows, ridge_penalty=r_prop, clip=settings.clip),
    )


def cross_fit(
    obs: ObservationSet,
    folds: FoldAssignment,
    settings: NuisanceSettings | None = None,
) -> list[NuisanceFit]:
    """Train fold-wise nuisance models on each fold's complement.

    Returns one :class:`NuisanceFit` per fold, ordered by fold label.
    Errors from the underlying fits are re-raised with the fold index
    attached.
    """
    settings = settings or NuisanceSettings()
    r_out, r_prop = settings.resolved(obs.n)
    fits: list[NuisanceFit] = []
    for fold in range(1, folds.m + 1):
        train = folds.rows_out(fold)
        try:
            mu1 = fit_outcome(obs, train, arm=1, ridge_penalty=r_out)
            mu0 = fit_outcome(obs, train, arm=0, ridge_penalty=r_out)
            prop = fit_propensity(obs, train, ridge_penalty=r_prop, clip=settings.clip)
        except (DataError, NumericalError) as exc:
            raise type(exc)(f"fold {fold}: {exc}") from exc
        diag = {
            "n_train": int(train.size),
            "n_treated": int(np.sum(obs.d[train] == 1.0)),
            "n_control": int(np.sum(obs.d[train] == 0.0)),
            "ridge_outcome": r_out,
            "ridge_propensity": r_prop,
        }
        fits.append(
            NuisanceFit(mu1=mu1, mu0=mu0, propensity=prop, fold=fold, diagnostics=diag)
        )
    return fits
