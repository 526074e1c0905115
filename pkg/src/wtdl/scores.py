"""Doubly robust pseudo-outcomes and variance weighting.

The pseudo-outcome for one observation is

    q = 1{d=1} (y - mu1(x)) / pi1(x) - 1{d=0} (y - mu0(x)) / (1 - pi1(x))
        + mu1(x) - mu0(x),

whose conditional mean equals the treatment contrast whenever either the
outcome means or the propensity are correct.  Rows are then rescaled by
an estimate of the conditional standard deviation

    sigma(x)^2 = var1(x) / pi1(x) + var0(x) / (1 - pi1(x)),

which is the conditional variance of the pseudo-outcome noise, so the
weighted regression problem has roughly unit noise everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ObservationSet
from .errors import DataError
from .nuisance import FoldAssignment, NuisanceFit, NuisanceModels, ridge_solve

__all__ = [
    "WeightedProblem",
    "dr_score",
    "build_pseudo_outcomes",
    "pseudo_outcomes_single",
    "estimate_weights",
    "weights_single",
    "true_weights",
    "build_weighted",
    "out_of_fold_predictions",
]

WEIGHT_MODES = ("constant_per_arm", "covariate_dependent")


@dataclass(frozen=True)
class WeightedProblem:
    """Weighted design and response ready for the Lasso stage.

    ``w`` has rows x_i / sigma_i and ``q_wdml`` entries q_i / sigma_i;
    ``q_dml`` and ``sigma`` keep the unweighted ingredients for
    diagnostics.
    """

    w: np.ndarray
    q_wdml: np.ndarray
    q_dml: np.ndarray
    sigma: np.ndarray


def dr_score(y: float, d: float, x: np.ndarray, mu, pi) -> float:
    """Doubly robust score of a single observation.

    ``mu`` is the outcome model pair (mu1, mu0) and ``pi`` the propensity
    model.  The treatment must be exactly 0 or 1.
    """
    if d not in (0.0, 1.0):
        raise DataError(f"treatment must be 0 or 1, got {d}")
    mu1, mu0 = mu
    x = np.asarray(x, dtype=np.float64)
    m1 = float(mu1.predict(x))
    m0 = float(mu0.predict(x))
    p1 = float(pi.predict_proba1(x))
    if d == 1.0:
        return (y - m1) / p1 + m1 - m0
    return -(y - m0) / (1.0 - p1) + m1 - m0


def _scores_from_predictions(
    y: np.ndarray, d: np.ndarray, m1: np.ndarray, m0: np.ndarray, p1: np.ndarray
) -> np.ndarray:
    treated = d == 1.0
    q = m1 - m0
    q = q + np.where(treated, (y - m1) / p1, 0.0)
    q = q - np.where(~treated, (y - m0) / (1.0 - p1), 0.0)
    return q


def out_of_fold_predictions(
    obs: ObservationSet, folds: FoldAssignment, fits: list[NuisanceFit]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assemble (mu1, mu0, pi1) predictions using each row's own fold model.

    Row i is predicted by the fit trained on the complement of the fold
    containing i, so no row influences its own prediction.
    """
    if len(fits) != folds.m:
        raise ValueError(f"expected {folds.m} fits, got {len(fits)}")
    n = obs.n
    m1 = np.empty(n)
    m0 = np.empty(n)
    p1 = np.empty(n)
    for fit in fits:
        rows = folds.rows_in(fit.fold)
        if rows.size == 0:
            continue
        x = obs.x[rows]
        m1[rows] = fit.mu1.predict(x)
        m0[rows] = fit.mu0.predict(x)
        p1[rows] = fit.propensity.predict_proba1(x)
    return m1, m0, p1


def _predictions_from_single(
    obs: ObservationSet, models: NuisanceModels
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (
        models.mu1.predict(obs.x),
        models.mu0.predict(obs.x),
        models.propensity.predict_proba1(obs.x),
    )


def build_pseudo_outcomes(
    obs: ObservationSet, folds: FoldAssignment, fits: list[NuisanceFit]
) -> np.ndarray:
    """Cross-fitted pseudo-outcomes, one per observation."""
    m1, m0, p1 = out_of_fold_predictions(obs, folds, fits)
    return _scores_from_predictions(obs.y, obs.d, m1, m0, p1)


def pseudo_outcomes_single(obs: ObservationSet, models: NuisanceModels) -> np.ndarray:
    """Pseudo-outcomes with one model bundle used for every row.

    Used for oracle benchmarks (true nuisances) and the deliberately
    leaky no-split baseline.
    """
    m1, m0, p1 = _predictions_from_single(obs, models)
    return _scores_from_predictions(obs.y, obs.d, m1, m0, p1)


def _weights_from_predictions(
    obs: ObservationSet,
    m1: np.ndarray,
    m0: np.ndarray,
    p1: np.ndarray,
    mode: str,
    floor: float,
    ridge: float,
) -> np.ndarray:
    d = obs.d
    treated = d == 1.0
    resid1 = obs.y[treated] - m1[treated]
    resid0 = obs.y[~treated] - m0[~treated]
    if treated.sum() == 0 or (~treated).sum() == 0:
        raise DataError("both treatment arms are required to estimate weights")

    if mode == "constant_per_arm":
        var1 = np.full(obs.n, float(np.mean(resid1**2)))
        var0 = np.full(obs.n, float(np.mean(resid0**2)))
    elif mode == "covariate_dependent":
        fit1 = ridge_solve(obs.x[treated], resid1**2, ridge)
        fit0 = ridge_solve(obs.x[~treated], resid0**2, ridge)
        var1 = np.maximum(fit1.predict(obs.x), floor**2)
        var0 = np.maximum(fit0.predict(obs.x), floor**2)
    else:
        raise ValueError(f"unknown weight mode {mode!r}; expected one of {WEIGHT_MODES}")

    combined = var1 / p1 + var0 / (1.0 - p1)
    return np.maximum(np.sqrt(combined), floor)


def estimate_weights(
    obs: ObservationSet,
    folds: FoldAssignment,
    fits: list[NuisanceFit],
    mode: str = "constant_per_arm",
    floor: float = 1e-3,
    ridge: float | None = None,
) -> np.ndarray:
    """Estimate per-row conditional standard deviations of the score noise.

    Residuals are always out-of-fold.  Mode "constant_per_arm" uses one
    pooled residual variance per arm; "covariate_dependent" ridge-
    regresses squared residuals on x per arm and floors the predictions
    at floor^2.  Either way the combined sigma is floored at ``floor``,
    so an arm with all-zero residuals falls back to the floor instead of
    failing.
    """
    if floor <= 0:
        raise ValueError(f"floor must be positive, got {floor}")
    m1, m0, p1 = out_of_fold_predictions(obs, folds, fits)
    if ridge is None:
        ridge = 1.0 / np.sqrt(obs.n)
    return _weights_from_predictions(obs, m1, m0, p1, mode, floor, ridge)


def weights_single(
    obs: ObservationSet,
    models: NuisanceModels,
    mode: str = "constant_per_arm",
    floor: float = 1e-3,
    ridge: float | None = None,
) -> np.ndarray:
    """Like :func:`estimate_weights` but with one model bundle for all rows."""
    if floor <= 0:
        raise ValueError(f"floor must be positive, got {floor}")
    m1, m0, p1 = _predictions_from_single(obs, models)
    if ridge is None:
        ridge = 1.0 / np.sqrt(obs.n)
    return _weights_from_predictions(obs, m1, m0, p1, mode, floor, ridge)


def true_weights(obs: ObservationSet, gt, floor: float = 1e-3) -> np.ndarray:
    """Conditional score noise scale implied by the generating process."""
    from .dgp import true_nuisances

    models = true_nuisances(gt)
    p1 = models.propensity.predict_proba1(obs.x)
    combined = gt.noise_sd1**2 / p1 + gt.noise_sd0**2 / (1.0 - p1)
    return np.maximum(np.sqrt(combined), floor)


def build_weighted(
    obs: ObservationSet, q_dml: np.ndarray, sigma: np.ndarray
) -> WeightedProblem:
    """Scale rows of x and entries of q by 1/sigma."""
    q_dml = np.asarray(q_dml, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if q_dml.shape != (obs.n,) or sigma.shape != (obs.n,):
        raise ValueError("q_dml and sigma must have one entry per observation")
    if np.any(sigma <= 0.0) or not np.all(np.isfinite(sigma)):
        raise ValueError("sigma must be positive and finite")
    return WeightedProblem(
        w=obs.x / sigma[:, None],
        q_wdml=q_dml / sigma,
        q_dml=q_dml.copy(),
        sigma=sigma.copy(),
    )
