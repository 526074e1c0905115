"""Debiasing, standard errors, intervals, and audit tools.

The debiased coefficient vector is

    b = beta_lasso + Theta @ W'(q_w - W beta_lasso) / n,

a one-step correction along the approximate inverse from the nodewise
stage.  Its j-th standard error is sqrt((Theta Sigma Theta')_jj / n)
with Sigma = W'W/n, which is exact for the weighted problem because the
weighting normalizes the score noise to unit conditional variance.

The module also hosts reference estimators used only in studies: the
oracle variant that plugs in the true nuisance functions and true noise
scales, and the no-split variant that reuses the full sample for both
nuisance training and scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

from .data import GroundTruth, ObservationSet
from .errors import NumericalError
from .lasso import LassoFit, fit_lasso
from .nodewise import NodewiseInverse, build_theta
from .nuisance import NuisanceModels
from .scores import (
    WeightedProblem,
    build_weighted,
    pseudo_outcomes_single,
    true_weights,
    weights_single,
)

__all__ = [
    "WtdlEstimate",
    "InferenceDiagnostics",
    "EstimationParts",
    "CompatibilityAudit",
    "normal_quantile",
    "debias",
    "standard_errors",
    "confidence_intervals",
    "estimate_from_weighted",
    "oracle_estimator",
    "dr_catelasso_no_crossfit",
    "diagnostics",
    "compatibility_constant",
]


@dataclass(frozen=True)
class WtdlEstimate:
    """Final coefficient estimates with normal confidence intervals."""

    b: np.ndarray
    beta_lasso: np.ndarray
    se: np.ndarray
    ci: np.ndarray
    sigma_hat: np.ndarray
    alpha: float
    lam: float
    n: int

    @property
    def p(self) -> int:
        return self.b.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "beta_lasso": self.beta_lasso.tolist(),
            "b": self.b.tolist(),
            "se": self.se.tolist(),
            "ci": self.ci.tolist(),
            "alpha": self.alpha,
            "lambda": self.lam,
            "n": self.n,
            "p": self.p,
        }


@dataclass(frozen=True)
class InferenceDiagnostics:
    """Scalar health measures of one estimation run.

    delta_norm is the l1 norm of sqrt(n) Theta Sigma (beta_lasso -
    beta0), the remainder the debiasing step must keep small.
    residual_gap compares feasible pseudo-outcomes against the ones the
    true nuisances would have produced, scaled like a root-n average.
    l1_error and pred_error measure the Lasso stage against the truth.
    """

    delta_norm: float
    residual_gap: float
    l1_error: float
    pred_error: float


@dataclass(frozen=True)
class EstimationParts:
    """Everything produced after the weighted problem is formed."""

    wp: WeightedProblem
    lam: float
    fit: LassoFit
    theta: NodewiseInverse
    estimate: WtdlEstimate


class CompatibilityAudit(NamedTuple):
    value: float
    slack: float
    argmin: np.ndarray


def normal_quantile(prob: float) -> float:
    """Standard normal quantile (inverse CDF)."""
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie in (0, 1), got {prob}")
    return float(ndtri(prob))


def _theta_matrix(theta) -> np.ndarray:
    if isinstance(theta, NodewiseInverse):
        return theta.theta
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError("theta must be a square matrix")
    return theta


def debias(fit: LassoFit, theta, wp: WeightedProblem) -> np.ndarray:
    """One-step correction of the Lasso coefficients.

    ``theta`` may be a :class:`NodewiseInverse` or a plain square matrix
    (e.g. the exact inverse of W'W/n for audit purposes).
    """
    tm = _theta_matrix(theta)
    n = wp.w.shape[0]
    correction = tm @ (wp.w.T @ (wp.q_wdml - wp.w @ fit.beta) / n)
    return fit.beta + correction


def standard_errors(theta, sigma_hat: np.ndarray, n: int) -> np.ndarray:
    """Per-coefficient standard errors sqrt((Theta Sigma Theta')_jj / n)."""
    tm = _theta_matrix(theta)
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    quad = np.einsum("ij,ij->i", tm @ sigma_hat, tm)
    if np.any(quad < -1e-10 * max(1.0, float(np.abs(quad).max()))):
        raise NumericalError("negative variance in sandwich product")
    return np.sqrt(np.maximum(quad, 0.0) / n)


def confidence_intervals(b: np.ndarray, se: np.ndarray, alpha: float) -> np.ndarray:
    """Symmetric normal intervals b -+ z_{1-alpha/2} * se, one row each."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    b = np.asarray(b, dtype=np.float64)
    se = np.asarray(se, dtype=np.float64)
    if b.shape != se.shape:
        raise ValueError("b and se must have matching shapes")
    if np.any(se < 0):
        raise ValueError("standard errors must be nonnegative")
    z = normal_quantile(1.0 - alpha / 2.0)
    return np.column_stack([b - z * se, b + z * se])


def estimate_from_weighted(
    wp: WeightedProblem,
    lam: float,
    alpha: float = 0.05,
    nodewise_lambdas="theory",
    nodewise_constant: float = 1.0,
    lasso_tol: float = 1e-7,
    nodewise_tol: float = 1e-10,
    max_iter: int = 100_000,
) -> EstimationParts:
    """Run Lasso, nodewise inverse, debiasing, and intervals.

    This is the common tail of the feasible pipeline and the oracle
    benchmark; they differ only in how the weighted problem was built.
    """
    n = wp.w.shape[0]
    fit = fit_lasso(wp.w, wp.q_wdml, lam, tol=lasso_tol, max_iter=max_iter)
    theta = build_theta(
        wp.w, nodewise_lambdas, constant=nodewise_constant,
        tol=nodewise_tol, max_iter=max_iter,
    )
    sigma_hat = wp.w.T @ wp.w / n
    b = debias(fit, theta, wp)
    se = standard_errors(theta, sigma_hat, n)
    ci = confidence_intervals(b, se, alpha)
    estimate = WtdlEstimate(
        b=b, beta_lasso=fit.beta, se=se, ci=ci,
        sigma_hat=sigma_hat, alpha=alpha, lam=float(lam), n=n,
    )
    return EstimationParts(wp=wp, lam=float(lam), fit=fit, theta=theta, estimate=estimate)


def oracle_estimator(
    obs: ObservationSet,
    gt: GroundTruth,
    lam: float,
    alpha: float = 0.05,
    weight_floor: float = 1e-3,
    nodewise_lambdas="theory",
    nodewise_constant: float = 1.0,
) -> tuple[LassoFit, WtdlEstimate]:
    """Benchmark estimator with true nuisances and true noise scales.

    No sample splitting is involved because nothing is estimated from
    the data before scoring.
    """
    from .dgp import true_nuisances

    models = true_nuisances(gt)
    q_bar = pseudo_outcomes_single(obs, models)
    sigma = true_weights(obs, gt, floor=weight_floor)
    wp = build_weighted(obs, q_bar, sigma)
    parts = estimate_from_weighted(
        wp, lam, alpha=alpha,
        nodewise_lambdas=nodewise_lambdas, nodewise_constant=nodewise_constant,
    )
    return parts.fit, parts.estimate


def dr_catelasso_no_crossfit(
    obs: ObservationSet,
    models: NuisanceModels,
    lam: float,
    weight_mode: str = "constant_per_arm",
    weight_floor: float = 1e-3,
) -> LassoFit:
    """Weighted Lasso on scores built without sample splitting.

    ``models`` must be nuisance models fitted on the full sample; every
    row is scored by models that saw it during training.  Only the Lasso
    stage runs; no intervals are produced, which is the point: this
    baseline illustrates what overfitting does to the selection stage.
    """
    q_hat = pseudo_outcomes_single(obs, models)
    sigma = weights_single(obs, models, mode=weight_mode, floor=weight_floor)
    wp = build_weighted(obs, q_hat, sigma)
    return fit_lasso(wp.w, wp.q_wdml, lam)


def diagnostics(
    fit: LassoFit,
    theta,
    wp: WeightedProblem,
    gt: GroundTruth,
    obs: ObservationSet,
) -> InferenceDiagnostics:
    """Truth-referenced health measures for one simulated fit."""
    from .dgp import true_nuisances

    tm = _theta_matrix(theta)
    n = wp.w.shape[0]
    dev = fit.beta - gt.beta0
    sigma_hat = wp.w.T @ wp.w / n
    delta = math.sqrt(n) * (tm @ (sigma_hat @ dev))
    q_bar = pseudo_outcomes_single(obs, true_nuisances(gt))
    gap = math.sqrt(n) * float(np.mean(np.abs(wp.q_dml - q_bar) / wp.sigma))
    wdev = wp.w @ dev
    return InferenceDiagnostics(
        delta_norm=float(np.abs(delta).sum()),
        residual_gap=gap,
        l1_error=float(np.abs(dev).sum()),
        pred_error=float(wdev @ wdev) / n,
    )


def _compositions(total: int, parts: int):
    """All nonnegative integer vectors of given length summing to total."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head, *rest)


def compatibility_constant(
    sigma_hat: np.ndarray, active_set: np.ndarray, resolution: float = 0.1
) -> CompatibilityAudit:
    """Brute-force audit of the compatibility constant of a Gram matrix.

    Searches the cone {||beta_outside||_1 <= 3 ||beta_active||_1} for the
    smallest value of

        s0 * beta' Sigma beta / ||beta_active||_1^2

    over a signed lattice of step ``resolution`` on the unit l1 sphere.
    The returned value never undershoots the true infimum, and exceeds it
    by at most ``slack``:  on the cone the active-part mass is at least
    1/4, so the objective is Lipschitz with constant 544 * s0 * max|Sigma|
    in l1 distance, and every cone point has a lattice neighbor within
    2 * p * resolution.  Only small dimensions (p <= 12) are supported.
    """
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    p = sigma_hat.shape[0]
    if sigma_hat.shape != (p, p):
        raise ValueError("sigma_hat must be square")
    if not np.allclose(sigma_hat, sigma_hat.T, atol=1e-10):
        raise ValueError("sigma_hat must be symmetric")
    if p > 12:
        raise ValueError(f"brute-force audit supports p <= 12, got p={p}")
    active_set = np.unique(np.asarray(active_set, dtype=np.int64))
    if active_set.size == 0:
        raise ValueError("active_set must be nonempty")
    if active_set.min() < 0 or active_set.max() >= p:
        raise ValueError("active_set indices out of range")
    if not 0.0 < resolution <= 1.0:
        raise ValueError(f"resolution must lie in (0, 1], got {resolution}")

    steps = max(1, round(1.0 / resolution))
    h = 1.0 / steps
    s0 = active_set.size
    n_comps = math.comb(steps + p - 1, p - 1)
    if n_comps * (2**p) > 2e8:
        raise ValueError(
            f"grid too large ({n_comps} compositions x 2^{p} sign patterns); "
            "coarsen the resolution"
        )

    comps = np.array(list(_compositions(steps, p)), dtype=np.int64)
    in_cone = 4 * comps[:, active_set].sum(axis=1) >= steps
    comps = comps[in_cone]
    active_mass = comps[:, active_set].sum(axis=1).astype(np.float64)

    best = math.inf
    best_vec = np.zeros(p)
    base = comps.astype(np.float64)
    for mask in range(2**p):
        signs = np.array([1.0 if mask >> k & 1 == 0 else -1.0 for k in range(p)])
        v = base * signs
        quad = np.einsum("ij,jk,ik->i", v, sigma_hat, v)
        vals = s0 * quad / active_mass**2
        idx = int(np.argmin(vals))
        if vals[idx] < best:
            best = float(vals[idx])
            best_vec = v[idx] * h
    slack = 544.0 * s0 * float(np.abs(sigma_hat).max()) * 2.0 * p * h
    return CompatibilityAudit(value=best, slack=slack, argmin=best_vec)
