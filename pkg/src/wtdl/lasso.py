"""Lasso solved by cyclic coordinate descent on Gram matrices.

The objective convention throughout the package is

    ||response - design @ beta||_2^2 / n  +  2 * lam * ||beta||_1,

so the stationarity condition reads ``design.T @ residual / n = lam *
kappa`` with ``kappa`` a subgradient of the l1 norm.  The solver works on
the Gram form (G = X'X/n, b = X'y/n) and keeps ``q = G @ beta`` updated
incrementally, which makes a full sweep cheap when few coordinates move.
The same kernel powers the nodewise regressions, where one column is
regressed on all others, by excluding that column's index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import NumericalError

__all__ = [
    "LassoFit",
    "KktViolation",
    "soft_threshold",
    "fit_lasso",
    "kkt_check",
    "select_lambda",
    "lambda_max",
]

CV_GRID_SIZE = 50
CV_GRID_SPAN = 1e-3


def soft_threshold(z, gamma):
    """Shrink ``z`` toward zero by ``gamma``, elementwise."""
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


@njit(cache=True)
def _cd_gram(G, b, yty_n, lam, tol, max_iter, exclude):
    """Cyclic coordinate descent on the Gram system.

    Minimizes yty_n - 2 b'beta + beta'G beta + 2 lam ||beta||_1 with
    beta[exclude] pinned at zero (exclude < 0 disables pinning).  Returns
    (beta, q, sweeps, converged, objective_history) where q = G @ beta
    and objective_history[k] is the objective after k full sweeps.
    """
    p = G.shape[0]
    beta = np.zeros(p)
    q = np.zeros(p)
    obj_hist = np.empty(max_iter + 1)
    obj_hist[0] = yty_n
    sweeps = 0
    converged = False
    for it in range(max_iter):
        max_delta = 0.0
        for k in range(p):
            if k == exclude:
                continue
            gkk = G[k, k]
            if gkk <= 0.0:
                continue
            old = beta[k]
            rho = b[k] - q[k] + gkk * old
            if rho > lam:
                new = (rho - lam) / gkk
            elif rho < -lam:
                new = (rho + lam) / gkk
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for t in range(p):
                    q[t] += G[k, t] * delta
                beta[k] = new
                diff = abs(delta)
                if diff > max_delta:
                    max_delta = diff
        sweeps = it + 1
        quad = 0.0
        l1 = 0.0
        for t in range(p):
            quad += beta[t] * (q[t] - 2.0 * b[t])
            l1 += abs(beta[t])
        obj_hist[sweeps] = yty_n + quad + 2.0 * lam * l1
        if max_delta <= tol:
            converged = True
            break
    return beta, q, sweeps, converged, obj_hist


@dataclass(frozen=True)
class LassoFit:
    """Solution of one coordinate-descent run.

    ``kkt_subgradient`` holds (b - G beta) / lam, the subgradient vector
    certifying stationarity; it is all zeros when lam is 0 (the
    certificate is then the plain least-squares gradient being zero).
    ``objective_history`` starts at the beta = 0 objective and records one
    value per completed sweep.
    """

    beta: np.ndarray
    lam: float
    kkt_subgradient: np.ndarray
    iterations: int
    converged: bool
    objective: float
    objective_history: np.ndarray


class KktViolation(NamedTuple):
    inactive: float
    active: float


def _gram_parts(design: np.ndarray, response: np.ndarray):
    design = np.ascontiguousarray(design, dtype=np.float64)
    response = np.ascontiguousarray(response, dtype=np.float64)
    if design.ndim != 2:
        raise ValueError("design must be a matrix")
    n, p = design.shape
    if response.shape != (n,):
        raise ValueError(f"response has shape {response.shape}, expected ({n},)")
    if n < 1 or p < 1:
        raise ValueError("design must have at least one row and one column")
    if not np.all(np.isfinite(design)) or not np.all(np.isfinite(response)):
        raise ValueError("design and response must be finite")
    G = design.T @ design / n
    b = design.T @ response / n
    yty_n = float(response @ response) / n
    return G, b, yty_n


def fit_lasso(
    design: np.ndarray,
    response: np.ndarray,
    lam: float,
    tol: float = 1e-7,
    max_iter: int = 10_000,
    standardize: bool = False,
) -> LassoFit:
    """Solve the Lasso at penalty ``lam`` by cyclic coordinate descent.

    Convergence is declared when no coefficient moves more than ``tol``
    within a full sweep; otherwise the fit is returned after ``max_iter``
    sweeps with ``converged=False``.

    ``standardize`` rescales every column to unit standard deviation
    before solving and maps the coefficients back afterwards.  This
    changes the penalty geometry (each coordinate is effectively
    penalized by lam times its column scale), so it is off by default.
    The returned ``beta`` is always in original coordinates, while
    ``kkt_subgradient``, ``objective``, and ``objective_history``
    describe the problem actually solved, i.e. the scaled one; verify
    them against the scaled design.  Constant columns are left unscaled.

    Raises
    ------
    NumericalError
        If ``lam`` is 0 and the design has a zero-variance column, which
        leaves that coordinate unidentified.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    design = np.asarray(design, dtype=np.float64)
    scale = None
    if standardize and design.ndim == 2:
        scale = np.std(design, axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
        design = design / scale
    G, b, yty_n = _gram_parts(design, response)
    if lam == 0.0 and np.any(np.diag(G) <= 0.0):
        j = int(np.argmax(np.diag(G) <= 0.0))
        raise NumericalError(f"degenerate column {j}: zero variance with lam=0")
    beta, q, sweeps, converged, obj_hist = _cd_gram(
        G, b, yty_n, float(lam), float(tol), int(max_iter), np.int64(-1)
    )
    if lam > 0.0:
        kappa = (b - q) / lam
    else:
        kappa = np.zeros_like(b)
    if scale is not None:
        beta = beta / scale
    history = obj_hist[: sweeps + 1].copy()
    return LassoFit(
        beta=beta,
        lam=float(lam),
        kkt_subgradient=kappa,
        iterations=int(sweeps),
        converged=bool(converged),
        objective=float(history[-1]),
        objective_history=history,
    )


def kkt_check(fit: LassoFit, design: np.ndarray, response: np.ndarray) -> KktViolation:
    """Recompute stationarity violations from the raw data.

    Returns the worst slack among inactive coordinates, max(0, |g_j| -
    lam), and among active ones, |g_j - lam * sign(beta_j)|, where g =
    design'(response - design beta)/n.  Empty groups contribute 0.
    """
    design = np.asarray(design, dtype=np.float64)
    response = np.asarray(response, dtype=np.float64)
    g = design.T @ (response - design @ fit.beta) / design.shape[0]
    active = fit.beta != 0.0
    inactive_viol = 0.0
    if np.any(~active):
        inactive_viol = float(np.maximum(np.abs(g[~active]) - fit.lam, 0.0).max())
    active_viol = 0.0
    if np.any(active):
        active_viol = float(
            np.abs(g[active] - fit.lam * np.sign(fit.beta[active])).max()
        )
    return KktViolation(inactive=inactive_viol, active=active_viol)


def lambda_max(design: np.ndarray, response: np.ndarray) -> float:
    """Smallest penalty at which the all-zero solution is stationary."""
    _, b, _ = _gram_parts(design, response)
    return float(np.abs(b).max())


def select_lambda(
    design: np.ndarray,
    response: np.ndarray,
    method: str = "theory",
    cv_folds: int = 5,
    seed: int = 0,
    constant: float = 1.0,
) -> float:
    """Choose the Lasso penalty by rate formula or cross-validation.

    method "theory" returns ``constant * sqrt(log(p)/n) * sd(response)``.
    method "cv" evaluates a geometric grid of ``CV_GRID_SIZE`` penalties
    from lambda_max down to ``CV_GRID_SPAN * lambda_max`` by K-fold
    prediction error and returns the best, preferring the larger penalty
    on ties.  A zero-variance response short-circuits to lambda_max.
    """
    if method not in ("theory", "cv"):
        raise ValueError(f"unknown lambda selection method {method!r}")
    design = np.asarray(design, dtype=np.float64)
    response = np.asarray(response, dtype=np.float64)
    n, p = design.shape
    lam_max = lambda_max(design, response)
    sd = float(np.std(response))
    if sd == 0.0:
        return lam_max
    if method == "theory":
        return constant * math.sqrt(math.log(p) / n) * sd

    if cv_folds < 2:
        raise ValueError(f"cv_folds must be at least 2, got {cv_folds}")
    if n < 2 * cv_folds:
        raise ValueError(f"need n >= 2*cv_folds for cross-validation, got n={n}")
    if lam_max == 0.0:
        return 0.0

    grid = np.geomspace(lam_max, CV_GRID_SPAN * lam_max, CV_GRID_SIZE)
    perm = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(perm, cv_folds)
    errors = np.zeros(CV_GRID_SIZE)
    for test_rows in chunks:
        mask = np.ones(n, dtype=bool)
        mask[test_rows] = False
        x_tr, y_tr = design[mask], response[mask]
        x_te, y_te = design[test_rows], response[test_rows]
        for gi, lam in enumerate(grid):
            fit = fit_lasso(x_tr, y_tr, lam)
            resid = y_te - x_te @ fit.beta
            errors[gi] += float(resid @ resid) / test_rows.size
    errors /= cv_folds
    return float(grid[int(np.argmin(errors))])
