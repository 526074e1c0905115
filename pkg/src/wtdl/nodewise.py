"""Nodewise Lasso approximation of the precision matrix of a design.

For each column j, regress it on all other columns with an l1 penalty:

    gamma_j = argmin ||w_j - W_{-j} gamma||_2^2 / n + 2 lam_j ||gamma||_1,
    tau_j^2 = ||w_j - W_{-j} gamma_j||_2^2 / n + lam_j ||gamma_j||_1.

Row j of the inverse surrogate is (e_j - embed(gamma_j)) / tau_j^2.  The
stationarity conditions of the column regressions imply the row bound

    || (W'W/n) theta_j - e_j ||_inf  <=  lam_j / tau_j^2

up to solver tolerance, which is the quantity the debiasing step relies
on.  All column regressions share one Gram matrix, so the marginal cost
per column is a coordinate-descent run, not a fresh matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .lasso import _cd_gram, select_lambda

__all__ = [
    "NodewiseInverse",
    "nodewise_column",
    "build_theta",
    "select_nodewise_lambda",
]

TAU_SQ_MIN = 1e-10
NODEWISE_TOL = 1e-10


@dataclass(frozen=True)
class NodewiseInverse:
    """Rowwise approximate inverse of a Gram matrix.

    ``gamma`` stores each column regression's coefficients embedded into
    a full row (zero on the diagonal), ``tau_sq`` the penalized residual
    variances, and ``lambdas`` the per-column penalties.  Row j of
    ``theta`` equals (e_j - gamma[j]) / tau_sq[j].
    """

    theta: np.ndarray
    tau_sq: np.ndarray
    gamma: np.ndarray
    lambdas: np.ndarray

    @property
    def p(self) -> int:
        return self.theta.shape[0]


def _check_design(w: np.ndarray) -> np.ndarray:
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
        raise ValueError("design must be a nonempty matrix")
    if not np.all(np.isfinite(w)):
        raise ValueError("design must be finite")
    return w


def _column_fit(
    G: np.ndarray, j: int, lam: float, tol: float, max_iter: int
) -> tuple[np.ndarray, float]:
    """Run the column-j regression on a shared Gram matrix.

    Returns the embedded coefficient vector (zero at j) and tau_sq.
    """
    b = np.ascontiguousarray(G[j])
    gamma, q, _, converged, _ = _cd_gram(
        G, b, float(G[j, j]), float(lam), float(tol), int(max_iter), np.int64(j)
    )
    if not converged:
        raise NumericalError(f"nodewise regression for column {j} did not converge")
    rss_n = float(G[j, j] - 2.0 * (b @ gamma) + gamma @ q)
    tau_sq = rss_n + lam * float(np.abs(gamma).sum())
    return gamma, tau_sq


def nodewise_column(
    w: np.ndarray, j: int, lambda_j: float, tol: float = NODEWISE_TOL,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, float]:
    """Penalized regression of column j on the remaining columns.

    Returns (gamma_j, tau_sq_j) where gamma_j has length p-1 and is
    indexed by the remaining columns in their original order.
    """
    w = _check_design(w)
    p = w.shape[1]
    if not 0 <= j < p:
        raise ValueError(f"column index {j} out of range for p={p}")
    if p == 1:
        raise ValueError("nodewise regression needs at least two columns")
    if lambda_j < 0:
        raise ValueError(f"lambda_j must be nonnegative, got {lambda_j}")
    G = w.T @ w / w.shape[0]
    gamma, tau_sq = _column_fit(G, j, lambda_j, tol, max_iter)
    if tau_sq <= TAU_SQ_MIN:
        raise NumericalError(f"collinear design at column {j}: tau_sq={tau_sq:.3e}")
    return np.delete(gamma, j), tau_sq


def select_nodewise_lambda(
    w: np.ndarray,
    j: int,
    method: str = "theory",
    cv_folds: int = 5,
    seed: int = 0,
    constant: float = 1.0,
) -> float:
    """Penalty for the column-j regression, chosen like the main Lasso."""
    w = _check_design(w)
    p = w.shape[1]
    if not 0 <= j < p:
        raise ValueError(f"column index {j} out of range for p={p}")
    if p == 1:
        raise ValueError("nodewise regression needs at least two columns")
    design = np.delete(w, j, axis=1)
    return select_lambda(design, w[:, j], method, cv_folds, seed, constant)


def build_theta(
    w: np.ndarray,
    lambdas="theory",
    constant: float = 1.0,
    tol: float = NODEWISE_TOL,
    max_iter: int = 100_000,
    seed: int = 0,
) -> NodewiseInverse:
    """Run all p column regressions and assemble the inverse surrogate.

    ``lambdas`` is either a length-p vector of penalties or a selection
    method name ("theory" or "cv") applied to every column.  The theory
    rule matches :func:`select_nodewise_lambda`: constant *
    sqrt(log(p-1)/n) * sd(w_j).  A single-column design needs no
    regression and returns theta = [[n / ||w||^2]].
    """
    w = _check_design(w)
    n, p = w.shape
    G = w.T @ w / n

    if p == 1:
        tau = float(G[0, 0])
        if tau <= TAU_SQ_MIN:
            raise NumericalError(f"collinear design at column 0: tau_sq={tau:.3e}")
        return NodewiseInverse(
            theta=np.array([[1.0 / tau]]),
            tau_sq=np.array([tau]),
            gamma=np.zeros((1, 1)),
            lambdas=np.zeros(1),
        )

    if isinstance(lambdas, str):
        if lambdas == "theory":
            sds = np.std(w, axis=0)
            lam_vec = constant * math.sqrt(math.log(p - 1) / n) * sds
        elif lambdas == "cv":
            lam_vec = np.array(
                [
                    select_nodewise_lambda(w, j, "cv", seed=seed, constant=constant)
                    for j in range(p)
                ]
            )
        else:
            raise ValueError(f"unknown lambda rule {lambdas!r}")
    else:
        lam_vec = np.asarray(lambdas, dtype=np.float64)
        if lam_vec.shape != (p,):
            raise ValueError(f"lambdas must have length {p}")
        if np.any(lam_vec < 0):
            raise ValueError("lambdas must be nonnegative")

    theta = np.empty((p, p))
    tau_sq = np.empty(p)
    gamma_rows = np.empty((p, p))
    for j in range(p):
        gamma, tau = _column_fit(G, j, float(lam_vec[j]), tol, max_iter)
        if tau <= TAU_SQ_MIN:
            raise NumericalError(f"collinear design at column {j}: tau_sq={tau:.3e}")
        gamma_rows[j] = gamma
        tau_sq[j] = tau
        theta[j] = -gamma / tau
        theta[j, j] = 1.0 / tau
    return NodewiseInverse(
        theta=theta, tau_sq=tau_sq, gamma=gamma_rows, lambdas=lam_vec
    )
