"""Independent reference computations used to pin expected test values.

These deliberately avoid the package's solvers.  The Lasso oracle is an
exhaustive lattice search: it enumerates a grid over all coordinates but
the last and minimizes the last coordinate exactly on its own lattice,
which is valid because the objective is convex in one coordinate.  The
enumeration shares no code with the coordinate-descent path under test.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _eval_obj(G, b, yty_n, lam, v):
    quad = 0.0
    l1 = 0.0
    p = v.shape[0]
    for i in range(p):
        row = 0.0
        for k in range(p):
            row += G[i, k] * v[k]
        quad += v[i] * row - 2.0 * b[i] * v[i]
        l1 += abs(v[i])
    return yty_n + quad + 2.0 * lam * l1


@njit(cache=True)
def _soft(z, g):
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


@njit(cache=True)
def _last_axis_candidates(target, lo, hi, step):
    """Lattice neighbors bracketing the continuous minimizer, clamped."""
    idx = (target - lo) / step
    k0 = int(np.floor(idx))
    cands = np.empty(2)
    for t in range(2):
        k = k0 + t
        if k < 0:
            k = 0
        v = lo + k * step
        if v > hi:
            v = hi
        cands[t] = v
    return cands


@njit(cache=True)
def _grid_min_1(G, b, yty_n, lam, lo, hi, step):
    n_pts = int(round((hi - lo) / step)) + 1
    best = np.inf
    v = np.zeros(1)
    for k in range(n_pts):
        v[0] = lo + k * step
        f = _eval_obj(G, b, yty_n, lam, v)
        if f < best:
            best = f
    return best


@njit(cache=True)
def _grid_min_2(G, b, yty_n, lam, lo, hi, step):
    n_pts = int(round((hi - lo) / step)) + 1
    best = np.inf
    v = np.zeros(2)
    for k1 in range(n_pts):
        v1 = lo + k1 * step
        target = _soft(b[1] - G[0, 1] * v1, lam) / G[1, 1]
        cands = _last_axis_candidates(target, lo, hi, step)
        for t in range(2):
            v[0] = v1
            v[1] = cands[t]
            f = _eval_obj(G, b, yty_n, lam, v)
            if f < best:
                best = f
    return best


@njit(cache=True)
def _grid_min_3(G, b, yty_n, lam, lo, hi, step):
    # same exhaustive lattice as the generic evaluator, with the
    # objective accumulated incrementally per axis instead of recomputed
    # from scratch at every point
    n_pts = int(round((hi - lo) / step)) + 1
    best = np.inf
    for k1 in range(n_pts):
        v1 = lo + k1 * step
        part1 = G[0, 0] * v1 * v1 - 2.0 * b[0] * v1 + 2.0 * lam * abs(v1)
        for k2 in range(n_pts):
            v2 = lo + k2 * step
            part2 = (
                part1
                + 2.0 * G[0, 1] * v1 * v2
                + G[1, 1] * v2 * v2
                - 2.0 * b[1] * v2
                + 2.0 * lam * abs(v2)
            )
            lin3 = G[0, 2] * v1 + G[1, 2] * v2
            target = _soft(b[2] - lin3, lam) / G[2, 2]
            cands = _last_axis_candidates(target, lo, hi, step)
            for t in range(2):
                v3 = cands[t]
                f = (
                    yty_n
                    + part2
                    + 2.0 * lin3 * v3
                    + G[2, 2] * v3 * v3
                    - 2.0 * b[2] * v3
                    + 2.0 * lam * abs(v3)
                )
                if f < best:
                    best = f
    return best


def lasso_grid_min(design, response, lam, lo=-3.0, hi=3.0, step=1e-3):
    """Minimum of the Lasso objective over the lattice [lo, hi]^p.

    Objective convention: ||y - X v||^2 / n + 2 lam ||v||_1.  Supports
    p in {1, 2, 3}; every column must have positive variance.
    """
    design = np.asarray(design, dtype=np.float64)
    response = np.asarray(response, dtype=np.float64)
    n, p = design.shape
    G = design.T @ design / n
    b = design.T @ response / n
    yty_n = float(response @ response) / n
    if np.any(np.diag(G) <= 0):
        raise ValueError("oracle requires positive-variance columns")
    if p == 1:
        return float(_grid_min_1(G, b, yty_n, lam, lo, hi, step))
    if p == 2:
        return float(_grid_min_2(G, b, yty_n, lam, lo, hi, step))
    if p == 3:
        return float(_grid_min_3(G, b, yty_n, lam, lo, hi, step))
    raise ValueError("oracle supports p <= 3 only")


def random_lasso_instance(rng):
    """Small random instance whose lattice gap provably stays below 1e-6.

    Covariates and responses live in [-0.3, 0.3], so the Gram trace is at
    most 0.27 and the curvature term lambda_max(G) * p * step^2 of the
    lattice rounding error stays under 1e-6 at step 1e-3.
    """
    p = int(rng.integers(1, 4))
    n = int(rng.integers(2, 9))
    design = rng.uniform(-0.3, 0.3, size=(n, p))
    while np.any(np.abs(design).max(axis=0) < 1e-3):
        design = rng.uniform(-0.3, 0.3, size=(n, p))
    response = rng.uniform(-0.3, 0.3, size=n)
    lam = float(rng.uniform(0.002, 0.05))
    return design, response, lam
