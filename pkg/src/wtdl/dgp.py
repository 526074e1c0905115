"""Synthetic data generator for sparse-contrast treatment effect studies.

Covariates follow a Gaussian AR(1) process, so their covariance is
Toeplitz with entry rho^|j-k|.  The control mean is dense in all
covariates while the treatment contrast is sparse: the first s0
coordinates carry the supplied coefficient values and the rest are zero.
Treatment is assigned by a clipped logistic propensity along a fixed
random direction, and both potential outcomes receive independent
Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any

import numpy as np
from scipy.special import expit

from .data import GroundTruth, ObservationSet
from .nuisance import LinearModel, LogisticModel, NuisanceModels

__all__ = ["DgpConfig", "generate", "true_cate", "true_nuisances"]


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the synthetic draw.

    Parameters
    ----------
    n, p : int
        Sample size and covariate dimension.
    s0 : int
        Number of nonzero contrast coefficients; must equal
        ``len(beta_values)``.
    beta_values : tuple of float
        Values placed on the first s0 coordinates of the contrast.
    covariate_correlation : float
        AR(1) parameter rho in (-1, 1).
    propensity_strength : float
        Scale of the logistic index; 0 gives a constant 1/2 propensity.
    propensity_clip : float
        Overlap constant: true propensities live in [clip, 1 - clip].
    outcome_dense_scale : float
        The dense control coefficients are drawn i.i.d. normal with
        standard deviation ``outcome_dense_scale / sqrt(p)``.
    noise_sd1, noise_sd0 : float
        Noise standard deviations of the two potential outcomes.
    seed : int
        Seed for all randomness in one draw.
    """

    n: int
    p: int
    s0: int
    beta_values: tuple[float, ...]
    covariate_correlation: float = 0.3
    propensity_strength: float = 0.5
    propensity_clip: float = 0.1
    outcome_dense_scale: float = 1.0
    noise_sd1: float = 1.0
    noise_sd0: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta_values", tuple(float(b) for b in self.beta_values))
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.p < 1:
            raise ValueError(f"p must be positive, got {self.p}")
        if not 0 <= self.s0 <= self.p:
            raise ValueError(f"s0 must lie in [0, p], got s0={self.s0}, p={self.p}")
        if len(self.beta_values) != self.s0:
            raise ValueError(
                f"beta_values has length {len(self.beta_values)}, expected s0={self.s0}"
            )
        if not -1.0 < self.covariate_correlation < 1.0:
            raise ValueError("covariate_correlation must lie in (-1, 1)")
        if not 0.0 < self.propensity_clip < 0.5:
            raise ValueError("propensity_clip must lie in (0, 0.5)")
        if self.outcome_dense_scale < 0 or self.noise_sd1 < 0 or self.noise_sd0 < 0:
            raise ValueError("scale parameters must be nonnegative")

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["beta_values"] = list(self.beta_values)
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "DgpConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown dgp config keys: {sorted(unknown)}")
        return cls(**raw)


def generate(config: DgpConfig) -> tuple[ObservationSet, GroundTruth]:
    """Draw one sample and return it with its generating quantities.

    All randomness comes from ``numpy.random.default_rng(config.seed)``,
    so repeated calls with the same config are identical.
    """
    rng = np.random.default_rng(config.seed)
    n, p, rho = config.n, config.p, config.covariate_correlation

    z = rng.standard_normal((n, p))
    x = np.empty((n, p))
    x[:, 0] = z[:, 0]
    scale = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + scale * z[:, j]

    beta0 = np.zeros(p)
    beta0[: config.s0] = config.beta_values
    active_set = np.arange(config.s0, dtype=np.int64)

    dense = rng.normal(0.0, config.outcome_dense_scale / math.sqrt(p), size=p)
    direction = rng.standard_normal(p)
    norm = np.linalg.norm(direction)
    if norm > 0:
        direction = direction / norm
    prop_coef = config.propensity_strength * direction

    clip = config.propensity_clip
    pi1 = np.clip(expit(x @ prop_coef), clip, 1.0 - clip)
    d = (rng.uniform(size=n) < pi1).astype(np.float64)

    mu0_vals = x @ dense
    mu1_vals = mu0_vals + x @ beta0
    eps1 = rng.normal(0.0, config.noise_sd1, size=n)
    eps0 = rng.normal(0.0, config.noise_sd0, size=n)
    y = d * (mu1_vals + eps1) + (1.0 - d) * (mu0_vals + eps0)

    gt = GroundTruth(
        beta0=beta0,
        active_set=active_set,
        mu1_coef=dense + beta0,
        mu0_coef=dense,
        propensity_coef=prop_coef,
        noise_sd1=config.noise_sd1,
        noise_sd0=config.noise_sd0,
        propensity_clip=clip,
    )
    return ObservationSet(y=y, d=d, x=x), gt


def true_cate(gt: GroundTruth, x: np.ndarray) -> np.ndarray:
    """Evaluate the true treatment contrast ``x @ beta0``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != gt.beta0.shape[0]:
        raise ValueError(
            f"x has {x.shape[-1]} columns, expected {gt.beta0.shape[0]}"
        )
    return x @ gt.beta0


def true_nuisances(gt: GroundTruth) -> NuisanceModels:
    """Package the generating mean and propensity functions as models.

    The returned bundle exposes the same prediction interface as fitted
    nuisance models, so it can be swapped into the estimation pipeline to
    form oracle benchmarks.
    """
    return NuisanceModels(
        mu1=LinearModel(intercept=gt.mu1_intercept, coef=gt.mu1_coef),
        mu0=LinearModel(intercept=gt.mu0_intercept, coef=gt.mu0_coef),
        propensity=LogisticModel(
            intercept=gt.propensity_intercept,
            coef=gt.propensity_coef,
            clip=gt.propensity_clip,
        ),
    )
