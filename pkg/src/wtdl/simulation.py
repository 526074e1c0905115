"""Monte Carlo studies over the synthetic generator.

A study runs R independent replications.  Replication r draws its own
seeds from ``SeedSequence((master_seed, r))``, so results depend only on
the config and never on scheduling: running with 1 worker or 8 produces
byte-identical outputs.  Each replication can run up to three
estimators: the feasible pipeline ("wtdl"), the true-nuisance benchmark
("oracle"), and the no-split baseline ("no_crossfit", selection stage
only).

Outputs are a records.csv with one row per replication, estimator, and
coefficient, and a summary.json whose per-coefficient block is
recomputable from records.csv alone.  Wall-clock times are kept in
memory only, so output files are reproducible.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Any

import numpy as np

from .data import ObservationSet, read_csv, validate
from .dgp import DgpConfig, generate
from .errors import DataError, NumericalError
from .estimator import fit_wtdl
from .inference import diagnostics, estimate_from_weighted
from .lasso import select_lambda
from .nuisance import NuisanceSettings, fit_all
from .scores import (
    build_weighted,
    pseudo_outcomes_single,
    true_weights,
    weights_single,
)

__all__ = [
    "StudyConfig",
    "ReplicationRecord",
    "SimulationReport",
    "desk_config",
    "run_replication",
    "run_study",
    "write_report",
    "summarize_records",
    "read_records",
    "estimate_from_csv",
]

ESTIMATOR_NAMES = ("wtdl", "oracle", "no_crossfit")

RECORD_COLUMNS = (
    "rep",
    "estimator",
    "j",
    "beta0_j",
    "beta_lasso_j",
    "b_j",
    "se_j",
    "ci_lo",
    "ci_hi",
    "covered",
)


@dataclass(frozen=True)
class StudyConfig:
    """Full description of one Monte Carlo study.

    ``clip`` of None means nuisance propensities are clipped at the
    generator's own overlap constant.  ``estimators`` lists which of
    "wtdl", "oracle", "no_crossfit" to run per replication.
    ``nodewise_constant`` of None reuses ``lambda_constant`` for the
    nodewise penalties; the two scales differ in general because the
    selection response and the design columns need not be on the same
    scale, while each nodewise regression is column-on-columns.
    """

    dgp: DgpConfig
    m: int = 2
    lambda_method: str = "theory"
    lambda_constant: float = 1.0
    nodewise_constant: float | None = None
    cv_folds: int = 5
    weight_mode: str = "constant_per_arm"
    weight_floor: float = 1e-3
    alpha: float = 0.05
    replications: int = 200
    master_seed: int = 0
    parallelism: int = 1
    estimators: tuple[str, ...] = ("wtdl",)
    ridge_outcome: float | None = None
    ridge_propensity: float | None = None
    clip: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimators", tuple(self.estimators))
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if not self.estimators:
            raise ValueError("estimators must be nonempty")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be positive")
        if self.lambda_method not in ("theory", "cv"):
            raise ValueError(f"unknown lambda_method {self.lambda_method!r}")
        if self.nodewise_constant is not None and not self.nodewise_constant > 0:
            raise ValueError("nodewise_constant must be positive")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "dgp":
                v = v.to_dict()
            elif f.name == "estimators":
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown study config keys: {sorted(unknown)}")
        if "dgp" not in raw:
            raise ValueError("study config must contain a dgp block")
        data = dict(raw)
        data["dgp"] = DgpConfig.from_dict(data["dgp"])
        if "estimators" in data:
            data["estimators"] = tuple(data["estimators"])
        return cls(**data)

    def nuisance_settings(self) -> NuisanceSettings:
        clip = self.dgp.propensity_clip if self.clip is None else self.clip
        return NuisanceSettings(
            ridge_outcome=self.ridge_outcome,
            ridge_propensity=self.ridge_propensity,
            clip=clip,
        )


def desk_config() -> StudyConfig:
    """Reference study: n=400, p=600, five active coefficients.

    Treatment is randomized (no covariate tilt), so the heavily
    regularized propensity fit is correctly specified near 1/2; with
    p > n the outcome regressions cannot absorb the contrast signal,
    and an x-dependent propensity fit would couple with those outcome
    errors and bias the scores.  The penalty constants are calibrated
    to this preset: the rate rule scales with the response alone, and
    the weighted design columns here have standard deviation far below
    one, so the selection stage needs a much smaller constant than the
    column-on-column nodewise regressions.
    """
    return StudyConfig(
        dgp=DgpConfig(
            n=400,
            p=600,
            s0=5,
            beta_values=(3.0, 2.0, 1.5, 1.0, 0.5),
            covariate_correlation=0.3,
            propensity_strength=0.0,
            propensity_clip=0.1,
            outcome_dense_scale=1.0,
            noise_sd1=1.0,
            noise_sd0=1.0,
        ),
        m=2,
        lambda_method="theory",
        lambda_constant=0.03,
        nodewise_constant=0.5,
        weight_mode="constant_per_arm",
        alpha=0.05,
        replications=200,
        master_seed=6,
        ridge_propensity=1000.0,
        estimators=("wtdl",),
    )


@dataclass(frozen=True)
class ReplicationRecord:
    """Result of one estimator on one replication."""

    rep: int
    estimator: str
    seed: int
    error: str | None
    beta0: np.ndarray | None = None
    beta_lasso: np.ndarray | None = None
    b: np.ndarray | None = None
    se: np.ndarray | None = None
    ci: np.ndarray | None = None
    l1_error: float | None = None
    pred_error: float | None = None
    delta_norm: float | None = None
    residual_gap: float | None = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class SimulationReport:
    config: StudyConfig
    per_replication: list[ReplicationRecord]
    summary: dict


def _replication_seeds(master_seed: int, r: int) -> tuple[int, int]:
    state = np.random.SeedSequence((master_seed, r)).generate_state(2)
    return int(state[0]), int(state[1])


def run_replication(config: StudyConfig, r: int) -> list[ReplicationRecord]:
    """Run every configured estimator on replication r.

    Estimator failures are captured as error strings on the record, not
    raised, so long studies survive rare degenerate draws.
    """
    seed_dgp, seed_fit = _replication_seeds(config.master_seed, r)
    obs, gt = generate(replace(config.dgp, seed=seed_dgp))
    settings = config.nuisance_settings()
    records: list[ReplicationRecord] = []
    for name in config.estimators:
        start = time.perf_counter()
        try:
            if name == "wtdl":
                rec = _run_wtdl(config, settings, obs, gt, r, seed_fit)
            elif name == "oracle":
                rec = _run_oracle(config, obs, gt, r, seed_fit)
            else:
                rec = _run_no_crossfit(config, settings, obs, gt, r, seed_fit)
        except (DataError, NumericalError, ValueError) as exc:
            rec = ReplicationRecord(
                rep=r, estimator=name, seed=seed_dgp,
                error=f"{type(exc).__name__}: {exc}",
            )
        records.append(replace(rec, wall_time=time.perf_counter() - start))
    return records


def _run_wtdl(
    config: StudyConfig,
    settings: NuisanceSettings,
    obs: ObservationSet,
    gt,
    r: int,
    seed_fit: int,
) -> ReplicationRecord:
    result = fit_wtdl(
        obs,
        m=config.m,
        lambda_method=config.lambda_method,
        lambda_constant=config.lambda_constant,
        cv_folds=config.cv_folds,
        weight_mode=config.weight_mode,
        weight_floor=config.weight_floor,
        alpha=config.alpha,
        seed=seed_fit,
        nuisance_settings=settings,
        nodewise_constant=config.nodewise_constant,
    )
    est = result.estimate
    diag = diagnostics(result.lasso_fit, result.theta, result.wp, gt, obs)
    return ReplicationRecord(
        rep=r, estimator="wtdl", seed=seed_fit, error=None,
        beta0=gt.beta0, beta_lasso=est.beta_lasso, b=est.b, se=est.se, ci=est.ci,
        l1_error=diag.l1_error, pred_error=diag.pred_error,
        delta_norm=diag.delta_norm, residual_gap=diag.residual_gap,
    )


def _run_oracle(
    config: StudyConfig, obs: ObservationSet, gt, r: int, seed_fit: int
) -> ReplicationRecord:
    from .dgp import true_nuisances

    models = true_nuisances(gt)
    q_bar = pseudo_outcomes_single(obs, models)
    sigma = true_weights(obs, gt, floor=config.weight_floor)
    wp = build_weighted(obs, q_bar, sigma)
    lam = select_lambda(
        wp.w, wp.q_wdml, config.lambda_method,
        cv_folds=config.cv_folds, seed=seed_fit, constant=config.lambda_constant,
    )
    nodewise_c = (
        config.lambda_constant
        if config.nodewise_constant is None
        else config.nodewise_constant
    )
    parts = estimate_from_weighted(
        wp, lam, alpha=config.alpha, nodewise_constant=nodewise_c
    )
    est = parts.estimate
    diag = diagnostics(parts.fit, parts.theta, wp, gt, obs)
    return ReplicationRecord(
        rep=r, estimator="oracle", seed=seed_fit, error=None,
        beta0=gt.beta0, beta_lasso=est.beta_lasso, b=est.b, se=est.se, ci=est.ci,
        l1_error=diag.l1_error, pred_error=diag.pred_error,
        delta_norm=diag.delta_norm, residual_gap=diag.residual_gap,
    )


def _run_no_crossfit(
    config: StudyConfig,
    settings: NuisanceSettings,
    obs: ObservationSet,
    gt,
    r: int,
    seed_fit: int,
) -> ReplicationRecord:
    models = fit_all(obs, settings)
    q_hat = pseudo_outcomes_single(obs, models)
    sigma = weights_single(
        obs, models, mode=config.weight_mode, floor=config.weight_floor
    )
    wp = build_weighted(obs, q_hat, sigma)
    lam = select_lambda(
        wp.w, wp.q_wdml, config.lambda_method,
        cv_folds=config.cv_folds, seed=seed_fit, constant=config.lambda_constant,
    )
    from .lasso import fit_lasso

    fit = fit_lasso(wp.w, wp.q_wdml, lam)
    dev = fit.beta - gt.beta0
    wdev = wp.w @ dev
    return ReplicationRecord(
        rep=r, estimator="no_crossfit", seed=seed_fit, error=None,
        beta0=gt.beta0, beta_lasso=fit.beta,
        l1_error=float(np.abs(dev).sum()),
        pred_error=float(wdev @ wdev) / obs.n,
    )


def _worker(args: tuple[StudyConfig, int]) -> list[ReplicationRecord]:
    return run_replication(*args)


def run_study(config: StudyConfig) -> SimulationReport:
    """Run all replications and aggregate.

    With ``parallelism > 1`` replications are distributed over worker
    processes; outputs are identical to a serial run because each
    replication's randomness is derived from its own index.
    """
    if config.parallelism > 1:
        tasks = [(config, r) for r in range(config.replications)]
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            nested = list(pool.map(_worker, tasks, chunksize=1))
    else:
        nested = [run_replication(config, r) for r in range(config.replications)]
    records = [rec for group in nested for rec in group]
    rows = records_to_rows(records)
    summary = build_summary(config, records, rows)
    return SimulationReport(config=config, per_replication=records, summary=summary)


def records_to_rows(records: list[ReplicationRecord]) -> list[dict]:
    """Flatten successful records into per-coefficient row dicts."""
    rows = []
    for rec in records:
        if rec.error is not None:
            continue
        p = rec.beta0.shape[0]
        has_ci = rec.ci is not None
        for j in range(p):
            if has_ci:
                lo, hi = float(rec.ci[j, 0]), float(rec.ci[j, 1])
                row = {
                    "rep": rec.rep,
                    "estimator": rec.estimator,
                    "j": j + 1,
                    "beta0_j": float(rec.beta0[j]),
                    "beta_lasso_j": float(rec.beta_lasso[j]),
                    "b_j": float(rec.b[j]),
                    "se_j": float(rec.se[j]),
                    "ci_lo": lo,
                    "ci_hi": hi,
                    "covered": int(lo <= rec.beta0[j] <= hi),
                }
            else:
                row = {
                    "rep": rec.rep,
                    "estimator": rec.estimator,
                    "j": j + 1,
                    "beta0_j": float(rec.beta0[j]),
                    "beta_lasso_j": float(rec.beta_lasso[j]),
                    "b_j": float("nan"),
                    "se_j": float("nan"),
                    "ci_lo": float("nan"),
                    "ci_hi": float("nan"),
                    "covered": None,
                }
            rows.append(row)
    return rows


def summarize_records(rows: list[dict]) -> dict:
    """Per-coefficient statistics grouped by estimator.

    Works identically on in-memory rows and rows parsed back from
    records.csv, which is what makes the summary auditable.
    """
    out: dict[str, Any] = {}
    estimators = sorted({row["estimator"] for row in rows})
    for est in estimators:
        sub = [row for row in rows if row["estimator"] == est]
        js = sorted({row["j"] for row in sub})
        reps = sorted({row["rep"] for row in sub})
        coverage: list[float] = []
        mean_bias_b: list[float] = []
        mean_bias_lasso: list[float] = []
        rmse_b: list[float] = []
        mean_ci_width: list[float] = []
        has_ci = all(row["covered"] is not None for row in sub)
        for j in js:
            rows_j = [row for row in sub if row["j"] == j]
            beta0 = np.array([row["beta0_j"] for row in rows_j])
            lasso = np.array([row["beta_lasso_j"] for row in rows_j])
            mean_bias_lasso.append(float(np.mean(lasso - beta0)))
            if has_ci:
                b = np.array([row["b_j"] for row in rows_j])
                lo = np.array([row["ci_lo"] for row in rows_j])
                hi = np.array([row["ci_hi"] for row in rows_j])
                cov = np.array([row["covered"] for row in rows_j], dtype=np.float64)
                coverage.append(float(np.mean(cov)))
                mean_bias_b.append(float(np.mean(b - beta0)))
                rmse_b.append(float(np.sqrt(np.mean((b - beta0) ** 2))))
                mean_ci_width.append(float(np.mean(hi - lo)))
        out[est] = {
            "replications_counted": len(reps),
            "coverage": coverage if has_ci else None,
            "mean_bias_b": mean_bias_b if has_ci else None,
            "mean_bias_lasso": mean_bias_lasso,
            "rmse_b": rmse_b if has_ci else None,
            "mean_ci_width": mean_ci_width if has_ci else None,
        }
    return out


def build_summary(
    config: StudyConfig, records: list[ReplicationRecord], rows: list[dict]
) -> dict:
    per_coef = summarize_records(rows)
    estimators: dict[str, Any] = {}
    for name in config.estimators:
        recs = [r for r in records if r.estimator == name]
        ok = [r for r in recs if r.error is None]
        failures = [r for r in recs if r.error is not None]
        level: dict[str, Any] = {
            "failures": len(failures),
            "errors": [{"rep": r.rep, "error": r.error} for r in failures],
        }
        if ok:
            l1 = np.array([r.l1_error for r in ok])
            pred = np.array([r.pred_error for r in ok])
            level["mean_l1_error"] = float(np.mean(l1))
            level["median_l1_error"] = float(np.median(l1))
            level["median_pred_error"] = float(np.median(pred))
            deltas = [r.delta_norm for r in ok if r.delta_norm is not None]
            if deltas:
                level["mean_delta_norm"] = float(np.mean(deltas))
                level["median_delta_norm"] = float(np.median(deltas))
            gaps = [r.residual_gap for r in ok if r.residual_gap is not None]
            if gaps:
                level["mean_residual_gap"] = float(np.mean(gaps))
        estimators[name] = {
            "per_coefficient": per_coef.get(name),
            "replication_level": level,
        }
    # the echo identifies the study; parallelism only describes how it
    # was executed and must not break byte-level parallel invariance
    cfg_echo = config.to_dict()
    cfg_echo.pop("parallelism", None)
    return {"config": cfg_echo, "estimators": estimators}


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def write_report(report: SimulationReport, out_dir: str) -> None:
    """Write records.csv and summary.json under ``out_dir``.

    Floats are serialized with shortest round-trip precision, so reading
    records.csv back recovers exactly the in-memory values and the
    summary can be re-derived bit for bit.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = records_to_rows(report.per_replication)
    lines = [",".join(RECORD_COLUMNS)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in RECORD_COLUMNS))
    with open(os.path.join(out_dir, "records.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(report.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_records(path: str) -> list[dict]:
    """Parse a records.csv back into row dicts."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != ",".join(RECORD_COLUMNS):
        raise DataError(
            "malformed records file: expected header " + ",".join(RECORD_COLUMNS)
        )
    rows = []
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != len(RECORD_COLUMNS):
            raise DataError(f"records row {i}: expected {len(RECORD_COLUMNS)} fields")
        try:
            rows.append(
                {
                    "rep": int(cells[0]),
                    "estimator": cells[1],
                    "j": int(cells[2]),
                    "beta0_j": float(cells[3]),
                    "beta_lasso_j": float(cells[4]),
                    "b_j": float(cells[5]),
                    "se_j": float(cells[6]),
                    "ci_lo": float(cells[7]),
                    "ci_hi": float(cells[8]),
                    "covered": None if cells[9] == "" else int(cells[9]),
                }
            )
        except ValueError as exc:
            raise DataError(f"records row {i}: {exc}") from None
    return rows


def estimate_from_csv(
    path: str,
    m: int = 2,
    lambda_method: str = "theory",
    weight_mode: str = "constant_per_arm",
    alpha: float = 0.05,
    seed: int = 0,
) -> dict:
    """Load observations from CSV, run the pipeline, return the JSON dict."""
    obs = read_csv(path)
    problems = validate(obs)
    if problems:
        raise DataError("; ".join(problems))
    result = fit_wtdl(
        obs, m=m, lambda_method=lambda_method, weight_mode=weight_mode,
        alpha=alpha, seed=seed,
    )
    return result.estimate.to_json_dict()
