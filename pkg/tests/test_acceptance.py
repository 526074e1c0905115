"""End-to-end checks of the advertised guarantees, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v`` to get one pass/fail line
per criterion.  The two expensive studies (the reference coverage run and
the sample-size trend pair) are computed once in module-scoped fixtures
and shared by the criteria that read them, so the file finishes well
inside the stated runtime budgets on an ordinary machine.
"""

import json
import time
from dataclasses import replace

import numpy as np
import pytest

from wtdl import (
    DgpConfig,
    ObservationSet,
    StudyConfig,
    build_weighted,
    compatibility_constant,
    desk_config,
    dr_score,
    fit_lasso,
    fit_wtdl,
    generate,
    kkt_check,
    run_study,
    select_lambda,
)
from wtdl.cli import main as cli_main
from wtdl.inference import debias
from wtdl.nuisance import LinearModel, LogisticModel
from wtdl.simulation import _replication_seeds

from oracles import lasso_grid_min, random_lasso_instance


@pytest.fixture(scope="module")
def desk_report():
    start = time.perf_counter()
    report = run_study(desk_config())
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def trend_summaries():
    base = desk_config()
    start = time.perf_counter()
    out = {}
    for n in (200, 800):
        config = replace(
            base,
            dgp=replace(base.dgp, n=n, p=400),
            replications=50,
            lambda_constant=0.12,
        )
        out[n] = run_study(config).summary
    return out, time.perf_counter() - start


def test_criterion_01_solver_objective_matches_exhaustive_grid():
    # 100 random instances with p <= 3, n <= 8: the solver objective is
    # within 1e-6 of the lattice minimum over [-3, 3]^p at step 1e-3
    start = time.perf_counter()
    rng = np.random.default_rng(20240501)
    worst = 0.0
    for _ in range(100):
        design, response, lam = random_lasso_instance(rng)
        fit = fit_lasso(design, response, lam, tol=1e-9)
        oracle = lasso_grid_min(design, response, lam)
        assert fit.objective <= oracle + 1e-9
        gap = abs(fit.objective - oracle)
        worst = max(worst, gap)
        assert gap <= 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"criterion 1 PASS: worst objective gap {worst:.2e} over 100 instances, {elapsed:.1f}s")


def test_criterion_02_kkt_certificates_hold_at_scale():
    # 100 instances at n=50, p=100: stationarity violations stay below
    # 1e-6 on both the inactive and active coordinates
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_inactive = 0.0
    worst_active = 0.0
    for _ in range(100):
        design = rng.normal(size=(50, 100))
        coef = np.zeros(100)
        coef[:3] = (2.0, -1.5, 1.0)
        response = design @ coef + rng.normal(size=50)
        lam = select_lambda(design, response, "theory")
        fit = fit_lasso(design, response, lam, tol=1e-9)
        assert fit.converged
        viol = kkt_check(fit, design, response)
        worst_inactive = max(worst_inactive, viol.inactive)
        worst_active = max(worst_active, viol.active)
        assert viol.inactive <= 1e-6
        assert viol.active <= 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(
        f"criterion 2 PASS: worst violations inactive {worst_inactive:.2e}, "
        f"active {worst_active:.2e}, {elapsed:.1f}s"
    )


def test_criterion_03_exact_inverse_reduces_debias_to_least_squares():
    # with the exact Gram inverse in place of the nodewise surrogate, the
    # one-step correction lands on dense least squares regardless of the
    # penalty used in the first stage
    rng = np.random.default_rng(11)
    n, p = 200, 10
    x = rng.normal(size=(n, p))
    obs = ObservationSet(
        y=np.zeros(n), d=(rng.uniform(size=n) < 0.5).astype(float), x=x
    )
    coef = np.zeros(p)
    coef[:3] = (1.0, -2.0, 0.5)
    q = x @ coef + rng.normal(size=n)
    wp = build_weighted(obs, q, np.ones(n))
    sigma_hat = wp.w.T @ wp.w / n
    theta_exact = np.linalg.inv(sigma_hat)
    ols = np.linalg.solve(sigma_hat, wp.w.T @ wp.q_wdml / n)
    worst = 0.0
    for lam in (0.01, 0.1, 1.0):
        fit = fit_lasso(wp.w, wp.q_wdml, lam)
        b = debias(fit, theta_exact, wp)
        gap = float(np.max(np.abs(b - ols)))
        worst = max(worst, gap)
        assert gap <= 1e-8
    print(f"criterion 3 PASS: worst deviation from least squares {worst:.2e}")


def test_criterion_04_nodewise_rows_meet_inverse_bound():
    # on the reference preset's weighted design, every row of the
    # approximate inverse satisfies the stationarity-implied bound
    start = time.perf_counter()
    config = desk_config()
    seed_dgp, seed_fit = _replication_seeds(config.master_seed, 0)
    obs, _ = generate(replace(config.dgp, seed=seed_dgp))
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
        nuisance_settings=config.nuisance_settings(),
        nodewise_constant=config.nodewise_constant,
    )
    w = result.wp.w
    n, p = w.shape
    sigma_hat = w.T @ w / n
    nodewise = result.theta
    residual_rows = nodewise.theta @ sigma_hat - np.eye(p)
    row_max = np.max(np.abs(residual_rows), axis=1)
    bound = nodewise.lambdas / nodewise.tau_sq + 1e-8
    margin = float(np.max(row_max - bound))
    assert np.all(row_max <= bound)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"criterion 4 PASS: worst row margin {margin:.2e} over p={p}, {elapsed:.1f}s")


def test_criterion_05_score_mean_identifies_contrast_exactly():
    # discrete toy at a fixed x: treatment Bernoulli, two-point noise;
    # summing the score over all four atoms with a correct propensity and
    # deliberately wrong outcome models returns the true contrast
    x = np.array([0.5, -1.0])
    mu1_true = LinearModel(intercept=1.0, coef=np.array([2.0, 0.0]))
    mu0_true = LinearModel(intercept=0.5, coef=np.array([0.0, -1.0]))
    mu1_hat = LinearModel(intercept=0.3, coef=np.array([0.7, -0.2]))
    mu0_hat = LinearModel(intercept=-0.1, coef=np.array([0.4, 0.1]))
    pi_model = LogisticModel(intercept=float(np.log(1.0 / 3.0)), coef=np.zeros(2), clip=0.01)
    pi = float(pi_model.predict_proba1(x))
    tau = float(mu1_true.predict(x)) - float(mu0_true.predict(x))
    total = 0.0
    for d, prob_d, mu_true in ((1.0, pi, mu1_true), (0.0, 1.0 - pi, mu0_true)):
        for eps in (-1.0, 1.0):
            y = float(mu_true.predict(x)) + eps
            total += prob_d * 0.5 * dr_score(y, d, x, (mu1_hat, mu0_hat), pi_model)
    assert total == pytest.approx(tau, abs=1e-12)
    print(f"criterion 5 PASS: enumerated mean {total!r} equals contrast {tau!r}")


def test_criterion_06_reference_coverage_within_band(desk_report):
    # 200 replications of the reference preset: per-coefficient coverage
    # of the 95% intervals lies in [0.90, 0.99] on every active coordinate
    report, elapsed = desk_report
    level = report.summary["estimators"]["wtdl"]["replication_level"]
    assert level["failures"] == 0
    coverage = report.summary["estimators"]["wtdl"]["per_coefficient"]["coverage"][:5]
    for cov in coverage:
        assert 0.90 <= cov <= 0.99
    assert elapsed <= 1800.0
    print(f"criterion 6 PASS: active coverage {coverage}, {elapsed:.0f}s")


def test_criterion_07_l1_error_shrinks_with_sample_size(trend_summaries):
    # fixed p=400: the median l1 estimation error over 50 seeds at n=800
    # is at most 70% of its value at n=200
    summaries, elapsed = trend_summaries
    small = summaries[200]["estimators"]["wtdl"]["replication_level"]["median_l1_error"]
    large = summaries[800]["estimators"]["wtdl"]["replication_level"]["median_l1_error"]
    ratio = large / small
    assert ratio <= 0.70
    assert elapsed <= 900.0
    print(
        f"criterion 7 PASS: median l1 error {small:.3f} -> {large:.3f} "
        f"(ratio {ratio:.3f}), {elapsed:.0f}s"
    )


def test_criterion_08_debiasing_shrinks_bias_on_actives(desk_report):
    # over the reference replications, the corrected estimate beats the
    # selection-stage estimate in absolute mean bias on >= 4 of 5 actives
    report, _ = desk_report
    per = report.summary["estimators"]["wtdl"]["per_coefficient"]
    wins = sum(
        1
        for j in range(5)
        if abs(per["mean_bias_b"][j]) <= abs(per["mean_bias_lasso"][j])
    )
    assert wins >= 4
    print(f"criterion 8 PASS: corrected estimate wins on {wins}/5 active coefficients")


def test_criterion_09_correction_remainder_decays_with_n(trend_summaries):
    # the median remainder norm of the one-step expansion decreases from
    # n=200 to n=800 at fixed p=400
    summaries, _ = trend_summaries
    small = summaries[200]["estimators"]["wtdl"]["replication_level"]["median_delta_norm"]
    large = summaries[800]["estimators"]["wtdl"]["replication_level"]["median_delta_norm"]
    assert large < small
    print(f"criterion 9 PASS: median remainder norm {small:.1f} -> {large:.1f}")


def test_criterion_10_simulate_outputs_are_reproducible(tmp_path):
    # identical config and seed give byte-identical records.csv and
    # summary.json, for repeated runs and for parallelism 1 vs 8
    config = StudyConfig(
        dgp=DgpConfig(n=80, p=20, s0=3, beta_values=(2.0, 1.0, -1.0)),
        replications=6,
        master_seed=5,
        estimators=("wtdl",),
    )
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config.to_dict()))
    outputs = {}
    for name, par in (("first", 1), ("second", 1), ("parallel", 8)):
        out_dir = tmp_path / name
        code = cli_main(
            ["simulate", "--config", str(cfg_path), "--out", str(out_dir),
             "--parallelism", str(par)]
        )
        assert code == 0
        outputs[name] = (
            (out_dir / "records.csv").read_bytes(),
            (out_dir / "summary.json").read_bytes(),
        )
    assert outputs["first"] == outputs["second"]
    assert outputs["first"] == outputs["parallel"]
    print("criterion 10 PASS: byte-identical outputs across reruns and parallelism 1 vs 8")


def test_criterion_11_compatibility_constant_of_identity_design():
    # with an identity Gram matrix the compatibility constant is exactly
    # one; the lattice audit must land on it within its own slack
    worst = 0.0
    for p, active in ((2, (0,)), (4, (0, 2)), (6, (3,)), (6, (1, 4))):
        audit = compatibility_constant(np.eye(p), np.array(active))
        gap = abs(audit.value - 1.0)
        worst = max(worst, gap)
        assert gap <= audit.slack
        assert audit.value == pytest.approx(1.0, abs=1e-12)
    print(f"criterion 11 PASS: worst deviation from 1.0 is {worst:.2e}")
