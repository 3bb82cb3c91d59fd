import json
import math

import numpy as np
import pytest

from aumcf import (
    ScenarioConfig,
    TrueValues,
    ValidationError,
    bootstrap_se,
    contrast_difference,
    generate_dataset,
    run_operating_characteristics,
    simulate_subject,
    survival_bias_sensitivity,
    true_value_oracle,
)
from aumcf.core import ArmDataset, SubjectHistory, StudyDataset
from aumcf.simulation import _stream

# quadrature truths, frozen from an independent oracle
THETA_ICR_TAU1 = 0.4682688269495465
THETA_FRAILTY_TAU4 = 4.236282016799473
THETA_TV_NULL_TAU4 = 4.710265816855179


def test_config_validation():
    with pytest.raises(ValidationError, match="unknown scenario kind"):
        ScenarioConfig(kind="weibull")
    with pytest.raises(ValidationError, match="covariate mode"):
        ScenarioConfig(covariate_mode="sometimes")
    with pytest.raises(ValidationError, match="nonnegative"):
        ScenarioConfig(lambda_event=(-1.0, 1.0))
    with pytest.raises(ValidationError, match="change point"):
        ScenarioConfig(kind="time_varying", change_point=2.0, tau=1.0)


def test_config_json_round_trip(tmp_path):
    cfg = ScenarioConfig(kind="frailty", n_per_arm=50, seed=9)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ScenarioConfig.from_json(str(path)) == cfg
    with pytest.raises(ValidationError, match="unknown config field"):
        ScenarioConfig.from_dict({"kind": "icr", "lambda_events": [1, 1]})


def test_generate_dataset_deterministic():
    cfg = ScenarioConfig(n_per_arm=20, seed=4, replicates=1)
    a = generate_dataset(cfg, 0)
    b = generate_dataset(cfg, 0)
    assert a.arm1.subjects == b.arm1.subjects
    c = generate_dataset(cfg, 1)
    assert a.arm1.subjects != c.arm1.subjects


def test_generated_dataset_valid():
    cfg = ScenarioConfig(kind="frailty", covariate_mode="informative",
                         n_per_arm=200, seed=1)
    study = generate_dataset(cfg, 0)
    for arm in study.arms():
        assert arm.n == 200
        assert np.all(arm.follow_up >= 0)
        for s in arm.subjects:
            assert all(0 <= t <= s.follow_up for t in s.event_times)
            assert len(s.covariates) == 1


def test_zero_event_rate():
    cfg = ScenarioConfig(lambda_event=(0.0, 0.0), n_per_arm=10, seed=2)
    study = generate_dataset(cfg, 0)
    assert study.arm1.event_times.size == 0


def test_no_risk_administrative_cap():
    cfg = ScenarioConfig(lambda_death=(0.0, 0.0), lambda_censor=0.0,
                         n_per_arm=5, tau=1.0, seed=3)
    study = generate_dataset(cfg, 0)
    assert np.all(study.arm1.follow_up == 10.0)  # horizon_factor * tau
    assert not study.arm1.terminal.any()


def test_event_count_matches_analytic_mean():
    # E[N(min(X, tau))] = lambda_E * E[min(X, tau)] with X ~ Exp(0.4)
    cfg = ScenarioConfig(lambda_event=(1.0, 1.0), lambda_death=(0.2, 0.2),
                         lambda_censor=0.2, tau=4.0, n_per_arm=10_000, seed=6)
    study = generate_dataset(cfg, 0)
    means = []
    for arm in study.arms():
        counts = np.zeros(arm.n)
        np.add.at(counts, arm.event_subjects[arm.event_times <= 4.0], 1.0)
        means.append(counts.mean())
    # pooled over both arms (20k subjects); events stop at X by construction
    expect = (1 - math.exp(-0.4 * 4.0)) / 0.4
    assert np.mean(means) == pytest.approx(expect, rel=0.02)


def test_time_varying_rate_change():
    # with upsilon = 0, no events occur after the change point
    cfg = ScenarioConfig(kind="time_varying", rate_multipliers=(0.0, 0.0),
                         change_point=1.0, tau=4.0, lambda_death=(0.0, 0.0),
                         lambda_censor=0.1, n_per_arm=500, seed=8)
    study = generate_dataset(cfg, 0)
    assert np.all(study.arm1.event_times <= 1.0)


def test_frailty_increases_dispersion():
    base = ScenarioConfig(kind="icr", lambda_censor=0.0, lambda_death=(0.0, 0.0),
                          tau=1.0, n_per_arm=4000, seed=10)
    frail = ScenarioConfig(kind="frailty", lambda_censor=0.0,
                           lambda_death=(0.0, 0.0), tau=1.0, n_per_arm=4000, seed=10)

    def counts(cfg):
        arm = generate_dataset(cfg, 0).arm1
        c = np.zeros(arm.n)
        np.add.at(c, arm.event_subjects[arm.event_times <= 1.0], 1.0)
        return c

    assert counts(frail).var() > 1.5 * counts(base).var()


def test_oracle_matches_quadrature_truths():
    cfg = ScenarioConfig(kind="icr", tau=1.0, seed=17)
    tv = true_value_oracle(cfg, n_per_arm=2000, replicates=25)
    assert tv.theta1 == pytest.approx(THETA_ICR_TAU1, abs=0.01)
    assert tv.delta == pytest.approx(0.0, abs=0.01)

    cfg = ScenarioConfig(kind="frailty", tau=4.0, seed=17)
    tv = true_value_oracle(cfg, n_per_arm=2000, replicates=25)
    assert tv.theta1 == pytest.approx(THETA_FRAILTY_TAU4, rel=0.02)

    cfg = ScenarioConfig(kind="time_varying", rate_multipliers=(0.5, 0.5),
                         change_point=1.0, tau=4.0, seed=17)
    tv = true_value_oracle(cfg, n_per_arm=2000, replicates=25)
    assert tv.theta1 == pytest.approx(THETA_TV_NULL_TAU4, rel=0.02)


def test_oracle_no_deaths_closed_form():
    # lambda_D = 0: theta = lambda_E * tau^2 / 2
    cfg = ScenarioConfig(lambda_death=(0.0, 0.0), tau=1.0, seed=12)
    tv = true_value_oracle(cfg, n_per_arm=2000, replicates=25)
    assert tv.theta1 == pytest.approx(0.5, rel=0.01)


def test_harness_small_run_deterministic():
    cfg = ScenarioConfig(n_per_arm=40, replicates=5, seed=13)
    a = run_operating_characteristics(cfg, truth=0.0)
    b = run_operating_characteristics(cfg, truth=0.0)
    assert a.rows == b.rows
    r = a.rows[0]
    assert r.replicates == 5
    assert 0.0 <= r.rejection_rate <= 1.0 and 0.0 <= r.coverage <= 1.0


def test_harness_parallel_equals_serial():
    cfg = ScenarioConfig(n_per_arm=30, replicates=8, seed=14)
    serial = run_operating_characteristics(cfg, truth=0.0, n_jobs=1)
    parallel = run_operating_characteristics(cfg, truth=0.0, n_jobs=2)
    assert serial.rows == parallel.rows


def test_harness_adjusted_requires_covariates():
    cfg = ScenarioConfig(n_per_arm=20, replicates=2, seed=15)
    with pytest.raises(ValidationError, match="covariate mode"):
        run_operating_characteristics(cfg, methods=("adjusted",), truth=0.0)


def test_sensitivity_null_endpoint():
    cfg = ScenarioConfig(tau=1.0, n_per_arm=100, replicates=50, seed=16)
    out = survival_bias_sensitivity(cfg, (0.2,))
    rate, oc = out[0]
    assert rate == 0.2
    r = oc.rows[0]
    assert abs(r.bias) < 4 * r.mcse_bias + 0.02


def test_bootstrap_deterministic_and_degenerate():
    cfg = ScenarioConfig(n_per_arm=40, seed=18)
    study = generate_dataset(cfg, 0)
    a = bootstrap_se(study, B=150, seed=5)
    b = bootstrap_se(study, B=150, seed=5)
    assert a == b
    with pytest.raises(ValidationError):
        bootstrap_se(study, B=10)
    same = [SubjectHistory(f"s{i}", 2.0, True, (1.0,)) for i in range(20)]
    degen = StudyDataset(ArmDataset(1, same),
                         ArmDataset(2, list(same)), tau=2.0)
    assert bootstrap_se(degen, B=100, seed=1) == 0.0


def test_streams_are_distinct():
    g1 = _stream(0, 0, 0, 1, 0)
    g2 = _stream(0, 0, 0, 1, 1)
    g3 = _stream(0, 1, 0, 1, 0)
    x1, x2, x3 = (g.standard_normal(4) for g in (g1, g2, g3))
    assert not np.allclose(x1, x2) and not np.allclose(x1, x3)


def test_subject_draw_order_stable():
    cfg = ScenarioConfig(kind="frailty", covariate_mode="informative", seed=19)
    rng = _stream(cfg.seed, 0, 0, 1, 0)
    s1 = simulate_subject(cfg, 1, rng, "a")
    rng = _stream(cfg.seed, 0, 0, 1, 0)
    s2 = simulate_subject(cfg, 1, rng, "a")
    assert s1 == s2
