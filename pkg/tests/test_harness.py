"""Experiment registry, verdict reproducibility, and cheap positive/negative runs.

Full-budget verification lives in test_acceptance; here each runner is
exercised at desk scale, plus synthetic negatives that feed a wrong scale
constant in and require the gate to catch it.
"""

import json
import math

import pytest

from conewalk.ensembles import EnsembleSpec
from conewalk.harness import (
    EXPERIMENTS,
    experiment_names,
    run_experiment,
    run_harmonicity,
    run_rayleigh_terminal,
)

from conftest import DESK_SIGMA, DESK_SIGMA_SE, DESK_V2, DESK_V2_SE

EXPECTED_NAMES = {
    "audit_comparability",
    "check_reversal_inequalities",
    "check_averaged_llt",
    "check_window_bounds",
    "check_conditioned_window_bounds",
    "check_gnedenko_profile",
    "check_three_halves_rate",
    "check_rayleigh_terminal",
    "check_harmonicity",
}


def test_registry_contents():
    assert set(experiment_names()) == EXPECTED_NAMES
    for name, info in EXPERIMENTS.items():
        assert info.name == name
        assert callable(info.runner)
        assert info.summary
        assert isinstance(info.defaults, dict)
    with pytest.raises(KeyError):
        run_experiment("check_everything", EnsembleSpec("rank_one", 2, 1.0, {}))


def test_run_experiment_merges_defaults(desk_spec):
    # override one default, keep the rest
    report = run_experiment("audit_comparability", desk_spec, seed=4, words=500)
    assert report.experiment == "audit_comparability"
    assert report.details["words"] == 500
    assert report.passed and report.status == "pass"
    assert report.details["failures"] == 0


def test_verdicts_are_reproducible_and_serializable(desk_spec):
    a = run_experiment("audit_comparability", desk_spec, seed=9, words=300)
    b = run_experiment("audit_comparability", desk_spec, seed=9, words=300)
    assert a.to_dict() == b.to_dict()
    c = run_experiment("audit_comparability", desk_spec, seed=10, words=300)
    assert c.inputs_hash != a.inputs_hash
    # a verdict must survive a JSON round trip unchanged
    assert json.loads(json.dumps(a.to_dict())) == a.to_dict()


def test_exact_reversal_regression(finite_spec):
    # fully enumerated two-atom law at horizon 12: the lower dual window
    # holds exactly 24 of the 4096 equally weighted words
    report = run_experiment("check_reversal_inequalities", finite_spec,
                            seed=0, exact=True, horizon=12)
    assert report.passed
    assert report.details["dual_lower"] == 24 / 4096
    assert report.details["forward"] >= report.details["dual_lower"]
    assert report.details["dual_upper"] >= report.details["forward"]
    assert report.details["guards"]["lower_valid"]


def test_mc_reversal_small(finite_spec):
    report = run_experiment("check_reversal_inequalities", finite_spec,
                            seed=1, horizon=16, count=50_000)
    assert report.status in ("pass", "fail")
    assert "upper_margin_se_units" in report.details
    assert report.passed  # inequalities hold for this law; margins are wide

    with pytest.raises(ValueError):
        run_experiment("check_reversal_inequalities", finite_spec, width=-1.0)


def test_averaged_llt_desk_quick(desk_spec):
    report = run_experiment(
        "check_averaged_llt", desk_spec, seed=2,
        horizons=[64, 256], count=100_000, sigma=DESK_SIGMA, sigma_se=DESK_SIGMA_SE,
    )
    assert report.passed, report.details["rows"]
    assert report.details["sigma_source"] == "supplied"
    assert {row["u"] for row in report.details["rows"]} == {"one", "coord0"}


def test_window_bounds_desk_quick(desk_spec):
    report = run_experiment(
        "check_window_bounds", desk_spec, seed=3,
        horizons=[64, 256], count=80_000, sigma=DESK_SIGMA, sigma_se=DESK_SIGMA_SE,
    )
    assert report.passed, report.details
    assert report.statistic == report.details["stability_ratio"]
    assert report.details["decay_c"] > 0.25


def test_conditioned_window_bounds_desk_quick(desk_spec):
    report = run_experiment(
        "check_conditioned_window_bounds", desk_spec, seed=4,
        horizons=[64, 256], count=80_000, sigma=DESK_SIGMA, sigma_se=DESK_SIGMA_SE,
    )
    assert report.passed, report.details
    assert report.details["crossed"]["ok"]
    assert report.details["crossed"]["p"] <= report.details["crossed"]["envelope"]


def test_gnedenko_negative_catches_wrong_sigma(desk_spec):
    # a 50% inflated sigma misplaces the profile peak and the predicted
    # constant; the shape gate must fail, and fail conclusively
    report = run_experiment(
        "check_gnedenko_profile", desk_spec, seed=5,
        horizons=[64, 256], count=80_000, width=1.0,
        sigma=1.5 * DESK_SIGMA, sigma_se=DESK_SIGMA_SE,
        harmonic_value=DESK_V2, harmonic_se=DESK_V2_SE,
    )
    assert report.status == "fail"
    assert not report.passed


def test_rayleigh_negative_catches_wrong_sigma(desk_spec):
    report = run_rayleigh_terminal(
        desk_spec, seed=6, horizon=256, survivors=3000,
        sigma=1.3 * DESK_SIGMA, sigma_se=DESK_SIGMA_SE,
    )
    assert report.status == "fail"
    assert report.statistic > report.threshold


def test_rayleigh_positive_small(desk_spec):
    report = run_rayleigh_terminal(
        desk_spec, seed=6, horizon=512, survivors=5000,
        sigma=DESK_SIGMA, sigma_se=DESK_SIGMA_SE,
    )
    assert report.passed, report.details
    assert report.details["survivors_used"] >= 5000


def test_rayleigh_inconclusive_when_budget_too_small(desk_spec):
    report = run_rayleigh_terminal(
        desk_spec, seed=6, horizon=512, survivors=100_000,
        max_paths=20_000, sigma=DESK_SIGMA,
    )
    assert report.status == "inconclusive"
    assert not report.passed


def test_harmonicity_rejects_unsupported_dimension():
    three = EnsembleSpec("scaled_uniform", 3, 2.0,
                         {"entry_low": 1.0, "entry_high": 2.0, "scale_sigma": 0.5})
    with pytest.raises(ValueError):
        run_harmonicity(three, seed=0)
