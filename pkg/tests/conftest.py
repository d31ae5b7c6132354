"""Shared fixtures: pinned ensembles and measured scale constants.

The numeric constants below (centering shift, sigma, harmonic mass) were
measured with this package's own estimators at large budgets and then
frozen so the gates in the test suite are stable.  test_estimators
re-checks each constant against its source estimator at a few combined
standard errors, so drift in the engine or in the constants surfaces
there instead of silently skewing thresholds elsewhere.
"""

import math

import pytest

from conewalk.ensembles import EnsembleSpec

# scaled_uniform d=2 desk preset, calibrated to drift ~7e-5
DESK_SHIFT = -1.093975
DESK_SIGMA = 0.50325          # Richardson(256, 512), 131k paths
DESK_SIGMA_SE = 0.0022
DESK_V2 = 2.24                # harmonic mass at start level 2.0
DESK_V2_SE = 0.024

# same family with a dominant log-normal scale factor; the scalar factor
# adds no drift (the direction chain never sees it), so the same shift
# centers this preset too (re-verified in test_acceptance)
WIDE_SCALE = 4.0
WIDE_SIGMA = 3.9943           # Richardson(256, 512), 524k paths
WIDE_SIGMA_SE = 0.0087

FIN_SHIFT = -math.log(2.6)    # two-atom preset: survival 0.95 -> 0.17 over n = 8 -> 16

RANK_SIGMA = 0.7
RANK_SHIFT = -math.log(2.0)   # cancels ln(dim): increments exactly N(0, RANK_SIGMA^2)


def desk_ensemble() -> EnsembleSpec:
    return EnsembleSpec(
        "scaled_uniform", 2, 2.0,
        {"entry_low": 1.0, "entry_high": 2.0, "scale_sigma": 0.5},
        DESK_SHIFT, seed_namespace=11,
    )


def wide_ensemble() -> EnsembleSpec:
    return EnsembleSpec(
        "scaled_uniform", 2, 2.0,
        {"entry_low": 1.0, "entry_high": 2.0, "scale_sigma": WIDE_SCALE},
        DESK_SHIFT, seed_namespace=11,
    )


def finite_ensemble() -> EnsembleSpec:
    return EnsembleSpec(
        "finite_support", 2, 2.0,
        {"atoms": [[[2.0, 1.0], [1.0, 1.0]], [[1.0, 1.0], [1.0, 2.0]]],
         "weights": [0.5, 0.5]},
        FIN_SHIFT, seed_namespace=23,
    )


def rank_one_ensemble() -> EnsembleSpec:
    return EnsembleSpec(
        "rank_one", 2, 1.0,
        {"scale_sigma": RANK_SIGMA, "scale_mean": 0.0},
        RANK_SHIFT, seed_namespace=31,
    )


@pytest.fixture(scope="session")
def desk_spec():
    return desk_ensemble()


@pytest.fixture(scope="session")
def wide_spec():
    return wide_ensemble()


@pytest.fixture(scope="session")
def finite_spec():
    return finite_ensemble()


@pytest.fixture(scope="session")
def rank_spec():
    return rank_one_ensemble()


# --- acceptance reporting: one line per criterion at the end of the run


def pytest_configure(config):
    config._criterion_lines = {}


@pytest.fixture
def criterion(request):
    """Recorder for acceptance results; call before asserting so a failed
    gate still produces its FAIL line in the terminal summary."""

    def record(number: int, label: str, passed: bool, note: str = ""):
        request.config._criterion_lines[number] = (label, bool(passed), note)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", {})
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(lines):
        label, passed, note = lines[number]
        tail = f"  [{note}]" if note else ""
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {label}{tail}"
        )
