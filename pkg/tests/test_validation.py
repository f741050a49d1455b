import math

import pytest

from dynamics_engine import evolve_emission, evolve_full
from errors import ConfigValidationError
from validation import TOLERANCES, PropertyCheck, direction_symmetry_defect, run_property_suite


def test_property_check_bookkeeping():
    check = PropertyCheck("demo", 1e-6)
    assert not check.passed
    check.record(1e-8)
    check.record(1e-7)
    assert check.passed and check.worst == 1e-7 and check.cases == 2
    check.record(math.nan)
    assert not check.passed


def test_suite_rejects_empty_run():
    with pytest.raises(ConfigValidationError):
        run_property_suite(configs_per_n=0)


def test_small_suite_passes():
    report = run_property_suite(configs_per_n=2, n_values=(1, 3), seed=7)
    assert [c["name"] for c in report["checks"]] == list(TOLERANCES)
    failed = [c for c in report["checks"] if not c["passed"]]
    assert failed == []
    assert report["passed"]


@pytest.mark.slow
def test_full_suite_passes():
    report = run_property_suite(configs_per_n=100)
    assert report["passed"]


def test_direction_symmetry_flags_backscatter(optimal_n3, coarse_grid):
    reduced = evolve_emission(optimal_n3, coarse_grid)
    assert direction_symmetry_defect(evolve_full(optimal_n3, coarse_grid), reduced) < 1e-8
    scattered = evolve_full(optimal_n3.replace(backscatter=[0.4, 0.0, 0.0]), coarse_grid)
    assert direction_symmetry_defect(scattered, reduced) > 1e-3
