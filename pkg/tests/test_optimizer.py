import itertools

import numpy as np
import pytest

from dynamics_engine import TimeGrid
from errors import ConfigValidationError, GridSizeError
from optimizer import OptimizerSettings, SweepSpec, evaluate_beta, grid_sweep, parameter_names, refine

COARSE = TimeGrid(0.0, 20.0, 1024)


def test_parameter_names():
    assert parameter_names(1) == ["kappa"]
    assert parameter_names(3) == ["J12", "J23", "kappa"]


def test_beta_at_known_optimum():
    assert evaluate_beta((1.88, 2.94, 7.92)) == pytest.approx(0.993, abs=0.002)


def test_sweep_spec_validation():
    spec = SweepSpec(2, ((0.5, 4.0, 3), (1.0, 6.0, 4)))
    assert spec.size == 12
    assert spec.columns == ["J12", "kappa"]
    with pytest.raises(ConfigValidationError):
        SweepSpec(2, ((0.5, 4.0, 3),))
    with pytest.raises(ConfigValidationError):
        SweepSpec(1, ((0.0, 4.0, 3),))
    with pytest.raises(GridSizeError):
        SweepSpec(2, ((0.5, 4.0, 4), (1.0, 6.0, 4)), max_points=10)


def test_sweep_rows_follow_product_order():
    spec = SweepSpec(2, ((1.0, 2.0, 2), (2.0, 6.0, 3)))
    frame = grid_sweep(spec, grid=COARSE)
    assert list(frame.columns) == ["J12", "kappa", "beta"]
    expected = list(itertools.product([1.0, 2.0], [2.0, 4.0, 6.0]))
    assert [tuple(row) for row in frame[["J12", "kappa"]].to_numpy()] == expected
    assert frame["beta"].iloc[4] == pytest.approx(evaluate_beta((2.0, 4.0), COARSE), abs=1e-12)
    assert frame["beta"].between(0.0, 1.0).all()


def test_parallel_sweep_matches_serial():
    spec = SweepSpec(1, ((1.0, 8.0, 6),))
    serial = grid_sweep(spec, workers=1, grid=COARSE)
    parallel = grid_sweep(spec, workers=2, grid=COARSE)
    assert np.array_equal(serial.to_numpy(), parallel.to_numpy())


def test_refine_rejects_bad_start():
    with pytest.raises(ConfigValidationError):
        refine((2.0, 3.0), n_rings=3)
    with pytest.raises(ConfigValidationError):
        refine((2.0, -3.0, 8.0), n_rings=3)
    with pytest.raises(ConfigValidationError):
        refine((2.0, 3.0, 25.0), n_rings=3)


def test_budget_exhaustion_reports_best_so_far():
    report = refine((2.0, 4.0), n_rings=2, settings=OptimizerSettings(max_evaluations=15), grid=COARSE, cross_validate=False)
    assert not report.converged
    assert report.evaluations <= 15 + 3
    assert report.warnings
    assert report.best_beta == max(row["beta"] for row in report.trace if row["beta"] is not None)


@pytest.mark.slow
def test_refine_finds_three_ring_optimum():
    report = refine((2.0, 3.0, 8.0), n_rings=3, seed=0)
    assert report.best_beta == pytest.approx(0.993, abs=0.002)
    for found, known in zip(report.best_params, (1.88, 2.94, 7.92)):
        assert found == pytest.approx(known, rel=0.05)
    assert report.ode_beta == pytest.approx(report.best_beta, abs=1e-5)
    assert len(report.trace) == report.evaluations
    assert report.to_dict()["parameters"] == ["J12", "J23", "kappa"]


def test_single_ring_stays_below_three_ring_optimum():
    frame = grid_sweep(SweepSpec(1, ((0.5, 20.0, 40),)), grid=COARSE)
    assert frame["beta"].max() < evaluate_beta((1.88, 2.94, 7.92))


@pytest.mark.slow
def test_two_ring_optimum_is_reproducible():
    starts = [(1.5, 3.0), (2.5, 5.0), (1.0, 2.0)]
    betas = [refine(start, n_rings=2, seed=0, cross_validate=False).best_beta for start in starts]
    assert max(betas) - min(betas) <= 1e-3


def test_refine_from_the_optimum_stays_there():
    start = (1.88, 2.94, 7.92)
    report = refine(start, n_rings=3, grid=COARSE, cross_validate=False)
    start_beta = evaluate_beta(start, COARSE)
    assert report.converged
    assert start_beta <= report.best_beta < start_beta + 1e-3
    for found, known in zip(report.best_params, start):
        assert found == pytest.approx(known, rel=0.05)

    best_so_far = [row["best_beta"] for row in report.trace if row["best_beta"] is not None]
    assert np.all(np.diff(best_so_far) >= 0)
    assert best_so_far[-1] == report.best_beta


def test_sweep_and_refine_agree():
    frame = grid_sweep(SweepSpec(2, ((1.0, 3.0, 5), (2.0, 8.0, 5))), grid=COARSE)
    row = frame.loc[frame["beta"].idxmax()]
    start = (row["J12"], row["kappa"])
    assert evaluate_beta(start, COARSE) == pytest.approx(row["beta"], abs=1e-12)

    report = refine(start, n_rings=2, grid=COARSE, cross_validate=False)
    assert report.best_beta >= row["beta"]


@pytest.mark.slow
def test_published_sweep_reaches_high_symmetry():
    spec = SweepSpec(3, ((0.5, 5.0, 40), (0.5, 5.0, 40), (2.0, 14.0, 40)))
    frame = grid_sweep(spec, workers=4)
    assert frame["beta"].max() > 0.99
