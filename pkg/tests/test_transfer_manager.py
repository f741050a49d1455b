import pytest

from dynamics_engine import IntegratorSettings, TimeGrid, evolve_driven, evolve_emission
from errors import ConfigValidationError
from metrics import success_rate
from node_model import NodeConfig
from transfer_manager import combined_frame, degradation_scan, mirror_defect, run_transfer

COARSE = TimeGrid(0.0, 20.0, 1024)


@pytest.fixture
def optimal_transfer(optimal_n3):
    return run_transfer(optimal_n3, optimal_n3)


def test_identical_optimal_nodes(optimal_transfer):
    assert optimal_transfer.F == pytest.approx(0.993, abs=0.003)
    assert optimal_transfer.beta == pytest.approx(0.993, abs=0.002)
    assert optimal_transfer.emission_efficiency == pytest.approx(1.0, abs=1e-6)


def test_loss_budget_closes(optimal_transfer):
    assert optimal_transfer.budget_total == pytest.approx(1.0, abs=1e-3)
    assert all(v >= -1e-9 for v in optimal_transfer.loss_budget.values())
    assert optimal_transfer.loss_budget["sender_gamma0"] == 0.0


def test_matches_manual_composition(optimal_n3):
    report = run_transfer(optimal_n3, optimal_n3, delay=3.0, grid=COARSE)
    sent = evolve_emission(optimal_n3, COARSE)
    received = evolve_driven(optimal_n3, sent.emitted.shifted(3.0))
    F, t_peak = success_rate(received)
    assert report.F == F
    assert report.t_peak == t_peak


def test_delay_only_shifts_the_timeline(optimal_n3):
    early = run_transfer(optimal_n3, optimal_n3, delay=0.0, grid=COARSE)
    late = run_transfer(optimal_n3, optimal_n3, delay=7.5, grid=COARSE)
    assert late.F == pytest.approx(early.F, abs=1e-8)
    assert late.t_peak - early.t_peak == pytest.approx(7.5, abs=1e-6)


def test_losses_reduce_success(optimal_n3, optimal_transfer):
    lossy = optimal_n3.replace(gamma0=0.01, gamma_c=0.01)
    report = run_transfer(lossy, optimal_n3)
    assert report.F < optimal_transfer.F
    assert report.loss_budget["sender_gamma0"] > 0
    assert report.budget_total == pytest.approx(1.0, abs=1e-3)


def test_full_model_agrees_without_backscatter(optimal_n3):
    reduced = run_transfer(optimal_n3, optimal_n3, grid=COARSE)
    full = run_transfer(optimal_n3, optimal_n3, grid=COARSE, model="full")
    assert full.F == pytest.approx(reduced.F, abs=1e-6)
    assert full.to_dict()["model"] == "full"


def test_backscatter_degrades_transfer(optimal_n3, optimal_transfer):
    node = optimal_n3.replace(backscatter=[0.5, 0.0, 0.0])
    report = run_transfer(node, node, model="full")
    assert report.F < optimal_transfer.F


def test_receiver_mirrors_sender(optimal_transfer):
    defect = mirror_defect(optimal_transfer.sender_trajectory, optimal_transfer.receiver_trajectory, optimal_transfer.t_peak)
    assert defect < 0.01


def test_combined_frame_layout(optimal_transfer):
    frame = combined_frame(optimal_transfer)
    assert frame["t"].iloc[0] == 0.0
    assert frame["t"].iloc[-1] == pytest.approx(45.0)
    assert {"sender_p_tls", "sender_p_ring3", "pulse_intensity", "receiver_p_tls", "section"} <= set(frame.columns)
    order = list(dict.fromkeys(frame["section"]))
    assert order == ["sending", "transport", "receiving"]


def test_degradation_scan(optimal_n3):
    frame = degradation_scan(optimal_n3, "gamma_c", [0.0, 0.05], grid=COARSE)
    assert list(frame.columns) == ["gamma_c", "F", "beta"]
    assert frame["F"].iloc[1] < frame["F"].iloc[0]
    with pytest.raises(ConfigValidationError):
        degradation_scan(optimal_n3, "temperature", [0.0])


def test_invalid_arguments(optimal_n3):
    with pytest.raises(ConfigValidationError):
        run_transfer(optimal_n3, optimal_n3, delay=-1.0)
    with pytest.raises(ConfigValidationError):
        run_transfer(optimal_n3, optimal_n3, model="hybrid")


def test_swapped_receiver_couplings_lose_success(optimal_n3):
    matched = run_transfer(optimal_n3, optimal_n3, grid=COARSE)
    swapped = run_transfer(optimal_n3, NodeConfig.from_ratios((2.94, 1.88, 7.92)), grid=COARSE)
    assert swapped.F < matched.F


def test_success_rate_converges_with_tighter_tolerances(optimal_n3):
    settings = IntegratorSettings()
    baseline = run_transfer(optimal_n3, optimal_n3, integrator=settings)
    tighter = run_transfer(optimal_n3, optimal_n3, integrator=settings.halved())
    assert abs(tighter.F - baseline.F) < 1e-7
