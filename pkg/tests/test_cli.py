import json
import math
from pathlib import Path

import pandas as pd
import pytest

from main import main

CONFIGS = Path(__file__).parent.parent / "configs"


def _run(tmp_path, *argv):
    return main(["--outdir", str(tmp_path), *argv])


def _manifest(tmp_path):
    return json.loads((tmp_path / "manifest.json").read_text())


def test_design_g(tmp_path):
    code = _run(
        tmp_path, "design-g", "--wavelength-nm", "785", "--linewidth-hz", "30e6", "--n-index", "1.8", "--veff-um3", "12"
    )
    assert code == 0
    result = json.loads((tmp_path / "design_g.json").read_text())
    assert result["g_rad_s"] == pytest.approx(7.70676e9, rel=1e-4)
    manifest = _manifest(tmp_path)
    assert manifest["command"] == "design-g"
    assert manifest["outputs"] == ["design_g.json"]


def test_design_gap(tmp_path):
    table = tmp_path / "table.csv"
    pd.DataFrame({"gap_nm": [100, 200], "rate_ghz": [10, 1]}).to_csv(table, index=False)
    assert _run(tmp_path, "design-gap", "--table", str(table), "--target-ghz", str(math.sqrt(10))) == 0
    result = json.loads((tmp_path / "design_gap.json").read_text())
    assert result["gap_nm"] == pytest.approx(150.0, rel=1e-9)


def test_design_gap_out_of_range(tmp_path):
    table = tmp_path / "table.csv"
    pd.DataFrame({"gap_nm": [100, 200], "rate_ghz": [10, 1]}).to_csv(table, index=False)
    assert _run(tmp_path, "design-gap", "--table", str(table), "--target-ghz", "50") == 1
    assert not (tmp_path / "manifest.json").exists()


def test_beta_gaussian(tmp_path):
    assert _run(tmp_path, "beta", "--pulse", "gaussian", "--width", "1.0") == 0
    result = json.loads((tmp_path / "beta.json").read_text())
    assert result["beta"] == pytest.approx(1.0, abs=1e-6)


def test_eigen_single_ring(tmp_path):
    assert _run(tmp_path, "eigen", "--preset", "single_ring") == 0
    result = json.loads((tmp_path / "eigen.json").read_text())
    assert result["omega_im"] == pytest.approx([-0.5, -0.5], abs=1e-12)
    assert result["omega_re"][0] == pytest.approx(math.sqrt(1.75), abs=1e-12)


def test_emit_writes_components(tmp_path):
    assert _run(tmp_path, "emit", "--samples", "1024") == 0
    frame = pd.read_csv(tmp_path / "emission.csv")
    assert {"t", "re_e", "im_e", "re_e1", "im_e4", "p_tls"} <= set(frame.columns)
    assert len(frame) == 1024
    assert set(_manifest(tmp_path)["outputs"]) == {"emission.csv", "emission.json"}


def test_transfer_and_plot(tmp_path):
    assert _run(tmp_path, "transfer", "--config", str(CONFIGS / "optimal_n3.json"), "--delay", "5") == 0
    report = json.loads((tmp_path / "transfer.json").read_text())
    assert report["F"] == pytest.approx(0.993, abs=0.003)
    assert report["delay"] == 5.0
    assert {"transfer.csv", "sender.csv", "receiver.csv", "transfer.json"} <= set(_manifest(tmp_path)["outputs"])

    assert _run(tmp_path, "plot", "--kind", "transfer", "--input", str(tmp_path / "transfer.csv")) == 0
    written = _manifest(tmp_path)["outputs"]
    assert len(written) == 1 and written[0].startswith("plot_transfer.")
    assert (tmp_path / written[0]).stat().st_size > 0


def test_emit_full_model(tmp_path):
    assert _run(tmp_path, "emit", "--full", "--samples", "1024", "--backscatter", "0.3,0,0") == 0
    summary = json.loads((tmp_path / "emission.json").read_text())
    assert summary["model"] == "full"
    assert summary["norm_plus"] + summary["norm_minus"] == pytest.approx(summary["emission_efficiency"], abs=1e-3)
    frame = pd.read_csv(tmp_path / "emission.csv")
    assert {"re_e_plus", "im_e_minus", "re_a1", "im_b3"} <= set(frame.columns)


def test_optimize_has_a_four_ring_default_start(tmp_path):
    settings = tmp_path / "settings.json"
    settings.write_text(json.dumps({"optimizer": {"max_evaluations": 6}}))
    code = main(["--outdir", str(tmp_path), "--settings", str(settings), "optimize", "--n", "4", "--samples", "512"])
    assert code == 0
    assert _manifest(tmp_path)["config"]["start"] == [1.5, 2.5, 3.5, 10.0]
    summary = json.loads((tmp_path / "optimum.json").read_text())
    assert len(summary["best_params"]) == 4


def test_receive_from_csv(tmp_path):
    pulse = tmp_path / "pulse.csv"
    t = [0.02 * k for k in range(1001)]
    amplitude = [(2 * math.pi) ** -0.25 * math.exp(-((x - 10) ** 2) / 4) for x in t]
    pd.DataFrame({"t": t, "re_e": amplitude, "im_e": [0.0] * len(t)}).to_csv(pulse, index=False)
    assert _run(tmp_path, "receive", "--pulse-csv", str(pulse)) == 0
    result = json.loads((tmp_path / "receive.json").read_text())
    assert 0.0 < result["F"] < 1.0


def test_exit_codes(tmp_path):
    assert _run(tmp_path, "emit", "--no-such-flag") == 1
    assert _run(tmp_path, "emit", "--kappa", "-1") == 1
    assert _run(tmp_path, "receive", "--pulse-csv", str(tmp_path / "absent.csv")) == 3
    assert _run(tmp_path, "optimize", "--n", "5") == 1


def test_sweep_guard(tmp_path):
    settings = tmp_path / "settings.json"
    settings.write_text(json.dumps({"sweep": {"max_points": 4}}))
    code = main(["--outdir", str(tmp_path), "--settings", str(settings), "sweep", "--n", "1", "--grid", "5", "--ranges", "1:4"])
    assert code == 1


def test_small_sweep(tmp_path):
    code = _run(tmp_path, "sweep", "--n", "1", "--grid", "3", "--ranges", "1:4", "--workers", "1", "--samples", "1024")
    assert code == 0
    frame = pd.read_csv(tmp_path / "sweep.csv")
    assert list(frame.columns) == ["kappa", "beta"]
    assert frame["kappa"].tolist() == [1.0, 2.5, 4.0]
