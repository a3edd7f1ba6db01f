import json
from pathlib import Path

import pytest

import csync

ROOT = Path(__file__).resolve().parents[2]
SCENARIOS = ROOT / "scenarios"


def test_resolve_fills_defaults():
    cfg = csync.resolve_config(
        {"t_end": 0.5, "buses": ["b1"], "grid_sources": [{"id": "g", "bus": "b1"}],
         "inverters": [{"id": "inv1", "bus": "b1"}]}
    )
    assert cfg["dt"] == pytest.approx(1e-4)
    assert cfg["inverters"][0]["droop"]["m_p"] == pytest.approx(0.01)


def test_mismatched_restoration_gain_names_the_field():
    with pytest.raises(csync.ValidationError) as e:
        csync.resolve_config(ROOT / "tests" / "data" / "bad_kr.json")
    assert e.value.args[1] == "inverters[1].droop.k_r"
    assert isinstance(e.value, csync.CsyncError)


def test_malformed_text_is_a_parse_error():
    with pytest.raises(csync.ParseError):
        csync.resolve_config("{not json")


def test_flat_run(tmp_path):
    metrics, events = csync.run(SCENARIOS / "flat.json", out=tmp_path, decimation=100)
    assert not metrics["aborted"]
    assert metrics["frequency_nadir_hz"] == pytest.approx(60.0, abs=1e-9)
    assert metrics["power_balance_max_residual"] < 1e-8
    assert events == []
    header = (tmp_path / "timeseries.csv").read_text().splitlines()[0]
    assert header.startswith("t,v_mag_grid,v_ang_grid")
    assert json.loads((tmp_path / "metrics.json").read_text()) == metrics


def test_islanding_run_detects():
    metrics, events = csync.run(SCENARIOS / "islanding_surplus.json")
    assert metrics["islanding_detection_latency_s"] < 2.0
    assert any(e[1] == "transition" for e in events)


def test_guard_rejects_on_predicted_frequency():
    accepted, reason, f_pred, _ = csync.guard_validate(-0.2, p_load=0.9)
    assert not accepted
    assert reason == "predicted-frequency"
    assert f_pred == pytest.approx(59.34)
    assert csync.guard_validate(0.1, p_load=0.5)[0]


def test_format_number():
    assert csync.format_number(1.0 / 3.0) == "0.333333333"
