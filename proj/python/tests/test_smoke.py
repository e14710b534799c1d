import json
import math
from pathlib import Path

import pytest

import lbap

ROOT = Path(__file__).resolve().parents[2]


def test_posterior_matches_product_and_normalize():
    post = lbap.compute_posterior([0.5, 0.3, 0.2], [1.0, 0.001, 1.0], [0.6, 0.9, 0.5])
    raw = [0.5 * 0.6, 0.3 * 0.001 * 0.9, 0.2 * 0.5]
    z = sum(raw)
    assert post == pytest.approx([r / z for r in raw], abs=1e-12)


def test_prediction_set_fallback():
    members, fallback = lbap.prediction_set([0.4, 0.35, 0.25], ["A", "B", "C"], 0.5)
    assert members == ["A"] and fallback
    members, fallback = lbap.prediction_set([0.4, 0.35, 0.25], ["A", "B", "C"], 0.3)
    assert members == ["A", "B"] and not fallback


def test_grounding_and_iou():
    scene = ["red block", "green bowl"]
    assert lbap.ground_textual("put the red block in the green bowl", scene) == 1.0
    assert lbap.ground_textual("put the blue block in the green bowl", scene) == 0.001
    assert lbap.iou([0, 0, 1, 1], [0, 0, 0.5, 1]) == pytest.approx(0.5)


def test_generated_scenarios_parse():
    lines = lbap.generate_tabletop(10, 3)
    assert len(lines) == 10
    for line in lines:
        s = json.loads(line)
        assert s["ambiguity"] in {"attribute", "numeric", "spatial"}
        assert s["true_actions"]


def test_calibration():
    c = lbap.calibrate_from_scores([0.1, 0.35, 0.2, 0.05, 0.6, 0.3, 0.15, 0.4, 0.25], 0.1)
    assert c["rank"] == 9 and c["threshold"] == pytest.approx(0.4)
    assert lbap.min_calibration_size(0.001) == 999
    with pytest.raises(lbap.LbapError):
        lbap.calibrate_from_scores([0.1] * 5, 0.01)


def test_synthetic_sweep_full_beats_prior_only():
    full = lbap.sweep_synthetic(200, 3, "full")
    prior = lbap.sweep_synthetic(200, 3, "prior-only")
    assert len(full["rows"]) == 15
    assert full["auc"] > prior["auc"]
    assert math.isclose(full["rows"][-1]["threshold"], 0.7)


def test_golden_replay_matches_checked_in_csv():
    golden = ROOT / "tests" / "data" / "golden"
    report = lbap.sweep_config(str(golden / "replay.json"))
    assert report["csv"] == (golden / "sweep.csv").read_text()
