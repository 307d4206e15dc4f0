import json
import math
from pathlib import Path

import pytest

slicewave = pytest.importorskip("slicewave")

REPRO = Path(__file__).resolve().parents[2] / "repro"

TOY = {
    "radio": {"integration_points": 256},
    "cells": [
        {"id": 1, "center_m": [0, 0], "hex_radius_m": 150, "bs_power_dbm": 40},
        {"id": 2, "center_m": [300, 0], "hex_radius_m": 150, "bs_power_dbm": 40},
    ],
    "sps": [
        {
            "id": 1,
            "flow_rate_per_s": 2.0,
            "mean_flow_bits": 2.0e7,
            "cell_density": [0.5, 0.5],
        }
    ],
    "mvnos": [{"id": 1}],
    "slices": [
        {
            "id": 1,
            "cell": 1,
            "mvno": 1,
            "sp": 1,
            "num_channels": 2,
            "queue_cap": 4,
            "channel_bw_hz": 1.0e7,
            "channel_bands_hz": [[0, 1.0e7], [1.0e7, 2.0e7]],
        },
        {
            "id": 2,
            "cell": 2,
            "mvno": 1,
            "sp": 1,
            "num_channels": 2,
            "queue_cap": 4,
            "channel_bw_hz": 1.0e7,
            "channel_bands_hz": [[0, 1.0e7], [1.0e7, 2.0e7]],
        },
    ],
    "sp_to_mvno": [[1.0]],
    "mvno_assign": [[[1.0, 1.0]]],
}


@pytest.fixture(scope="module")
def toy_path(tmp_path_factory):
    p = tmp_path_factory.mktemp("scn") / "toy.json"
    p.write_text(json.dumps(TOY))
    return str(p)


def test_solve_returns_slice_and_operator_kpis(toy_path):
    rep = slicewave.solve(toy_path)
    assert len(rep["slices"]) == 2
    for k in rep["slices"]:
        assert 0.0 <= k["blocking"] <= 1.0
        assert k["delay_s"] > 0
        assert math.isclose(k["delay_s"], k["sojourn_s"] + k["service_s"], rel_tol=1e-9)
        assert k["throughput_bps"] > 0
    assert len(rep["mvno"]) == 1
    assert rep["mvno"][0]["sp"] == 1 and rep["mvno"][0]["mvno"] == 1


def test_policies_change_the_answer(toy_path):
    random = slicewave.solve(toy_path, policy="random")
    table = slicewave.solve(toy_path, policy="interference-aware")
    assert table["slices"][0]["delay_s"] < random["slices"][0]["delay_s"]


def test_power_override_changes_the_operating_point(toy_path):
    base = slicewave.solve(toy_path)
    hot = slicewave.solve(toy_path, bs_power_dbm=48.0)
    assert hot["slices"][0]["delay_s"] != pytest.approx(base["slices"][0]["delay_s"])


def test_simulate_agrees_with_solve(toy_path):
    rep = slicewave.solve(toy_path)
    sim = slicewave.simulate(toy_path, num_flows=40000, replications=6, seed=3)
    for s in range(2):
        mean, se = sim["slices"][s]["delay_s"]
        assert se > 0
        assert abs(mean - rep["slices"][s]["delay_s"]) < 4 * se + 0.02 * mean


def test_simulate_is_reproducible(toy_path):
    a = slicewave.simulate(toy_path, num_flows=2000, replications=2, seed=9)
    b = slicewave.simulate(toy_path, num_flows=2000, replications=2, seed=9)
    assert a["total_delay_s"] == b["total_delay_s"]


def test_complexity_counts_are_frozen():
    proposed, exhaustive = slicewave.complexity(str(REPRO / "single_mvno.json"))
    assert proposed == 18150
    assert exhaustive == 431235


def test_scenario_hash_tracks_content(toy_path, tmp_path):
    h1 = slicewave.scenario_hash(toy_path)
    assert h1 == slicewave.scenario_hash(toy_path)
    other = dict(TOY)
    other["sps"] = [dict(TOY["sps"][0], flow_rate_per_s=2.5)]
    p = tmp_path / "other.json"
    p.write_text(json.dumps(other))
    assert slicewave.scenario_hash(str(p)) != h1


def test_bad_scenario_raises(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(Exception):
        slicewave.solve(str(p))
