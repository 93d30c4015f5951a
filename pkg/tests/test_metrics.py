import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hybrid_planner import masac, metrics, minsnap
from oracles import random_waypoint_path

finite = st.floats(-10, 10, allow_nan=False)


def test_comfort_examples():
    assert metrics.cost_comfort([(0, 0), (1, 0), (2, 0), (3, 0)]) == 0.0
    assert metrics.cost_comfort([(0, 0), (1, 0), (2, 1)]) == 1.0


def test_smoothness_collinear():
    pts = [(k, 2 * k) for k in range(5)]
    assert metrics.cost_smoothness(pts) == pytest.approx(-3.0, abs=1e-15)


def test_smoothness_rejects_repeats():
    with pytest.raises(ValueError):
        metrics.cost_smoothness([(0, 0), (0, 0), (1, 0)])


def test_energy_examples():
    assert metrics.cost_energy([(0.3, 0.1)] * 6) == 0.0
    assert metrics.cost_energy([(0, 0), (1, 0)]) == 1.0


def test_path_length_examples():
    assert metrics.path_length([(0, 0), (3, 4)]) == 5.0
    assert metrics.path_length([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]) == 4.0


def test_shape_validation():
    with pytest.raises(ValueError):
        metrics.cost_comfort([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        metrics.path_length(np.zeros((4, 3)))


@given(hnp.arrays(np.float64, st.tuples(st.integers(3, 30), st.just(2)), elements=finite))
def test_metric_ranges(p):
    assert metrics.cost_comfort(p) >= 0.0
    assert metrics.cost_energy(p) >= 0.0
    assert metrics.cost_comfort(p) == metrics.cost_comfort(p.copy())
    chords = np.linalg.norm(np.diff(p, axis=0), axis=1)
    if np.all(chords > 1e-9):
        s = metrics.cost_smoothness(p)
        assert -(len(p) - 2) - 1e-9 <= s <= len(p) - 2 + 1e-9


def test_polyline_samples_grid():
    w = np.array([(0, 0), (0.1, 0), (0.2, 0.1)])
    pos, acc = metrics.polyline_samples(w, 0.1, 0.02)
    assert len(pos) == 11
    np.testing.assert_allclose(pos[5], [0.1, 0.0])
    # corner at t = 0.1: velocity jumps by (0, 1) m/s across one sample
    assert acc[5, 1] == pytest.approx(1.0 / 0.02)


def test_trajectory_samples_include_end():
    path = minsnap.make_path([(0, 0), (1, 0)])
    tr = minsnap.optimize_trajectory(path, None, minsnap.BackendConfig(), "classical", durations=[1.01])
    pos, _ = metrics.trajectory_samples(tr, 0.02)
    np.testing.assert_allclose(pos[-1], [1.0, 0.0], atol=1e-12)


def test_backend_beats_polyline():
    rng = np.random.default_rng(5)
    for _ in range(5):
        pts = random_waypoint_path(rng)
        _, _, tr = minsnap.plan_robot(pts)
        opt = metrics.trajectory_report({0: tr})
        raw = metrics.polyline_report({0: pts})
        assert opt.cost_comfort <= raw.cost_comfort
        assert opt.cost_energy < raw.cost_energy


def test_reports_and_table():
    rng = np.random.default_rng(1)
    raw = {0: random_waypoint_path(rng), 1: random_waypoint_path(rng)}
    plan = minsnap.plan_all(raw)
    rep = metrics.trajectory_report(plan.trajectories, label="corridor")
    poly = metrics.polyline_report(raw)
    assert set(rep.per_robot) == {0, 1}
    assert rep.cost_energy == pytest.approx(np.mean([v["cost_energy"] for v in rep.per_robot.values()]))
    assert all("cost_comfort" in v["native"] for v in poly.to_dict()["per_robot"].values())
    text = metrics.trajectory_table([poly, rep])
    assert "corridor" in text and "waypoints" in text


def test_benchmark_empty():
    r = metrics.run_benchmark(masac.random_checkpoint(2), 0, 1)
    assert r.success_rate is None and r.avg_total_distance is None and r.per_scenario == []
    assert "-" in r.table()


def test_benchmark_random_policy_floor_and_determinism(tmp_path):
    ck = masac.random_checkpoint(3, seed=2)
    a = metrics.run_benchmark(ck, 100, 5)
    b = metrics.run_benchmark(ck, 100, 5)
    assert a.to_json() == b.to_json()
    assert a.success_rate <= 0.05
    assert a.collision_events <= a.pair_steps
    assert a.avg_total_time_robot_sum == pytest.approx(3 * a.avg_total_time_per_robot)
    js, txt = a.save(tmp_path)
    assert json.loads(js.read_text())["n_scenarios"] == 100
    assert "MASAC-auto" in txt.read_text()


def test_benchmark_records_failures():
    ck = masac.random_checkpoint(2)
    r = metrics.run_benchmark(ck, 3, 0, scenario_kind="swap3")
    assert len(r.failures) == 3 and r.success_rate is None


def test_scenario_seeds():
    assert metrics.scenario_seeds(1, 5) == metrics.scenario_seeds(1, 5)
    assert len(set(metrics.scenario_seeds(1, 100))) == 100
    assert metrics.scenario_seeds(1, 0) == []


def test_report_validation():
    with pytest.raises(ValueError):
        metrics.BenchmarkReport(1, 0, 1.5, 0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        metrics.BenchmarkReport(1, 0, 0.5, 0, 0, 0, 0, 0, collision_events=3, pair_steps=2)
