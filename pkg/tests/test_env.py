import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybrid_planner import env
from hybrid_planner.env import EnvConfig, WorldState

CFG = env.DEFAULT_ENV


def make_state(positions, goals, velocities=None, reached=None, t_step=0):
    p = np.asarray(positions, float)
    g = np.asarray(goals, float)
    n = len(p)
    return WorldState(
        positions=p,
        velocities=np.zeros((n, 2)) if velocities is None else np.asarray(velocities, float),
        goals=g,
        t_step=t_step,
        reached=np.zeros(n, bool) if reached is None else np.asarray(reached, bool),
        prev_goal_dists=np.linalg.norm(g - p, axis=1),
    )


# ---------------------------------------------------------------- scenarios


def test_swap3_goals_antipodal():
    sc = env.make_scenario("swap3", 3, 0)
    np.testing.assert_allclose(sc.goals, -sc.starts)
    radii = np.linalg.norm(sc.starts, axis=1)
    np.testing.assert_allclose(radii, radii[0])


def test_random_scenario_deterministic():
    a = env.make_scenario("random", 3, 7)
    b = env.make_scenario("random", 3, 7)
    assert a.to_dict() == b.to_dict()


def test_random_scenarios_separated_over_1000_seeds():
    worst = np.inf
    for s in range(1000):
        sc = env.make_scenario("random", 3, s)
        worst = min(worst, env._pairwise_min(sc.starts))
    assert worst >= CFG.min_separation


@given(st.integers(0, 2**31 - 1), st.integers(2, 6))
def test_scenario_invariants(seed, n):
    sc = env.make_scenario("random", n, seed)
    assert sc.starts.shape == sc.goals.shape == (n, 2)
    assert np.all(np.abs(sc.starts) <= sc.arena_half_extent)
    assert np.all(np.abs(sc.goals) <= sc.arena_half_extent)
    assert env._pairwise_min(sc.starts) >= CFG.min_separation - 1e-12


@pytest.mark.parametrize("kind,n", [("swap3", 2), ("cross6", 3), ("nope", 3), ("random", 1)])
def test_make_scenario_rejects(kind, n):
    with pytest.raises(ValueError):
        env.make_scenario(kind, n, 0)


def test_crowded_arena_reports_failure():
    tiny = EnvConfig(arena_half_extent=0.5, wall_margin=0.0, max_retries=20)
    with pytest.raises(ValueError, match="arena too small"):
        env.make_scenario("random", 12, 0, tiny)


def test_scenario_json_roundtrip(tmp_path):
    sc = env.make_scenario("cross6", 6, 3)
    p = tmp_path / "s.json"
    sc.save(p)
    back = env.Scenario.load(p)
    assert back.to_dict() == sc.to_dict()
    assert set(json.loads(p.read_text())) == {"kind", "n_robots", "seed", "starts", "goals", "arena_half_extent"}


# ---------------------------------------------------------------- observations


def test_reset_swap3_observations():
    state, obs = env.reset(env.make_scenario("swap3", 3, 0))
    assert obs.shape == (3, 12)
    assert np.all(state.velocities == 0.0)
    assert np.all(obs[:, 1:3] == 0.0)


def test_rel_goal():
    s = make_state([(0, 0), (1, -1)], [(1, 1), (0, 0)])
    np.testing.assert_array_equal(env.observe(s, 0)[5:7], [1, 1])


def test_rel_others_order():
    s = make_state([(1, 0), (0, 0), (0, 2)], [(0, 0)] * 3)
    np.testing.assert_array_equal(env.observe(s, 1)[7:11], [1, 0, 0, 2])


def test_at_goal_rel_goal_zero():
    s = make_state([(0.5, 0.5), (1, 1)], [(0.5, 0.5), (0, 0)])
    np.testing.assert_array_equal(env.observe(s, 0)[5:7], [0, 0])


def test_observation_layout():
    s = make_state([(1, 0), (0, 0), (0, 2)], [(2, 2), (0, 1), (1, 1)], velocities=[(0.1, 0.2), (0, 0), (0, 0)])
    o = env.observe(s, 0)
    np.testing.assert_allclose(o, [0.0, 0.1, 0.2, 1, 0, 1, 2, -1, 0, -1, 2, CFG.r_safe])
    raw = env.observe(s, 2, EnvConfig(index_mode="raw"))
    assert raw[0] == 2.0


@given(st.integers(0, 10_000), st.integers(2, 5))
def test_observe_all_matches_observe(seed, n):
    sc = env.make_scenario("random", n, seed)
    state, obs = env.reset(sc)
    for i in range(n):
        np.testing.assert_array_equal(obs[i], env.observe(state, i))
        assert obs[i].size == 8 + 2 * (n - 1)


# ---------------------------------------------------------------- dynamics


def test_euler_step():
    s = make_state([(0, 0), (1.5, 1.5)], [(1, 1), (-1, -1)])
    res = env.step(s, [(1, 0), (0, 0)])
    np.testing.assert_allclose(res.next_state.velocities[0], [0.1, 0.0])
    np.testing.assert_allclose(res.next_state.positions[0], [0.01, 0.0])


def test_action_clamped():
    s = make_state([(0, 0), (1.5, 1.5)], [(1, 1), (-1, -1)])
    a = env.step(s, [(2, 0), (0, 0)]).next_state
    b = env.step(s, [(1, 0), (0, 0)]).next_state
    np.testing.assert_array_equal(a.positions, b.positions)


def test_overlap_both_penalised():
    s = make_state([(0, 0), (0.2, 0)], [(-1.5, 0), (1.5, 0)])
    res = env.step(s, [(0, 0), (0, 0)])
    np.testing.assert_array_equal(res.rewards, [-0.35, -0.35])
    assert res.collision_count_delta == 1


def test_wall_clamps_and_zeroes_velocity():
    s = make_state([(1.999, 0), (0, 0)], [(0, 1), (1, 1)], velocities=[(1, 0), (0, 0)])
    nxt = env.step(s, [(1, 0), (0, 0)]).next_state
    assert nxt.positions[0, 0] == CFG.arena_half_extent
    assert nxt.velocities[0, 0] == 0.0


def test_step_on_terminal_state_raises():
    s = make_state([(0, 0), (1, 1)], [(0, 0), (1, 1)], reached=[True, True])
    with pytest.raises(RuntimeError):
        env.step(s, np.zeros((2, 2)))


def test_kernel_reward_agrees_with_reward_of():
    rng = np.random.default_rng(0)
    for _ in range(300):
        pos = rng.uniform(-1, 1, (3, 2))
        s = make_state(pos, rng.uniform(-1, 1, (3, 2)), velocities=rng.uniform(-0.5, 0.5, (3, 2)))
        res = env.step(s, rng.uniform(-1, 1, (3, 2)))
        for i in range(3):
            assert res.rewards[i] == pytest.approx(env.reward_of(s, res.next_state, i), abs=1e-15)


actions_st = st.lists(
    st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=50 * 3, max_size=50 * 3
)


@given(st.integers(0, 5000), actions_st)
def test_rollout_invariants(seed, acts):
    sc = env.make_scenario("random", 3, seed)
    state, _ = env.reset(sc)
    acts = np.asarray(acts).reshape(50, 3, 2)
    frozen = {}
    for t in range(50):
        res = env.step(state, acts[t])
        nxt = res.next_state
        assert np.all(np.linalg.norm(nxt.velocities, axis=1) <= CFG.v_max + 1e-12)
        assert 0 <= nxt.t_step <= CFG.episode_length
        assert res.observations.shape[1] == 12
        for i in np.flatnonzero(state.reached):
            assert np.array_equal(nxt.positions[i], frozen[i])
        for i in np.flatnonzero(nxt.reached & ~state.reached):
            frozen[i] = nxt.positions[i].copy()
        assert res.done == (bool(nxt.reached.all()) or nxt.t_step == CFG.episode_length)
        again = env.step(state, acts[t])
        assert np.array_equal(again.next_state.positions, nxt.positions)
        assert np.array_equal(again.rewards, res.rewards)
        state = nxt
        if res.done:
            break


# ---------------------------------------------------------------- reward


def reward_case(p0, p1, goal0, others):
    """Robot 0 moves p0 -> p1; the others stay put."""
    pos_b = np.array([p0, *others], float)
    pos_a = np.array([p1, *others], float)
    goals = np.array([goal0] + [(1.9, 1.9)] * len(others), float)
    before = make_state(pos_b, goals)
    after = make_state(pos_a, goals)
    return env.reward_of(before, after, 0)


def test_reward_goal_branch():
    assert reward_case((0, 0), (0.95, 0), (1.0, 0), [(-1.5, -1.5)]) == 1.0


def test_reward_contact_branch():
    # centres 0.29 apart -> clearance -0.01
    assert reward_case((0, 0), (0, 0), (1.5, 0), [(0.29, 0)]) == -0.35


def test_reward_proximity_branch():
    # clearance 0.1 -> -0.35 + 0.05 * 0.1
    assert reward_case((0, 0), (0, 0), (1.5, 0), [(0.4, 0)]) == pytest.approx(-0.345, abs=1e-15)


def test_reward_progress_branch():
    assert reward_case((0, 0), (0.1, 0), (1.0, 0), [(-1.5, -1.5)]) == pytest.approx(0.1, abs=1e-15)


def test_reward_goal_beats_contact():
    assert reward_case((0, 0), (0.95, 0), (1.0, 0), [(1.1, 0.1)]) == 1.0


def test_reward_contact_at_zero_clearance_is_proximity():
    # exactly touching is not a contact; the proximity branch gives -0.35
    assert reward_case((0, 0), (0, 0), (1.5, 0), [(0.3, 0)]) == pytest.approx(-0.35, abs=1e-15)


def test_reward_after_arrival_is_zero():
    before = make_state([(1, 0), (-1, -1)], [(1, 0), (1, 1)], reached=[True, False])
    assert env.reward_of(before, before, 0) == 0.0


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_reward_exactly_one_branch(x, y, ox, oy):
    r = reward_case((0, 0), (x, y), (0.5, 0.5), [(ox, oy)])
    d_g = np.hypot(0.5 - x, 0.5 - y)
    clear = np.hypot(x - ox, y - oy) - 0.3
    if d_g < 0.1:
        assert r == 1.0
    elif clear < 0:
        assert r == -0.35
    elif clear < 0.2:
        assert r == pytest.approx(-0.35 + 0.05 * clear)
    else:
        assert r == pytest.approx(np.hypot(0.5, 0.5) - d_g)
