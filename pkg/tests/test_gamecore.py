import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import geometric_value
from spdlab.envs import MatrixGameEnv, make_env, scripted_policy
from spdlab.gamecore import (
    EmpiricalPayoffMatrix,
    check_spd,
    derive_seed,
    estimate_value,
    induce_payoff_matrix,
    read_trajectory,
    replay_trajectory,
    rollout,
    write_trajectory,
)
from spdlab.numerics import DomainError
from spdlab.policies import FixedPolicy, mix


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, k) for k in range(1000)}) == 1000
    assert 0 <= derive_seed(2**70, 5) < 2**63


def test_rollout_is_deterministic(applepear, scripted_pairs):
    coop, defect = scripted_pairs
    p1, p2 = mix(coop[0], defect[0], 0.4), mix(coop[1], defect[1], 0.7)
    a, b = rollout(applepear, p1, p2, seed=11), rollout(applepear, p1, p2, seed=11)
    assert [r.actions for r in a.records] == [r.actions for r in b.records]
    assert np.array_equal(a.rewards(), b.rewards())
    assert len(a.observations(0)) == len(a) + 1


@given(st.floats(0.0, 0.99), st.integers(1, 30))
def test_discounted_returns_match_geometric_sum(gamma, horizon):
    env = MatrixGameEnv(horizon=horizon)
    traj = rollout(env, FixedPolicy([1, 0]), FixedPolicy([1, 0]), seed=0)
    ret = traj.discounted_returns(gamma)
    assert abs(ret[0] - geometric_value(3.0, gamma, horizon)) < 1e-9


@pytest.mark.parametrize("pair,expect", [((0, 0), (3, 3)), ((0, 1), (0, 5)), ((1, 0), (5, 0)), ((1, 1), (1, 1))])
def test_estimate_value_matches_closed_form_for_pure_pairs(pair, expect):
    env = MatrixGameEnv(horizon=50)
    pols = [FixedPolicy(np.eye(2)[a]) for a in pair]
    est = estimate_value(env, pols, gamma=0.9, episodes=20, seed=3)
    for i in (0, 1):
        assert abs(est.mean[i] - geometric_value(expect[i], 0.9, 50)) < 1e-9
        assert est.stderr[i] < 1e-12


def test_estimate_value_validates_inputs():
    env = MatrixGameEnv()
    pols = [FixedPolicy([1, 0])] * 2
    with pytest.raises(DomainError):
        estimate_value(env, pols, episodes=0)
    with pytest.raises(DomainError):
        estimate_value(env, pols, gamma=1.0)


def test_classic_pd_satisfies_all_inequalities():
    v = check_spd(EmpiricalPayoffMatrix(R=3, P=1, S=0, T=5))
    assert v.overall and all(v.holds.values())


@pytest.mark.parametrize("fixture,broken", [
    (dict(R=3, P=1, S=0, T=2.5), "T>R"),
    (dict(R=3, P=1, S=1.5, T=4), "P>S"),
    (dict(R=3, P=1, S=0, T=7), "2R>S+T"),
])
def test_counter_fixtures_fail_exactly_one_inequality(fixture, broken):
    v = check_spd(EmpiricalPayoffMatrix(**fixture))
    assert not v.overall
    assert [k for k, ok in v.holds.items() if not ok] == [broken]


def test_degenerate_equal_payoffs_fail():
    assert not check_spd(EmpiricalPayoffMatrix(R=1, P=1, S=1, T=1)).overall


def test_induced_matrix_for_repeated_pd():
    env = MatrixGameEnv(horizon=10)
    coop = [scripted_policy(env, i, "cooperate") for i in (0, 1)]
    defect = [scripted_policy(env, i, "defect") for i in (0, 1)]
    m = induce_payoff_matrix(env, coop, defect, gamma=0.5, episodes=5)
    g = geometric_value(1.0, 0.5, 10)
    assert np.allclose([m.R, m.P, m.S, m.T], [3 * g, 1 * g, 0, 5 * g], atol=1e-12)
    assert check_spd(m).overall


def test_trajectory_roundtrip_and_replay(tmp_path, applepear, scripted_pairs):
    coop, defect = scripted_pairs
    traj = rollout(applepear, mix(coop[0], defect[0], 0.5), defect[1], seed=42)
    path = tmp_path / "t.jsonl"
    write_trajectory(traj, applepear, path)
    header, records, final = read_trajectory(path)
    assert header["seed"] == 42 and header["steps"] == len(traj) == len(records)
    ok, rows = replay_trajectory(applepear, path)
    assert ok and all(r["match"] for r in rows)


def test_replay_detects_tampering(tmp_path, applepear, scripted_pairs):
    coop, _ = scripted_pairs
    traj = rollout(applepear, coop[0], coop[1], seed=7)
    path = tmp_path / "t.jsonl"
    write_trajectory(traj, applepear, path)
    lines = path.read_text().splitlines()
    row = json.loads(lines[1])
    row["rewards"] = [9.0, 9.0]
    lines[1] = json.dumps(row, sort_keys=True)
    path.write_text("\n".join(lines) + "\n")
    ok, _ = replay_trajectory(applepear, path)
    assert not ok


def test_gathering_rollout_smoke():
    env = make_env("gathering", max_steps=30)
    c = [scripted_policy(env, i, "cooperate") for i in (0, 1)]
    traj = rollout(env, c[0], c[1], seed=0)
    assert len(traj) == 30 and traj.rewards().sum() > 0
