import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdlab.detector import CalibrationEntry, CalibrationTable
from spdlab.envs import MatrixGameEnv, scripted_policy
from spdlab.numerics import DomainError
from spdlab.online_agent import (
    LOG_COLUMNS,
    AdaptiveAgent,
    AgentConfig,
    OracleDetector,
    SwitchingOpponent,
    SwitchingOpponentSpec,
    TrainedDetector,
    run_match,
    smooth,
    true_degree,
)
from spdlab.policies import mix


@pytest.fixture
def matrix():
    env = MatrixGameEnv(horizon=5)
    c = [scripted_policy(env, i, "cooperate") for i in (0, 1)]
    d = [scripted_policy(env, i, "defect") for i in (0, 1)]
    return env, c, d


def agent(c, d, role, **kw):
    return AdaptiveAgent(c[role], d[role], OracleDetector(), AgentConfig(n=1, **kw))


@given(st.floats(0, 1), st.floats(-0.5, 1.5), st.floats(0.01, 1))
def test_smoothing(prev, det, alpha):
    assert smooth(prev, det, alpha) == min(1.0, max(0.0, (1 - alpha) * prev + alpha * det))


@pytest.mark.parametrize("delta", [0.0, 0.1, 0.25])
def test_against_always_defect_converges_to_delta(matrix, delta):
    env, c, d = matrix
    a = agent(c, d, 0, alpha=1.0, delta=delta, initial_degree=0.7)
    run_match(env, a, d[1], episodes=3)
    assert abs(a.own_degree - delta) < 1e-9


def test_against_always_cooperate_converges_to_one(matrix):
    env, c, d = matrix
    a = agent(c, d, 0, alpha=0.3, delta=0.1, initial_degree=0.0)
    run_match(env, a, c[1], episodes=20)
    assert a.own_degree == 1.0


def test_mutual_defection_climbs_by_delta_per_update(matrix):
    env, c, d = matrix
    a, b = agent(c, d, 0, alpha=1.0, delta=0.1, initial_degree=0.0), agent(c, d, 1, alpha=1.0, delta=0.1, initial_degree=0.0)
    log = run_match(env, a, b, episodes=4)
    traj = [row[2] for row in log.degrees]
    assert all(abs(x - min(1.0, 0.1 * (k + 1))) < 1e-9 for k, x in enumerate(traj))
    assert [row[2] for row in log.degrees] == [row[3] for row in log.degrees]


def test_literal_update_has_no_offset(matrix):
    env, c, d = matrix
    a = agent(c, d, 0, alpha=0.5, delta=0.1, initial_degree=1.0, literal_update=True)
    run_match(env, a, d[1], episodes=1, max_steps=1)
    assert a.own_degree == 0.5


def test_unclamped_signal_averages_out_noise(matrix):
    _, c, d = matrix
    a = agent(c, d, 0, alpha=0.5, delta=0.0, initial_degree=1.0)
    for det in (1.4, 0.6):
        a.apply(det)
    # clamping each detection first would give 0.8
    assert a.signal == 0.5 * (0.5 * 1.0 + 0.5 * 1.4) + 0.5 * 0.6
    assert abs(a.own_degree - 0.9) < 1e-12


def test_agent_config_validation():
    with pytest.raises(DomainError):
        AgentConfig(alpha=0.0)
    with pytest.raises(DomainError):
        AgentConfig(delta=-0.1)
    assert AgentConfig(initial_degree=3.0).initial_degree == 1.0


@given(st.integers(1, 6), st.integers(0, 40))
def test_switching_phase(period, episode):
    env = MatrixGameEnv()
    c, d = scripted_policy(env, 1, "cooperate"), scripted_policy(env, 1, "defect")
    opp = SwitchingOpponent(SwitchingOpponentSpec(c, d, period))
    opp.episode = episode
    assert opp.phase() == ("cooperate" if (episode // period) % 2 == 0 else "defect")
    assert true_degree(opp) == (1.0 if opp.phase() == "cooperate" else 0.0)


def test_switching_by_steps(matrix):
    env, c, d = matrix
    log = run_match(env, agent(c, d, 0), SwitchingOpponentSpec(c[1], d[1], 3, unit="steps"), episodes=2)
    phases = [r["opponent_phase"] for r in log.rows]
    assert phases == ["cooperate"] * 3 + ["defect"] * 3 + ["cooperate"] * 3 + ["defect"]


def test_oracle_tracks_a_switching_opponent(matrix):
    env, c, d = matrix
    a = agent(c, d, 0, alpha=1.0, delta=0.1, initial_degree=0.5)
    log = run_match(env, a, SwitchingOpponentSpec(c[1], d[1], 2), episodes=6)
    per_ep = log.episode_table()["own_cd"]
    assert np.allclose(per_ep, [1, 1, 0.1, 0.1, 1, 1])


def test_true_degree():
    env = MatrixGameEnv()
    c, d = scripted_policy(env, 0, "cooperate"), scripted_policy(env, 0, "defect")
    assert true_degree(mix(c, d, 0.3)) == 0.3 and true_degree(c) == 1.0 and true_degree(d) == 0.0
    with pytest.raises(TypeError):
        true_degree(object())


def test_trained_detector_wrapper_pads_and_calibrates(applepear):
    from spdlab.detector import DetectorConfig, DetectorModel
    model = DetectorModel(applepear.obs_size, DetectorConfig(n=4, encoder=(8,), recurrent=4), seed=0)
    table = CalibrationTable([CalibrationEntry(1.0, 3.0, -1.0, 0.0)])
    est = TrainedDetector(model, table)
    obs = applepear.reset(seed=0).observations[0]
    raw, value = est.estimate([obs], 1.0)
    assert value == 3.0 * raw - 1.0 and est.n == 4


def test_match_log_csv(tmp_path, matrix):
    env, c, d = matrix
    log = run_match(env, agent(c, d, 0), d[1], episodes=2)
    log.to_csv(tmp_path / "m.csv", {"seed": 0})
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "# seed: 0" and lines[1] == ",".join(LOG_COLUMNS)
    assert len(lines) == 2 + 10
    assert len(log.detections) == 10 and np.isnan(log.detections[0][1])


def test_matches_are_deterministic(applepear, scripted_pairs):
    coop, defect = scripted_pairs
    def play():
        a = AdaptiveAgent(coop[0], defect[0], OracleDetector(), AgentConfig(alpha=0.5))
        return run_match(applepear, a, mix(coop[1], defect[1], 0.4), episodes=3, seed=9).rows
    assert play() == play()
