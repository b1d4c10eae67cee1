import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdlab.envs import (
    ApplePearConfig,
    ApplePearEnv,
    GatheringEnv,
    GridPos,
    InvalidActionError,
    MatrixGameEnv,
    make_env,
    scripted_policy,
)
from spdlab.envs.applepear import bfs_distances, resolve_moves
from spdlab.envs.gathering import BEAM, FORWARD, ROTATE_LEFT, ROTATE_RIGHT, STAND, GatheringState, GatherAgent

UP, DOWN, LEFT, RIGHT = range(4)


def place(env, blue, red, apple, pear, step=0):
    env.reset(seed=0)
    env.state = env.state_from_arrays(blue, red, apple, pear, step)
    return env.state


# -- Apple-Pear ---------------------------------------------------------------------

def test_spawn_avoids_start_cells_and_is_distinct():
    env = ApplePearEnv()
    for seed in range(200):
        st_ = env.reset(seed=seed).state
        assert st_.apple != st_.pear
        assert st_.apple not in env.starts and st_.pear not in env.starts
        assert st_.positions == (GridPos(0, 0), GridPos(4, 4))


def test_own_fruit_pays_high_value_minus_move_cost():
    env = ApplePearEnv()
    place(env, (0, 0), (4, 4), (0, 1), (3, 3))
    res = env.step((RIGHT, UP))
    assert res.rewards == (1.0 - 0.01, -0.01)
    assert res.state.apple is None and not res.done


def test_other_fruit_pays_low_value():
    env = ApplePearEnv()
    place(env, (0, 0), (4, 4), (3, 3), (0, 1))
    res = env.step((RIGHT, LEFT))
    assert res.rewards == (0.5 - 0.01, -0.01)


def test_shared_fruit_pays_each_half_its_value():
    env = ApplePearEnv()
    place(env, (2, 1), (2, 3), (2, 2), (0, 4))
    res = env.step((RIGHT, LEFT))
    assert res.rewards == (0.5 - 0.01, 0.25 - 0.01)
    assert res.info["shared"]


def test_episode_ends_when_both_fruits_are_gone():
    env = ApplePearEnv()
    place(env, (0, 0), (4, 4), (0, 1), (4, 3))
    res = env.step((RIGHT, LEFT))
    assert res.done
    with pytest.raises(RuntimeError):
        env.step((UP, UP))


def test_episode_ends_at_step_limit():
    env = ApplePearEnv(ApplePearConfig(max_steps=3))
    env.reset(seed=1)
    done = [env.step((UP, DOWN)).done for _ in range(3)]
    assert done == [False, False, True]


def test_walls_block_movement():
    env = ApplePearEnv()
    place(env, (0, 0), (4, 4), (2, 2), (2, 3))
    res = env.step((UP, DOWN))
    assert res.state.positions == (GridPos(0, 0), GridPos(4, 4))


def test_contested_empty_cell_goes_to_lower_id():
    env = ApplePearEnv()
    place(env, (1, 1), (1, 3), (4, 0), (0, 4))
    res = env.step((RIGHT, LEFT))
    assert res.state.positions == (GridPos(1, 2), GridPos(1, 3))


def test_co_located_agents_may_stay_together():
    x, y = GridPos(2, 2), GridPos(2, 3)
    assert resolve_moves((x, x), [x, x], set()) == (x, x)
    assert resolve_moves((x, x), [y, y], set()) == (y, x)


def test_invalid_action_rejected():
    env = ApplePearEnv()
    env.reset(seed=0)
    with pytest.raises(InvalidActionError):
        env.step((7, 0))


def test_observation_channels():
    env = ApplePearEnv()
    s = place(env, (0, 0), (4, 4), (1, 2), (3, 0))
    obs = env.observe(s, 1).reshape(4, 5, 5)
    assert obs[0, 4, 4] == 1 and obs[1, 0, 0] == 1 and obs[2, 1, 2] == 1 and obs[3, 3, 0] == 1
    assert obs.sum() == 4
    assert env.decode(env.observe(s, 0)) == (GridPos(0, 0), GridPos(4, 4), GridPos(1, 2), GridPos(3, 0))


def test_swap_perspective_exchanges_views():
    env = ApplePearEnv()
    res = env.reset(seed=3)
    assert np.array_equal(env.swap_perspective(res.observations[0]), res.observations[1])


def test_bfs_respects_blocked_cell():
    d = bfs_distances(3, 3, GridPos(0, 1), blocked=GridPos(1, 1))
    assert d[2, 1] == 4 and d[1, 1] == -1


@given(st.integers(0, 2**32 - 1), st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=30))
def test_transpose_commutes_with_dynamics(seed, actions):
    """Transposing the grid and swapping up/left, down/right gives the transposed episode."""
    env, tenv = ApplePearEnv(), ApplePearEnv()
    t_action = {UP: LEFT, DOWN: RIGHT, LEFT: UP, RIGHT: DOWN}
    sym = env.observation_symmetries()[1]
    res = env.reset(seed=seed)
    s = res.state
    tr = lambda p: None if p is None else (p.col, p.row)
    tenv.reset(seed=0)
    tenv.state = tenv.state_from_arrays(tr(s.positions[0]), tr(s.positions[1]), tr(s.apple), tr(s.pear))
    for a0, a1 in actions:
        if res.done:
            break
        res = env.step((a0, a1))
        tres = tenv.step((t_action[a0], t_action[a1]))
        assert res.rewards == tres.rewards and res.done == tres.done
        for i in (0, 1):
            assert np.array_equal(res.observations[i][sym], tres.observations[i])


@given(st.integers(0, 10**6), st.sampled_from(["cooperate", "defect"]), st.integers(0, 1))
def test_scripted_distributions_are_valid(seed, mode, role):
    env = ApplePearEnv()
    pol = scripted_policy(env, role, mode)
    res = env.reset(seed=seed)
    p = pol.action_distribution(res.observations[role])
    assert p.shape == (4,) and np.all(p >= 0) and abs(p.sum() - 1) < 1e-12


def test_cooperator_never_takes_the_other_fruit():
    env = ApplePearEnv()
    coop = scripted_policy(env, 0, "cooperate")
    for seed in range(100):
        res = env.reset(seed=seed)
        rng = np.random.default_rng(seed)
        while not res.done:
            a0 = int(rng.choice(4, p=coop.action_distribution(res.observations[0])))
            res = env.step((a0, 0))
            for kind, takers in res.info["collected"]:
                assert not (kind == "pear" and 0 in takers)


def test_defector_heads_for_contested_fruit_first():
    env = ApplePearEnv()
    d = scripted_policy(env, 0, "defect")
    s = place(env, (0, 0), (4, 4), (2, 2), (0, 2))
    p = d.action_distribution(env.observe(s, 0))
    assert p[RIGHT] == 1.0  # toward the pear at (0, 2)


# -- Gathering -----------------------------------------------------------------------

def test_gathering_apple_respawns_after_fixed_delay():
    env = GatheringEnv()
    res = env.reset(seed=0)
    apple = env.apple_cells[0]
    me = GatherAgent(GridPos(apple.row, apple.col - 1), 1)
    env.state = GatheringState((me, res.state.agents[1]), res.state.apples, res.state.apple_timers)
    res = env.step((FORWARD, STAND))
    assert res.rewards[0] == 1.0
    k = env.apple_cells.index(apple)
    assert res.state.apple_timers[k] == env.config.apple_respawn
    for _ in range(env.config.apple_respawn):
        res = env.step((STAND, STAND))
    assert res.state.apple_timers[k] == 0


def test_gathering_two_beam_hits_remove_the_rival():
    env = GatheringEnv()
    res = env.reset(seed=0)
    a0, a1 = res.state.agents
    assert a0.pos.row == a1.pos.row and a0.orientation == 1  # facing each other
    res = env.step((BEAM, STAND))
    assert res.state.agents[1].hits == 1 and res.state.agents[1].active
    res = env.step((BEAM, STAND))
    assert not res.state.agents[1].active
    assert res.state.agents[1].respawn == env.config.removal_frames
    obs = res.observations[0].reshape(env.obs_shape)
    assert obs[1].sum() == 0 and obs[3].sum() > 0
    for _ in range(env.config.removal_frames):
        res = env.step((STAND, STAND))
    assert res.state.agents[1].active and res.state.agents[1].pos == env.starts[1]


def test_gathering_rotation():
    env = GatheringEnv()
    env.reset(seed=0)
    res = env.step((ROTATE_LEFT, ROTATE_RIGHT))
    assert [a.orientation for a in res.state.agents] == [0, 0]


def test_gathering_swap_perspective():
    env = GatheringEnv()
    res = env.reset(seed=0)
    for _ in range(3):
        res = env.step((FORWARD, ROTATE_LEFT))
    assert np.array_equal(env.swap_perspective(res.observations[0]), res.observations[1])


@given(st.integers(0, 10**6), st.sampled_from(["cooperate", "defect"]), st.integers(0, 1))
def test_gathering_scripted_distributions_are_valid(seed, mode, role):
    env = GatheringEnv()
    pol = scripted_policy(env, role, mode)
    res = env.reset(seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(int(rng.integers(0, 20))):
        res = env.step(tuple(int(x) for x in rng.integers(0, 8, size=2)))
    p = pol.action_distribution(res.observations[role])
    assert p.shape == (8,) and np.all(p >= 0) and abs(p.sum() - 1) < 1e-12


def test_gathering_cooperator_never_beams():
    env = GatheringEnv()
    c = scripted_policy(env, 0, "cooperate")
    res = env.reset(seed=0)
    for _ in range(60):
        assert c.action_distribution(res.observations[0])[BEAM] == 0
        res = env.step((int(np.argmax(c.action_distribution(res.observations[0]))), STAND))


# -- matrix game ----------------------------------------------------------------------

def test_matrix_payoffs():
    env = MatrixGameEnv(3, 0, 5, 1, horizon=2)
    env.reset(seed=0)
    assert env.step((0, 1)).rewards == (0.0, 5.0)
    res = env.step((1, 1))
    assert res.rewards == (1.0, 1.0) and res.done


def test_make_env_rejects_unknown_game():
    with pytest.raises(ValueError):
        make_env("chess")
    assert isinstance(make_env("applepear", rows=4, cols=6), ApplePearEnv)
