import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spdlab import kernels
from spdlab.envs import ApplePearConfig, ApplePearEnv
from spdlab.gamecore import derive_seed, estimate_value, rollout
from spdlab.numerics import DomainError
from spdlab.policies import mix

degree = st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.BACKENDS


@given(st.integers(0, 2**40), degree, degree)
def test_backends_agree_with_generic_rollout(seed, w1, w2):
    env = ApplePearEnv()
    from spdlab.envs import scripted_policy
    c = [scripted_policy(env, i, "cooperate") for i in (0, 1)]
    d = [scripted_policy(env, i, "defect") for i in (0, 1)]
    seeds = [derive_seed(seed, k) for k in range(3)]
    outs = {name: kernels.applepear_scripted_batch(env, seeds, (w1, w2), 0.97, record=True, backend=name)
            for name in kernels.BACKENDS}
    ref = outs["python"]
    for res in outs.values():
        assert np.array_equal(res.returns, ref.returns)
        assert np.array_equal(res.lengths, ref.lengths)
        assert np.array_equal(res.trace, ref.trace)
        assert np.array_equal(res.actions, ref.actions)
    p1, p2 = mix(c[0], d[0], w1), mix(c[1], d[1], w2)
    for e, s in enumerate(seeds):
        traj = rollout(env, p1, p2, seed=s)
        assert ref.lengths[e] == len(traj)
        assert np.array_equal(ref.returns[e], traj.discounted_returns(0.97))
        assert [tuple(a) for a in ref.actions[e, : len(traj)]] == [r.actions for r in traj.records]
        states = kernels.trace_states(env, ref.trace[e], len(traj))
        assert states[:-1] == [r.state for r in traj.records]
        assert states[-1] == traj.final_state
        for agent in (0, 1):
            assert np.array_equal(kernels.trace_observations(env, ref.trace[e], len(traj), agent),
                                  traj.observations(agent))


def test_mixture_values_match_estimate_value(scripted_pairs):
    coop, defect = scripted_pairs
    env = ApplePearEnv()
    ret = kernels.mixture_values(env, 0.3, 0.8, 40, seed=5)
    est = estimate_value(env, (mix(coop[0], defect[0], 0.3), mix(coop[1], defect[1], 0.8)), 0.99, 40, 5)
    assert np.array_equal(ret, est.returns)


def test_non_default_grid():
    env = ApplePearEnv(ApplePearConfig(rows=4, cols=7, max_steps=30))
    seeds = list(range(5))
    a = kernels.applepear_scripted_batch(env, seeds, (0.5, 0.5), backend="python")
    b = kernels.applepear_scripted_batch(env, seeds, (0.5, 0.5))
    assert np.array_equal(a.returns, b.returns)


def test_kernel_input_validation():
    env = ApplePearEnv()
    with pytest.raises(DomainError):
        kernels.applepear_scripted_batch(env, [0], (1.5, 0.0))
    with pytest.raises(TypeError):
        from spdlab.envs import MatrixGameEnv
        kernels.applepear_scripted_batch(MatrixGameEnv(), [0], (1, 1))
