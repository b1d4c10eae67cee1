"""Batch rollouts of scripted Apple-Pear mixtures.

The compiled core is used when it was built; setting the environment
variable ``SPDLAB_PURE_PYTHON=1`` forces the pure-Python fallback. Both
reproduce :func:`spdlab.gamecore.rollout` exactly, including its RNG use.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _purecore
from .envs.applepear import ApplePearEnv
from .gamecore import derive_seed
from .numerics import DomainError

try:
    if os.environ.get("SPDLAB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure Python requested")
    from . import _fastcore as _core

    BACKEND = "cython"
except ImportError:
    _core = _purecore
    BACKEND = "python"

BACKENDS = {"python": _purecore.applepear_batch}
if BACKEND == "cython":
    BACKENDS["cython"] = _core.applepear_batch


@dataclass
class BatchResult:
    returns: np.ndarray  # (E, 2) discounted
    lengths: np.ndarray  # (E,)
    trace: np.ndarray | None = None  # (E, T + 1, 8) blue, red, apple, pear cells
    actions: np.ndarray | None = None  # (E, T, 2)


def episode_inputs(env: ApplePearEnv, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Spawn cells and per-step uniforms drawn exactly as ``rollout`` would."""
    seeds = list(seeds)
    spawns = np.empty((len(seeds), 4), dtype=np.int64)
    uniforms = np.empty((len(seeds), 2 * env.max_steps))
    for e, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        st = env.initial_state(rng)
        spawns[e] = (st.apple.row, st.apple.col, st.pear.row, st.pear.col)
        uniforms[e] = rng.random(2 * env.max_steps)
    return spawns, uniforms


def applepear_scripted_batch(
    env: ApplePearEnv,
    seeds,
    degrees,
    gamma: float = 0.99,
    record: bool = False,
    backend: str | None = None,
) -> BatchResult:
    """Play scripted mixtures with per-episode degrees ``(w_blue, w_red)``."""
    if not isinstance(env, ApplePearEnv):
        raise TypeError("batch kernels cover Apple-Pear only")
    seeds = list(seeds)
    deg = np.broadcast_to(np.asarray(degrees, dtype=np.float64), (len(seeds), 2))
    if np.any((deg < 0) | (deg > 1)):
        raise DomainError("cooperation degrees must lie in [0, 1]")
    if max(env.config.rows, env.config.cols) > 64:
        raise DomainError("batch kernels support grids up to 64 cells per side")
    fn = BACKENDS[backend or BACKEND]
    spawns, uniforms = episode_inputs(env, seeds)
    cfg = env.config
    out = fn(spawns, uniforms, np.ascontiguousarray(deg), cfg.rows, cfg.cols, cfg.move_cost,
             cfg.high_value, cfg.low_value, cfg.max_steps, float(gamma), bool(record))
    return BatchResult(*out)


def mixture_values(env: ApplePearEnv, w_blue: float, w_red: float, episodes: int, seed: int = 0,
                   gamma: float = 0.99, backend: str | None = None) -> np.ndarray:
    """Discounted returns (episodes, 2), seeded like ``estimate_value``."""
    seeds = [derive_seed(seed, k) for k in range(episodes)]
    return applepear_scripted_batch(env, seeds, (w_blue, w_red), gamma, backend=backend).returns


def trace_states(env: ApplePearEnv, trace_row: np.ndarray, length: int):
    """Environment states s_0..s_T recorded in one trace row."""
    states = []
    for t in range(length + 1):
        b = trace_row[t]
        apple = None if b[4] < 0 else (int(b[4]), int(b[5]))
        pear = None if b[6] < 0 else (int(b[6]), int(b[7]))
        states.append(env.state_from_arrays((int(b[0]), int(b[1])), (int(b[2]), int(b[3])), apple, pear, t))
    return states


def trace_observations(env: ApplePearEnv, trace_row: np.ndarray, length: int, agent: int) -> np.ndarray:
    """Observation sequence of ``agent`` rebuilt from a trace row, without env calls."""
    cfg = env.config
    rows = trace_row[: length + 1].astype(np.int64)
    T = len(rows)
    grid = np.zeros((T, 4, cfg.rows, cfg.cols))
    t = np.arange(T)
    me = 2 * agent
    other = 2 * (1 - agent)
    grid[t, 0, rows[:, me], rows[:, me + 1]] = 1.0
    grid[t, 1, rows[:, other], rows[:, other + 1]] = 1.0
    for ch, col in ((2, 4), (3, 6)):
        live = rows[:, col] >= 0
        grid[t[live], ch, rows[live, col], rows[live, col + 1]] = 1.0
    return grid.reshape(T, -1)
