"""Fruit Gathering: apple collection with a tagging beam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .applepear import resolve_moves
from .base import GridPos, TwoPlayerEnv

FORWARD, BACKWARD, STEP_LEFT, STEP_RIGHT, ROTATE_LEFT, ROTATE_RIGHT, BEAM, STAND = range(8)
# orientation index -> (drow, dcol): north, east, south, west
DIRECTIONS = ((-1, 0), (0, 1), (1, 0), (0, -1))
_MOVE_OFFSET = {FORWARD: 0, STEP_RIGHT: 1, BACKWARD: 2, STEP_LEFT: 3}


@dataclass(frozen=True)
class GatheringConfig:
    rows: int = 9
    cols: int = 11
    apple_respawn: int = 40
    removal_frames: int = 20
    hits_to_remove: int = 2
    max_steps: int = 100
    apple_reward: float = 1.0
    move_cost: float = 0.0


@dataclass(frozen=True)
class GatherAgent:
    pos: GridPos
    orientation: int
    hits: int = 0
    respawn: int = 0

    @property
    def active(self) -> bool:
        return self.respawn == 0


@dataclass(frozen=True)
class GatheringState:
    agents: tuple[GatherAgent, GatherAgent]
    apples: tuple[GridPos, ...]
    apple_timers: tuple[int, ...]
    beams: frozenset = frozenset()
    step: int = 0


def default_apple_patch(cfg: GatheringConfig) -> tuple[GridPos, ...]:
    """Seven apples in a checkerboard inside a central 3x5 block."""
    r0 = cfg.rows // 2 - 1
    c0 = cfg.cols // 2 - 2
    cells = []
    for dr in range(3):
        for dc in range(5):
            if (dr + dc) % 2 == 1:
                cells.append(GridPos(r0 + dr, c0 + dc))
    return tuple(cells)


def beam_cells(cfg: GatheringConfig, pos: GridPos, orientation: int) -> list[GridPos]:
    dr, dc = DIRECTIONS[orientation]
    cells = []
    r, c = pos.row + dr, pos.col + dc
    while 0 <= r < cfg.rows and 0 <= c < cfg.cols:
        cells.append(GridPos(r, c))
        r, c = r + dr, c + dc
    return cells


def move_target(cfg: GatheringConfig, agent: GatherAgent, action: int) -> GridPos:
    if action not in _MOVE_OFFSET:
        return agent.pos
    dr, dc = DIRECTIONS[(agent.orientation + _MOVE_OFFSET[action]) % 4]
    r, c = agent.pos.row + dr, agent.pos.col + dc
    if 0 <= r < cfg.rows and 0 <= c < cfg.cols:
        return GridPos(r, c)
    return agent.pos


class GatheringEnv(TwoPlayerEnv):
    game_id = "gathering"
    action_names = (
        "forward", "backward", "left", "right",
        "rotate_left", "rotate_right", "beam", "stand",
    )
    channels = (
        "self", "other", "apple", "beam",
        "self_north", "self_east", "self_south", "self_west",
        "other_north", "other_east", "other_south", "other_west",
    )

    def __init__(self, config: GatheringConfig | None = None):
        super().__init__()
        self.config = config or GatheringConfig()
        cfg = self.config
        self.max_steps = cfg.max_steps
        mid = cfg.rows // 2
        self.starts = (GridPos(mid, 0), GridPos(mid, cfg.cols - 1))
        self.start_orientations = (1, 3)
        self.apple_cells = default_apple_patch(cfg)

    @property
    def obs_shape(self) -> tuple[int, ...]:
        return (len(self.channels), self.config.rows, self.config.cols)

    def initial_state(self, rng: np.random.Generator) -> GatheringState:
        agents = tuple(GatherAgent(p, o) for p, o in zip(self.starts, self.start_orientations))
        return GatheringState(agents, self.apple_cells, (0,) * len(self.apple_cells), frozenset(), 0)

    def _respawn_cell(self, agent_id: int, occupied: GridPos | None) -> GridPos:
        start = self.starts[agent_id]
        if start != occupied:
            return start
        cfg = self.config
        cells = sorted(
            (abs(r - start.row) + abs(c - start.col), r, c)
            for r in range(cfg.rows)
            for c in range(cfg.cols)
            if GridPos(r, c) != occupied
        )
        _, r, c = cells[0]
        return GridPos(r, c)

    def transition(self, state: GatheringState, actions):
        cfg = self.config
        if state.step >= cfg.max_steps:
            raise RuntimeError("step() called on a terminal state")
        acts = self.check_actions(actions)
        agents = list(state.agents)
        active = [a.active for a in agents]

        orient = [a.orientation for a in agents]
        for i in (0, 1):
            if active[i] and acts[i] == ROTATE_LEFT:
                orient[i] = (orient[i] + 3) % 4
            elif active[i] and acts[i] == ROTATE_RIGHT:
                orient[i] = (orient[i] + 1) % 4

        available = {cell for cell, t in zip(state.apples, state.apple_timers) if t == 0}
        proposed = [move_target(cfg, agents[i], acts[i]) if active[i] else agents[i].pos for i in (0, 1)]
        if all(active):
            final = resolve_moves((agents[0].pos, agents[1].pos), proposed, available)
        else:
            final = tuple(proposed)

        rewards = [-cfg.move_cost if active[i] and acts[i] in _MOVE_OFFSET else 0.0 for i in (0, 1)]
        timers = list(state.apple_timers)
        fresh = set()
        for k, cell in enumerate(state.apples):
            if timers[k] != 0:
                continue
            takers = [i for i in (0, 1) if active[i] and final[i] == cell]
            if takers:
                for i in takers:
                    rewards[i] += cfg.apple_reward
                timers[k] = cfg.apple_respawn
                fresh.add(k)

        beams: set[GridPos] = set()
        hits = [a.hits for a in agents]
        respawn = [a.respawn for a in agents]
        tagged = []
        for i in (0, 1):
            if active[i] and acts[i] == BEAM:
                cells = beam_cells(cfg, final[i], orient[i])
                beams.update(cells)
                j = 1 - i
                if active[j] and final[j] in cells:
                    hits[j] += 1
                    tagged.append(j)
        removed_now = set()
        for j in (0, 1):
            if active[j] and hits[j] >= cfg.hits_to_remove:
                respawn[j] = cfg.removal_frames
                hits[j] = 0
                removed_now.add(j)

        for k in range(len(timers)):
            if k not in fresh and timers[k] > 0:
                timers[k] -= 1
        positions = list(final)
        for i in (0, 1):
            if not active[i] and i not in removed_now:
                respawn[i] -= 1
                if respawn[i] == 0:
                    other = positions[1 - i] if respawn[1 - i] == 0 else None
                    positions[i] = self._respawn_cell(i, other)
                    orient[i] = self.start_orientations[i]

        new_agents = tuple(GatherAgent(positions[i], orient[i], hits[i], respawn[i]) for i in (0, 1))
        new = GatheringState(new_agents, state.apples, tuple(timers), frozenset(beams), state.step + 1)
        done = new.step >= cfg.max_steps
        info = {
            "collected": len(fresh),
            "tagged": tagged,
            "removed": sorted(removed_now),
            "beam_used": [active[i] and acts[i] == BEAM for i in (0, 1)],
        }
        return new, (rewards[0], rewards[1]), done, info

    def observe(self, state: GatheringState, agent: int) -> np.ndarray:
        grid = np.zeros(self.obs_shape)
        for slot, idx in ((0, agent), (1, 1 - agent)):
            a = state.agents[idx]
            if a.active:
                grid[slot, a.pos.row, a.pos.col] = 1.0
                grid[4 + 4 * slot + a.orientation, a.pos.row, a.pos.col] = 1.0
        for cell, t in zip(state.apples, state.apple_timers):
            if t == 0:
                grid[2, cell.row, cell.col] = 1.0
        for cell in state.beams:
            grid[3, cell.row, cell.col] = 1.0
        return grid.reshape(-1)

    def swap_perspective(self, obs: np.ndarray) -> np.ndarray:
        g = np.asarray(obs).reshape((-1,) + self.obs_shape)
        order = [1, 0, 2, 3, 8, 9, 10, 11, 4, 5, 6, 7]
        return g[:, order].reshape(np.asarray(obs).shape)

    def decode(self, obs: np.ndarray):
        """Return (self, other) as (pos, orientation) or None, plus available apples."""
        g = np.asarray(obs).reshape(self.obs_shape)
        agents = []
        for slot in (0, 1):
            idx = np.flatnonzero(g[slot])
            if idx.size == 0:
                agents.append(None)
                continue
            pos = GridPos(*divmod(int(idx[0]), self.config.cols))
            o = int(np.argmax(g[4 + 4 * slot : 8 + 4 * slot, pos.row, pos.col]))
            agents.append((pos, o))
        apples = [GridPos(*divmod(int(i), self.config.cols)) for i in np.flatnonzero(g[2])]
        return agents[0], agents[1], apples
