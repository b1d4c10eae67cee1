"""Pure-Python batch rollouts of scripted Apple-Pear mixtures.

Reference implementation of the compiled core. Both follow the generic
``rollout`` arithmetic operation for operation, so all three agree bit for
bit on actions, states and returns.
"""

from __future__ import annotations

import numpy as np

_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
_INF = 1 << 30


def _bfs(rows, cols, tr, tc, br, bc):
    dist = [[-1] * cols for _ in range(rows)]
    dist[tr][tc] = 0
    frontier = [(tr, tc)]
    while frontier:
        nxt = []
        for r, c in frontier:
            for dr, dc in _MOVES:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and dist[rr][cc] < 0:
                    if rr == br and cc == bc:
                        continue
                    dist[rr][cc] = dist[r][c] + 1
                    nxt.append((rr, cc))
        frontier = nxt
    return dist


def _dests(rows, cols, r, c):
    out = []
    for dr, dc in _MOVES:
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            out.append((rr, cc))
        else:
            out.append((r, c))
    return out


def _uniform(mask):
    total = 0.0
    for m in mask:
        total += m
    return [m / total for m in mask]


def _policy(role, coop, me, fruits, rows, cols, cost, high, low):
    """Scripted distribution for ``role``; ``fruits[k]`` is (r, c) or None."""
    dests = _dests(rows, cols, me[0], me[1])
    order = (role,) if coop else (1 - role, role)
    target = -1
    for kind in order:
        cell = fruits[kind]
        if cell is None:
            continue
        dist = abs(cell[0] - me[0]) + abs(cell[1] - me[1])
        value = high if kind == role else low
        if value > cost * dist:
            target = kind
            break
    if target < 0:
        present = [f for f in fruits if f is not None]
        mask = [0.0 if d in present else 1.0 for d in dests]
        if sum(mask) == 0:
            mask = [1.0] * 4
        return _uniform(mask)
    blocked = fruits[1 - target] if coop else None
    br, bc = blocked if blocked is not None else (-1, -1)
    cell = fruits[target]
    dist = _bfs(rows, cols, cell[0], cell[1], br, bc)
    scores = [_INF if d == blocked else dist[d[0]][d[1]] for d in dests]
    best = min(scores)
    return _uniform([1.0 if s == best else 0.0 for s in scores])


def _mixture(role, w, me, fruits, rows, cols, cost, high, low):
    if w == 1.0:
        return _policy(role, True, me, fruits, rows, cols, cost, high, low)
    if w == 0.0:
        return _policy(role, False, me, fruits, rows, cols, cost, high, low)
    c = _policy(role, True, me, fruits, rows, cols, cost, high, low)
    d = _policy(role, False, me, fruits, rows, cols, cost, high, low)
    return [w * c[k] + (1.0 - w) * d[k] for k in range(4)]


def _sample(dist, u):
    acc = 0.0
    for k in range(4):
        acc += dist[k]
        if acc > u:
            return k
    return 3


def _resolve(cur, prop, shareable):
    f0, f1 = prop
    while f0 == f1 and f0 not in shareable:
        if f0 == cur[1] and f0 != cur[0]:
            f0 = cur[0]
        elif f1 == cur[0] and f1 != cur[1]:
            f1 = cur[1]
        else:
            f1 = cur[1]
    return f0, f1


def applepear_batch(spawns, uniforms, degrees, rows, cols, move_cost, high, low,
                    max_steps, gamma, record):
    """Roll out one episode per row of ``spawns`` = (apple_r, apple_c, pear_r, pear_c).

    ``uniforms[e, 2t + i]`` drives agent ``i``'s action at step ``t``.
    Returns discounted returns (E, 2), lengths (E,) and, with ``record``,
    a state trace (E, max_steps + 1, 8) of blue, red, apple, pear cells
    (-1 for a consumed fruit), plus actions (E, max_steps, 2).
    """
    spawns = np.asarray(spawns, dtype=np.int64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    degrees = np.asarray(degrees, dtype=np.float64)
    n_ep = spawns.shape[0]
    returns = np.zeros((n_ep, 2))
    lengths = np.zeros(n_ep, dtype=np.int64)
    trace = np.full((n_ep, max_steps + 1, 8), -1, dtype=np.int8) if record else None
    actions = np.full((n_ep, max_steps, 2), -1, dtype=np.int8) if record else None
    for e in range(n_ep):
        pos = [(0, 0), (rows - 1, cols - 1)]
        fruits = [(int(spawns[e, 0]), int(spawns[e, 1])), (int(spawns[e, 2]), int(spawns[e, 3]))]
        w0, w1 = float(degrees[e, 0]), float(degrees[e, 1])
        ret0 = ret1 = 0.0
        disc = 1.0
        t = 0
        while t < max_steps:
            if record:
                _record(trace, e, t, pos, fruits)
            p0 = _mixture(0, w0, pos[0], fruits, rows, cols, move_cost, high, low)
            p1 = _mixture(1, w1, pos[1], fruits, rows, cols, move_cost, high, low)
            a0 = _sample(p0, uniforms[e, 2 * t])
            a1 = _sample(p1, uniforms[e, 2 * t + 1])
            if record:
                actions[e, t] = (a0, a1)
            prop = (_dests(rows, cols, *pos[0])[a0], _dests(rows, cols, *pos[1])[a1])
            shareable = [f for f in fruits if f is not None]
            pos = list(_resolve(pos, prop, shareable))
            r = [-move_cost, -move_cost]
            for kind in (0, 1):
                cell = fruits[kind]
                if cell is None:
                    continue
                takers = [i for i in (0, 1) if pos[i] == cell]
                if not takers:
                    continue
                share = 0.5 if len(takers) == 2 else 1.0
                for i in takers:
                    r[i] += share * (high if i == kind else low)
                fruits[kind] = None
            ret0 += disc * r[0]
            ret1 += disc * r[1]
            disc *= gamma
            t += 1
            if fruits[0] is None and fruits[1] is None:
                break
        if record:
            _record(trace, e, t, pos, fruits)
        returns[e, 0] = ret0
        returns[e, 1] = ret1
        lengths[e] = t
    return returns, lengths, trace, actions


def _record(trace, e, t, pos, fruits):
    row = trace[e, t]
    row[0], row[1] = pos[0]
    row[2], row[3] = pos[1]
    for k in (0, 1):
        if fruits[k] is not None:
            row[4 + 2 * k], row[5 + 2 * k] = fruits[k]
        else:
            row[4 + 2 * k] = row[5 + 2 * k] = -1
