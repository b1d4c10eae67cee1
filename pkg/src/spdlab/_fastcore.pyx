# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch rollouts of scripted Apple-Pear mixtures.

Mirrors ``_purecore.applepear_batch`` operation for operation.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int DR[4]
cdef int DC[4]
DR[:] = [-1, 1, 0, 0]
DC[:] = [0, 0, -1, 1]
cdef int INF = 1 << 30
cdef int MAXCELLS = 4096


cdef void bfs(int rows, int cols, int tr, int tc, int br, int bc, int* dist, int* queue) noexcept nogil:
    cdef int i, head = 0, tail = 0, cell, r, c, k, rr, cc, nxt
    for i in range(rows * cols):
        dist[i] = -1
    dist[tr * cols + tc] = 0
    queue[tail] = tr * cols + tc
    tail += 1
    while head < tail:
        cell = queue[head]
        head += 1
        r = cell // cols
        c = cell % cols
        for k in range(4):
            rr = r + DR[k]
            cc = c + DC[k]
            if 0 <= rr < rows and 0 <= cc < cols:
                nxt = rr * cols + cc
                if dist[nxt] < 0 and not (rr == br and cc == bc):
                    dist[nxt] = dist[cell] + 1
                    queue[tail] = nxt
                    tail += 1


cdef void dests(int rows, int cols, int r, int c, int* out) noexcept nogil:
    """out[2k], out[2k+1] = destination of move k, staying put at walls."""
    cdef int k, rr, cc
    for k in range(4):
        rr = r + DR[k]
        cc = c + DC[k]
        if 0 <= rr < rows and 0 <= cc < cols:
            out[2 * k] = rr
            out[2 * k + 1] = cc
        else:
            out[2 * k] = r
            out[2 * k + 1] = c


cdef void uniform(double* mask) noexcept nogil:
    cdef double total = 0.0
    cdef int k
    for k in range(4):
        total += mask[k]
    for k in range(4):
        mask[k] = mask[k] / total


cdef void policy(int role, bint coop, int mr, int mc, int* fr, int rows, int cols,
                 double cost, double high, double low, double* out, int* dist, int* queue) noexcept nogil:
    """Scripted distribution; fr = (apple_r, apple_c, pear_r, pear_c), -1 when consumed."""
    cdef int d[8]
    cdef int order[2]
    cdef int n_order, j, kind, target = -1, k, br = -1, bc = -1, best
    cdef int scores[4]
    cdef double value
    cdef bint on_fruit
    dests(rows, cols, mr, mc, d)
    if coop:
        order[0] = role
        n_order = 1
    else:
        order[0] = 1 - role
        order[1] = role
        n_order = 2
    for j in range(n_order):
        kind = order[j]
        if fr[2 * kind] < 0:
            continue
        value = high if kind == role else low
        if value > cost * (abs(fr[2 * kind] - mr) + abs(fr[2 * kind + 1] - mc)):
            target = kind
            break
    if target < 0:
        for k in range(4):
            on_fruit = False
            for j in range(2):
                if fr[2 * j] >= 0 and d[2 * k] == fr[2 * j] and d[2 * k + 1] == fr[2 * j + 1]:
                    on_fruit = True
            out[k] = 0.0 if on_fruit else 1.0
        if out[0] + out[1] + out[2] + out[3] == 0.0:
            for k in range(4):
                out[k] = 1.0
        uniform(out)
        return
    if coop and fr[2 * (1 - target)] >= 0:
        br = fr[2 * (1 - target)]
        bc = fr[2 * (1 - target) + 1]
    bfs(rows, cols, fr[2 * target], fr[2 * target + 1], br, bc, dist, queue)
    best = INF
    for k in range(4):
        if d[2 * k] == br and d[2 * k + 1] == bc:
            scores[k] = INF
        else:
            scores[k] = dist[d[2 * k] * cols + d[2 * k + 1]]
        if scores[k] < best:
            best = scores[k]
    for k in range(4):
        out[k] = 1.0 if scores[k] == best else 0.0
    uniform(out)


cdef void mixture(int role, double w, int mr, int mc, int* fr, int rows, int cols,
                  double cost, double high, double low, double* out, int* dist, int* queue) noexcept nogil:
    cdef double c[4]
    cdef double dd[4]
    cdef int k
    if w == 1.0:
        policy(role, True, mr, mc, fr, rows, cols, cost, high, low, out, dist, queue)
    elif w == 0.0:
        policy(role, False, mr, mc, fr, rows, cols, cost, high, low, out, dist, queue)
    else:
        policy(role, True, mr, mc, fr, rows, cols, cost, high, low, c, dist, queue)
        policy(role, False, mr, mc, fr, rows, cols, cost, high, low, dd, dist, queue)
        for k in range(4):
            out[k] = w * c[k] + (1.0 - w) * dd[k]


cdef int sample(double* p, double u) noexcept nogil:
    cdef double acc = 0.0
    cdef int k
    for k in range(4):
        acc += p[k]
        if acc > u:
            return k
    return 3


cdef inline bint shareable(int r, int c, int* fr) noexcept nogil:
    return (fr[0] >= 0 and fr[0] == r and fr[1] == c) or (fr[2] >= 0 and fr[2] == r and fr[3] == c)


def applepear_batch(spawns, uniforms, degrees, int rows, int cols, double move_cost,
                    double high, double low, int max_steps, double gamma, bint record):
    if rows * cols > MAXCELLS:
        raise ValueError("grid too large for the compiled core")
    cdef cnp.int64_t[:, :] sp = np.ascontiguousarray(spawns, dtype=np.int64)
    cdef double[:, :] un = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef double[:, :] deg = np.ascontiguousarray(degrees, dtype=np.float64)
    cdef Py_ssize_t n_ep = sp.shape[0]
    if un.shape[0] != n_ep or deg.shape[0] != n_ep or un.shape[1] < 2 * max_steps or deg.shape[1] != 2:
        raise ValueError("spawns, uniforms and degrees disagree in shape")
    returns_arr = np.zeros((n_ep, 2))
    lengths_arr = np.zeros(n_ep, dtype=np.int64)
    cdef double[:, :] ret = returns_arr
    cdef cnp.int64_t[:] lens = lengths_arr
    trace_arr = np.full((n_ep if record else 0, max_steps + 1, 8), -1, dtype=np.int8)
    actions_arr = np.full((n_ep if record else 0, max_steps, 2), -1, dtype=np.int8)
    cdef cnp.int8_t[:, :, :] tr = trace_arr
    cdef cnp.int8_t[:, :, :] ac = actions_arr
    cdef int dist[4096]
    cdef int queue[4096]
    cdef int fr[4]
    cdef int pos[4]
    cdef int nd[8]
    cdef double p0[4]
    cdef double p1[4]
    cdef double r0, r1, disc, ret0, ret1, share
    cdef int a0, a1, f0r, f0c, f1r, f1c, t, kind, k
    cdef bint take0, take1
    cdef Py_ssize_t e
    with nogil:
        for e in range(n_ep):
            pos[0] = 0
            pos[1] = 0
            pos[2] = rows - 1
            pos[3] = cols - 1
            for k in range(4):
                fr[k] = <int>sp[e, k]
            ret0 = 0.0
            ret1 = 0.0
            disc = 1.0
            t = 0
            while t < max_steps:
                if record:
                    for k in range(4):
                        tr[e, t, k] = pos[k]
                        tr[e, t, 4 + k] = fr[k]
                mixture(0, deg[e, 0], pos[0], pos[1], fr, rows, cols, move_cost, high, low, p0, dist, queue)
                mixture(1, deg[e, 1], pos[2], pos[3], fr, rows, cols, move_cost, high, low, p1, dist, queue)
                a0 = sample(p0, un[e, 2 * t])
                a1 = sample(p1, un[e, 2 * t + 1])
                if record:
                    ac[e, t, 0] = a0
                    ac[e, t, 1] = a1
                dests(rows, cols, pos[0], pos[1], nd)
                f0r = nd[2 * a0]
                f0c = nd[2 * a0 + 1]
                dests(rows, cols, pos[2], pos[3], nd)
                f1r = nd[2 * a1]
                f1c = nd[2 * a1 + 1]
                while f0r == f1r and f0c == f1c and not shareable(f0r, f0c, fr):
                    if f0r == pos[2] and f0c == pos[3] and not (f0r == pos[0] and f0c == pos[1]):
                        f0r = pos[0]
                        f0c = pos[1]
                    elif f1r == pos[0] and f1c == pos[1] and not (f1r == pos[2] and f1c == pos[3]):
                        f1r = pos[2]
                        f1c = pos[3]
                    else:
                        f1r = pos[2]
                        f1c = pos[3]
                pos[0] = f0r
                pos[1] = f0c
                pos[2] = f1r
                pos[3] = f1c
                r0 = -move_cost
                r1 = -move_cost
                for kind in range(2):
                    if fr[2 * kind] < 0:
                        continue
                    take0 = pos[0] == fr[2 * kind] and pos[1] == fr[2 * kind + 1]
                    take1 = pos[2] == fr[2 * kind] and pos[3] == fr[2 * kind + 1]
                    if not (take0 or take1):
                        continue
                    share = 0.5 if (take0 and take1) else 1.0
                    if take0:
                        r0 += share * (high if kind == 0 else low)
                    if take1:
                        r1 += share * (high if kind == 1 else low)
                    fr[2 * kind] = -1
                    fr[2 * kind + 1] = -1
                ret0 += disc * r0
                ret1 += disc * r1
                disc *= gamma
                t += 1
                if fr[0] < 0 and fr[2] < 0:
                    break
            if record:
                for k in range(4):
                    tr[e, t, k] = pos[k]
                    tr[e, t, 4 + k] = fr[k]
            ret[e, 0] = ret0
            ret[e, 1] = ret1
            lens[e] = t
    if record:
        return returns_arr, lengths_arr, trace_arr, actions_arr
    return returns_arr, lengths_arr, None, None
