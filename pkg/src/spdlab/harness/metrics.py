"""Summary statistics over match logs."""

from __future__ import annotations

import numpy as np

from ..online_agent import MatchLog


def trailing_mean(values, window: int) -> np.ndarray:
    """Mean of the last ``window`` values at each index (shorter at the start)."""
    v = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def episode_degrees(log: MatchLog, episodes: int) -> np.ndarray:
    """Per-episode mean degree of each player, shape (episodes, 2)."""
    deg = np.asarray(log.degrees, dtype=np.float64)
    out = np.full((episodes, 2), np.nan)
    if len(deg) == 0:
        return out
    ep = deg[:, 0].astype(int)
    for k in (0, 1):
        sums = np.bincount(ep, weights=deg[:, 2 + k], minlength=episodes)
        counts = np.bincount(ep, minlength=episodes)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, k] = sums[:episodes] / counts[:episodes]
    return out


def first_mutual_reach(per_episode: np.ndarray, threshold: float, window: int) -> int:
    """First episode at which the trailing mean of the lower degree reaches ``threshold``.

    Only full windows count. Returns -1 if it never does.
    """
    low = np.min(per_episode, axis=1)
    if len(low) < window:
        return -1
    full = np.convolve(low, np.ones(window) / window, mode="valid")
    hits = np.nonzero(full >= threshold - 1e-12)[0]
    return int(hits[0] + window - 1) if len(hits) else -1


def phase_mismatch(log: MatchLog) -> float:
    """Share of steps where the agent's smoothed belief sits on the wrong side of 0.5."""
    rows = [r for r in log.rows if r["opponent_phase"] in ("cooperate", "defect")]
    if not rows:
        return float("nan")
    wrong = [(r["smoothed_cd"] >= 0.5) != (r["opponent_phase"] == "cooperate") for r in rows]
    return float(np.mean(wrong))
