"""Optional SVG figures. Requires matplotlib (the ``plot`` extra)."""

from __future__ import annotations

import numpy as np

from .config import ConfigError
from .io import Outputs


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError("plots = true needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "spdlab"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, out: Outputs, name: str) -> None:
    fig.savefig(out.path(name), format="svg", metadata={"Date": None})
    out.adopt(name)


def plot_heatmap(h, out: Outputs) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    panels = (("agent 1 reward", h.mean[:, :, 0]), ("agent 2 reward", h.mean[:, :, 1]),
              ("total reward", h.total))
    for ax, (title, data) in zip(axes, panels):
        im = ax.imshow(data, origin="lower", extent=(-0.05, 1.05, -0.05, 1.05), cmap="viridis")
        ax.set_xlabel("w2 (agent 2 cooperation degree)")
        ax.set_ylabel("w1 (agent 1 cooperation degree)")
        ax.set_title(title)
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    _save(fig, out, "heatmap.svg")
    plt.close(fig)


def plot_detection(curves: dict, grid, out: Outputs) -> None:
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    for own, (raw, cal) in curves.items():
        a1.plot(grid, raw, marker="o", label=f"own degree {own:g}")
        a2.plot(grid, cal, marker="o", label=f"own degree {own:g}")
    a2.plot([0, 1], [0, 1], color="grey", linestyle=":")
    a1.set_title("mean raw detector output")
    a2.set_title("calibrated degree")
    for ax in (a1, a2):
        ax.set_xlabel("true cooperation degree")
        ax.legend()
    fig.tight_layout()
    _save(fig, out, "detector_eval.svg")
    plt.close(fig)


def plot_selfplay(traces: dict, threshold: float, out: Outputs) -> None:
    plt = _pyplot()
    cases = sorted({c for c, _ in traces})
    fig, axes = plt.subplots(1, len(cases), figsize=(4 * len(cases), 3.5), squeeze=False)
    for ax, case in zip(axes[0], cases):
        for (c, run), per_ep in sorted(traces.items()):
            if c == case:
                ax.plot(np.min(per_ep, axis=1), linewidth=0.8, label=f"run {run}")
        ax.axhline(threshold, color="grey", linestyle=":")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"{case}: lower of the two degrees")
        ax.set_xlabel("episode")
    axes[0][0].legend(fontsize="small")
    fig.tight_layout()
    _save(fig, out, "selfplay.svg")
    plt.close(fig)


def plot_switching(curves, sw, out: Outputs) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    period = sw.periods[len(sw.periods) // 2]
    for policy in ("adaptive", "always_c", "always_d"):
        rows = [r for r in curves if r[0] == period and r[1] == 0 and r[2] == policy]
        axes[0].plot([r[3] for r in rows], [r[6] for r in rows], label=policy)
        axes[1].plot([r[3] for r in rows], [r[7] for r in rows], label=policy)
    axes[0].set_title(f"agent reward, trailing {sw.trailing} (period {period})")
    axes[1].set_title(f"social welfare, trailing {sw.trailing} (period {period})")
    for ax in axes:
        ax.set_xlabel("episode")
        ax.legend()
    fig.tight_layout()
    _save(fig, out, "switching.svg")
    plt.close(fig)
