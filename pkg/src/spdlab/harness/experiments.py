"""Experiment commands. Each takes a config and an output directory and
returns a JSON-ready summary; all randomness flows from ``config.seed``."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from .. import kernels
from ..detector import (
    CalibrationEntry,
    CalibrationTable,
    DetectorConfig,
    DetectorModel,
    calibrated_degree,
    degree_scores,
    fit_calibration,
    generate_dataset,
    spearman,
    train_detector,
)
from ..envs import ApplePearEnv, make_env, scripted_policy
from ..envs.scripted import ApplePearScripted
from ..gamecore import (
    check_spd,
    derive_seed,
    payoff_matrix_from_values,
    replay_trajectory,
    rollout,
    summarize_returns,
    write_trajectory,
)
from ..online_agent import (
    AdaptiveAgent,
    AgentConfig,
    MatchLog,
    OracleDetector,
    SwitchingOpponentSpec,
    TrainedDetector,
    run_match,
)
from ..policies import load_policy_bundle, mix
from ..training import TrainingSchedule, train_baselines, write_training_outputs
from .config import ConfigError, ExperimentConfig, _build
from .io import Outputs
from .metrics import episode_degrees, first_mutual_reach, phase_mismatch, trailing_mean


def degree_grid(points: int) -> list[float]:
    return [round(float(x), 10) for x in np.linspace(0.0, 1.0, points)]


# -- shared plumbing -------------------------------------------------------------------

def build_env(cfg: ExperimentConfig):
    return make_env(cfg.game, **cfg.env)


def baselines(cfg: ExperimentConfig, env) -> tuple[tuple, tuple]:
    """Per-role (cooperative, defecting) policies."""
    src = cfg.policies
    if src.source == "scripted":
        return (tuple(scripted_policy(env, i, "cooperate") for i in (0, 1)),
                tuple(scripted_policy(env, i, "defect") for i in (0, 1)))
    if src.source != "bundles":
        raise ConfigError(f"policies.source must be 'scripted' or 'bundles', got {src.source!r}")
    pairs = []
    for mode, paths in (("coop", src.coop), ("defect", src.defect)):
        if len(paths) != 2:
            raise ConfigError(f"policies.{mode} needs one bundle per agent")
        missing = [p for p in paths if not Path(p).exists()]
        if missing:
            raise ConfigError(f"missing policy bundle(s): {', '.join(missing)}")
        pairs.append(tuple(load_policy_bundle(p, env) for p in paths))
    return pairs[0], pairs[1]


def _kernel_roles(env, coop, defect) -> bool:
    if not isinstance(env, ApplePearEnv):
        return False
    for role in (0, 1):
        for pol, mode in ((coop[role], "cooperate"), (defect[role], "defect")):
            if not (isinstance(pol, ApplePearScripted) and pol.role == role and pol.mode == mode
                    and pol.env.config == env.config):
                return False
    return True


def mixture_returns(env, coop, defect, w1: float, w2: float, episodes: int, seed: int,
                    gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Discounted and undiscounted returns (episodes, 2) of a mixture pairing.

    Episode ``k`` uses seed ``derive_seed(seed, k)``, as ``estimate_value``
    does; scripted Apple-Pear pairings go through the batch kernel.
    """
    if _kernel_roles(env, coop, defect):
        seeds = [derive_seed(seed, k) for k in range(episodes)]
        disc = kernels.applepear_scripted_batch(env, seeds, (w1, w2), gamma).returns
        flat = kernels.applepear_scripted_batch(env, seeds, (w1, w2), 1.0).returns
        return disc, flat
    p1, p2 = mix(coop[0], defect[0], w1), mix(coop[1], defect[1], w2)
    disc = np.empty((episodes, 2))
    flat = np.empty((episodes, 2))
    for k in range(episodes):
        traj = rollout(env, p1, p2, seed=derive_seed(seed, k))
        disc[k] = traj.discounted_returns(gamma)
        flat[k] = traj.discounted_returns(1.0)
    return disc, flat


def detector_paths(directory: str | Path, target: int) -> tuple[Path, Path]:
    d = Path(directory)
    return d / f"detector_target{target}.model", d / f"calibration_target{target}.txt"


def estimator_for(cfg: ExperimentConfig, role: int):
    """Degree estimator for the agent in ``role``; it watches the other agent."""
    kind = cfg.agent.estimator
    if kind == "oracle":
        return OracleDetector(n=cfg.agent.n)
    if kind != "trained":
        raise ConfigError(f"agent.estimator must be 'trained' or 'oracle', got {kind!r}")
    model_path, table_path = detector_paths(cfg.agent.detector_dir, 1 - role)
    for p in (model_path, table_path):
        if not p.exists():
            raise ConfigError(f"missing detector file {p}; run train-detector first")
    return TrainedDetector(DetectorModel.load(model_path), CalibrationTable.load(table_path))


def adaptive_agent(cfg: ExperimentConfig, env, role: int, initial: float | None = None) -> AdaptiveAgent:
    coop, defect = baselines(cfg, env)
    est = estimator_for(cfg, role)
    a = cfg.agent
    agent_cfg = AgentConfig(n=est.n if isinstance(est, TrainedDetector) else a.n, alpha=a.alpha,
                            delta=a.delta,
                            initial_degree=a.initial_degree if initial is None else initial,
                            literal_update=a.literal_update)
    return AdaptiveAgent(coop[role], defect[role], est, agent_cfg)


# -- train-baselines -------------------------------------------------------------------

def cmd_train_baselines(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    env = build_env(cfg)
    t = cfg.train
    overrides = {k: getattr(t, k) for k in ("episodes", "steps_per_episode", "epsilon_start",
                                            "epsilon_end", "anneal_steps", "lr", "actor_lr", "batch",
                                            "replay_capacity", "gamma", "log_every")}
    overrides["hidden"] = tuple(t.hidden)
    if t.tau is not None:
        overrides["tau"] = t.tau
    if t.update_every is not None:
        overrides["update_every"] = t.update_every
    schedule = TrainingSchedule.for_game(env.game_id, **overrides)
    bundles = train_baselines(env, t.scheme, t.settings, schedule, cfg.seed)
    manifest = write_training_outputs(out.dir, env, bundles, schedule, cfg.seed, stamp=dict(out.stamp),
                                      manifest_name="training_manifest.json")
    out.adopt("training_manifest.json")
    for label, entry in manifest["bundles"].items():
        for name in entry["files"]:
            out.adopt(name)
        out.adopt(f"{label}_metrics.csv")
    final = {label: b.metrics[-1] for label, b in bundles.items() if b.metrics}
    return {"bundles": sorted(bundles), "final_metrics": final}


# -- heatmap ---------------------------------------------------------------------------

@dataclass
class HeatmapResult:
    degrees: list[float]
    episodes: int
    mean: np.ndarray  # (G, G, 2) undiscounted per-episode reward
    stderr: np.ndarray  # (G, G, 2)
    total: np.ndarray  # (G, G)
    total_stderr: np.ndarray  # (G, G)
    discounted: np.ndarray  # (G, G, 2)
    per_episode: np.ndarray  # (G, G, E, 2) undiscounted


def compute_heatmap(cfg: ExperimentConfig) -> HeatmapResult:
    env = build_env(cfg)
    coop, defect = baselines(cfg, env)
    grid = degree_grid(cfg.heatmap.grid)
    G, E = len(grid), cfg.heatmap.episodes
    mean = np.empty((G, G, 2))
    se = np.empty((G, G, 2))
    total = np.empty((G, G))
    total_se = np.empty((G, G))
    disc_mean = np.empty((G, G, 2))
    per_ep = np.empty((G, G, E, 2))
    for i, w1 in enumerate(grid):
        for j, w2 in enumerate(grid):
            disc, flat = mixture_returns(env, coop, defect, w1, w2, E, derive_seed(cfg.seed, i, j),
                                         cfg.heatmap.gamma)
            est = summarize_returns(flat)
            mean[i, j], se[i, j] = est.mean, est.stderr
            tot = flat.sum(axis=1)
            total[i, j] = tot.mean()
            total_se[i, j] = tot.std(ddof=1) / np.sqrt(E) if E > 1 else 0.0
            disc_mean[i, j] = disc.mean(axis=0)
            per_ep[i, j] = flat
    return HeatmapResult(grid, E, mean, se, total, total_se, disc_mean, per_ep)


def heatmap_checks(h: HeatmapResult) -> dict[str, Any]:
    """Corner comparison and the agent-2 reward slope along w2 at w1 = 1."""
    hi, lo = len(h.degrees) - 1, 0
    diff = float(h.total[hi, hi] - h.total[lo, lo])
    diff_se = float(np.hypot(h.total_stderr[hi, hi], h.total_stderr[lo, lo]))
    x = np.repeat(h.degrees, h.episodes)
    y = h.per_episode[hi, :, :, 1].reshape(-1)
    fit = stats.linregress(x, y)
    return {
        "corner_total_diff": diff,
        "corner_total_diff_stderr": diff_se,
        "corner_exceeds_2se": bool(diff > 2 * diff_se),
        "agent2_slope_at_w1_1": float(fit.slope),
        "agent2_slope_pvalue": float(fit.pvalue),
        "agent2_slope_negative_p05": bool(fit.slope < 0 and fit.pvalue < 0.05),
    }


def cmd_heatmap(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    h = compute_heatmap(cfg)
    rows = []
    for i, w1 in enumerate(h.degrees):
        for j, w2 in enumerate(h.degrees):
            rows.append((w1, w2, h.mean[i, j, 0], h.mean[i, j, 1], h.total[i, j], h.stderr[i, j, 0],
                         h.stderr[i, j, 1], h.total_stderr[i, j], h.discounted[i, j, 0],
                         h.discounted[i, j, 1], h.episodes))
    out.csv("heatmap.csv", ("w1", "w2", "reward_1", "reward_2", "total", "stderr_1", "stderr_2",
                            "stderr_total", "return_1", "return_2", "episodes"), rows)
    checks = heatmap_checks(h)
    out.json("heatmap_summary.json", {"degrees": h.degrees, "episodes": h.episodes,
                                      "gamma": cfg.heatmap.gamma, **checks})
    if cfg.plots:
        from .plots import plot_heatmap

        plot_heatmap(h, out)
    return checks


# -- spd-verify ------------------------------------------------------------------------

PAIRINGS = (("cc", 1.0, 1.0), ("dd", 0.0, 0.0), ("cd", 1.0, 0.0), ("dc", 0.0, 1.0))


def cmd_spd_verify(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    env = build_env(cfg)
    coop, defect = baselines(cfg, env)
    est = {}
    for i, (name, w1, w2) in enumerate(PAIRINGS):
        disc, _ = mixture_returns(env, coop, defect, w1, w2, cfg.spd.episodes,
                                  derive_seed(cfg.seed, i), cfg.spd.gamma)
        est[name] = summarize_returns(disc)
    m = payoff_matrix_from_values(est["cc"], est["dd"], est["cd"], est["dc"])
    verdict = check_spd(m)
    se = m.se
    margin_se = {
        "R>P": np.hypot(se["R"], se["P"]),
        "R>S": np.hypot(se["R"], se["S"]),
        "2R>S+T": np.sqrt(4 * se["R"] ** 2 + se["S"] ** 2 + se["T"] ** 2),
        "T>R": np.hypot(se["T"], se["R"]),
        "P>S": np.hypot(se["P"], se["S"]),
    }
    out.csv("spd_payoffs.csv", ("entry", "value", "stderr", "perspective_gap"),
            [(k, getattr(m, k), se[k], m.discrepancy[k]) for k in ("R", "P", "S", "T")])
    out.csv("spd_inequalities.csv", ("inequality", "margin", "stderr", "holds"),
            [(k, verdict.margins[k], margin_se[k], verdict.holds[k]) for k in verdict.margins])
    report = {"matrix": m.as_dict(), "verdict": verdict.as_dict(),
              "margin_stderr": {k: float(v) for k, v in margin_se.items()},
              "gamma": cfg.spd.gamma}
    out.json("spd_report.json", report)
    return {"overall": verdict.overall, "margins": verdict.margins,
            "R": m.R, "P": m.P, "S": m.S, "T": m.T}


# -- train-detector ---------------------------------------------------------------------

def detector_config(cfg: ExperimentConfig) -> DetectorConfig:
    d = cfg.detector
    return DetectorConfig(n=d.n, encoder=tuple(d.encoder), recurrent=d.recurrent,
                          recon_weight=d.recon_weight, w1=d.w1, w2=d.w2, lr=d.lr, epochs=d.epochs,
                          batch=d.batch, holdout=d.holdout)


def cmd_train_detector(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    env = build_env(cfg)
    coop, defect = baselines(cfg, env)
    d = cfg.detector
    grid = degree_grid(11)
    summary_rows, results = [], {}
    for target in d.targets:
        if target not in (0, 1):
            raise ConfigError("detector.targets entries must be 0 or 1")
        observer = 1 - target
        tb, ob = (coop[target], defect[target]), (coop[observer], defect[observer])
        ds = generate_dataset(env, tb, ob, d.n, d.samples_per_class, derive_seed(cfg.seed, 10, target),
                              target, tuple(d.opponent_degrees), offsets=d.offsets)
        sym = env.observation_symmetries() if d.augment else None
        model, rep = train_detector(ds, detector_config(cfg), derive_seed(cfg.seed, 11, target), sym)
        table = fit_calibration(model, env, ob, tb, tuple(d.own_grid), tuple(grid),
                                d.calibration_episodes, derive_seed(cfg.seed, 12, target), target)
        model_path, table_path = detector_paths(out.dir, target)
        model.save(model_path)
        table.save(table_path)
        out.adopt(model_path.name)
        out.adopt(table_path.name)
        out.csv(f"detector_target{target}_training.csv", ("epoch", "loss"),
                [(k + 1, v) for k, v in enumerate(rep.epoch_losses)])
        out.csv(f"calibration_target{target}.csv",
                ("own_degree", "slope", "intercept", "residual_rms", "degenerate"),
                [(e.own_degree, e.slope, e.intercept, e.residual_rms, e.degenerate)
                 for e in table.entries])
        summary_rows.append((target, len(ds), rep.train_accuracy, rep.heldout_accuracy, rep.heldout_size,
                             rep.heldout_coop_hit_rate, rep.epoch_losses[-1]))
        results[f"target{target}"] = {"heldout_accuracy": rep.heldout_accuracy,
                                      "train_accuracy": rep.train_accuracy,
                                      "heldout_coop_hit_rate": rep.heldout_coop_hit_rate,
                                      "samples": len(ds)}
    out.csv("detector_summary.csv", ("target", "samples", "train_accuracy", "heldout_accuracy",
                                     "heldout_size", "heldout_coop_hit_rate", "final_loss"), summary_rows)
    return results


# -- detector-eval ----------------------------------------------------------------------

def detection_curves(cfg: ExperimentConfig) -> dict[float, tuple[np.ndarray, np.ndarray]]:
    """Per own degree: mean raw score and calibrated degree along the true-degree grid."""
    env = build_env(cfg)
    coop, defect = baselines(cfg, env)
    e = cfg.detector_eval
    target, observer = e.target, 1 - e.target
    grid = degree_grid(e.grid)
    curves = {}
    if cfg.agent.estimator == "oracle":
        ident = CalibrationTable([CalibrationEntry(own, 1.0, 0.0, 0.0, False) for own in e.own_grid])
        for own in e.own_grid:
            raw = np.asarray(grid, dtype=np.float64)
            curves[own] = (raw, np.array([calibrated_degree(ident, own, r) for r in raw]))
        return curves
    est = estimator_for(cfg, observer)
    for k, own in enumerate(e.own_grid):
        raw = degree_scores(est.model, env, (coop[observer], defect[observer]),
                            (coop[target], defect[target]), own, grid, e.episodes,
                            derive_seed(cfg.seed, 20, k), target)
        curves[own] = (raw, np.array([calibrated_degree(est.table, own, r) for r in raw]))
    return curves


def cmd_detector_eval(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    grid = degree_grid(cfg.detector_eval.grid)
    curves = detection_curves(cfg)
    rows, summary = [], []
    for own, (raw, cal) in curves.items():
        for w, r, c in zip(grid, raw, cal):
            rows.append((own, w, r, c))
        summary.append((own, spearman(raw, grid), spearman(cal, grid),
                        float(np.sqrt(np.mean((cal - np.asarray(grid)) ** 2)))))
    out.csv("detector_eval.csv", ("own_degree", "true_degree", "mean_raw", "calibrated"), rows)
    out.csv("detector_eval_summary.csv", ("own_degree", "spearman_raw", "spearman_calibrated",
                                          "calibrated_rmse"), summary)
    if cfg.plots:
        from .plots import plot_detection

        plot_detection(curves, grid, out)
    return {"spearman_raw": {str(s[0]): s[1] for s in summary},
            "min_spearman_raw": min(s[1] for s in summary)}


# -- selfplay --------------------------------------------------------------------------

CASE_DEGREES = {"C": 1.0, "D": 0.0}


def selfplay_run(cfg: ExperimentConfig, case: str, run: int) -> tuple[MatchLog, int]:
    if len(case) != 2 or any(c not in CASE_DEGREES for c in case):
        raise ConfigError(f"self-play case must be two letters from C/D, got {case!r}")
    env = build_env(cfg)
    agents = [adaptive_agent(cfg, env, role, CASE_DEGREES[case[role]]) for role in (0, 1)]
    seed = derive_seed(cfg.seed, 30, run)
    return run_match(env, agents[0], agents[1], cfg.selfplay.episodes, seed), seed


def cmd_selfplay(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    sp = cfg.selfplay
    summary, reached = [], {}
    traces = {}
    for case in sp.cases:
        hits = 0
        for run in range(sp.runs):
            log, seed = selfplay_run(cfg, case, run)
            per_ep = episode_degrees(log, sp.episodes)
            first = first_mutual_reach(per_ep, sp.threshold, sp.window)
            hits += first >= 0
            tab = log.episode_table()
            tail = per_ep[-sp.window:]
            summary.append((case, run, seed, first >= 0, first, tail[:, 0].mean(), tail[:, 1].mean(),
                            tab["reward_1"].mean(), tab["reward_2"].mean()))
            out.csv(f"selfplay_{case}_run{run}.csv",
                    ("episode", "step", "reward_1", "reward_2", "cd_1", "cd_2", "detected_1", "detected_2"),
                    [(r["episode"], r["step"], r["reward_1"], r["reward_2"], dg[2], dg[3], dt[0], dt[1])
                     for r, dg, dt in zip(log.rows, log.degrees, log.detections)])
            traces[(case, run)] = per_ep
        reached[case] = hits
    out.csv("selfplay_summary.csv", ("case", "run", "seed", "reached", "first_episode", "final_cd_1",
                                     "final_cd_2", "mean_reward_1", "mean_reward_2"), summary)
    if cfg.plots:
        from .plots import plot_selfplay

        plot_selfplay(traces, sp.threshold, out)
    return {"reached": reached, "runs": sp.runs, "threshold": sp.threshold, "window": sp.window}


# -- switching -------------------------------------------------------------------------

SWITCH_RUNS = ("adaptive", "always_c", "always_d")


def switching_cell(cfg: ExperimentConfig, period: int, run: int) -> list[dict[str, Any]]:
    """Adaptive agent and both fixed references against one switching opponent.

    All three matches share the same seed, hence the same opponent stream.
    """
    env = build_env(cfg)
    coop, defect = baselines(cfg, env)
    sw = cfg.switching
    spec = SwitchingOpponentSpec(coop[1], defect[1], period, sw.unit)
    seed = derive_seed(cfg.seed, 40, run)
    results = []
    for name in SWITCH_RUNS:
        agent = {"adaptive": lambda: adaptive_agent(cfg, env, 0),
                 "always_c": lambda: coop[0], "always_d": lambda: defect[0]}[name]()
        log = run_match(env, agent, spec, sw.episodes, seed)
        tab = log.episode_table()
        results.append({
            "period": period, "run": run, "seed": seed, "policy": name,
            "reward_1": tab["reward_1"], "reward_2": tab["reward_2"],
            "mismatch": phase_mismatch(log) if name == "adaptive" else float("nan"),
        })
    return results


def _switching_worker(config: dict, period: int, run: int):
    return switching_cell(_build(ExperimentConfig, config, ""), period, run)


def cmd_switching(cfg: ExperimentConfig, out: Outputs, single_context: bool = False) -> dict[str, Any]:
    sw = cfg.switching
    if sw.unit not in ("episodes", "steps"):
        raise ConfigError("switching.unit must be 'episodes' or 'steps'")
    cells = [(p, r) for p in sw.periods for r in range(sw.runs)]
    workers = min(len(cells), os.cpu_count() or 1)
    if single_context or workers <= 1:
        done = [switching_cell(cfg, p, r) for p, r in cells]
    else:
        with ProcessPoolExecutor(workers) as pool:
            done = list(pool.map(_switching_worker, [cfg.to_dict()] * len(cells),
                                 [c[0] for c in cells], [c[1] for c in cells]))
    rows, curves = [], []
    for cell in done:
        for res in cell:
            r1, r2 = res["reward_1"], res["reward_2"]
            rows.append((res["period"], res["run"], res["seed"], res["policy"], r1.mean(), r2.mean(),
                         (r1 + r2).mean(), res["mismatch"]))
            t1 = trailing_mean(r1, sw.trailing)
            tw = trailing_mean(r1 + r2, sw.trailing)
            for ep in range(len(r1)):
                curves.append((res["period"], res["run"], res["policy"], ep, r1[ep], r2[ep], t1[ep], tw[ep]))
    out.csv("switching_summary.csv", ("period", "run", "seed", "policy", "mean_reward_1", "mean_reward_2",
                                      "social_welfare", "phase_mismatch"), rows)
    out.csv("switching_curves.csv", ("period", "run", "policy", "episode", "reward_1", "reward_2",
                                     f"trailing{sw.trailing}_reward_1", f"trailing{sw.trailing}_welfare"),
            curves)
    agg = switching_aggregate(rows)
    out.csv("switching_compare.csv", ("period", "adaptive_reward", "always_c_reward", "always_d_reward",
                                      "adaptive_welfare", "always_c_welfare", "always_d_welfare",
                                      "adaptive_mismatch", "reward_ge_always_c", "welfare_ge_always_d"),
            [(p, *[a[k] for k in ("adaptive_reward", "always_c_reward", "always_d_reward",
                                  "adaptive_welfare", "always_c_welfare", "always_d_welfare",
                                  "adaptive_mismatch", "reward_ge_always_c", "welfare_ge_always_d")])
             for p, a in agg.items()])
    if cfg.plots:
        from .plots import plot_switching

        plot_switching(curves, sw, out)
    return {str(p): a for p, a in agg.items()}


def switching_aggregate(rows) -> dict[int, dict[str, Any]]:
    """Means over runs per period; runs are paired by seed."""
    out: dict[int, dict[str, Any]] = {}
    for period in sorted({r[0] for r in rows}):
        sel = {name: [r for r in rows if r[0] == period and r[3] == name] for name in SWITCH_RUNS}
        a = {f"{name}_reward": float(np.mean([r[4] for r in sel[name]])) for name in SWITCH_RUNS}
        a.update({f"{name}_welfare": float(np.mean([r[6] for r in sel[name]])) for name in SWITCH_RUNS})
        a["adaptive_mismatch"] = float(np.mean([r[7] for r in sel["adaptive"]]))
        a["reward_ge_always_c"] = a["adaptive_reward"] >= a["always_c_reward"]
        a["welfare_ge_always_d"] = a["adaptive_welfare"] >= a["always_d_welfare"]
        out[period] = a
    return out


# -- replay ----------------------------------------------------------------------------

def cmd_replay(cfg: ExperimentConfig, out: Outputs) -> dict[str, Any]:
    """Verify a recorded trajectory, or record fresh ones and verify those."""
    env = build_env(cfg)
    rp = cfg.replay
    if rp.input:
        ok, steps = replay_trajectory(env, rp.input)
        out.csv("replay_steps.csv", ("t", "action_1", "action_2", "reward_1", "reward_2", "match"),
                [(s["t"], s["action_1"], s["action_2"], s["reward_1"], s["reward_2"], s["match"])
                 for s in steps])
        return {"verified": ok, "steps": len(steps)}
    coop, defect = baselines(cfg, env)
    p1 = mix(coop[0], defect[0], rp.w1)
    p2 = mix(coop[1], defect[1], rp.w2)
    rows, all_ok = [], True
    for k in range(rp.episodes):
        seed = derive_seed(cfg.seed, 50, k)
        traj = rollout(env, p1, p2, seed=seed)
        name = f"trajectory_{k}.jsonl"
        write_trajectory(traj, env, out.path(name))
        out.adopt(name)
        ok, _ = replay_trajectory(env, out.path(name))
        all_ok = all_ok and ok
        ret = traj.discounted_returns(1.0)
        rows.append((k, seed, len(traj), ret[0], ret[1], ok))
    out.csv("replay.csv", ("episode", "seed", "steps", "reward_1", "reward_2", "verified"), rows)
    return {"verified": all_ok, "episodes": rp.episodes}


COMMANDS = {
    "train-baselines": cmd_train_baselines,
    "heatmap": cmd_heatmap,
    "spd-verify": cmd_spd_verify,
    "train-detector": cmd_train_detector,
    "detector-eval": cmd_detector_eval,
    "selfplay": cmd_selfplay,
    "switching": cmd_switching,
    "replay": cmd_replay,
}


def run_command(command: str, cfg: ExperimentConfig, out_dir: str | Path,
                single_context: bool = False) -> dict[str, Any]:
    """Run one command and write its manifest; returns the results summary."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {sorted(COMMANDS)}")
    out = Outputs(out_dir, command, cfg.hash(), cfg.seed)
    fn = COMMANDS[command]
    results = fn(cfg, out, single_context) if command == "switching" else fn(cfg, out)
    out.manifest(cfg.to_dict(), results)
    return results


__all__ = [
    "COMMANDS", "HeatmapResult", "run_command", "compute_heatmap", "heatmap_checks", "mixture_returns",
    "baselines", "build_env", "adaptive_agent", "estimator_for", "detection_curves", "selfplay_run",
    "switching_cell", "switching_aggregate", "degree_grid", "detector_paths",
]
