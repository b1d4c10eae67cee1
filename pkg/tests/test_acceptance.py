"""The ten acceptance criteria, each at its stated tolerance and runtime bound."""

import dataclasses
import math
import time
from itertools import product

import numpy as np
import pytest

from conftest import CRITERIA
from oracles import geometric_value
from spdlab.detector import DetectorConfig, DetectorModel
from spdlab.envs import MatrixGameEnv, make_env, scripted_policy
from spdlab.gamecore import EmpiricalPayoffMatrix, check_spd, estimate_value
from spdlab.harness.config import load_config, packaged_config
from spdlab.harness.experiments import run_command
from spdlab.numerics import (
    GRU,
    Network,
    NetworkSpec,
    ParameterSet,
    gradient_check,
    mlp_spec,
    network_gradient_check,
    soft_update,
    weighted_binary_cross_entropy,
)
from spdlab.online_agent import AdaptiveAgent, AgentConfig, OracleDetector, run_match
from spdlab.policies import FixedPolicy, marginalize, mix
from spdlab.training import ActorCriticLearner, Batch, TrainingSchedule, weighted_reward_iac, weighted_reward_jac


def report(k: int, ok: bool, detail: str, seconds: float) -> None:
    CRITERIA[k] = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.1f}s)"
    print(CRITERIA[k])


def applepear_cfg(**sections):
    cfg = load_config(packaged_config("applepear"))
    for name, changes in sections.items():
        setattr(cfg, name, dataclasses.replace(getattr(cfg, name), **changes))
    return cfg


def read_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.suffix == ".csv"}


# -- shared artifacts ---------------------------------------------------------------

@pytest.fixture(scope="session")
def detector_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("train-detector")
    start = time.perf_counter()
    trained = run_command("train-detector", applepear_cfg(), out, single_context=True)
    cfg = applepear_cfg(agent={"detector_dir": str(out)})
    evaluated = run_command("detector-eval", cfg, tmp_path_factory.mktemp("detector-eval"), True)
    return out, trained, evaluated, time.perf_counter() - start


@pytest.fixture(scope="session")
def heatmap_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("heatmap")
    start = time.perf_counter()
    checks = run_command("heatmap", applepear_cfg(), out, single_context=True)
    return out, checks, time.perf_counter() - start


# -- 1 -------------------------------------------------------------------------------

def test_criterion_1_equation_oracles(rng):
    start = time.perf_counter()
    errs = []
    for _ in range(50):
        r, a = rng.normal(size=2), rng.random(2)
        errs.append(abs(weighted_reward_iac(r[0], r[1], a[0]) - (r[0] + a[0] * r[1])))
        errs.append(abs(weighted_reward_jac(r, a) - (a[0] * r[0] + a[1] * r[1])))
    pc, pd = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    c, d = FixedPolicy(pc), FixedPolicy(pd)
    errs.append(np.max(np.abs(mix(c, d, 1.0).action_distribution(None) - pc)))
    errs.append(np.max(np.abs(mix(c, d, 0.0).action_distribution(None) - pd)))
    for w in np.linspace(0, 1, 11):
        errs.append(np.max(np.abs(mix(c, d, w).action_distribution(None) - (w * pc + (1 - w) * pd))))
    table = rng.dirichlet(np.ones(16)).reshape(4, 4)
    for axis in (0, 1):
        brute = [sum(table[i, j] if axis == 0 else table[j, i] for j in range(4)) for i in range(4)]
        errs.append(np.max(np.abs(marginalize(table, axis) - brute)))
    errs.append(abs(weighted_binary_cross_entropy(0.5, 1, 1, 2) - (-math.log(0.5))))
    errs.append(abs(weighted_binary_cross_entropy(0.5, 0, 1, 2) - (-2 * math.log(0.5))))
    for prev, det, alpha in product((0.0, 0.3, 1.0), (0.0, 0.45, 1.0), (0.02, 0.5, 1.0)):
        agent = AdaptiveAgent(c, d, OracleDetector(), AgentConfig(alpha=alpha, delta=0.0, initial_degree=prev,
                                                                   literal_update=True))
        errs.append(abs(agent.apply(det) - ((1 - alpha) * prev + alpha * det)))
    for tau in (0.05, 0.001, 1.0):
        t0, o = rng.normal(size=5), rng.normal(size=5)
        target = ParameterSet({"w": t0.copy()})
        soft_update(target, ParameterSet({"w": o}), tau)
        errs.append(np.max(np.abs(target["w"] - (tau * o + (1 - tau) * t0))))
    secs = time.perf_counter() - start
    worst = float(max(errs))
    ok = worst <= 1e-12 and secs < 1.0
    report(1, ok, f"max abs error {worst:.2e}", secs)
    assert ok


# -- 2 -------------------------------------------------------------------------------

def _sum_sq(out):
    return float(np.sum(out**2)), 2 * out


def _gradchecks(seed):
    rng = np.random.default_rng(seed)
    reports = []
    for act in ("linear", "relu", "tanh", "sigmoid"):
        net = Network(mlp_spec("m", 3, (4,), 2, seed=seed, hidden_activation=act))
        reports.append(network_gradient_check(net, net.init_params(), rng.normal(size=(3, 3)), _sum_sq))
    net = Network(mlp_spec("s", 3, (4,), 3, softmax_head=True, seed=seed, hidden_activation="tanh"))
    w = rng.normal(size=(2, 3))
    reports.append(network_gradient_check(net, net.init_params(), rng.normal(size=(2, 3)),
                                          lambda o: (float(np.sum(w * o)), w)))
    gru = Network(NetworkSpec([{"kind": "gru", "name": "g", "n_in": 3, "hidden": 4},
                               {"kind": "dense", "name": "o", "n_in": 4, "n_out": 1}], seed))
    reports.append(network_gradient_check(gru, gru.init_params(), rng.normal(size=(2, 4, 3)), _sum_sq))
    lrn = ActorCriticLearner(5, 3, TrainingSchedule(hidden=(6,)), seed=seed)
    b = Batch(rng.normal(size=(6, 5)), rng.integers(3, size=6), rng.normal(size=6), rng.normal(size=(6, 5)),
              (rng.random(6) < 0.3).astype(float), np.full(6, 1e-6))
    y, adv = lrn.td_targets(b), rng.normal(size=6)
    reports.append(gradient_check(lrn.critic_params, lambda p: lrn.critic_loss_and_grad(p, b, y)[0],
                                  lambda p: lrn.critic_loss_and_grad(p, b, y)[1]))
    reports.append(gradient_check(lrn.actor_params, lambda p: lrn.actor_loss_and_grad(p, b, adv)[0],
                                  lambda p: lrn.actor_loss_and_grad(p, b, adv)[1]))
    det = DetectorModel(6, DetectorConfig(n=3, encoder=(5,), recurrent=4), seed)
    x, lab = rng.normal(size=(4, 3, 6)), np.array([1, 0, 1, 0])
    reports.append(gradient_check(det.params, lambda p: det.loss(x, lab, p),
                                  lambda p: det.loss_and_grad(x, lab, p)[1]))
    return reports


def test_criterion_2_gradient_verification():
    start = time.perf_counter()
    worst, failures = 0.0, []
    for seed in range(100):
        for k, rep in enumerate(_gradchecks(seed)):
            worst = max(worst, rep.max_rel_err)
            if not rep.passed:
                failures.append((seed, k, rep.max_rel_err))
    secs = time.perf_counter() - start
    ok = not failures and secs < 60
    report(2, ok, f"9 checks x 100 seeds, max relative error {worst:.2e}", secs)
    assert ok, failures[:5]


# -- 3 -------------------------------------------------------------------------------

def test_criterion_3_spd_verifier():
    start = time.perf_counter()
    classic = check_spd(EmpiricalPayoffMatrix(R=3, P=1, S=0, T=5))
    counters = [(dict(R=3, P=1, S=0, T=2.5), "T>R"), (dict(R=3, P=1, S=1.5, T=4), "P>S"),
                (dict(R=3, P=1, S=0, T=7), "2R>S+T")]
    exact = [[k for k, v in check_spd(EmpiricalPayoffMatrix(**f)).holds.items() if not v] == [broken]
             for f, broken in counters]
    secs = time.perf_counter() - start
    ok = classic.overall and len(classic.holds) == 5 and all(exact) and secs < 1.0
    report(3, ok, f"classic PD holds all 5; counter-fixtures exact: {exact}", secs)
    assert ok


# -- 4 -------------------------------------------------------------------------------

def test_criterion_4_closed_form_value():
    start = time.perf_counter()
    env = MatrixGameEnv(3, 0, 5, 1, horizon=50)
    payoff = {(0, 0): (3, 3), (0, 1): (0, 5), (1, 0): (5, 0), (1, 1): (1, 1)}
    gaps = []
    for (a1, a2), pay in payoff.items():
        est = estimate_value(env, (FixedPolicy(np.eye(2)[a1]), FixedPolicy(np.eye(2)[a2])), 0.9, 2000, seed=4)
        for i in (0, 1):
            closed = geometric_value(pay[i], 0.9, 50)
            # pure pairs have zero variance; allow float rounding of the sum
            gaps.append(abs(est.mean[i] - closed) <= max(3 * est.stderr[i], 1e-9))
    secs = time.perf_counter() - start
    ok = all(gaps) and secs < 10
    report(4, ok, f"{sum(gaps)}/8 values within 3 stderr of the geometric sum", secs)
    assert ok


# -- 5 -------------------------------------------------------------------------------

def test_criterion_5_oracle_dynamics():
    start = time.perf_counter()
    env = make_env("applepear")
    c = [scripted_policy(env, i, "cooperate") for i in (0, 1)]
    d = [scripted_policy(env, i, "defect") for i in (0, 1)]
    delta = 0.1

    def adaptive(role, alpha, initial):
        return AdaptiveAgent(c[role], d[role], OracleDetector(), AgentConfig(alpha=alpha, delta=delta,
                                                                             initial_degree=initial))

    a = adaptive(0, 0.5, 0.9)
    run_match(env, a, d[1], episodes=10, seed=1)
    ok_a = abs(a.own_degree - delta) <= 1e-9
    b = adaptive(0, 0.5, 0.0)
    run_match(env, b, c[1], episodes=10, seed=2)
    ok_b = b.own_degree == 1.0
    p, q = adaptive(0, 1.0, 0.0), adaptive(1, 1.0, 0.0)
    log = run_match(env, p, q, episodes=5, seed=3)
    ok_c = all(abs(r[2] - min(1.0, delta * (k + 1))) <= 1e-9 and r[2] == r[3] for k, r in enumerate(log.degrees))
    ok_c = ok_c and log.degrees[-1][2] == 1.0
    secs = time.perf_counter() - start
    ok = ok_a and ok_b and ok_c and secs < 1.0
    report(5, ok, f"vs D -> {a.own_degree:.12g}, vs C -> {b.own_degree:g}, DD climb exact: {ok_c}", secs)
    assert ok


# -- 6 -------------------------------------------------------------------------------

def test_criterion_6_heatmap(heatmap_run):
    _, checks, secs = heatmap_run
    ok = checks["corner_exceeds_2se"] and checks["agent2_slope_negative_p05"] and secs < 300
    report(6, ok, f"corner diff {checks['corner_total_diff']:.4f} (2se {2 * checks['corner_total_diff_stderr']:.4f}), "
                  f"agent-2 slope {checks['agent2_slope_at_w1_1']:.4f} p={checks['agent2_slope_pvalue']:.2g}", secs)
    assert ok


# -- 7 -------------------------------------------------------------------------------

def test_criterion_7_detector(detector_run):
    _, trained, evaluated, secs = detector_run
    acc = trained["target1"]["heldout_accuracy"]
    rho = evaluated["min_spearman_raw"]
    ok = acc >= 0.9 and rho >= 0.9 and secs < 900
    report(7, ok, f"held-out accuracy {acc:.4f} (agent 2 detected by agent 1; "
                  f"agent 1 detected by agent 2: {trained['target0']['heldout_accuracy']:.4f}), "
                  f"min Spearman {rho:.3f}", secs)
    assert ok


# -- 8 -------------------------------------------------------------------------------

def test_criterion_8_selfplay(detector_run, tmp_path):
    out_dir = detector_run[0]
    cfg = applepear_cfg(agent={"detector_dir": str(out_dir)}, selfplay={"cases": ["DD"]})
    start = time.perf_counter()
    res = run_command("selfplay", cfg, tmp_path, single_context=True)
    secs = time.perf_counter() - start
    hits = res["reached"]["DD"]
    ok = hits >= 4 and secs < 1200
    report(8, ok, f"DD reached mutual degree >= 0.8 on {hits}/5 seeds within 200 episodes", secs)
    assert ok


# -- 9 -------------------------------------------------------------------------------

def test_criterion_9_switching(detector_run, tmp_path):
    cfg = applepear_cfg(agent={"detector_dir": str(detector_run[0])},
                        switching={"periods": [110], "episodes": 440, "runs": 5})
    start = time.perf_counter()
    res = run_command("switching", cfg, tmp_path, single_context=True)
    secs = time.perf_counter() - start
    r = res["110"]
    ok = r["reward_ge_always_c"] and r["welfare_ge_always_d"] and secs < 1200
    report(9, ok, f"reward {r['adaptive_reward']:.4f} vs always-C {r['always_c_reward']:.4f}; "
                  f"welfare {r['adaptive_welfare']:.4f} vs always-D {r['always_d_welfare']:.4f}", secs)
    assert ok


# -- 10 ------------------------------------------------------------------------------

def test_criterion_10_determinism(heatmap_run, tmp_path):
    start = time.perf_counter()
    matrix = load_config(packaged_config("matrix"))
    same = {}
    for command in ("spd-verify", "selfplay", "replay"):
        a = read_bytes(_run(matrix, command, tmp_path / "a"))
        b = read_bytes(_run(matrix, command, tmp_path / "b"))
        same[command] = bool(a) and a == b
    spd = applepear_cfg(spd={"episodes": 200})
    same["spd-verify (applepear)"] = (read_bytes(_run(spd, "spd-verify", tmp_path / "c"))
                                      == read_bytes(_run(spd, "spd-verify", tmp_path / "d")))
    first, _, _ = heatmap_run
    same["heatmap"] = read_bytes(first) == read_bytes(_run(applepear_cfg(), "heatmap", tmp_path / "e"))
    secs = time.perf_counter() - start
    ok = all(same.values())
    report(10, ok, "byte-identical CSVs on re-run: " + ", ".join(f"{k}={v}" for k, v in same.items()), secs)
    assert ok


def _run(cfg, command, root):
    out = root / command
    run_command(command, cfg, out, single_context=True)
    return out
