"""Compare the compiled batch kernel with its pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--episodes N] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spdlab import kernels
from spdlab.envs import make_env
from spdlab.gamecore import derive_seed, estimate_value
from spdlab.envs import scripted_policy
from spdlab.policies import mix


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    env = make_env("applepear")
    seeds = [derive_seed(0, k) for k in range(args.episodes)]
    degrees = (0.5, 0.5)
    results = {}
    for name in sorted(kernels.BACKENDS):
        results[name] = kernels.applepear_scripted_batch(env, seeds, degrees, backend=name).returns
        secs = best_time(lambda n=name: kernels.applepear_scripted_batch(env, seeds, degrees, backend=n),
                         args.repeat)
        print(f"{name:>8}: {secs:8.3f} s for {args.episodes} episodes "
              f"({1e6 * secs / args.episodes:8.1f} us/episode)")
    ref = results["python"]
    for name, ret in results.items():
        print(f"{name:>8}: bit-identical to python fallback: {np.array_equal(ret, ref)}")
    # the generic per-step rollout, on a small sample
    small = min(args.episodes, 300)
    c = [scripted_policy(env, i, "cooperate") for i in (0, 1)]
    d = [scripted_policy(env, i, "defect") for i in (0, 1)]
    pols = (mix(c[0], d[0], degrees[0]), mix(c[1], d[1], degrees[1]))
    secs = best_time(lambda: estimate_value(env, pols, episodes=small, seed=0), 1)
    print(f" rollout: {secs:8.3f} s for {small} episodes ({1e6 * secs / small:8.1f} us/episode)")
    print(f"active backend: {kernels.BACKEND}")


if __name__ == "__main__":
    main()
