"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 16] [--rewards 10000]

The first numba call compiles (or loads the on-disk cache); a warm-up run
keeps that out of the timings.
"""

import argparse
import os
import timeit

import numpy as np

from rsflab import _accel, _kernels
from rsflab.harness.envs import EnvironmentSpec, generate_environment
from rsflab.mdp import policy_transition


def _cases(size, n_rewards, rng):
    mdp, pi0, _ = generate_environment(
        EnvironmentSpec("random_stochastic", num_states=size, num_actions=4, seed=0))
    p = policy_transition(mdp, pi0)
    rho0 = np.full(p.shape[0], 1.0 / p.shape[0])
    n_sa = p.shape[0]
    counts = rng.poisson(3.0, size=n_rewards)
    idx = rng.integers(n_sa, size=counts.sum())
    vals = rng.standard_normal(counts.sum())
    samples = rng.standard_normal((10 * n_rewards, n_sa))
    return {
        "power_iteration": lambda: _kernels.power_iteration(p, rho0, 1e-12, 1_000_000),
        "scatter_rows": lambda: _kernels.scatter_rows(counts.size, n_sa, counts, idx, vals),
        "outer_moments": lambda: _kernels.outer_moments(samples),
    }


def _time(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=16, help="number of states (4 actions each)")
    ap.add_argument("--rewards", type=int, default=10_000, help="rewards per batch")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    cases = _cases(args.size, args.rewards, np.random.default_rng(0))
    saved = os.environ.pop(_accel.ENV_FLAG, None)
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    try:
        for name, fn in cases.items():
            os.environ.pop(_accel.ENV_FLAG, None)
            fast = _time(fn, args.repeat)
            os.environ[_accel.ENV_FLAG] = "1"
            slow = _time(fn, args.repeat)
            print(f"{name:<18}{1e3 * fast:>12.2f}{1e3 * slow:>12.2f}{slow / fast:>9.1f}x")
    finally:
        os.environ.pop(_accel.ENV_FLAG, None)
        if saved is not None:
            os.environ[_accel.ENV_FLAG] = saved


if __name__ == "__main__":
    main()
