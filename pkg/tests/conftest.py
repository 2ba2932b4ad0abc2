import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_policy_probs, random_tensor  # noqa: E402

from rsflab.mdp import Mdp, Policy, stationary_weights  # noqa: E402


def make_env(seed, n=4, m=2, gamma=0.9, deterministic=False, uniform=False):
    """Random ergodic ``(mdp, pi0, w)``; resamples until the chain is ergodic."""
    from rsflab.mdp import Ergodicity, check_ergodicity, policy_transition
    rng = np.random.default_rng(seed)
    for _ in range(50):
        mdp = Mdp.from_tensor(random_tensor(rng, n, m, deterministic), gamma)
        probs = np.full((n, m), 1.0 / m) if uniform else random_policy_probs(rng, n, m)
        pi0 = Policy(probs)
        if check_ergodicity(policy_transition(mdp, pi0)) is Ergodicity.ERGODIC:
            return mdp, pi0, stationary_weights(mdp, pi0)
    raise RuntimeError("could not draw an ergodic environment")


@pytest.fixture
def env_factory():
    return make_env


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
