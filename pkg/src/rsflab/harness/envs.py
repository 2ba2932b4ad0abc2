"""Seeded environment generators.

Every generator returns a transition tensor ``(S, A, S)``; reference
policies are drawn separately and always carry a uniform floor so that
KL penalties and Boltzmann tilts stay finite.
"""

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..mdp import (Ergodicity, Mdp, Policy, StateActionWeights, check_ergodicity,
                   policy_transition, stationary_weights)

GENERATORS = ("gridworld", "directed_cycle", "random_deterministic", "random_stochastic")
POLICY_KINDS = ("uniform", "softmax")
MAX_RESEEDS = 10

# up, right, down, left
_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


class EnvironmentGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvironmentSpec:
    """Parameters of a generated environment.

    ``num_states`` is ignored for gridworlds (``width * height`` states,
    4 actions).  ``policy`` is ``uniform`` or ``softmax`` (standard-normal
    logits mixed with ``policy_floor`` of the uniform law).
    """

    kind: str
    num_states: int = 6
    num_actions: int = 2
    width: int = 4
    height: int = 4
    slip: float = 0.0
    policy: str = "uniform"
    policy_floor: float = 1e-3
    gamma: float = 0.9
    seed: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in GENERATORS:
            raise ValueError(f"unknown generator {self.kind!r}; expected one of {GENERATORS}")
        if self.policy not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.policy!r}")
        if not 0.0 <= self.slip <= 1.0:
            raise ValueError("slip must lie in [0, 1]")
        if not 0.0 < self.policy_floor <= 1.0:
            raise ValueError("policy_floor must lie in (0, 1]")
        if self.kind == "gridworld" and (self.width < 1 or self.height < 1):
            raise ValueError("gridworld needs positive width and height")
        if self.kind != "gridworld" and (self.num_states < 1 or self.num_actions < 1):
            raise ValueError("num_states and num_actions must be positive")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "gridworld":
            base = f"gridworld{self.width}x{self.height}"
            if self.slip:
                base += f"-slip{self.slip:g}"
        else:
            base = f"{self.kind}{self.num_states}x{self.num_actions}"
        return base if self.policy == "uniform" else base + "-softmax"

    @property
    def deterministic(self) -> bool:
        return self.kind in ("directed_cycle", "random_deterministic") or (
            self.kind == "gridworld" and self.slip == 0.0)

    def to_config(self) -> dict:
        return asdict(self)

    @classmethod
    def from_config(cls, cfg: dict) -> "EnvironmentSpec":
        return cls(**cfg)

    def with_gamma(self, gamma: float) -> "EnvironmentSpec":
        return replace(self, gamma=gamma)


def gridworld(width: int, height: int, slip: float = 0.0) -> np.ndarray:
    """4-action grid; moves into walls stay put.  With probability ``slip``
    the move is replaced by one of the four drawn uniformly."""
    n = width * height
    det = np.zeros((n, 4, n))
    for s in range(n):
        row, col = divmod(s, width)
        for a, (dr, dc) in enumerate(_MOVES):
            r2, c2 = row + dr, col + dc
            t = r2 * width + c2 if 0 <= r2 < height and 0 <= c2 < width else s
            det[s, a, t] = 1.0
    if slip == 0.0:
        return det
    return (1.0 - slip) * det + slip * det.mean(axis=1, keepdims=True)


def directed_cycle(num_states: int, num_actions: int = 2) -> np.ndarray:
    """Action ``a`` moves ``s -> (s + a) mod n``: a one-way ring with a stay action."""
    p = np.zeros((num_states, num_actions, num_states))
    for s in range(num_states):
        for a in range(num_actions):
            p[s, a, (s + a) % num_states] = 1.0
    return p


def random_deterministic(num_states: int, num_actions: int, rng: np.random.Generator) -> np.ndarray:
    """Action 0 walks a Hamiltonian cycle; other actions jump to random states."""
    p = np.zeros((num_states, num_actions, num_states))
    targets = rng.integers(num_states, size=(num_states, num_actions))
    targets[:, 0] = (np.arange(num_states) + 1) % num_states
    for s in range(num_states):
        for a in range(num_actions):
            p[s, a, targets[s, a]] = 1.0
    return p


def random_stochastic(num_states: int, num_actions: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))


def reference_policy(kind: str, num_states: int, num_actions: int, floor: float,
                     rng: np.random.Generator) -> Policy:
    if kind == "uniform":
        return Policy.uniform(num_states, num_actions)
    logits = rng.standard_normal((num_states, num_actions))
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    probs = (1.0 - floor) * probs + floor / num_actions
    return Policy(probs / probs.sum(axis=1, keepdims=True))


def _build(spec: EnvironmentSpec, rng: np.random.Generator):
    if spec.kind == "gridworld":
        p = gridworld(spec.width, spec.height, spec.slip)
    elif spec.kind == "directed_cycle":
        p = directed_cycle(spec.num_states, spec.num_actions)
    elif spec.kind == "random_deterministic":
        p = random_deterministic(spec.num_states, spec.num_actions, rng)
    else:
        p = random_stochastic(spec.num_states, spec.num_actions, rng)
    mdp = Mdp.from_tensor(p, spec.gamma)
    pi0 = reference_policy(spec.policy, mdp.num_states, mdp.num_actions, spec.policy_floor, rng)
    return mdp, pi0


def generate_environment(spec: EnvironmentSpec, max_reseeds: int = MAX_RESEEDS):
    """Build ``(mdp, pi0, w)`` for ``spec``, reseeding when the chain is not ergodic.

    Attempt ``k`` draws from ``SeedSequence([seed, k])``, so results depend
    only on the spec.
    """
    verdicts = []
    for attempt in range(max_reseeds + 1):
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, attempt]))
        mdp, pi0 = _build(spec, rng)
        verdict = check_ergodicity(policy_transition(mdp, pi0))
        if verdict is Ergodicity.ERGODIC:
            return mdp, pi0, stationary_weights(mdp, pi0)
        verdicts.append(verdict.value)
    raise EnvironmentGenerationError(
        f"{spec.label} (seed {spec.seed}) is not ergodic after {max_reseeds} reseeds: {verdicts}")


def reversible_walk(num_states: int, rng: np.random.Generator, gamma: float = 0.9):
    """Random walk on a complete graph with random symmetric edge weights and
    self-loops: a single-action reversible chain, returned as ``(mdp, pi0, w)``."""
    a = rng.uniform(0.1, 1.0, size=(num_states, num_states))
    weights = a + a.T
    p = weights / weights.sum(axis=1, keepdims=True)
    mdp = Mdp(num_states, 1, p, gamma)
    pi0 = Policy.uniform(num_states, 1)
    rho = weights.sum(axis=1) / weights.sum()
    w = stationary_weights(mdp, pi0)
    if np.max(np.abs(w.rho - rho)) > 1e-10:
        raise EnvironmentGenerationError("reversible walk lost detailed balance")
    return mdp, pi0, w


def is_reversible(p_pi: np.ndarray, w: StateActionWeights, tol: float = 1e-12) -> bool:
    """Detailed balance ``rho_i P_ij == rho_j P_ji``."""
    flow = w.rho[:, None] * p_pi
    return bool(np.max(np.abs(flow - flow.T)) <= tol)


DEFAULT_ENVIRONMENTS = (
    EnvironmentSpec("gridworld", width=4, height=4, seed=0),
    EnvironmentSpec("directed_cycle", num_states=6, num_actions=2, seed=0),
    EnvironmentSpec("random_stochastic", num_states=8, num_actions=3, policy="softmax", seed=0),
)
