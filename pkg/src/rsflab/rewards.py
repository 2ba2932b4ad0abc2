"""Random downstream-task reward models and their second moments.

Three models over state-actions, all tied to the stationary law ``rho``:

* ``gaussian``: density proportional to ``exp(-||r||^2_{L2(rho)} / 2)``,
  i.e. independent coordinates with variance ``1 / rho(s, a)``;
* ``goal_reaching``: ``(s*, a*) ~ rho`` and reward ``1 / rho(s*, a*)`` there;
* ``scattered``: ``N ~ Poisson(kappa)`` Dirac rewards at ``rho``-sampled
  state-actions with i.i.d. weights of mean ``mu`` and variance ``sigma2``.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from .mdp import StateActionWeights

KINDS = ("gaussian", "goal_reaching", "scattered")
_ALIASES = {"goal": "goal_reaching", "dirac": "goal_reaching", "white_noise": "gaussian"}


def _normal_law(rng, size, mu, sigma2):
    return rng.normal(mu, np.sqrt(sigma2), size)


def _rademacher_law(rng, size, mu, sigma2):
    return mu + np.sqrt(sigma2) * rng.choice((-1.0, 1.0), size)


WEIGHT_LAWS = {"normal": _normal_law, "rademacher": _rademacher_law}

WeightLaw = Union[str, Callable]


@dataclass(frozen=True)
class RewardModel:
    kind: str
    kappa: float = 1.0
    mu: float = 0.0
    sigma2: float = 1.0
    weight_law: WeightLaw = "normal"

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown reward model {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "scattered" and not self.kappa > 0:
            raise ValueError("scattered rewards need kappa > 0")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")
        if isinstance(self.weight_law, str) and self.weight_law not in WEIGHT_LAWS:
            raise ValueError(f"unknown weight law {self.weight_law!r}")

    def draw_weights(self, rng, size):
        law = self.weight_law
        fn = WEIGHT_LAWS[law] if isinstance(law, str) else law
        return np.asarray(fn(rng, size, self.mu, self.sigma2), dtype=np.float64)

    @classmethod
    def from_config(cls, cfg: dict) -> "RewardModel":
        return cls(kind=cfg["kind"], kappa=float(cfg.get("kappa", 1.0)),
                   mu=float(cfg.get("mu", 0.0)), sigma2=float(cfg.get("sigma2", 1.0)),
                   weight_law=cfg.get("weight_law", "normal"))

    def to_config(self) -> dict:
        if not isinstance(self.weight_law, str):
            raise ValueError("custom weight laws cannot be serialized")
        kind = "goal" if self.kind == "goal_reaching" else self.kind
        return {"kind": kind, "kappa": self.kappa, "mu": self.mu,
                "sigma2": self.sigma2, "weight_law": self.weight_law}


@dataclass(frozen=True, eq=False)
class RewardSample:
    reward: np.ndarray
    kind: str
    goal: Optional[int] = None
    indices: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    @property
    def count(self) -> Optional[int]:
        return None if self.indices is None else int(self.indices.size)


@dataclass(frozen=True, eq=False)
class RewardBatch:
    rewards: np.ndarray            # (size, S*A)
    goals: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None


def sample_reward(model: RewardModel, w: StateActionWeights,
                  rng: np.random.Generator) -> RewardSample:
    rho = w.rho
    n = rho.size
    if model.kind == "gaussian":
        return RewardSample(rng.standard_normal(n) / np.sqrt(rho), model.kind)
    if model.kind == "goal_reaching":
        goal = int(rng.choice(n, p=rho))
        r = np.zeros(n)
        r[goal] = 1.0 / rho[goal]
        return RewardSample(r, model.kind, goal=goal)
    count = int(rng.poisson(model.kappa))
    idx = rng.choice(n, size=count, p=rho)
    wts = model.draw_weights(rng, count)
    r = np.zeros(n)
    # coincident indices accumulate
    np.add.at(r, idx, wts / rho[idx])
    return RewardSample(r, model.kind, indices=idx, weights=wts)


def sample_rewards(model: RewardModel, w: StateActionWeights,
                   rng: np.random.Generator, size: int) -> RewardBatch:
    """Draw ``size`` independent rewards as the rows of a matrix."""
    rho = w.rho
    n = rho.size
    if model.kind == "gaussian":
        return RewardBatch(rng.standard_normal((size, n)) / np.sqrt(rho))
    if model.kind == "goal_reaching":
        goals = rng.choice(n, size=size, p=rho)
        out = np.zeros((size, n))
        out[np.arange(size), goals] = 1.0 / rho[goals]
        return RewardBatch(out, goals=goals)
    counts = rng.poisson(model.kappa, size)
    total = int(counts.sum())
    idx = rng.choice(n, size=total, p=rho)
    vals = model.draw_weights(rng, total) / rho[idx]
    return RewardBatch(_kernels.scatter_rows(size, n, counts, idx, vals), counts=counts)


def rho_integral(sample: RewardSample, w: StateActionWeights) -> float:
    """``sum rho r``; a goal sample integrates to exactly 1 by construction."""
    if sample.kind == "goal_reaching":
        return 1.0
    return float(w.rho @ sample.reward)


def second_moment(model: RewardModel, w: StateActionWeights) -> np.ndarray:
    """Closed-form ``E[r r^T]``."""
    inv = np.diag(1.0 / w.rho)
    if model.kind in ("gaussian", "goal_reaching"):
        return inv
    n = w.num_sa
    scale = model.kappa * (model.mu**2 + model.sigma2)
    return scale * inv + (model.kappa * model.mu) ** 2 * np.ones((n, n))


def expected_quadratic(m, model: RewardModel, w: StateActionWeights) -> float:
    """``E_r[r^T M r] = Tr(M E[r r^T])`` for symmetric ``M``."""
    m = np.asarray(m, dtype=np.float64)
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(m), initial=0.0)):
        raise ValueError("expected_quadratic needs a symmetric matrix")
    return float(np.sum(m * second_moment(model, w)))
