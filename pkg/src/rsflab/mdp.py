"""Finite reward-free MDPs, policies and exact policy evaluation.

State-action functions are flat vectors with index ``s * num_actions + a``.
The transition kernel is stored as a ``(num_states * num_actions, num_states)``
matrix ``P[(s, a), s'] = P(s' | s, a)`` and a policy as a
``(num_states, num_actions)`` matrix of probabilities.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from math import gcd

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from . import _kernels

ROW_SUM_TOL = 1e-12


class SingularSystemError(ValueError):
    """Raised when a Bellman system has no unique solution."""


class StationaryDistributionError(RuntimeError):
    """Raised when no strictly positive stationary distribution is found."""


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    num_states: int
    num_actions: int
    transition: np.ndarray
    gamma: float

    def __post_init__(self):
        n, m = int(self.num_states), int(self.num_actions)
        if n < 1 or m < 1:
            raise ValueError("num_states and num_actions must be positive")
        p = _frozen(self.transition)
        if p.shape != (n * m, n):
            raise ValueError(f"transition must have shape {(n * m, n)}, got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("transition probabilities must be finite and non-negative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("transition rows must sum to 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        object.__setattr__(self, "num_states", n)
        object.__setattr__(self, "num_actions", m)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def num_sa(self) -> int:
        return self.num_states * self.num_actions

    def index(self, s: int, a: int) -> int:
        return s * self.num_actions + a

    def with_gamma(self, gamma: float) -> "Mdp":
        return replace(self, gamma=gamma)

    @classmethod
    def from_tensor(cls, p, gamma: float) -> "Mdp":
        """Build from a ``(num_states, num_actions, num_states)`` array."""
        p = np.asarray(p, dtype=np.float64)
        n, m, n2 = p.shape
        if n != n2:
            raise ValueError("tensor must have shape (S, A, S)")
        return cls(n, m, p.reshape(n * m, n), gamma)


@dataclass(frozen=True, eq=False)
class Policy:
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2:
            raise ValueError("policy probs must be a (num_states, num_actions) matrix")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValueError("policy probabilities must be finite and non-negative")
        if np.max(np.abs(probs.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("policy rows must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """The ``S x (S*A)`` matrix with entries ``pi(a|s) [s == s']``."""
        n, m = self.probs.shape
        out = np.zeros((n, n * m))
        for s in range(n):
            out[s, s * m:(s + 1) * m] = self.probs[s]
        return out

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "Policy":
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))


@dataclass(frozen=True, eq=False)
class StateActionWeights:
    """Stationary state-action law ``rho`` and its state marginal ``rho_s``."""

    rho: np.ndarray
    num_actions: int
    residual: float = field(default=0.0)

    def __post_init__(self):
        rho = _frozen(self.rho)
        m = int(self.num_actions)
        if rho.ndim != 1 or rho.size % m:
            raise ValueError("rho length must be a multiple of num_actions")
        if abs(rho.sum() - 1.0) > 1e-10:
            raise ValueError("rho must sum to 1")
        if not np.all(rho > 0):
            raise ValueError("rho must be strictly positive (ergodic reference policy)")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "num_actions", m)
        object.__setattr__(self, "rho_s", _frozen(rho.reshape(-1, m).sum(axis=1)))

    @property
    def num_states(self) -> int:
        return self.rho.size // self.num_actions

    @property
    def num_sa(self) -> int:
        return self.rho.size

    @property
    def rho_hat(self) -> np.ndarray:
        return np.diag(self.rho)

    @property
    def rho_s_hat(self) -> np.ndarray:
        return np.diag(self.rho_s)


class Ergodicity(str, Enum):
    ERGODIC = "ergodic"
    REDUCIBLE = "reducible"
    PERIODIC = "periodic"


def policy_transition(mdp: Mdp, policy: Policy) -> np.ndarray:
    """State-action transition matrix ``P_pi = P pi``."""
    if policy.probs.shape != (mdp.num_states, mdp.num_actions):
        raise ValueError(
            f"policy shape {policy.probs.shape} does not match "
            f"MDP ({mdp.num_states}, {mdp.num_actions})")
    p = mdp.transition[:, :, None] * policy.probs[None, :, :]
    return p.reshape(mdp.num_sa, mdp.num_sa)


def check_ergodicity(p_pi: np.ndarray) -> Ergodicity:
    """Classify the support graph of a stochastic matrix.

    Ergodic means strongly connected and aperiodic.  The period is the gcd of
    ``level[u] + 1 - level[v]`` over all edges, with BFS levels from node 0.
    """
    adj = np.asarray(p_pi) > 0
    n = adj.shape[0]
    n_comp, _ = connected_components(adj, directed=True, connection="strong")
    if n_comp != 1:
        return Ergodicity.REDUCIBLE
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    period = 0
    for u, v in zip(*np.nonzero(adj)):
        period = gcd(period, int(abs(level[u] + 1 - level[v])))
        if period == 1:
            return Ergodicity.ERGODIC
    return Ergodicity.PERIODIC


def _dense_left_eigenvector(p_pi):
    vals, vecs = scipy.linalg.eig(p_pi.T)
    near_one = np.abs(vals - 1.0) < 1e-8
    if near_one.sum() != 1:
        raise StationaryDistributionError(
            f"eigenvalue 1 has multiplicity {int(near_one.sum())}; chain is not irreducible")
    v = np.real(vecs[:, np.argmax(near_one)])
    return v / v.sum()


def stationary_distribution(p_pi: np.ndarray, tol: float = 1e-12,
                            max_iters: int = 1_000_000, *, num_actions: int = 1,
                            floor: float = 1e-14) -> StateActionWeights:
    """Stationary law of ``p_pi`` by power iteration from the uniform vector.

    Falls back to a dense left eigenvector when the iteration stalls (periodic
    or very slowly mixing chains).  The result always receives one final
    ``rho <- rho P`` step, so for a state-action chain it factors exactly as
    ``rho(s, a) = rho_S(s) pi(a|s)`` up to rounding.
    """
    p_pi = np.asarray(p_pi, dtype=np.float64)
    n = p_pi.shape[0]
    if p_pi.shape != (n, n):
        raise ValueError("transition matrix must be square")
    if np.max(np.abs(p_pi.sum(axis=1) - 1.0)) > ROW_SUM_TOL * max(1, n):
        raise ValueError("transition matrix must be row-stochastic")
    n_comp, _ = connected_components(p_pi > 0, directed=True, connection="strong")
    if n_comp != 1:
        # transient states would otherwise decay to ~tol and pass the floor
        raise StationaryDistributionError("chain is reducible: no strictly positive stationary law")
    rho, _, _, status = _kernels.power_iteration(p_pi, np.full(n, 1.0 / n), tol, max_iters)
    if status != _kernels.CONVERGED:
        rho = _dense_left_eigenvector(p_pi)
    rho = rho @ p_pi
    rho /= rho.sum()
    residual = float(np.max(np.abs(rho @ p_pi - rho)))
    if residual > tol:
        raise StationaryDistributionError(
            f"no convergence: stationarity residual {residual:.3e} > tol {tol:.1e}")
    if np.min(rho) < floor:
        raise StationaryDistributionError(
            f"stationary distribution has entry {np.min(rho):.3e} below floor {floor:.1e}")
    return StateActionWeights(rho, num_actions, residual)


def stationary_weights(mdp: Mdp, policy: Policy, **kwargs) -> StateActionWeights:
    return stationary_distribution(policy_transition(mdp, policy),
                                   num_actions=mdp.num_actions, **kwargs)


def is_deterministic(mdp: Mdp) -> bool:
    p = mdp.transition
    one_nonzero = np.count_nonzero(p, axis=1) == 1
    return bool(np.all(one_nonzero) and np.all(np.abs(p.max(axis=1) - 1.0) <= ROW_SUM_TOL))


def solve_centered(delta: np.ndarray, r: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Solve ``delta q = r`` with ``rho^T q = 0`` when ``delta`` has kernel ``span(1)``.

    Bordered system ``[[delta, 1], [rho^T, 0]] [q; c] = [r; 0]``; the border
    is nonsingular because ``rho^T 1 = 1``.
    """
    n = delta.shape[0]
    big = np.zeros((n + 1, n + 1))
    big[:n, :n] = delta
    big[:n, n] = 1.0
    big[n, :n] = rho
    r = np.asarray(r, dtype=np.float64)
    rhs = np.zeros((n + 1,) + r.shape[1:])
    rhs[:n] = r
    return np.linalg.solve(big, rhs)[:n]


def q_function(mdp: Mdp, policy: Policy, reward: np.ndarray) -> np.ndarray:
    """Exact ``Q`` with ``(Id - gamma P_pi) Q = r``.

    For ``gamma == 1`` the reward must be centered under the policy's
    stationary law, and the centered solution is returned.
    """
    reward = np.asarray(reward, dtype=np.float64)
    p_pi = policy_transition(mdp, policy)
    delta = np.eye(mdp.num_sa) - mdp.gamma * p_pi
    if mdp.gamma < 1.0:
        return np.linalg.solve(delta, reward)
    w = stationary_distribution(p_pi, num_actions=mdp.num_actions)
    mean = w.rho @ reward
    if np.max(np.abs(mean)) > 1e-10:
        raise SingularSystemError(
            "gamma = 1 requires a reward with zero mean under rho; center the reward first")
    return solve_centered(delta, reward, w.rho)


def value_and_advantage(policy: Policy, q: np.ndarray):
    """Return ``(V, A)`` with ``V(s) = sum_a pi(a|s) Q(s,a)`` and ``A = Q - V``."""
    n, m = policy.probs.shape
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (n * m,):
        raise ValueError(f"q must have length {n * m}")
    qm = q.reshape(n, m)
    v = np.einsum("sa,sa->s", policy.probs, qm)
    return v, (qm - v[:, None]).ravel()
