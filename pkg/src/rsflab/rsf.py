"""Regularized successor features and KL-regularized returns.

Pipeline: features ``phi`` -> successor features ``psi = Delta^-1 phi`` under
``pi0`` -> task vector ``z`` -> ``Q_hat = psi z`` -> Boltzmann tilt of ``pi0``.
Returns are evaluated exactly by linear solves, never by rollouts.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import FeatureSet, advantage_norm_sq
from .mdp import Mdp, Policy, StateActionWeights, policy_transition
from .rewards import RewardSample

MIN_TEMPERATURE = 1e-6


@dataclass(frozen=True, eq=False)
class SuccessorFeatures:
    psi: np.ndarray          # (S*A, d)
    covariance: np.ndarray   # (d, d)
    features: FeatureSet


@dataclass(frozen=True)
class RegularizedReturn:
    value: float
    unpenalized: float
    penalty: float
    temperature: float


def _check_temperature(temperature):
    if not temperature >= MIN_TEMPERATURE:
        raise ValueError(f"temperature must be >= {MIN_TEMPERATURE}")


def successor_feature_map(features: FeatureSet, mdp: Mdp, pi0: Policy) -> SuccessorFeatures:
    """Solve ``(Id - gamma P_pi0) psi = phi`` column by column."""
    if mdp.gamma >= 1.0:
        raise ValueError("successor features need gamma < 1")
    phi = features.columns
    delta = np.eye(mdp.num_sa) - mdp.gamma * policy_transition(mdp, pi0)
    psi = np.linalg.solve(delta, phi) if phi.shape[1] else np.zeros_like(phi)
    cov = phi.T @ (features.weights.rho[:, None] * phi)
    return SuccessorFeatures(psi, cov, features)


def task_vector(features: FeatureSet, reward, w: StateActionWeights) -> np.ndarray:
    """Coefficients of the rho-projection of ``reward`` on orthonormal features.

    Goal samples use ``z = phi(s*, a*)`` and scattered samples
    ``z = sum_i w_i phi(s_i, a_i)``, which equal the generic
    ``phi^T diag(rho) r`` but avoid the ``rho * (1/rho)`` round trip.
    """
    phi = features.columns
    if isinstance(reward, RewardSample):
        if reward.goal is not None:
            return phi[reward.goal].copy()
        if reward.indices is not None:
            return reward.weights @ phi[reward.indices] if reward.count else np.zeros(phi.shape[1])
        reward = reward.reward
    return phi.T @ (w.rho * np.asarray(reward, dtype=np.float64))


def q_estimate(sf: SuccessorFeatures, z) -> np.ndarray:
    return sf.psi @ np.asarray(z, dtype=np.float64)


def _log_ratio(p0, g):
    """``h = log(pi / pi0)`` for the tilt ``pi ~ pi0 exp(g)`` along the last axis.

    Near-zero tilts go through ``log1p``/``expm1`` so that ``h`` keeps full
    relative precision when ``|g|`` is tiny (large temperatures).
    """
    g = g - np.sum(p0 * g, axis=-1, keepdims=True)
    top = g.max(axis=-1, keepdims=True)
    small = np.max(np.abs(g), axis=-1, keepdims=True) < 0.5
    with np.errstate(over="ignore"):
        log_small = np.log1p(np.sum(p0 * np.expm1(np.where(small, g, 0.0)), axis=-1, keepdims=True))
    log_big = top + np.log(np.sum(p0 * np.exp(g - top), axis=-1, keepdims=True))
    return g - np.where(small, log_small, log_big)


def _relative_entropy_terms(h):
    """``h e^h - expm1(h)``, i.e. the summand of ``KL = sum pi0 (...)``, without cancellation."""
    h = np.asarray(h, dtype=np.float64)
    small = np.abs(h) < 0.1
    hs = np.where(small, h, 0.0)
    # sum_{k>=2} (k - 1) h^k / k!
    series = np.zeros_like(h)
    term = hs * hs / 2.0
    for k in range(2, 14):
        series += (k - 1) * term
        term = term * hs / (k + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = h * np.exp(h) - np.expm1(h)
    return np.where(small, series, direct)


def _tilt(p0, f, temperature):
    """Tilted probabilities, their log-ratio to ``p0`` and the per-state KL."""
    g = f / temperature
    flat = np.all(g == g[..., :1], axis=-1, keepdims=True)
    h = np.where(flat, 0.0, _log_ratio(p0, g))
    probs = p0 * np.exp(h)
    probs = np.where(flat, p0, probs / probs.sum(axis=-1, keepdims=True))
    kl = np.maximum(np.sum(p0 * _relative_entropy_terms(h), axis=-1), 0.0)
    return probs, h, kl


def boltzmann_policy(pi0: Policy, f, temperature: float) -> Policy:
    """Per-state exponential tilt ``pi0(a|s) exp(f(s,a)/T)``, normalized.

    States where the tilt is constant over actions return ``pi0`` unchanged.
    """
    _check_temperature(temperature)
    n, m = pi0.probs.shape
    f = np.asarray(f, dtype=np.float64).reshape(n, m)
    return Policy(_tilt(pi0.probs, f, temperature)[0])


def _kl_rows(p, p0):
    if np.any((p > 0) & (p0 == 0)):
        raise ValueError("policy puts mass where pi0 has none: infinite KL penalty")
    pos = p > 0
    ratio = np.where(pos, p, 1.0) / np.where(pos, p0, 1.0)
    return np.maximum(np.sum(np.where(pos, p * np.log(ratio), 0.0), axis=-1), 0.0)


def kl_penalty(pi: Policy, pi0: Policy, temperature: float) -> np.ndarray:
    """Per-state ``T * KL(pi(s) || pi0(s))``."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    return temperature * _kl_rows(pi.probs, pi0.probs)


def regularized_return(mdp: Mdp, pi0: Policy, pi: Policy, reward, temperature: float,
                       w: StateActionWeights) -> RegularizedReturn:
    """Exact ``G = E_{s0 ~ rho_S, a0 ~ pi}[sum_t gamma^t (r - T KL(pi(s_t)||pi0(s_t)))]``."""
    if mdp.gamma >= 1.0:
        raise ValueError("regularized return needs gamma < 1")
    m = mdp.num_actions
    penalty = np.repeat(kl_penalty(pi, pi0, temperature), m)
    delta = np.eye(mdp.num_sa) - mdp.gamma * policy_transition(mdp, pi)
    q = np.linalg.solve(delta, np.column_stack([np.asarray(reward, dtype=np.float64), penalty]))
    start = (w.rho_s[:, None] * pi.probs).ravel()
    unpen, pen = start @ q
    return RegularizedReturn(float(unpen - pen), float(unpen), float(pen), float(temperature))


def first_order_return(q_true, q_hat, g_pi0: float, temperature: float, gamma: float,
                       w: StateActionWeights, pi0: Policy) -> float:
    """First-order return of ``Bolt_pi0(q_hat)``:
    ``G0 + (||Q||_A^2 - ||Q_hat - Q||_A^2) / (2 T (1 - gamma))``."""
    _check_temperature(temperature)
    q_true = np.asarray(q_true, dtype=np.float64)
    q_hat = np.asarray(q_hat, dtype=np.float64)
    gain = advantage_norm_sq(q_true, w, pi0) - advantage_norm_sq(q_hat - q_true, w, pi0)
    return g_pi0 + gain / (2.0 * temperature * (1.0 - gamma))


def tilt_gain(mdp: Mdp, pi0: Policy, reward, f, temperature: float,
              w: StateActionWeights) -> float:
    """``G(Bolt_pi0(f)) - G(pi0)`` for ``reward``, by performance difference.

    With ``A0`` the advantage of ``pi0``, the value gap solves
    ``(Id - gamma P^pi_S) dV = sum_a (pi - pi0) A0 - T KL(pi || pi0)`` on states.
    Everything on the right is formed from the exact log-ratio of the tilt, so
    the gain keeps its relative precision even when it is many orders of
    magnitude below the returns themselves.
    """
    gains = _tilt_gains(mdp, pi0, w, np.atleast_2d(reward), np.atleast_2d(f), temperature)
    return float(gains[0])


def _tilt_gains(mdp, pi0, w, rewards, tilts, temperature, q0=None):
    if mdp.gamma >= 1.0:
        raise ValueError("regularized return needs gamma < 1")
    _check_temperature(temperature)
    n, m = mdp.num_states, mdp.num_actions
    b = rewards.shape[0]
    if q0 is None:
        delta0 = np.eye(mdp.num_sa) - mdp.gamma * policy_transition(mdp, pi0)
        q0 = np.linalg.solve(delta0, rewards.T).T
    q0 = q0.reshape(b, n, m)
    adv = q0 - np.einsum("sa,bsa->bs", pi0.probs, q0)[:, :, None]
    p0 = np.broadcast_to(pi0.probs, (b, n, m))
    probs, h, kl = _tilt(p0, np.asarray(tilts, dtype=np.float64).reshape(b, n, m), temperature)
    moved = p0 * np.expm1(h)  # pi - pi0 without cancellation
    rhs = np.einsum("bsa,bsa->bs", moved, adv) - temperature * kl
    p_state = np.einsum("bsa,sat->bst", probs, mdp.transition.reshape(n, m, n))
    dv = np.linalg.solve(np.eye(n)[None] - mdp.gamma * p_state, rhs[:, :, None])[:, :, 0]
    return dv @ w.rho_s


def zero_shot_gains(features: FeatureSet, mdp: Mdp, pi0: Policy, w: StateActionWeights,
                    rewards: np.ndarray, temperature: float, chunk: int = 1024):
    """Exact ``G(RSF policy) - G(pi0)`` and ``G(pi0)`` for each reward row.

    Returns ``(gains, g_pi0)``.  The RSF policy tilts ``pi0`` by
    ``Q_hat = psi z``; every policy is evaluated on the state chain, which is
    equivalent to the state-action system but ``A**3`` times cheaper.
    """
    if mdp.gamma >= 1.0:
        raise ValueError("regularized return needs gamma < 1")
    _check_temperature(temperature)
    rewards = np.atleast_2d(np.asarray(rewards, dtype=np.float64))
    psi = successor_feature_map(features, mdp, pi0).psi
    delta0 = np.eye(mdp.num_sa) - mdp.gamma * policy_transition(mdp, pi0)
    q0 = np.linalg.solve(delta0, rewards.T).T
    start = (w.rho_s[:, None] * pi0.probs).ravel()
    g0 = q0 @ start
    phi_rho = features.columns * w.rho[:, None]
    gains = np.empty(rewards.shape[0])
    for lo in range(0, rewards.shape[0], chunk):
        r = rewards[lo:lo + chunk]
        q_hat = (r @ phi_rho) @ psi.T
        gains[lo:lo + r.shape[0]] = _tilt_gains(mdp, pi0, w, r, q_hat, temperature,
                                                q0=q0[lo:lo + chunk])
    return gains, g0


def zero_shot_returns(features: FeatureSet, mdp: Mdp, pi0: Policy, w: StateActionWeights,
                      rewards: np.ndarray, temperature: float, chunk: int = 1024):
    """Exact regularized returns ``(g_rsf, g_pi0)`` of the RSF policy and of ``pi0``."""
    gains, g0 = zero_shot_gains(features, mdp, pi0, w, rewards, temperature, chunk)
    return g0 + gains, g0
