"""The advantage kernel of the reference policy and its closed forms.

``r^T K r`` is the squared L2(rho) norm of the advantage function of ``pi0``
for reward ``r``.  In deterministic environments the same quadratic form has
closed expressions in terms of ``Delta^-1`` and its adjoint; those are
provided here as independent routes to the same numbers.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import (RhoOperator, adjoint, advantage_norm_sq, inverse_laplacian,
                       l2rho_norm_sq, laplacian)
from .mdp import Mdp, Policy, StateActionWeights, is_deterministic, policy_transition


class StochasticEnvironmentError(ValueError):
    """A closed form valid only for deterministic environments was requested."""


@dataclass(frozen=True, eq=False)
class AdvantageKernel:
    kernel: np.ndarray
    selfadjoint_form: np.ndarray
    gamma: float
    deterministic_env: bool
    weights: StateActionWeights


def action_averaging_weight(pi0: Policy, w: StateActionWeights) -> np.ndarray:
    """``pi0^T diag(rho_S) pi0``: block diagonal, entries ``rho_S(s) pi0(a|s) pi0(a'|s)``."""
    n, m = pi0.probs.shape
    out = np.zeros((n * m, n * m))
    for s in range(n):
        p = pi0.probs[s]
        out[s * m:(s + 1) * m, s * m:(s + 1) * m] = w.rho_s[s] * np.outer(p, p)
    return out


def build_kernel(mdp: Mdp, pi0: Policy, w: StateActionWeights, gamma: float) -> AdvantageKernel:
    """``(Delta^-1)^T (diag(rho) - pi0^T diag(rho_S) pi0) Delta^-1``, symmetrized."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("build_kernel needs gamma < 1; use closed_form_operator for gamma = 1")
    delta = np.eye(mdp.num_sa) - gamma * policy_transition(mdp, pi0)
    dinv = np.linalg.inv(delta)
    middle = np.diag(w.rho) - action_averaging_weight(pi0, w)
    k = dinv.T @ middle @ dinv
    k = 0.5 * (k + k.T)
    return AdvantageKernel(k, k / w.rho[:, None], float(gamma), is_deterministic(mdp), w)


def kernel_quadratic(k: AdvantageKernel, r) -> float:
    r = np.asarray(r, dtype=np.float64)
    return float(r @ k.kernel @ r)


def k_quadratic_pair(k: AdvantageKernel, r1, r2) -> float:
    """Polar form: the rho-correlation of the advantages of ``r1`` and ``r2``."""
    return float(np.asarray(r1) @ k.kernel @ np.asarray(r2))


def _require_deterministic(mdp: Mdp, what: str):
    if not is_deterministic(mdp):
        raise StochasticEnvironmentError(f"{what} holds only in deterministic environments")


def closed_form_operator(mdp: Mdp, pi0: Policy, w: StateActionWeights,
                         gamma: float) -> RhoOperator:
    """Operator ``B`` with ``r^T K r = <r, B r>_{L2(rho)}`` in a deterministic environment.

    * ``gamma == 0``: ``Id - P* P``
    * ``0 < gamma < 1``: ``gamma^-2 (D + D* - Id - (1 - gamma^2) D* D)`` with ``D = Delta^-1``,
      evaluated in an equivalent form that does not divide by ``gamma^2``
    * ``gamma == 1``: ``D0 + D0* - Pc`` where ``D0`` inverts ``Delta`` on centered
      functions and ``Pc`` is the centering projector; it vanishes on constants.
    """
    _require_deterministic(mdp, "the closed-form advantage kernel")
    n = mdp.num_sa
    eye = np.eye(n)
    if gamma == 0.0:
        p = RhoOperator(policy_transition(mdp, pi0), w)
        mat = eye - adjoint(p).matrix @ p.matrix
    elif gamma < 1.0:
        # D - Id = gamma P D turns the gamma^-2 form into one free of cancellation:
        # Id + gamma (P D + (P D)*) - (1 - gamma^2) (P D)* (P D)
        d = inverse_laplacian(laplacian(mdp, pi0, gamma, w), gamma)
        pd = RhoOperator(policy_transition(mdp, pi0) @ d.matrix, w)
        pds = adjoint(pd).matrix
        mat = eye + gamma * (pd.matrix + pds) - (1.0 - gamma**2) * pds @ pd.matrix
    elif gamma == 1.0:
        d0 = inverse_laplacian(laplacian(mdp, pi0, 1.0, w), 1.0)
        pc = eye - np.outer(np.ones(n), w.rho)
        mat = d0.matrix + adjoint(d0).matrix - pc
    else:
        raise ValueError("gamma must lie in [0, 1]")
    # self-adjoint analytically; remove rounding asymmetry in the rho metric
    sym = 0.5 * (mat + mat.T * w.rho[None, :] / w.rho[:, None])
    return RhoOperator(sym, w)


def alt_form_quadratic(mdp: Mdp, pi0: Policy, w: StateActionWeights, gamma: float, r) -> float:
    """``<r, D* (Id - P* P) D r>_{L2(rho)} = ||D r||^2 - ||P D r||^2`` with ``D = Delta^-1``."""
    _require_deterministic(mdp, "the mixed Delta/P closed form")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("alt_form_quadratic needs gamma < 1")
    p = policy_transition(mdp, pi0)
    q = np.linalg.solve(np.eye(mdp.num_sa) - gamma * p, np.asarray(r, dtype=np.float64))
    return l2rho_norm_sq(q, w) - l2rho_norm_sq(p @ q, w)


def advantage_norm_identities(f, mdp: Mdp, pi0: Policy, w: StateActionWeights, gamma: float,
                              check_determinism: bool = True):
    """Three expressions that coincide in deterministic environments.

    Returns ``(||f||_A^2, ||f||^2 - ||P f||^2, gamma^-2 (2<f, Delta f> - ||Delta f||^2
    - (1 - gamma^2) ||f||^2))``; the last entry is ``nan`` at ``gamma == 0``.
    Pass ``check_determinism=False`` to evaluate them on a stochastic
    environment, where the second exceeds the first by the transition variance.
    """
    if check_determinism:
        _require_deterministic(mdp, "the advantage-norm identities")
    f = np.asarray(f, dtype=np.float64)
    p = policy_transition(mdp, pi0)
    lhs = advantage_norm_sq(f, w, pi0)
    rhs_first = l2rho_norm_sq(f, w) - l2rho_norm_sq(p @ f, w)
    if gamma == 0.0:
        return lhs, rhs_first, float("nan")
    # the bracket is O(gamma^2) times its terms; extended precision keeps
    # the literal form accurate for small gamma
    ld = np.longdouble
    fl, rho, g = f.astype(ld), w.rho.astype(ld), ld(gamma)
    df = fl - g * (p.astype(ld) @ fl)
    bracket = (2 * np.sum(rho * fl * df) - np.sum(rho * df * df)
               - (1 - g * g) * np.sum(rho * fl * fl))
    return lhs, rhs_first, float(bracket / (g * g))
