"""L2(rho) geometry on state-action functions.

Inner products, the advantage seminorm, adjoints ``M* = rho^-1 M^T rho``,
the Laplacian ``Delta = Id - gamma P_pi0`` and its inverse (on centered
functions when ``gamma == 1``), the Dirichlet form and rho-orthonormal bases.
"""

from dataclasses import dataclass

import numpy as np

from .mdp import (Mdp, Policy, SingularSystemError, StateActionWeights,
                  policy_transition, solve_centered, stationary_distribution)

GRAM_TOL = 1e-10
MAX_CONDITION = 1e12
CENTERED_TOL = 1e-10


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RhoOperator:
    """A matrix acting on state-action functions, tied to its weights."""

    matrix: np.ndarray
    weights: StateActionWeights

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64)
        n = self.weights.num_sa
        if mat.shape != (n, n):
            raise ValueError(f"operator must be {n}x{n}, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator has non-finite entries")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def apply(self, f):
        return self.matrix @ f


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """``d`` rho-orthonormal feature columns (``columns`` has shape ``(S*A, d)``)."""

    columns: np.ndarray
    weights: StateActionWeights
    provenance: str = "custom"

    def __post_init__(self):
        cols = np.array(self.columns, dtype=np.float64)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.shape[0] != self.weights.num_sa:
            raise ValueError("feature columns do not match the number of state-actions")
        gram = cols.T @ (self.weights.rho[:, None] * cols)
        dev = np.max(np.abs(gram - np.eye(cols.shape[1])), initial=0.0)
        if dev > GRAM_TOL:
            raise ValueError(f"features are not L2(rho)-orthonormal (Gram deviation {dev:.2e})")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def d(self) -> int:
        return self.columns.shape[1]


def l2rho_inner(f, g, w: StateActionWeights) -> float:
    """``f^T diag(rho) g``; with matrix arguments returns the cross-Gram matrix."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    rg = w.rho * g if g.ndim == 1 else w.rho[:, None] * g
    out = f.T @ rg
    return float(out) if np.ndim(out) == 0 else out


def l2rho_norm_sq(f, w: StateActionWeights) -> float:
    return l2rho_inner(f, f, w)


def center(f, w: StateActionWeights):
    """Project onto L2_0(rho): ``f - (rho^T f) 1``."""
    f = np.asarray(f, dtype=np.float64)
    return f - w.rho @ f


def centering_projector(w: StateActionWeights) -> RhoOperator:
    n = w.num_sa
    return RhoOperator(np.eye(n) - np.outer(np.ones(n), w.rho), w)


def _action_centered(f, pi0: Policy):
    n, m = pi0.probs.shape
    fm = np.asarray(f, dtype=np.float64).reshape(n, m)
    return (fm - np.einsum("sa,sa->s", pi0.probs, fm)[:, None]).ravel()


def advantage_inner(f, g, w: StateActionWeights, pi0: Policy) -> float:
    """Polar form of the advantage seminorm (centering always uses ``pi0``)."""
    return l2rho_inner(_action_centered(f, pi0), _action_centered(g, pi0), w)


def advantage_norm_sq(f, w: StateActionWeights, pi0: Policy) -> float:
    """``E_rho[(f(s,a) - E_{a'~pi0(s)} f(s,a'))^2]``."""
    c = _action_centered(f, pi0)
    return float(w.rho @ (c * c))


def adjoint(m: RhoOperator) -> RhoOperator:
    """L2(rho) adjoint ``rho^-1 M^T rho``."""
    rho = m.weights.rho
    return RhoOperator(m.matrix.T * rho[None, :] / rho[:, None], m.weights)


def laplacian(mdp: Mdp, pi0: Policy, gamma: float,
              weights: StateActionWeights | None = None) -> RhoOperator:
    """``Id - gamma P_pi0``; the stationary weights are computed if not given."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    p_pi = policy_transition(mdp, pi0)
    if weights is None:
        weights = stationary_distribution(p_pi, num_actions=mdp.num_actions)
    return RhoOperator(np.eye(mdp.num_sa) - gamma * p_pi, weights)


def apply_inverse_laplacian(delta: RhoOperator, r, gamma: float):
    """Solve ``Delta Q = r``.

    At ``gamma == 1`` the reward must have zero rho-mean and the returned
    ``Q`` is the solution with zero rho-mean.
    """
    r = np.asarray(r, dtype=np.float64)
    if gamma < 1.0:
        return np.linalg.solve(delta.matrix, r)
    rho = delta.weights.rho
    if np.max(np.abs(rho @ r)) > CENTERED_TOL:
        raise SingularSystemError(
            "Delta is singular at gamma = 1 on non-centered rewards; center the reward first")
    return solve_centered(delta.matrix, r, rho)


def inverse_laplacian(delta: RhoOperator, gamma: float) -> RhoOperator:
    """Matrix of ``Delta^-1``; at ``gamma == 1`` the inverse on L2_0(rho)
    composed with the centering projector (the group inverse)."""
    n = delta.weights.num_sa
    if gamma < 1.0:
        return RhoOperator(np.linalg.inv(delta.matrix), delta.weights)
    rho = delta.weights.rho
    pc = np.eye(n) - np.outer(np.ones(n), rho)
    return RhoOperator(solve_centered(delta.matrix, pc, rho), delta.weights)


def dirichlet_form(f, delta: RhoOperator, w: StateActionWeights) -> float:
    """``<f, Delta f>_{L2(rho)}``."""
    f = np.asarray(f, dtype=np.float64)
    return l2rho_inner(f, delta.matrix @ f, w)


def orthonormalize(features, w: StateActionWeights, provenance: str = "custom") -> FeatureSet:
    """Basis change ``phi <- phi C^{-1/2}`` with ``C = phi^T rho phi``.

    Applied twice so the output Gram matrix is the identity to rounding even
    for ill-conditioned (but admissible) inputs.
    """
    phi = np.array(features.columns if isinstance(features, FeatureSet) else features,
                   dtype=np.float64)
    if phi.ndim == 1:
        phi = phi[:, None]
    if phi.shape[1] == 0:
        return FeatureSet(phi, w, provenance)
    for _ in range(2):
        gram = phi.T @ (w.rho[:, None] * phi)
        gram = 0.5 * (gram + gram.T)
        evals, evecs = np.linalg.eigh(gram)
        if evals[0] <= 0 or evals[-1] / evals[0] > MAX_CONDITION:
            raise RankDeficiencyError(
                "feature columns are linearly dependent in L2(rho) "
                f"(Gram condition {evals[-1] / max(evals[0], 1e-300):.2e})")
        phi = phi @ (evecs / np.sqrt(evals)) @ evecs.T
    return FeatureSet(phi, w, provenance)


def projector(features: FeatureSet, w: StateActionWeights) -> RhoOperator:
    """L2(rho)-orthogonal projector ``phi phi^T rho`` onto the feature span."""
    phi = features.columns
    return RhoOperator(phi @ (phi.T * w.rho[None, :]), w)
