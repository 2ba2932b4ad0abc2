"""Candidate feature sets and their expected zero-shot gain.

Every eigenproblem here is self-adjoint in L2(rho) and is solved through the
similarity ``S = rho^{1/2} Op rho^{-1/2}``: ``S`` is symmetric, ``eigh``
diagonalizes it, and eigenvectors map back through ``rho^{-1/2}``, which
makes them rho-orthonormal.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import (FeatureSet, RhoOperator, adjoint, inverse_laplacian, orthonormalize,
                       projector)
from .kernel import AdvantageKernel
from .mdp import Mdp, Policy, StateActionWeights, policy_transition
from .rewards import RewardModel, expected_quadratic

BASELINE_KINDS = ("laplacian_eigs", "p_symmetrized", "random")
TIE_GAP = 1e-6


@dataclass(frozen=True, eq=False)
class SpectralResult:
    eigenvalues: np.ndarray    # descending
    eigenvectors: np.ndarray   # (S*A, k), rho-orthonormal columns
    source: str

    def top(self, d: int) -> np.ndarray:
        return self.eigenvectors[:, :d]

    def bottom(self, d: int) -> np.ndarray:
        """``d`` eigenvectors with the smallest finite eigenvalues, smallest first."""
        finite = np.flatnonzero(np.isfinite(self.eigenvalues))
        return self.eigenvectors[:, finite[::-1][:d]]


def symmetric_spectrum(sym: np.ndarray, w: StateActionWeights, source: str,
                       exclude_constants: bool = False) -> SpectralResult:
    """Diagonalize ``rho^{-1/2} sym rho^{1/2}`` given its symmetric similarity ``sym``.

    With ``exclude_constants`` the problem is restricted to L2_0(rho); the
    constant function is appended last with eigenvalue ``-inf`` so that no
    "largest-d" selection can pick it.
    """
    sym = 0.5 * (sym + sym.T)
    root = np.sqrt(w.rho)
    if exclude_constants:
        basis = scipy.linalg.null_space(root[None, :])
        vals, y = np.linalg.eigh(basis.T @ sym @ basis)
        vecs = basis @ y
        vals = np.append(vals, -np.inf)
        vecs = np.column_stack([vecs, root])
        order = np.argsort(-vals, kind="stable")
    else:
        vals, vecs = np.linalg.eigh(sym)
        order = np.argsort(-vals, kind="stable")
    return SpectralResult(vals[order], vecs[:, order] / root[:, None], source)


def operator_spectrum(op: RhoOperator, source: str = "operator",
                      exclude_constants: bool = False) -> SpectralResult:
    root = np.sqrt(op.weights.rho)
    sym = root[:, None] * op.matrix / root[None, :]
    return symmetric_spectrum(sym, op.weights, source, exclude_constants)


def kernel_spectrum(kernel: AdvantageKernel, exclude_constants: bool = False) -> SpectralResult:
    """Eigenpairs of ``rho^-1 K`` via the symmetric ``rho^{-1/2} K rho^{-1/2}``.

    Constants are an exact null vector of ``K``, so restricting to L2_0(rho)
    loses nothing but that direction.
    """
    inv_root = 1.0 / np.sqrt(kernel.weights.rho)
    sym = inv_root[:, None] * kernel.kernel * inv_root[None, :]
    return symmetric_spectrum(sym, kernel.weights, "advantage_kernel", exclude_constants)


def _check_d(d, n):
    if not 1 <= d <= n:
        raise ValueError(f"d must lie in [1, {n}], got {d}")


def _as_features(vecs, w, provenance):
    return orthonormalize(vecs, w, provenance)


def optimal_features(kernel: AdvantageKernel, w: StateActionWeights, d: int) -> FeatureSet:
    """Top-``d`` eigenvectors of ``rho^-1 K``."""
    _check_d(d, w.num_sa)
    return _as_features(kernel_spectrum(kernel).top(d), w, "optimal")


def laplacian_spectrum(mdp: Mdp, pi0: Policy, w: StateActionWeights,
                       exclude_constants: bool = False) -> SpectralResult:
    """Spectrum of ``Delta + Delta*`` with the undiscounted ``Delta = Id - P_pi0``."""
    delta = RhoOperator(np.eye(mdp.num_sa) - policy_transition(mdp, pi0), w)
    op = RhoOperator(delta.matrix + adjoint(delta).matrix, w)
    return operator_spectrum(op, "laplacian", exclude_constants)


def p_symmetrized_spectrum(mdp: Mdp, pi0: Policy, w: StateActionWeights,
                           exclude_constants: bool = False) -> SpectralResult:
    p = RhoOperator(policy_transition(mdp, pi0), w)
    op = RhoOperator(p.matrix + adjoint(p).matrix, w)
    return operator_spectrum(op, "p_symmetrized", exclude_constants)


def baseline_features(kind: str, mdp: Mdp, pi0: Policy, w: StateActionWeights, d: int,
                      rng: np.random.Generator | None = None,
                      exclude_constants: bool = False) -> FeatureSet:
    """Laplacian eigenfunctions (smallest of ``Delta + Delta*``), largest
    eigenfunctions of ``P + P*``, or random rho-orthonormal columns."""
    _check_d(d, w.num_sa - int(exclude_constants))
    if kind == "laplacian_eigs":
        vecs = laplacian_spectrum(mdp, pi0, w, exclude_constants).bottom(d)
    elif kind == "p_symmetrized":
        vecs = p_symmetrized_spectrum(mdp, pi0, w, exclude_constants).top(d)
    elif kind == "random":
        if rng is None:
            raise ValueError("random features need an rng")
        vecs = rng.standard_normal((w.num_sa, d))
        if exclude_constants:
            vecs = vecs - w.rho @ vecs
    else:
        raise ValueError(f"unknown feature kind {kind!r}; expected one of {BASELINE_KINDS}")
    return _as_features(vecs, w, kind)


def random_features(w: StateActionWeights, d: int, rng: np.random.Generator) -> FeatureSet:
    return _as_features(rng.standard_normal((w.num_sa, d)), w, "random")


def trace_gain(features, kernel: AdvantageKernel) -> float:
    """``Tr(phi^T K phi)`` for rho-orthonormal ``phi``."""
    phi = np.asarray(features.columns if isinstance(features, FeatureSet) else features,
                     dtype=np.float64)
    rho = kernel.weights.rho
    gram = phi.T @ (rho[:, None] * phi)
    if np.max(np.abs(gram - np.eye(phi.shape[1])), initial=0.0) > 1e-8:
        raise ValueError("trace_gain needs L2(rho)-orthonormal features")
    return float(np.einsum("ij,ik,kj->", phi, kernel.kernel, phi))


def constant_projection(features: FeatureSet, w: StateActionWeights) -> np.ndarray:
    """Rho-orthogonal projection of the constant function onto the feature span."""
    phi = features.columns
    return phi @ (phi.T @ w.rho)


def subspace_distance(a: FeatureSet, b: FeatureSet, w: StateActionWeights) -> float:
    """Largest principal angle (radians) between the two spans in L2(rho)."""
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")
    if a.d == 0:
        return 0.0
    root = np.sqrt(w.rho)[:, None]
    return float(np.max(scipy.linalg.subspace_angles(root * a.columns, root * b.columns)))


def tie_free_dims(eigenvalues, gap: float = TIE_GAP) -> list:
    """Dimensions ``d`` such that the top-``d`` block does not split an eigenvalue cluster."""
    vals = np.asarray(eigenvalues)
    vals = vals[np.isfinite(vals)]
    return [d for d in range(1, vals.size) if vals[d - 1] - vals[d] > gap]


def expected_gain(features: FeatureSet, kernel: AdvantageKernel, model: RewardModel,
                  temperature: float) -> float:
    """First-order ``E_r[G(RSF policy)] - E_r[G(pi0)]`` from the reward second moments.

    ``E[r^T K r - (r - Pi r)^T K (r - Pi r)] / (2 T (1 - gamma))`` with ``Pi``
    the feature projector; no structure of the model beyond ``E[r r^T]`` is used.
    """
    w = kernel.weights
    k = kernel.kernel
    resid = np.eye(w.num_sa) - projector(features, w).matrix
    m = k - resid.T @ k @ resid
    return expected_quadratic(0.5 * (m + m.T), model, w) / (2.0 * temperature * (1.0 - kernel.gamma))


def expected_gain_formula(features: FeatureSet, kernel: AdvantageKernel, model: RewardModel,
                          temperature: float) -> float:
    """Closed form in terms of ``Tr(phi^T K phi)`` and the constant's projection.

    Gaussian and goal models: ``Tr / (2 T (1 - gamma))``.  Scattered model:
    ``(kappa (mu^2 + sigma^2) Tr - (kappa mu)^2 c^T K c) / (2 T (1 - gamma))``.
    """
    scale = 2.0 * temperature * (1.0 - kernel.gamma)
    tr = trace_gain(features, kernel)
    if model.kind in ("gaussian", "goal_reaching"):
        return tr / scale
    c = constant_projection(features, kernel.weights)
    k = model.kappa
    return (k * (model.mu**2 + model.sigma2) * tr - (k * model.mu) ** 2 * (c @ kernel.kernel @ c)) / scale


def inverse_sum_spectrum(mdp: Mdp, pi0: Policy, w: StateActionWeights) -> SpectralResult:
    """Spectrum of ``D0 + D0*`` on L2_0(rho), ``D0`` the inverse of ``Id - P_pi0`` there.

    For a reversible chain its top eigenspaces coincide with the bottom
    non-constant eigenspaces of ``Delta + Delta*``; in general they differ.
    """
    delta = RhoOperator(np.eye(mdp.num_sa) - policy_transition(mdp, pi0), w)
    d0 = inverse_laplacian(delta, 1.0)
    op = RhoOperator(d0.matrix + adjoint(d0).matrix, w)
    return operator_spectrum(op, "inverse_laplacian_sum", exclude_constants=True)
