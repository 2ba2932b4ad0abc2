"""Independent reference computations used by the tests.

Nothing here calls into the library's numerical routines: the oracles use
explicit loops, truncated series, dense eigen-solvers or pseudoinverses so
that agreement is a genuine cross-check.
"""

import math

import numpy as np
import scipy.linalg


def random_tensor(rng, n, m, deterministic=False):
    """``(n, m, n)`` transition tensor, dense Dirichlet rows or one-hot rows."""
    if deterministic:
        p = np.zeros((n, m, n))
        for s in range(n):
            # action 0 walks a cycle so the chain is irreducible
            p[s, 0, (s + 1) % n] = 1.0
            for a in range(1, m):
                p[s, a, rng.integers(n)] = 1.0
        return p
    return rng.dirichlet(np.ones(n), size=(n, m))


def random_policy_probs(rng, n, m, floor=0.05):
    p = rng.dirichlet(np.ones(m), size=n)
    return (1 - floor) * p + floor / m


def brute_policy_transition(p, pi):
    """``P_pi[(s,a),(s',a')] = P(s'|s,a) pi(a'|s')`` by four nested loops."""
    n, m, _ = p.shape
    out = np.zeros((n * m, n * m))
    for s in range(n):
        for a in range(m):
            for t in range(n):
                for b in range(m):
                    out[s * m + a, t * m + b] = p[s, a, t] * pi[t, b]
    return out


def neumann_series(p_pi, r, gamma, tol=1e-14):
    """``sum_t gamma^t P^t r`` truncated once ``gamma^t`` drops below ``tol``."""
    if gamma == 0.0:
        return np.array(r, dtype=float)
    steps = int(math.ceil(math.log(tol) / math.log(gamma))) + 1
    out = np.zeros_like(np.asarray(r, dtype=float))
    term = np.array(r, dtype=float)
    for _ in range(steps):
        out += term
        term = gamma * (p_pi @ term)
    return out


def dense_stationary(p_pi):
    """Left Perron vector from scipy's general eigen-solver."""
    vals, vecs = scipy.linalg.eig(p_pi.T)
    k = np.argmin(np.abs(vals - 1.0))
    v = np.real(vecs[:, k])
    return v / v.sum()


def centered_inverse_pinv(p_pi, rho, r):
    """Solution of ``(I - P) q = r`` with ``rho^T q = 0``, via the pseudoinverse."""
    n = p_pi.shape[0]
    q = np.linalg.pinv(np.eye(n) - p_pi) @ r
    return q - (rho @ q) * np.ones(n)


def loop_advantage_norm(q, pi, rho):
    """``sum_{s,a} rho(s,a) (q(s,a) - sum_b pi(b|s) q(s,b))^2`` by loops."""
    n, m = pi.shape
    total = 0.0
    for s in range(n):
        v = sum(pi[s, b] * q[s * m + b] for b in range(m))
        for a in range(m):
            total += rho[s * m + a] * (q[s * m + a] - v) ** 2
    return total


def loop_inner(f, g, rho):
    return float(sum(rho[i] * f[i] * g[i] for i in range(len(rho))))


def transition_pair_dirichlet(p_pi, rho, f):
    """``1/2 sum rho_i P_ij (f_j - f_i)^2``: the undiscounted Dirichlet form of a stationary chain."""
    n = len(rho)
    return 0.5 * sum(rho[i] * p_pi[i, j] * (f[j] - f[i]) ** 2
                     for i in range(n) for j in range(n))


def kernel_by_advantages(p_pi, pi, rho, gamma):
    """``K`` assembled column-pair by column-pair from advantage inner products."""
    n = len(rho)
    delta = np.eye(n) - gamma * p_pi
    basis_q = np.linalg.solve(delta, np.eye(n))
    m = pi.shape[1]
    adv = np.empty_like(basis_q)
    for j in range(n):
        q = basis_q[:, j].reshape(-1, m)
        adv[:, j] = (q - (pi * q).sum(axis=1, keepdims=True)).ravel()
    return adv.T @ (rho[:, None] * adv)


def gram_schmidt_rho(cols, rho):
    """Classical Gram-Schmidt (twice) in the rho inner product."""
    out = []
    for c in np.asarray(cols, dtype=float).T:
        v = c.copy()
        for _ in range(2):
            for u in out:
                v -= (rho @ (u * v)) * u
        out.append(v / math.sqrt(rho @ (v * v)))
    return np.column_stack(out)


def principal_angle(a, b, rho):
    """Largest principal angle via SVD of the rho-Gram cross matrix of orthonormal bases."""
    qa = gram_schmidt_rho(a, rho)
    qb = gram_schmidt_rho(b, rho)
    s = np.linalg.svd(qa.T @ (rho[:, None] * qb), compute_uv=False)
    return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))


def kl_two_point(p, q):
    return sum(pi * math.log(pi / qi) for pi, qi in zip(p, q) if pi > 0)


def rollout_free_return(p, pi, rho_s, reward, pen, gamma):
    """``E_{s0 ~ rho_S, a0 ~ pi} sum_t gamma^t (r - pen(s_t))`` via the Neumann series on states."""
    n, m, _ = p.shape
    r_bar = (pi * (reward.reshape(n, m) - pen[:, None])).sum(axis=1)
    p_s = np.einsum("sa,sat->st", pi, p)
    v = neumann_series(p_s, r_bar, gamma, tol=1e-16)
    return float(rho_s @ v)
