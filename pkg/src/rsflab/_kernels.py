"""Hot inner loops, each with a numba kernel and a vectorized numpy twin.

Public wrappers at the bottom pick the backend via :func:`rsflab._accel.use_numba`.
Both paths must agree to floating-point reordering error; the test suite
runs them side by side.
"""

import numpy as np

from ._accel import njit, use_numba

# power-iteration status codes
CONVERGED = 0
STALLED = 1
EXHAUSTED = 2


# --------------------------------------------------------------------------
# stationary distribution: rho <- rho P
# --------------------------------------------------------------------------


@njit
def _power_iteration_nb(p, rho0, tol, max_iters, check_every, patience):
    n = p.shape[0]
    rho = rho0.copy()
    nxt = np.empty(n)
    best = np.inf
    stale = 0
    residual = np.inf
    for it in range(1, max_iters + 1):
        for j in range(n):
            nxt[j] = 0.0
        for i in range(n):
            ri = rho[i]
            if ri != 0.0:
                for j in range(n):
                    nxt[j] += ri * p[i, j]
        total = 0.0
        for j in range(n):
            total += nxt[j]
        residual = 0.0
        for j in range(n):
            nxt[j] /= total
            diff = abs(nxt[j] - rho[j])
            if diff > residual:
                residual = diff
        for j in range(n):
            rho[j] = nxt[j]
        if residual <= tol:
            return rho, residual, it, CONVERGED
        if it % check_every == 0:
            if residual < best * (1.0 - 1e-3):
                best = residual
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    return rho, residual, it, STALLED
    return rho, residual, max_iters, EXHAUSTED


def _power_iteration_np(p, rho0, tol, max_iters, check_every, patience):
    rho = rho0.copy()
    best = np.inf
    stale = 0
    residual = np.inf
    for it in range(1, max_iters + 1):
        nxt = rho @ p
        nxt /= nxt.sum()
        residual = float(np.max(np.abs(nxt - rho)))
        rho = nxt
        if residual <= tol:
            return rho, residual, it, CONVERGED
        if it % check_every == 0:
            if residual < best * (1.0 - 1e-3):
                best = residual
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    return rho, residual, it, STALLED
    return rho, residual, max_iters, EXHAUSTED


# --------------------------------------------------------------------------
# scattered rewards: sum Dirac contributions into a (batch, n) matrix
# --------------------------------------------------------------------------


@njit
def _scatter_rows_nb(n_rows, n_cols, counts, idx, vals):
    out = np.zeros((n_rows, n_cols))
    k = 0
    for row in range(n_rows):
        for _ in range(counts[row]):
            out[row, idx[k]] += vals[k]
            k += 1
    return out


def _scatter_rows_np(n_rows, n_cols, counts, idx, vals):
    out = np.zeros((n_rows, n_cols))
    rows = np.repeat(np.arange(n_rows), counts)
    np.add.at(out, (rows, idx), vals)
    return out


# --------------------------------------------------------------------------
# Monte-Carlo second moments: running mean and M2 of r_i r_j (Welford)
# --------------------------------------------------------------------------


@njit
def _outer_moments_nb(samples):
    n, m = samples.shape
    mean = np.zeros((m, m))
    m2 = np.zeros((m, m))
    for k in range(n):
        inv = 1.0 / (k + 1)
        for i in range(m):
            ri = samples[k, i]
            for j in range(i, m):
                x = ri * samples[k, j]
                delta = x - mean[i, j]
                mean[i, j] += delta * inv
                m2[i, j] += delta * (x - mean[i, j])
    for i in range(m):
        for j in range(i):
            mean[i, j] = mean[j, i]
            m2[i, j] = m2[j, i]
    return mean, m2


def _outer_moments_np(samples, chunk_elems=4_000_000):
    n, m = samples.shape
    chunk = max(1, chunk_elems // max(1, m * m))
    count = 0
    mean = np.zeros((m, m))
    m2 = np.zeros((m, m))
    for start in range(0, n, chunk):
        block = samples[start:start + chunk]
        prods = block[:, :, None] * block[:, None, :]
        nb = prods.shape[0]
        bmean = prods.mean(axis=0)
        bm2 = ((prods - bmean) ** 2).sum(axis=0)
        # Chan et al. pairwise merge
        delta = bmean - mean
        total = count + nb
        mean = mean + delta * (nb / total)
        m2 = m2 + bm2 + delta**2 * (count * nb / total)
        count = total
    return mean, m2


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def power_iteration(p, rho0, tol, max_iters, check_every=100, patience=50):
    """Iterate ``rho <- rho P / sum`` until the sup-norm step is below ``tol``.

    Returns ``(rho, residual, iterations, status)`` with ``status`` one of
    CONVERGED, STALLED (no progress over ``patience`` checks) or EXHAUSTED.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    rho0 = np.ascontiguousarray(rho0, dtype=np.float64)
    fn = _power_iteration_nb if use_numba() else _power_iteration_np
    rho, residual, iters, status = fn(p, rho0, float(tol), int(max_iters),
                                      int(check_every), int(patience))
    return np.asarray(rho), float(residual), int(iters), int(status)


def scatter_rows(n_rows, n_cols, counts, idx, vals):
    """Build a ``(n_rows, n_cols)`` matrix where row ``k`` is the sum of
    ``vals`` at ``idx`` over its ``counts[k]`` consecutive entries."""
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    if counts.sum() != idx.shape[0] or idx.shape != vals.shape:
        raise ValueError("counts, idx and vals are inconsistent")
    fn = _scatter_rows_nb if use_numba() else _scatter_rows_np
    return fn(int(n_rows), int(n_cols), counts, idx, vals)


def outer_moments(samples):
    """Entrywise mean of ``r r^T`` over rows of ``samples`` and its standard error."""
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("need at least two samples")
    fn = _outer_moments_nb if use_numba() else _outer_moments_np
    mean, m2 = fn(samples)
    se = np.sqrt(np.maximum(m2, 0.0) / (n - 1) / n)
    return mean, se
