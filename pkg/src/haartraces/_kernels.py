"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``HAARTRACES_DISABLE_NUMBA=1`` to force the numpy implementations
(also used automatically when numba is not importable).  Both variants of
every kernel are importable under ``*_numba`` / ``*_numpy`` names so they
can be tested and benchmarked side by side.  ``power_traces`` is the one
exception to the flag: its dispatcher always takes the numpy path, which
is faster at the matrix sizes used here.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def numba_enabled() -> bool:
    flag = os.environ.get("HAARTRACES_DISABLE_NUMBA", "").strip().lower()
    return HAS_NUMBA and flag not in ("1", "true", "yes", "on")


# --- linear assignment (shortest augmenting path, O(N^3)) ----------------------

@njit(cache=True)
def assignment_numba(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)   # match[col] = row (1-based), 0 = free
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = inf
            used[j] = False
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        row_to_col[match[j] - 1] = j - 1
    return row_to_col


def assignment_numpy(cost):
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.int64)
    row_to_col[match[1:] - 1] = np.arange(n)
    return row_to_col


def assignment(cost):
    """Column assigned to each row in a minimum-cost perfect matching."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("assignment needs a square cost matrix")
    if cost.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    if numba_enabled():
        return assignment_numba(cost)
    return assignment_numpy(cost)


# --- Euclidean cost matrix -----------------------------------------------------

@njit(cache=True)
def euclidean_cost_numba(x, y):
    nx, k = x.shape
    ny = y.shape[0]
    out = np.empty((nx, ny))
    for i in range(nx):
        for j in range(ny):
            s = 0.0
            for c in range(k):
                d = x[i, c] - y[j, c]
                s += d * d
            out[i, j] = np.sqrt(s)
    return out


def euclidean_cost_numpy(x, y):
    # explicit differences rather than the |x|^2 - 2xy + |y|^2 trick: exact zeros on the diagonal
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def euclidean_cost(x, y):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if numba_enabled():
        return euclidean_cost_numba(x, y)
    return euclidean_cost_numpy(x, y)


# --- symplectic Gram-Schmidt -----------------------------------------------------

@njit(cache=True)
def symplectic_gram_schmidt_numba(g):
    """Orthonormalize stacked ``(count, 2n, n)`` complex columns into USp(2n)."""
    count, dim, half = g.shape
    out = np.zeros((count, dim, dim), dtype=np.complex128)
    for s in range(count):
        for k in range(half):
            v = g[s, :, k].copy()
            for _ in range(2):  # re-orthogonalize once for accuracy
                for c in range(k):
                    for col in (c, c + half):
                        q = out[s, :, col]
                        proj = 0j
                        for i in range(dim):
                            proj += np.conj(q[i]) * v[i]
                        for i in range(dim):
                            v[i] -= proj * q[i]
            nrm = 0.0
            for i in range(dim):
                nrm += v[i].real * v[i].real + v[i].imag * v[i].imag
            nrm = np.sqrt(nrm)
            for i in range(dim):
                out[s, i, k] = v[i] / nrm
            # partner column: (x; y) -> (-conj(y); conj(x))
            for i in range(half):
                out[s, i, k + half] = -np.conj(out[s, i + half, k])
                out[s, i + half, k + half] = np.conj(out[s, i, k])
    return out


def symplectic_gram_schmidt_numpy(g):
    count, dim, half = g.shape
    out = np.zeros((count, dim, dim), dtype=np.complex128)
    for k in range(half):
        v = g[:, :, k].astype(np.complex128, copy=True)
        for _ in range(2):
            if k:
                basis = np.concatenate([out[:, :, :k], out[:, :, half:half + k]], axis=2)
                proj = np.einsum("sik,si->sk", basis.conj(), v)
                v = v - np.einsum("sik,sk->si", basis, proj)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        out[:, :, k] = v
        out[:, :half, k + half] = -np.conj(v[:, half:])
        out[:, half:, k + half] = np.conj(v[:, :half])
    return out


def symplectic_gram_schmidt(g):
    g = np.ascontiguousarray(g, dtype=np.complex128)
    if numba_enabled():
        return symplectic_gram_schmidt_numba(g)
    return symplectic_gram_schmidt_numpy(g)


# --- traces of powers --------------------------------------------------------------

@njit(cache=True)
def power_traces_numba(mats, d):
    """``out[s, j-1] = Tr(M_s^j)`` for ``j = 1..d`` by repeated multiplication."""
    count, dim, _ = mats.shape
    out = np.zeros((count, d), dtype=np.complex128)
    cur = np.empty((dim, dim), dtype=np.complex128)
    nxt = np.empty((dim, dim), dtype=np.complex128)
    for s in range(count):
        m = mats[s]
        for i in range(dim):
            for j in range(dim):
                cur[i, j] = m[i, j]
        for p in range(d):
            t = 0j
            for i in range(dim):
                t += cur[i, i]
            out[s, p] = t
            if p + 1 < d:
                # i-k-j loop order walks rows of m contiguously
                for i in range(dim):
                    for j in range(dim):
                        nxt[i, j] = 0j
                    for k in range(dim):
                        a = cur[i, k]
                        for j in range(dim):
                            nxt[i, j] += a * m[k, j]
                cur, nxt = nxt, cur
    return out


def power_traces_numpy(mats, d):
    count = mats.shape[0]
    out = np.zeros((count, d), dtype=np.complex128)
    cur = mats
    for p in range(d):
        out[:, p] = np.trace(cur, axis1=1, axis2=2)
        if p + 1 < d:
            cur = cur @ mats
    return out


def power_traces(mats, d):
    """Traces of the first ``d`` powers of each matrix in a stack.

    Always uses the numpy path: batched ``matmul`` on small complex
    matrices beats the compiled triple loop (see ``benchmarks/``).
    """
    mats = np.ascontiguousarray(mats, dtype=np.complex128)
    if mats.ndim == 2:
        mats = mats[None]
    return power_traces_numpy(mats, int(d))
