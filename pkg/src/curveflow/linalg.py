"""Direct solvers for periodic block-tridiagonal systems.

A system of ``n`` block rows

    L[i] @ z[i-1] + D[i] @ z[i] + U[i] @ z[i+1] = r[i]      (indices mod n)

is solved by eliminating the open chain ``z[0..n-2]`` with the block Thomas
algorithm, carrying the couplings to the border block ``z[n-1]`` as extra
right-hand sides, followed by a dense Schur-complement solve for the border.
"""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp


@numba.njit(cache=True, inline="always")
def _lu_factor(A, piv):
    """In-place LU with partial pivoting of a small dense block."""
    s = A.shape[0]
    for k in range(s):
        p = k
        big = abs(A[k, k])
        for i in range(k + 1, s):
            if abs(A[i, k]) > big:
                big = abs(A[i, k])
                p = i
        piv[k] = p
        if p != k:
            for j in range(s):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
        if A[k, k] == 0.0:
            return False
        inv = 1.0 / A[k, k]
        for i in range(k + 1, s):
            A[i, k] *= inv
            f = A[i, k]
            for j in range(k + 1, s):
                A[i, j] -= f * A[k, j]
    return True


@numba.njit(cache=True, inline="always")
def _lu_solve(A, piv, B):
    """Overwrite the columns of ``B`` with ``A^{-1} B`` given ``_lu_factor`` output."""
    s = A.shape[0]
    k = B.shape[1]
    for i in range(s):
        p = piv[i]
        if p != i:
            for c in range(k):
                tmp = B[i, c]
                B[i, c] = B[p, c]
                B[p, c] = tmp
    for c in range(k):
        for i in range(1, s):
            acc = B[i, c]
            for j in range(i):
                acc -= A[i, j] * B[j, c]
            B[i, c] = acc
        for i in range(s - 1, -1, -1):
            acc = B[i, c]
            for j in range(i + 1, s):
                acc -= A[i, j] * B[j, c]
            B[i, c] = acc / A[i, i]


@numba.njit(cache=True, inline="always")
def _sub_matmul(C, A, B):
    """``C -= A @ B`` for small blocks."""
    n, p = A.shape
    q = B.shape[1]
    for i in range(n):
        for j in range(q):
            acc = 0.0
            for l in range(p):
                acc += A[i, l] * B[l, j]
            C[i, j] -= acc


@numba.njit(cache=True, error_model="numpy")
def _cyclic_block_solve(L, D, U, r):
    n, s, _ = D.shape
    m = n - 1
    k = 1 + s
    # chain right-hand sides [r | E]; E couples the chain to the border block
    rhs = np.zeros((m, s, k))
    for i in range(m):
        for a in range(s):
            rhs[i, a, 0] = r[i, a]
    for a in range(s):
        for b in range(s):
            rhs[0, a, 1 + b] += L[0, a, b]
            rhs[m - 1, a, 1 + b] += U[m - 1, a, b]

    Dp = np.empty((m, s, s))
    piv = np.empty((m, s), dtype=np.int64)
    # G[i] = Dp[i]^{-1} U[i], used for elimination and back substitution
    G = np.empty((m, s, s))
    for i in range(m):
        Dp[i] = D[i]
        if i > 0:
            _sub_matmul(Dp[i], L[i], G[i - 1])
            _sub_matmul(rhs[i], L[i], rhs[i - 1])
        # a failed factorization leaves piv partly unset, so stop here
        if not _lu_factor(Dp[i], piv[i]):
            return np.zeros((n, s)), False
        _lu_solve(Dp[i], piv[i], rhs[i])
        G[i] = U[i]
        _lu_solve(Dp[i], piv[i], G[i])
    # rhs[i] is now Dp[i]^{-1} times the eliminated rhs; back substitution
    sol = rhs
    for i in range(m - 2, -1, -1):
        _sub_matmul(sol[i], G[i], sol[i + 1])

    # border: F z_c + D[n-1] z_b = r[n-1], F_0 = U[n-1], F_{m-1} = L[n-1]
    S = D[n - 1].copy()
    b = np.empty((s, 1))
    b[:, 0] = r[n - 1]
    _sub_matmul(S, U[n - 1], sol[0, :, 1:])
    _sub_matmul(S, L[n - 1], sol[m - 1, :, 1:])
    _sub_matmul(b, U[n - 1], sol[0, :, 0:1])
    _sub_matmul(b, L[n - 1], sol[m - 1, :, 0:1])
    pb = np.empty(s, dtype=np.int64)
    if not _lu_factor(S, pb):
        return np.zeros((n, s)), False
    _lu_solve(S, pb, b)

    z = np.empty((n, s))
    for i in range(m):
        zi = sol[i, :, 0:1].copy()
        _sub_matmul(zi, sol[i, :, 1:], b)
        z[i] = zi[:, 0]
    z[n - 1] = b[:, 0]
    return z, True


def cyclic_block_solve(L, D, U, r) -> np.ndarray:
    """Solve the periodic block-tridiagonal system; arrays of shape (n, s, s) and (n, s)."""
    L, D, U, r = (np.ascontiguousarray(v, dtype=float) for v in (L, D, U, r))
    if D.shape[0] < 3:
        raise ValueError("need at least 3 block rows")
    z, ok = _cyclic_block_solve(L, D, U, r)
    if not ok or not np.all(np.isfinite(z)):
        raise np.linalg.LinAlgError("zero pivot in periodic block elimination")
    return z


def cyclic_block_matvec(L, D, U, z) -> np.ndarray:
    return (np.einsum("nij,nj->ni", L, np.roll(z, 1, axis=0))
            + np.einsum("nij,nj->ni", D, z)
            + np.einsum("nij,nj->ni", U, np.roll(z, -1, axis=0)))


def blocks_to_sparse(L, D, U) -> sp.csr_matrix:
    """Assemble the block rows into an (n s) x (n s) sparse matrix (node-major order)."""
    n, s, _ = D.shape
    i = np.arange(n)
    local = np.arange(s)
    rows, cols, vals = [], [], []
    for shift, blk in ((-1, L), (0, D), (1, U)):
        j = (i + shift) % n
        r = (i[:, None] * s + local)[:, :, None]
        c = (j[:, None] * s + local)[:, None, :]
        rows.append(np.broadcast_to(r, blk.shape).ravel())
        cols.append(np.broadcast_to(c, blk.shape).ravel())
        vals.append(blk.ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n * s, n * s))
