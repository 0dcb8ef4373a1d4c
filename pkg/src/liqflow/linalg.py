"""Dense eigen-solvers used by the moment machinery.

The generalized symmetric problem A psi = lambda B psi is solved by a
batched Cholesky reduction followed by cyclic Jacobi rotations. Both work on
stacks of shape (..., d, d) so that many frames are processed at once. The
general (non-symmetric) eigenvalue routine is a complex shifted QR on the
Hessenberg form and is used for confederate matrices and Kronrod nodes.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateMatrixError

#: Cholesky pivots must exceed this fraction of the largest diagonal entry
PIVOT_RTOL = 1e-12


class EigSystem(NamedTuple):
    eigenvalues: np.ndarray  # (..., d), ascending
    eigenvectors: np.ndarray  # (..., d, d), columns are psi, normalized psi^T B psi = 1


def cholesky_masked(B, rtol: float = PIVOT_RTOL):
    """Batched Cholesky factor without raising.

    Returns (L, ok, pivot, index): ``ok`` flags the matrices whose pivots all
    passed the relative test, ``pivot`` is the smallest relative pivot seen
    and ``index`` its position. Failed matrices get a placeholder pivot of
    one so that the remaining arithmetic stays finite.
    """
    B = np.asarray(B, dtype=float)
    d = B.shape[-1]
    L = np.zeros_like(B)
    diag = np.diagonal(B, axis1=-2, axis2=-1)
    scale = np.max(np.abs(diag), axis=-1)
    scale = np.where(scale > 0, scale, 1.0)
    ok = np.ones(B.shape[:-2], dtype=bool)
    min_piv = np.full(B.shape[:-2], np.inf)
    min_idx = np.zeros(B.shape[:-2], dtype=int)
    for j in range(d):
        Lj = L[..., j, :j]
        s = B[..., j, j] - np.einsum("...k,...k->...", Lj, Lj)
        rel = s / scale
        lower = rel < min_piv
        min_idx = np.where(lower, j, min_idx)
        min_piv = np.minimum(min_piv, rel)
        good = np.isfinite(s) & (rel > rtol)
        ok &= good
        s = np.where(good, s, 1.0)
        root = np.sqrt(s)
        L[..., j, j] = root
        if j + 1 < d:
            below = B[..., j + 1:, j] - np.einsum("...ik,...k->...i", L[..., j + 1:, :j], Lj)
            L[..., j + 1:, j] = below / root[..., None]
    return L, ok, min_piv, min_idx


def cholesky(B, rtol: float = PIVOT_RTOL) -> np.ndarray:
    L, ok, piv, idx = cholesky_masked(B, rtol)
    if not np.all(ok):
        bad = np.argmin(np.where(ok, np.inf, piv))
        p = np.ravel(piv)[bad]
        i = np.ravel(idx)[bad]
        raise DegenerateMatrixError(
            f"matrix is not positive definite: smallest relative pivot {p:.3e} "
            f"at index {i} (tolerance {rtol:.1e})",
            pivot=float(p),
        )
    return L


def lower_inverse(L) -> np.ndarray:
    """Inverse of a stack of lower-triangular matrices by forward substitution."""
    L = np.asarray(L, dtype=float)
    d = L.shape[-1]
    inv = np.zeros_like(L)
    for i in range(d):
        inv[..., i, i] = 1.0 / L[..., i, i]
        if i:
            acc = np.einsum("...k,...kj->...j", L[..., i, :i], inv[..., :i, :i])
            inv[..., i, :i] = -acc * inv[..., i, i][..., None]
    return inv


def spd_solve(G, b, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Solve G x = b for symmetric positive definite G (batched, b is (..., d) or (..., d, k))."""
    Linv = lower_inverse(cholesky(G, rtol))
    Ginv = np.swapaxes(Linv, -1, -2) @ Linv
    b = np.asarray(b, dtype=float)
    if b.ndim == Ginv.ndim - 1:
        return np.einsum("...ij,...j->...i", Ginv, b)
    return Ginv @ b


def spd_inverse(G, rtol: float = PIVOT_RTOL) -> np.ndarray:
    Linv = lower_inverse(cholesky(G, rtol))
    return np.swapaxes(Linv, -1, -2) @ Linv


def _round_robin(d: int):
    """Pairings of 0..d-1 into rounds of disjoint (p, q) pairs covering every pair once."""
    m = d + d % 2
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = sorted((min(a, b), max(a, b)) for a, b in
                       ((players[i], players[m - 1 - i]) for i in range(m // 2)) if max(a, b) < d)
        if pairs:
            rounds.append(tuple(np.array(pairs).T))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(S, tol: float = 1e-14, max_sweeps: int = 60):
    """Eigen-decomposition of a stack of symmetric matrices by cyclic Jacobi.

    Rotations on disjoint index pairs commute, so each sweep is done in
    rounds of simultaneous rotations (round-robin ordering).
    Returns (w, V) with S = V diag(w) V^T, ascending w.
    """
    A = np.array(S, dtype=float, copy=True)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    d = A.shape[-1]
    V = np.broadcast_to(np.eye(d), A.shape).copy()
    offmask = ~np.eye(d, dtype=bool)
    rounds = _round_robin(d)
    eye = np.eye(d)
    for _ in range(max_sweeps):
        total = np.sqrt(np.sum(A * A, axis=(-2, -1)))
        off = np.sqrt(np.sum(np.where(offmask, A * A, 0.0), axis=(-2, -1)))
        if np.all(off <= tol * np.where(total > 0, total, 1.0)):
            break
        for P, Q in rounds:
            apq = A[..., P, Q]
            active = apq != 0.0
            if not np.any(active):
                continue
            safe = np.where(active, apq, 1.0)
            with np.errstate(over="ignore"):  # huge theta just means t = 0
                theta = (A[..., Q, Q] - A[..., P, P]) / (2.0 * safe)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(1.0, theta))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            R = np.broadcast_to(eye, A.shape).copy()
            R[..., P, P] = c
            R[..., Q, Q] = c
            R[..., P, Q] = s
            R[..., Q, P] = -s
            A = np.swapaxes(R, -1, -2) @ A @ R
            A[..., P, Q] = 0.0
            A[..., Q, P] = 0.0
            V = V @ R
    w = np.diagonal(A, axis1=-2, axis2=-1).copy()
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return w, V


def solve_gev_masked(A, B, rtol: float = PIVOT_RTOL):
    """Batched generalized eigenproblem; returns (EigSystem, ok) without raising."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    L, ok, _, _ = cholesky_masked(B, rtol)
    Linv = lower_inverse(L)
    C = Linv @ A @ np.swapaxes(Linv, -1, -2)
    w, Y = jacobi_eigh(C)
    psi = np.swapaxes(Linv, -1, -2) @ Y
    return EigSystem(w, psi), ok


def solve_gev(A, B, rtol: float = PIVOT_RTOL) -> EigSystem:
    """Solve A psi = lambda B psi with B positive definite.

    Eigenvalues ascend; eigenvectors are B-orthonormal. Raises
    DegenerateMatrixError naming the smallest pivot when B is not
    positive definite.
    """
    cholesky(B, rtol)  # validation only; raises with a useful message
    system, _ = solve_gev_masked(A, B, rtol)
    return system


def spectrum_is_degenerate(values, scale, rtol: float = 1e-10) -> np.ndarray:
    """True where the whole spectrum sits inside one cluster of width rtol*scale."""
    values = np.asarray(values, dtype=float)
    spread = values[..., -1] - values[..., 0]
    return spread <= rtol * np.asarray(scale, dtype=float)


def cluster_masks(values, scale, rtol: float = 1e-10):
    """Boolean masks of the eigenvalues tied with the minimum and with the maximum."""
    values = np.asarray(values, dtype=float)
    tol = (rtol * np.asarray(scale, dtype=float))[..., None]
    lo = values <= values[..., :1] + tol
    hi = values >= values[..., -1:] - tol
    return lo, hi


# ---------------------------------------------------------------------------
# general eigenvalues


def _balance(A):
    """Diagonal similarity scaling by powers of two (Parlett and Reinsch)."""
    A = A.copy()
    n = A.shape[0]
    radix = 2.0
    converged = False
    while not converged:
        converged = True
        for i in range(n):
            c = np.sum(np.abs(A[:, i])) - abs(A[i, i])
            r = np.sum(np.abs(A[i, :])) - abs(A[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c > g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                converged = False
                A[i, :] /= f
                A[:, i] *= f
    return A


def hessenberg(A) -> np.ndarray:
    """Upper Hessenberg form by Householder reflections (complex)."""
    H = np.array(A, dtype=complex, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
    return H


def _givens(a, b):
    r = np.hypot(abs(a), abs(b))
    if r == 0.0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, 1.0
    c = abs(a) / r
    s = (a / abs(a)) * np.conj(b) / r
    return c, s


def eigvals_general(A, max_iter_per_value: int = 80) -> np.ndarray:
    """All eigenvalues of a real or complex square matrix.

    Shifted QR iteration on the Hessenberg form with Wilkinson shifts and an
    occasional exceptional shift to break cycles.
    """
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return np.array([complex(A[0, 0])])
    H = hessenberg(_balance(np.array(A, dtype=complex)))
    eps = np.finfo(float).eps
    out = []
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            out.append(H[0, 0])
            break
        l = hi
        while l > 0:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if s == 0.0:
                s = np.linalg.norm(H[: hi + 1, : hi + 1])
            if abs(H[l, l - 1]) <= eps * s:
                H[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            out.append(H[hi, hi])
            hi -= 1
            its = 0
            continue
        its += 1
        total += 1
        if total > max_iter_per_value * n:
            raise ArithmeticError("QR iteration failed to converge")
        if its % 11 == 0:
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1]) * (1 + 1j)
        else:
            a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
            c, d = H[hi, hi - 1], H[hi, hi]
            half = 0.5 * (a + d)
            disc = np.sqrt(half * half - (a * d - b * c))
            mu1, mu2 = half + disc, half - disc
            mu = mu1 if abs(mu1 - d) < abs(mu2 - d) else mu2
        blk = slice(l, hi + 1)
        S = H[blk, blk]
        m = S.shape[0]
        S -= mu * np.eye(m)
        rots = []
        for k in range(m - 1):
            c, s = _givens(S[k, k], S[k + 1, k])
            rk = S[k, k:].copy()
            rk1 = S[k + 1, k:].copy()
            S[k, k:] = c * rk + s * rk1
            S[k + 1, k:] = -np.conj(s) * rk + c * rk1
            rots.append((c, s))
        for k, (c, s) in enumerate(rots):
            top = min(k + 2, m)
            ck = S[:top, k].copy()
            ck1 = S[:top, k + 1].copy()
            S[:top, k] = c * ck + np.conj(s) * ck1
            S[:top, k + 1] = -s * ck + c * ck1
        S += mu * np.eye(m)
        H[blk, blk] = S
    return np.array(out[::-1], dtype=complex)
