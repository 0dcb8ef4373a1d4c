"""Function and density estimators built from moment matrices.

All functions take precomputed matrices; ``basis`` is needed only to
evaluate the vector Q(x) = (Q_0(x), ..., Q_n(x)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import LEGENDRE, Basis, Poly, moments_from_sample
from .linalg import spd_inverse, spd_solve
from .matrices import build_matrix

#: rn_matrix refuses denominators below this value
RN_DENOMINATOR_FLOOR = 1e-300


def _qvec(basis: Basis, G, x):
    dim = np.shape(G)[-1]
    return basis.values(x, dim - 1)


def least_squares_interp(basis: Basis, mf, G, x):
    """Least-squares approximation Q(x)^T G^-1 mf."""
    coef = spd_solve(G, mf)
    return np.einsum("...i,i->...", _qvec(basis, G, x), coef)


def christoffel(basis: Basis, G, x):
    """K(x, x) = Q(x)^T G^-1 Q(x); its reciprocal is the Christoffel function."""
    Q = _qvec(basis, G, x)
    Ginv = spd_inverse(G)
    return np.einsum("...i,ij,...j->...", Q, Ginv, Q)


def rn_ratio(basis: Basis, G_mu, G_nu, x):
    """Radon-Nikodym estimate dnu/dmu as the ratio K(x,x,mu) / K(x,x,nu)."""
    return christoffel(basis, G_mu, x) / christoffel(basis, G_nu, x)


def rn_matrix(basis: Basis, G_mu, M_num, M_den, x):
    """Ratio of quadratic forms on the state localized at x.

    With y = G_mu^-1 Q(x) this is (y^T M_num y) / (y^T M_den y).
    """
    y = spd_solve(G_mu, _qvec(basis, G_mu, x).T).T
    num = np.einsum("...i,ij,...j->...", y, M_num, y)
    den = np.einsum("...i,ij,...j->...", y, M_den, y)
    if np.any(np.abs(den) < RN_DENOMINATOR_FLOOR):
        raise ZeroDivisionError("denominator quadratic form vanishes")
    return num / den


def nevai(basis: Basis, G, Mf, x):
    """Nevai operator: rn_matrix with the Gram matrix as denominator."""
    return rn_matrix(basis, G, Mf, G, x)


@dataclass(frozen=True)
class LocalizedState:
    """psi_0(x) = Q(x)^T G^-1 Q(x0) / sqrt(K(x0, x0))."""

    poly: Poly
    x0: float

    @property
    def coeffs(self) -> np.ndarray:
        return self.poly.coeffs


def localized_state(basis: Basis, G, x0: float) -> LocalizedState:
    Q0 = basis.values(x0, np.shape(G)[-1] - 1)
    y = spd_solve(G, Q0)
    return LocalizedState(Poly(basis, y / np.sqrt(Q0 @ y)), float(x0))


# ---------------------------------------------------------------------------
# Runge demonstration


def runge(x):
    return 1.0 / (1.0 + 25.0 * np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class RungeTable:
    x: np.ndarray
    f: np.ndarray
    a_ls: np.ndarray
    a_rn: np.ndarray

    def rows(self):
        return zip(self.x, self.f, self.a_ls, self.a_rn)


def runge_matrices(n: int, grid: int = 20001, func=runge, basis: Basis = LEGENDRE):
    """Gram, M[f] and <Q_k f> for dmu = dx on [-1, 1] by trapezoid integration."""
    t = np.linspace(-1.0, 1.0, grid)
    w = np.full(grid, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    ft = func(t)
    m = moments_from_sample(basis, t, w, 2 * n)
    mf2 = moments_from_sample(basis, t, w * ft, 2 * n)
    G = build_matrix(basis, m, n)
    Mf = build_matrix(basis, mf2, n)
    return G, Mf, mf2[: n + 1]


def runge_demo(n: int = 6, x=None, grid: int = 20001) -> RungeTable:
    """Least squares against Radon-Nikodym approximation of 1/(1+25x^2)."""
    if n < 2:
        raise ValueError("runge_demo needs n >= 2")
    if x is None:
        x = np.linspace(-1.5, 1.5, 301)
    x = np.asarray(x, dtype=float)
    G, Mf, mf = runge_matrices(n, grid)
    f = runge(x)
    a_ls = least_squares_interp(LEGENDRE, mf, G, x)
    a_rn = nevai(LEGENDRE, G, Mf, x)
    return RungeTable(x, f, a_ls, a_rn)
