"""Gauss, Radau and Kronrod quadratures computed from moments, and the
two-point skewness estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import Basis, Poly, xmul
from .errors import DegenerateMatrixError, KronrodInfeasible
from .linalg import eigvals_general, solve_gev
from .matrices import build_matrix, weighted_moments


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.nodes.size

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))

    def rows(self):
        return zip(self.nodes, self.weights)


def _x_poly(basis: Basis) -> np.ndarray:
    return xmul(basis, [1.0])


def orthogonal_poly(basis: Basis, moments, degree: int) -> Poly:
    """Degree-``degree`` orthogonal polynomial of the measure, Q_degree-leading.

    Needs moments up to 2*degree. Works for signed (quasi-definite) measures.
    """
    m = np.asarray(moments, dtype=float)
    if degree == 0:
        return Poly(basis, [1.0])
    M = build_matrix(basis, m[: 2 * degree + 1], degree)
    try:
        c = np.linalg.solve(M[:degree, :degree], M[:degree, degree])
    except np.linalg.LinAlgError as exc:
        raise DegenerateMatrixError("moment matrix is singular") from exc
    return Poly(basis, np.append(-c, 1.0))


def gauss(basis: Basis, moments, points: int | None = None) -> Quadrature:
    """Gauss quadrature with ``points`` nodes (default len(moments)//2).

    Nodes solve M[x] psi = lambda M[1] psi; weights are 1/psi_k(x_k)^2.
    """
    m = np.asarray(moments, dtype=float)
    g = m.size // 2 if points is None else int(points)
    if g < 1 or m.size < 2 * g:
        raise ValueError(f"{g}-point Gauss quadrature needs {2 * g} moments, got {m.size}")
    n = g - 1
    G = build_matrix(basis, m[: 2 * n + 1], n)
    mx = weighted_moments(basis, m[: 2 * g], _x_poly(basis), 2 * n)
    Mx = build_matrix(basis, mx, n)
    w_eig, psi = solve_gev(Mx, G)
    Qn = basis.values(w_eig, n)  # (g, n+1)
    psi_at_node = np.einsum("ki,ik->k", Qn, psi)
    return Quadrature(w_eig, 1.0 / psi_at_node**2)


def radau(basis: Basis, moments, x0: float, points: int | None = None) -> Quadrature:
    """Quadrature with a prescribed node x0 at the edge of the support.

    Gauss is run on the measure |x - x0| dmu, then x0 is reattached with the
    weight that restores the total mass.
    """
    m = np.asarray(moments, dtype=float)
    if points is None:
        points = (m.size - 1) // 2 + 1
    g = points - 1
    if m.size < 2 * g + 1:
        raise ValueError(f"{points}-point Radau quadrature needs {2 * g + 1} moments")
    m0 = m[0]
    mean = weighted_moments(basis, m[:2], _x_poly(basis), 0)[0] / m0
    sign = 1.0 if mean > x0 else -1.0
    factor = sign * (_x_poly(basis) - np.array([x0, 0.0]))
    if g == 0:
        return Quadrature(np.array([float(x0)]), np.array([m0]))
    mm = weighted_moments(basis, m[: 2 * g + 1], factor, 2 * g - 1)
    try:
        inner = gauss(basis, mm, g)
    except DegenerateMatrixError as exc:
        raise DegenerateMatrixError(f"x0={x0} is not at the edge of the support: {exc}") from exc
    w = inner.weights / (sign * (inner.nodes - x0))
    if np.any(w <= 0):
        raise DegenerateMatrixError(f"x0={x0} is not at the edge of the support")
    nodes = np.append(inner.nodes, x0)
    weights = np.append(w, m0 - np.sum(w))
    order = np.argsort(nodes)
    return Quadrature(nodes[order], weights[order])


def kronrod(basis: Basis, moments, gauss_points: int | None = None) -> Quadrature:
    """Extend g-point Gauss by the g+1 roots of the Stieltjes polynomial.

    The Stieltjes polynomial is the degree g+1 orthogonal polynomial of the
    signed measure P_g dmu. Needs moments up to 3g+1. Raises
    KronrodInfeasible when the extension has complex nodes or non-positive
    weights.
    """
    m = np.asarray(moments, dtype=float)
    if gauss_points is None:
        gauss_points = (m.size - 2) // 3
    g = int(gauss_points)
    need = 3 * g + 2
    if g < 1 or m.size < need:
        raise ValueError(f"Kronrod extension of {g}-point Gauss needs {need} moments")
    inner = gauss(basis, m, g)
    P = orthogonal_poly(basis, m, g)
    sm = weighted_moments(basis, m[:need], P, 2 * g + 1)
    Gs = build_matrix(basis, sm[: 2 * g + 1], g)
    smx = weighted_moments(basis, sm, _x_poly(basis), 2 * g)
    Ms = build_matrix(basis, smx, g)
    try:
        T = np.linalg.solve(Gs, Ms)
    except np.linalg.LinAlgError as exc:
        raise KronrodInfeasible("signed measure moment matrix is singular") from exc
    ext = eigvals_general(T)
    scale = max(1.0, float(np.max(np.abs(ext))))
    if np.any(np.abs(ext.imag) > 1e-9 * scale):
        raise KronrodInfeasible(f"extension nodes are complex: {ext}")
    nodes = np.sort(np.concatenate([inner.nodes, ext.real]))
    k = nodes.size
    V = basis.values(nodes, k - 1).T
    try:
        weights = np.linalg.solve(V, m[:k])
    except np.linalg.LinAlgError as exc:
        raise KronrodInfeasible("extension nodes collide with Gauss nodes") from exc
    if np.any(weights <= 0):
        raise KronrodInfeasible(f"non-positive weights {weights}")
    return Quadrature(nodes, weights)


# ---------------------------------------------------------------------------
# skewness


@dataclass(frozen=True)
class Skewness:
    gamma: float
    gamma_x: float
    x1: float
    x2: float
    w1: float
    w2: float
    mean: float


def monomial_moments(basis: Basis, moments, order: int) -> np.ndarray:
    """<x^j> for j = 0..order from basis moments <Q_k>."""
    m = np.asarray(moments, dtype=float)
    out = np.empty(order + 1)
    c = np.array([1.0])
    for j in range(order + 1):
        out[j] = c @ m[: c.size]
        c = xmul(basis, c)
    return out


def skewness_gamma(moments, basis: Basis | None = None) -> Skewness:
    """Two-point quadrature skewness from m0..m3.

    ``moments`` are monomial moments <x^j> unless ``basis`` is given, in which
    case they are basis moments <Q_k> and get converted first.
    """
    if basis is not None:
        m0, m1, m2, m3 = monomial_moments(basis, moments, 3)
    else:
        m0, m1, m2, m3 = (float(v) for v in np.asarray(moments, dtype=float)[:4])
    if m0 <= 0:
        raise ValueError("m0 must be positive")
    d = m2 * m0 - m1 * m1
    if d <= 1e-14 * max(abs(m2 * m0), 1e-300):
        raise ValueError("zero variance: the measure is a point mass")
    a = (m3 * m1 - m2 * m2) / d
    b = (m2 * m1 - m3 * m0) / d
    disc = math.sqrt(max(b * b - 4.0 * a, 0.0))
    x1 = (-b - disc) / 2.0
    x2 = (-b + disc) / 2.0
    mean = m1 / m0
    w1 = m0 * (mean - x2) / (x1 - x2)
    w2 = m0 * (x1 - mean) / (x1 - x2)
    gamma = (w1 - w2) / (w1 + w2)
    return Skewness(gamma, (x1 + x2) / 2.0 - mean, x1, x2, w1, w2, mean)


def chi2_moments(k: float) -> np.ndarray:
    return np.array([1.0, k, k * (k + 2), k * (k + 2) * (k + 4)])


def chi2_skewness_table(ks):
    """Rows (k, Gamma, standard skewness, half the standard skewness)."""
    rows = []
    for k in ks:
        s = skewness_gamma(chi2_moments(k))
        g1 = math.sqrt(8.0 / k)
        rows.append((k, s.gamma, g1, 0.5 * g1))
    return rows


def classical_moments(basis: Basis, order: int) -> np.ndarray:
    """Basis moments of the basis' own weight (mass in slot 0, zeros elsewhere)."""
    return basis.measure_moments(order)
