"""Moment matrices M_ij = <Q_i f Q_j> and the averages built from them."""

from __future__ import annotations

import numpy as np

from .basis import Basis, Poly, linearization_table
from .linalg import EigSystem, solve_gev, spd_inverse, spd_solve

__all__ = [
    "build_matrix",
    "weighted_moments",
    "solve_gev",
    "EigSystem",
    "trace_average",
    "trace_product_average",
    "vector_covariance",
    "product_average",
]


def build_matrix(basis: Basis, moments, n: int | None = None) -> np.ndarray:
    """(n+1) x (n+1) matrix sum_k c_k^{ij} m_k from moments m_0..m_{2n}.

    ``moments`` may carry leading batch axes; the polynomial index is the
    last axis. By default n is the largest value the moments support.
    """
    m = np.asarray(moments, dtype=float)
    L = m.shape[-1]
    if n is None:
        n = (L - 1) // 2
    if n < 0 or L < 2 * n + 1:
        raise ValueError(f"need {2 * n + 1} moments for a {n + 1}x{n + 1} matrix, got {L}")
    C = linearization_table(basis, n)
    return np.einsum("ijk,...k->...ij", C, m[..., : 2 * n + 1])


def weighted_moments(basis: Basis, moments, g, order: int | None = None) -> np.ndarray:
    """Moments <Q_k g> of the measure g dmu, for k = 0..order.

    ``g`` is a Poly or a coefficient vector in ``basis``. Needs moments up
    to order + deg g.
    """
    coeffs = g.coeffs if isinstance(g, Poly) else np.asarray(g, dtype=float)
    m = np.asarray(moments, dtype=float)
    dg = coeffs.size - 1
    if order is None:
        order = m.shape[-1] - 1 - dg
    if order < 0 or m.shape[-1] < order + dg + 1:
        raise ValueError(f"need {order + dg + 1} moments, got {m.shape[-1]}")
    size = max(order, dg)
    C = linearization_table(basis, size)
    # <Q_k g> = sum_j g_j <Q_k Q_j> = sum_j g_j sum_l C[k, j, l] m_l
    g_pad = np.zeros(size + 1)
    g_pad[: dg + 1] = coeffs
    T = np.einsum("kjl,j->kl", C[: order + 1], g_pad)
    width = min(T.shape[1], m.shape[-1])
    return np.einsum("kl,...l->...k", T[:, :width], m[..., :width])


def trace_average(G, Mf) -> float:
    """Spur(G^-1 M[f]) / dim."""
    G = np.asarray(G, dtype=float)
    X = spd_solve(G, Mf)
    return np.trace(X, axis1=-2, axis2=-1) / G.shape[-1]


def trace_product_average(G, Mf, Mg) -> float:
    """Spur(G^-1 M[f] G^-1 M[g]) / dim."""
    G = np.asarray(G, dtype=float)
    Ginv = spd_inverse(G)
    return np.trace(Ginv @ Mf @ Ginv @ Mg, axis1=-2, axis2=-1) / G.shape[-1]


def product_average(mf, mg, G) -> float:
    """mf^T G^-1 mg normalized by the mass m0 = G_00: the estimate of <f g>/<1>."""
    G = np.asarray(G, dtype=float)
    y = spd_solve(G, mg)
    return np.einsum("...i,...i->...", np.asarray(mf, dtype=float), y) / G[..., 0, 0]


def vector_covariance(mf, mg, G) -> float:
    """Covariance of f and g from their moment vectors <Q_k f>, <Q_k g>.

    Uses <fg> ~ mf^T G^-1 mg; both terms are divided by m0 so the result is a
    covariance per unit mass when <1> differs from one.
    """
    G = np.asarray(G, dtype=float)
    mf = np.asarray(mf, dtype=float)
    mg = np.asarray(mg, dtype=float)
    m0 = G[..., 0, 0]
    return product_average(mf, mg, G) - (mf[..., 0] / m0) * (mg[..., 0] / m0)
