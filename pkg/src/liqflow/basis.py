"""Classical polynomial bases defined by a three-term recurrence.

Every basis obeys

    Q_k(x) = (alpha_k x - delta_k) Q_{k-1}(x) - gamma_k Q_{k-2}(x),   Q_0 = 1, Q_{-1} = 0

and polynomials are stored as coefficient vectors over Q_0..Q_n. All
operations (products, argument shifts, calculus, division, roots) are done in
the basis itself; monomials never appear in the computation paths.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BasisMismatchError, DegreeCollapseError

#: trailing coefficients below this fraction of max|c| are dropped by canonicalize
CANONICAL_RTOL = 1e-14
#: leading coefficient below this fraction of max|c| makes root finding refuse
ROOT_LEADING_RTOL = 1e-12


class BasisKind(str, enum.Enum):
    LAGUERRE = "laguerre"
    LEGENDRE = "legendre"
    SHIFTED_LEGENDRE = "shifted_legendre"
    CHEBYSHEV = "chebyshev"
    HERMITE_E = "hermite_e"


# total mass of the classical orthogonality measure of each basis
_MEASURE_MASS = {
    BasisKind.LAGUERRE: 1.0,  # exp(-x) dx on [0, inf)
    BasisKind.LEGENDRE: 2.0,  # dx on [-1, 1]
    BasisKind.SHIFTED_LEGENDRE: 1.0,  # dx on [0, 1]
    BasisKind.CHEBYSHEV: math.pi,  # dx / sqrt(1 - x^2) on [-1, 1]
    BasisKind.HERMITE_E: math.sqrt(2.0 * math.pi),  # exp(-x^2/2) dx on R
}

_SUPPORT = {
    BasisKind.LAGUERRE: (0.0, math.inf),
    BasisKind.LEGENDRE: (-1.0, 1.0),
    BasisKind.SHIFTED_LEGENDRE: (0.0, 1.0),
    BasisKind.CHEBYSHEV: (-1.0, 1.0),
    BasisKind.HERMITE_E: (-math.inf, math.inf),
}


def _legendre_rec(k):
    return (2 * k - 1) / k, 0.0, (k - 1) / k


def _base_recurrence(kind, k):
    if kind is BasisKind.LAGUERRE:
        # k L_k = (2k - 1 - x) L_{k-1} - (k - 1) L_{k-2}
        return -1.0 / k, -(2 * k - 1) / k, (k - 1) / k
    if kind is BasisKind.LEGENDRE:
        return _legendre_rec(k)
    if kind is BasisKind.SHIFTED_LEGENDRE:
        # P_k(2x - 1): same table as Legendre through the argument map y = 2x - 1
        a, d, g = _legendre_rec(k)
        return 2.0 * a, d + a, g
    if kind is BasisKind.CHEBYSHEV:
        if k == 1:
            return 1.0, 0.0, 0.0
        return 2.0, 0.0, 1.0
    if kind is BasisKind.HERMITE_E:
        return 1.0, 0.0, float(k - 1)
    raise ValueError(f"unknown basis kind {kind!r}")


@dataclass(frozen=True)
class Basis:
    """One of the supported polynomial families."""

    kind: BasisKind

    def __repr__(self):
        return f"Basis({self.kind.value})"

    @classmethod
    def from_name(cls, name: str) -> "Basis":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"hermite": "hermite_e", "hermitee": "hermite_e", "sl": "shifted_legendre",
                   "shiftedlegendre": "shifted_legendre"}
        return cls(BasisKind(aliases.get(key, key)))

    def recurrence(self, k: int) -> tuple[float, float, float]:
        """(alpha_k, delta_k, gamma_k) for k >= 1."""
        if k < 1:
            raise ValueError("recurrence coefficients start at k = 1")
        return _base_recurrence(self.kind, k)

    @property
    def support(self) -> tuple[float, float]:
        return _SUPPORT[self.kind]

    @property
    def measure_mass(self) -> float:
        return _MEASURE_MASS[self.kind]

    def measure_moments(self, order: int) -> np.ndarray:
        """Moments <Q_k> of the classical weight of this basis, k = 0..order."""
        m = np.zeros(order + 1)
        m[0] = self.measure_mass
        return m

    def values(self, x, order: int) -> np.ndarray:
        """Q_0(x)..Q_order(x), stacked on a new trailing axis."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (order + 1,))
        out[..., 0] = 1.0
        if order == 0:
            return out
        alpha, delta, gamma = recurrence_arrays(self, order)
        out[..., 1] = alpha[1] * x - delta[1]
        for k in range(2, order + 1):
            out[..., k] = (alpha[k] * x - delta[k]) * out[..., k - 1] - gamma[k] * out[..., k - 2]
        return out


LAGUERRE = Basis(BasisKind.LAGUERRE)
LEGENDRE = Basis(BasisKind.LEGENDRE)
SHIFTED_LEGENDRE = Basis(BasisKind.SHIFTED_LEGENDRE)
CHEBYSHEV = Basis(BasisKind.CHEBYSHEV)
HERMITE_E = Basis(BasisKind.HERMITE_E)


@functools.lru_cache(maxsize=128)
def recurrence_arrays(basis: Basis, order: int):
    """Arrays alpha, delta, gamma indexed 0..order (index 0 unused)."""
    alpha = np.zeros(order + 1)
    delta = np.zeros(order + 1)
    gamma = np.zeros(order + 1)
    for k in range(1, order + 1):
        alpha[k], delta[k], gamma[k] = basis.recurrence(k)
    for a in (alpha, delta, gamma):
        a.flags.writeable = False
    return alpha, delta, gamma


@functools.lru_cache(maxsize=128)
def xmul_matrix(basis: Basis, size: int) -> np.ndarray:
    """Square matrix of multiplication by x on span(Q_0..Q_{size-1}).

    Column j holds the coefficients of x*Q_j; the Q_size component of the
    last column falls outside the span and is dropped.
    """
    alpha, delta, gamma = recurrence_arrays(basis, size)
    X = np.zeros((size, size))
    for j in range(size):
        a = alpha[j + 1]
        X[j, j] = delta[j + 1] / a
        if j + 1 < size:
            X[j + 1, j] = 1.0 / a
        if j >= 1:
            X[j - 1, j] = gamma[j + 1] / a
    X.flags.writeable = False
    return X


def xmul(basis: Basis, coeffs) -> np.ndarray:
    """Coefficients of x * p (one degree higher)."""
    c = np.asarray(coeffs, dtype=float)
    X = xmul_matrix(basis, c.shape[-1] + 1)
    return c @ X[:, : c.shape[-1]].T


@functools.lru_cache(maxsize=64)
def linearization_table(basis: Basis, n: int) -> np.ndarray:
    """C[i, j, k] with Q_i Q_j = sum_k C[i, j, k] Q_k for i, j <= n.

    Generated by running the recurrence on the multiplication-by-x operator:
    Q_i(X) e_j is the coefficient vector of Q_i Q_j.
    """
    size = 2 * n + 1
    X = xmul_matrix(basis, size)
    alpha, delta, gamma = recurrence_arrays(basis, max(n, 1))
    eye = np.eye(size)
    P_prev = np.zeros((size, size))
    P = eye.copy()
    C = np.empty((n + 1, n + 1, size))
    C[0] = P[:, : n + 1].T
    for i in range(1, n + 1):
        P_next = alpha[i] * (X @ P) - delta[i] * P - gamma[i] * P_prev
        P_prev, P = P, P_next
        C[i] = P[:, : n + 1].T
    C.flags.writeable = False
    return C


@functools.lru_cache(maxsize=64)
def derivative_matrix(basis: Basis, size: int) -> np.ndarray:
    """D with column k = coefficients of Q_k' (strictly upper triangular)."""
    X = xmul_matrix(basis, size)
    alpha, delta, gamma = recurrence_arrays(basis, max(size - 1, 1))
    D = np.zeros((size, size))
    for k in range(1, size):
        col = alpha[k] * (X @ D[:, k - 1]) - delta[k] * D[:, k - 1]
        col[k - 1] += alpha[k]
        if k >= 2:
            col -= gamma[k] * D[:, k - 2]
        D[:, k] = col
    D.flags.writeable = False
    return D


class Poly:
    """Polynomial sum_k coeffs[k] * Q_k(x) in a fixed basis. Immutable."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: Basis, coeffs):
        c = np.array(coeffs, dtype=float, copy=True).reshape(-1)
        if c.size == 0:
            c = np.zeros(1)
        c.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @classmethod
    def basis_element(cls, basis: Basis, k: int) -> "Poly":
        c = np.zeros(k + 1)
        c[k] = 1.0
        return cls(basis, c)

    @classmethod
    def constant(cls, basis: Basis, value: float) -> "Poly":
        return cls(basis, [value])

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def canonical(self) -> "Poly":
        c = self.coeffs
        scale = np.max(np.abs(c))
        if scale == 0.0:
            return Poly(self.basis, [0.0])
        keep = np.nonzero(np.abs(c) >= CANONICAL_RTOL * scale)[0]
        return Poly(self.basis, c[: keep[-1] + 1])

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, self.coeffs.size))
        out[: self.coeffs.size] = self.coeffs
        return out

    def __call__(self, x):
        return eval_poly(self, x)

    def _check(self, other):
        if not isinstance(other, Poly):
            return Poly.constant(self.basis, float(other))
        if other.basis != self.basis:
            raise BasisMismatchError(f"{self.basis!r} vs {other.basis!r}")
        return other

    def __add__(self, other):
        other = self._check(other)
        size = max(self.coeffs.size, other.coeffs.size)
        return Poly(self.basis, self.padded(size) + other.padded(size))

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.basis, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.basis, self.coeffs * float(other))
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Poly(self.basis, self.coeffs / float(scalar))

    def __divmod__(self, other):
        return synthetic_divide(self, other)

    def deriv(self):
        return differentiate(self)

    def integ(self):
        return integrate(self)

    def roots(self):
        return roots_confederate(self)

    def allclose(self, other, atol=1e-12) -> bool:
        other = self._check(other)
        size = max(self.coeffs.size, other.coeffs.size)
        return bool(np.allclose(self.padded(size), other.padded(size), rtol=0, atol=atol))

    def __repr__(self):
        return f"Poly({self.basis.kind.value}, {np.array2string(self.coeffs, precision=6)})"


def eval_poly(p: Poly, x):
    """Evaluate p at x with the Clenshaw backward recurrence."""
    x = np.asarray(x, dtype=float)
    c = p.coeffs
    n = c.size - 1
    alpha, delta, gamma = recurrence_arrays(p.basis, n + 2)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(n, -1, -1):
        b0 = c[k] + (alpha[k + 1] * x - delta[k + 1]) * b1 - gamma[k + 2] * b2
        b2, b1 = b1, b0
    return b1 if b1.ndim else float(b1)


def multiply(p: Poly, q: Poly) -> Poly:
    if p.basis != q.basis:
        raise BasisMismatchError(f"cannot multiply {p.basis!r} by {q.basis!r}")
    n = max(p.degree, q.degree)
    C = linearization_table(p.basis, n)
    prod = np.einsum("i,j,ijk->k", p.padded(n + 1), q.padded(n + 1), C)
    return Poly(p.basis, prod[: p.degree + q.degree + 1])


def shift_argument(basis: Basis, n: int, a: float, b: float) -> np.ndarray:
    """Row k holds d^(k) with Q_k(a x + b) = sum_j d^(k)_j Q_j(x), k = 0..n."""
    size = n + 1
    X = xmul_matrix(basis, size)
    alpha, delta, gamma = recurrence_arrays(basis, max(n, 1))
    R = np.zeros((size, size))
    R[0, 0] = 1.0
    for k in range(1, size):
        prev = R[k - 1]
        arg = a * (X @ prev) + b * prev
        row = alpha[k] * arg - delta[k] * prev
        if k >= 2:
            row -= gamma[k] * R[k - 2]
        R[k] = row
    return R


def differentiate(p: Poly) -> Poly:
    if p.degree == 0:
        return Poly(p.basis, [0.0])
    D = derivative_matrix(p.basis, p.degree + 1)
    return Poly(p.basis, (D @ p.coeffs)[:-1])


def integrate(p: Poly, anchor: float = 0.0) -> Poly:
    """Antiderivative in the same basis, vanishing at ``anchor`` (default x = 0)."""
    n = p.degree
    D = derivative_matrix(p.basis, n + 2)
    U = D[: n + 1, 1:]  # upper triangular, diagonal = leading coefficient of Q_k'
    c = np.zeros(n + 2)
    rhs = p.coeffs
    for i in range(n, -1, -1):
        c[i + 1] = (rhs[i] - U[i, i + 1:] @ c[i + 2:]) / U[i, i]
    out = Poly(p.basis, c)
    c[0] = -eval_poly(out, anchor)
    return Poly(p.basis, c)


def synthetic_divide(p: Poly, d: Poly) -> tuple[Poly, Poly]:
    """Return (q, r) with p = q*d + r and deg r < deg d."""
    if p.basis != d.basis:
        raise BasisMismatchError(f"{p.basis!r} vs {d.basis!r}")
    d = d.canonical()
    if d.degree == 0:
        if d.coeffs[0] == 0.0:
            raise ZeroDivisionError("division by the zero polynomial")
        return Poly(p.basis, p.coeffs / d.coeffs[0]), Poly(p.basis, [0.0])
    m = p.degree
    nd = d.degree
    if m < nd:
        return Poly(p.basis, [0.0]), p
    if nd == 1:
        return _divide_linear(p, d)
    return _divide_system(p, d)


def _divide_system(p: Poly, d: Poly):
    # columns are Q_j * d; the top rows form a triangular system for q
    m = p.degree
    nd = d.degree
    cols = []
    for j in range(m - nd + 1):
        cols.append(multiply(Poly.basis_element(p.basis, j), d).padded(m + 1))
    A = np.column_stack(cols)
    q = np.linalg.solve(A[nd:, :], p.coeffs[nd:])
    r = p.coeffs - A @ q
    return Poly(p.basis, q), Poly(p.basis, r[:nd])


def _divide_linear(p: Poly, d: Poly):
    # d = lead * (x - root); run the x*Q_j relation top-down
    alpha1, delta1, _ = p.basis.recurrence(1)
    d0, d1 = d.coeffs
    lead = d1 * alpha1
    root = (d1 * delta1 - d0) / lead
    m = p.degree
    X = xmul_matrix(p.basis, m + 2)
    pc = p.coeffs
    q = np.zeros(m + 2)
    for k in range(m, 0, -1):
        acc = pc[k] - (X[k, k] - root) * q[k] - X[k, k + 1] * q[k + 1]
        q[k - 1] = acc / X[k, k - 1]
    rem = pc[0] - ((X[0, 0] - root) * q[0] + X[0, 1] * q[1])
    return Poly(p.basis, q[:m] / lead), Poly(p.basis, [rem])


def confederate_matrix(p: Poly) -> np.ndarray:
    """Matrix of multiplication by x modulo p on span(Q_0..Q_{m-1})."""
    p = p.canonical()
    c = p.coeffs
    m = p.degree
    if m < 1:
        raise DegreeCollapseError("constant polynomial has no roots")
    if abs(c[-1]) < ROOT_LEADING_RTOL * np.max(np.abs(c)):
        raise DegreeCollapseError(f"leading coefficient {c[-1]:.3e} is numerically zero")
    alpha_m = p.basis.recurrence(m)[0]
    A = np.array(xmul_matrix(p.basis, m))
    A[:, m - 1] -= c[:m] / (c[m] * alpha_m)
    return A


def roots_confederate(p: Poly) -> np.ndarray:
    """Complex roots of p, sorted by real then imaginary part."""
    from .linalg import eigvals_general

    A = confederate_matrix(p)
    r = eigvals_general(A)
    # conjugate pairs share a real part only up to rounding; compare on a grid
    scale = max(1.0, float(np.max(np.abs(r))))
    key = np.round(r.real / scale, 10)
    order = np.lexsort((r.imag, key))
    return r[order]


def moments_from_sample(basis: Basis, x, w, order: int) -> np.ndarray:
    """m_k = sum_j Q_k(x_j) w_j for k = 0..order."""
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float)
    if x.size == 0:
        return np.zeros((order + 1,) + w.shape[1:])
    V = basis.values(x, order)
    return np.tensordot(V, w, axes=([0], [0]))
