"""Liquidity indicators computed from streaming moment snapshots.

All quantities are evaluated for stacks of frames at once; the per-snapshot
functions at the bottom wrap a one-frame stack.

Notation: G = M_mu[1] is the Gram matrix of the time measure, M_v, M_pv and
M_dp are the matrices of the volume, price*volume and |dp| channels, and
Q0 = Q(x0) is the basis vector at "now".
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .basis import Poly, multiply, xmul
from .errors import WarmUpError
from .linalg import cholesky_masked, cluster_masks, lower_inverse, solve_gev_masked, spectrum_is_degenerate
from .matrices import build_matrix, weighted_moments
from .streaming import anchor, MU, NU_ABSDP, NU_P, NU_PV, NU_V, MomentFrames, MomentSnapshot, TickStreamState

#: relative eigenvalue spread below which the P&L spectrum counts as degenerate
TIE_RTOL = 1e-10
#: history (in units of tau) required before a frame can be Ready
DEFAULT_WARMUP_TAU = 1.0
BLOCK = 4096

COLUMNS = ("t_ns", "price", "I0", "I_IL", "I_IH", "P_IH", "P_IH_N", "P_AVER", "J", "dir", "status")


class Status(str, enum.Enum):
    WARMUP = "WarmUp"
    READY = "Ready"


class Estimator(str, enum.Enum):
    MATRIX = "matrix"  # quadratic-form ratio on the localized state, pi = mu
    CHRISTOFFEL = "christoffel"  # ratio of Christoffel kernels K(x0; mu) / K(x0; nu)


@dataclass(frozen=True)
class IndicatorFrame:
    t_ns: int
    price: float
    I0: float
    I_IL: float
    I_IH: float
    P_IH: float
    P_IH_N: float
    P_AVER: float
    J: float
    dir: float
    status: Status

    @property
    def ready(self) -> bool:
        return self.status is Status.READY


_FLOAT_FIELDS = ("I0", "I_IL", "I_IH", "P_IH", "P_IH_N", "P_AVER", "J", "dir")


@dataclass(frozen=True)
class IndicatorTable:
    """Columnar indicator output; iterate to get IndicatorFrame rows."""

    t_ns: np.ndarray
    price: np.ndarray
    I0: np.ndarray
    I_IL: np.ndarray
    I_IH: np.ndarray
    P_IH: np.ndarray
    P_IH_N: np.ndarray
    P_AVER: np.ndarray
    J: np.ndarray
    dir: np.ndarray
    ready: np.ndarray

    def __len__(self):
        return int(self.t_ns.size)

    def __getitem__(self, i) -> IndicatorFrame:
        vals = {k: float(getattr(self, k)[i]) for k in _FLOAT_FIELDS}
        return IndicatorFrame(int(self.t_ns[i]), float(self.price[i]), status=Status.READY if self.ready[i] else Status.WARMUP, **vals)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            z = np.zeros(0)
            return cls(np.zeros(0, np.int64), z, z, z, z, z, z, z, z, z, np.zeros(0, bool))
        return cls(**{k: np.concatenate([getattr(p, k) for p in parts]) for k in cls.__dataclass_fields__})


class _Core(NamedTuple):
    I0: np.ndarray
    I_IL: np.ndarray
    I_IH: np.ndarray
    P_IH: np.ndarray
    P_IH_N: np.ndarray
    J: np.ndarray
    dir: np.ndarray
    ready: np.ndarray
    phi_IL: np.ndarray  # (F, n) coefficients of phi for the extremal boundary states
    phi_IH: np.ndarray


def _boundary_poly(basis, x0):
    lin = Poly(basis, xmul(basis, [1.0])) - x0
    return lin, multiply(lin, lin)


def _quad(v, M):
    return np.einsum("...i,...ij,...j->...", v, M, v)


def _core(basis, n, tau, m, estimator=Estimator.MATRIX) -> _Core:
    """Indicator values for a stack of moment arrays m of shape (F, 2n+3, 5)."""
    if n < 1:
        raise ValueError("indicators need n >= 1")
    x0 = anchor(basis)
    m = np.asarray(m, dtype=float)
    G = build_matrix(basis, m[:, : 2 * n + 1, MU], n)
    Mv = build_matrix(basis, m[:, : 2 * n + 1, NU_V], n)
    Mpv = build_matrix(basis, m[:, : 2 * n + 1, NU_PV], n)
    Mdp = build_matrix(basis, m[:, : 2 * n + 1, NU_ABSDP], n)
    q0 = basis.values(x0, n)

    L, ok, _, _ = cholesky_masked(G)
    Linv = lower_inverse(L)
    Ginv = np.swapaxes(Linv, -1, -2) @ Linv
    y = Ginv @ q0  # G^-1 Q0
    K = y @ q0  # Christoffel kernel K(x0, x0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if Estimator(estimator) is Estimator.CHRISTOFFEL:
            Lv, okv, _, _ = cholesky_masked(Mv)
            Lvi = lower_inverse(Lv)
            Kv = np.sum((Lvi @ q0) ** 2, axis=-1)
            I0 = np.where(okv, K / Kv, np.nan) / tau
        else:
            I0 = _quad(y, Mv) / K / tau
        J = _quad(y, Mdp) / K / tau

    # boundary-condition problem on (x - x0)^2 dmu and (x - x0)^2 dnu_v, dimension n
    lin, sq = _boundary_poly(basis, x0)
    order = 2 * (n - 1)
    Gt = build_matrix(basis, weighted_moments(basis, m[:, : 2 * n + 1, MU], sq, order), n - 1)
    Mvt = build_matrix(basis, weighted_moments(basis, m[:, : 2 * n + 1, NU_V], sq, order), n - 1)
    bsys, okt = solve_gev_masked(Mvt, Gt)
    lam_b = bsys.eigenvalues
    phi = bsys.eigenvectors
    phi_IL = phi[..., :, 0]
    phi_IH = phi[..., :, -1]
    # psi = (x - x0) phi, coefficients of degree n
    xm = np.asarray(xmul(basis, np.eye(n)))  # row j: x * Q_j
    lift = xm - x0 * np.eye(n, n + 1)  # (n, n+1)
    psi_IH = phi_IH @ lift
    with np.errstate(divide="ignore", invalid="ignore"):
        den_IH = _quad(psi_IH, Mv)
        P_IH = _quad(psi_IH, Mpv) / den_IH

    # unconstrained problem M_v psi = lambda G psi for P_IH_N
    usys, _ = solve_gev_masked(Mv, G)
    lam_u_max = usys.eigenvalues[..., -1]
    psi_N = usys.eigenvectors[..., :, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        den_N = _quad(psi_N, Mv)
        P_IH_N = _quad(psi_N, Mpv) / den_N

    # direction from the P&L operator M[(p - P_IH) I]
    P_safe = np.where(np.isfinite(P_IH), P_IH, 0.0)
    Mpl = Mpv - P_safe[:, None, None] * Mv
    psys, _ = solve_gev_masked(Mpl, G)
    lam = psys.eigenvalues
    at_now = np.einsum("fij,i->fj", psys.eigenvectors, q0) ** 2  # psi_k(x0)^2
    scale = np.maximum(np.max(np.abs(lam), axis=-1), np.abs(P_safe) * np.abs(lam_u_max))
    lo, hi = cluster_masks(lam, scale, TIE_RTOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (np.sum(np.where(hi, at_now, 0.0), axis=-1) - np.sum(np.where(lo, at_now, 0.0), axis=-1)) / K
    degenerate = spectrum_is_degenerate(lam, scale, TIE_RTOL) | ~(scale > 0)
    d = np.where(degenerate, 0.0, np.clip(d, -1.0, 1.0))

    I_IL = lam_b[..., 0] / tau
    I_IH = lam_b[..., -1] / tau
    ready = ok & okt & (I0 > 0) & (den_IH > 0) & (den_N > 0)
    for arr in (I0, I_IL, I_IH, P_IH, P_IH_N, J, d):
        ready &= np.isfinite(arr)
    return _Core(I0, I_IL, I_IH, P_IH, P_IH_N, J, d, ready, phi_IL, phi_IH)


def p_aver_frames(m, price) -> np.ndarray:
    mu0 = m[:, 0, MU]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mu0 > 0, m[:, 0, NU_P] / np.where(mu0 > 0, mu0, 1.0), price)


def compute_frames(frames: MomentFrames, estimator=Estimator.MATRIX, warmup_tau: float = DEFAULT_WARMUP_TAU,
                   block: int = BLOCK) -> IndicatorTable:
    """Indicator table for every frame in ``frames``."""
    parts = []
    for start in range(0, len(frames), block):
        sl = slice(start, start + block)
        m = frames.moments[sl]
        c = _core(frames.basis, frames.n, frames.tau, m, estimator)
        ready = c.ready & (frames.history_s[sl] >= warmup_tau * frames.tau)
        nan = np.full(ready.shape, np.nan)

        def pick(a):
            return np.where(ready, a, nan)

        parts.append(IndicatorTable(
            frames.t_ns[sl], frames.price[sl], pick(c.I0), pick(c.I_IL), pick(c.I_IH), pick(c.P_IH),
            pick(c.P_IH_N), p_aver_frames(m, frames.price[sl]), pick(c.J), pick(c.dir), ready,
        ))
    return IndicatorTable.concat(parts)


# ---------------------------------------------------------------------------
# single snapshot API


def _as_snapshot(state) -> MomentSnapshot:
    if isinstance(state, TickStreamState):
        return state.snapshot()
    return state


def _single(state, estimator=Estimator.MATRIX):
    s = _as_snapshot(state)
    c = _core(s.basis, s.n, s.tau, s.moments[None], estimator)
    if not c.ready[0]:
        raise WarmUpError("moment state is not ready (degenerate Gram matrix or no flow)")
    return s, c


def execution_flow_now(state, estimator=Estimator.MATRIX) -> float:
    """I0: shares per second at "now"."""
    return float(_single(state, estimator)[1].I0[0])


class Thresholds(NamedTuple):
    I_IL: float
    I_IH: float
    psi_IL: Poly
    psi_IH: Poly


def thresholds(state) -> Thresholds:
    s, c = _single(state)
    x0 = s.x0
    lin = Poly(s.basis, xmul(s.basis, [1.0])) - x0
    psi_IL = multiply(lin, Poly(s.basis, c.phi_IL[0]))
    psi_IH = multiply(lin, Poly(s.basis, c.phi_IH[0]))
    return Thresholds(float(c.I_IL[0]), float(c.I_IH[0]), psi_IL, psi_IH)


def price_of_state(state, psi) -> float:
    """<psi| p I |psi> / <psi| I |psi>."""
    s = _as_snapshot(state)
    coeffs = psi.coeffs if isinstance(psi, Poly) else np.asarray(psi, dtype=float)
    n = coeffs.size - 1
    Mv = build_matrix(s.basis, s.moments[: 2 * n + 1, NU_V], n)
    Mpv = build_matrix(s.basis, s.moments[: 2 * n + 1, NU_PV], n)
    den = coeffs @ Mv @ coeffs
    if not den > 0:
        raise ZeroDivisionError("state carries no volume")
    return float(coeffs @ Mpv @ coeffs / den)


def volatility_flow(state) -> float:
    """J: absolute price change per second at "now"."""
    return float(_single(state)[1].J[0])


def direction(state) -> float:
    return float(_single(state)[1].dir[0])


def indicator_frame(state, estimator=Estimator.MATRIX) -> IndicatorFrame:
    s = _as_snapshot(state)
    c = _core(s.basis, s.n, s.tau, s.moments[None], estimator)
    ready = bool(c.ready[0])
    vals = {k: float(getattr(c, k)[0]) if ready else math.nan for k in ("I0", "I_IL", "I_IH", "P_IH", "P_IH_N", "J")}
    vals["dir"] = float(c.dir[0]) if ready else math.nan
    paver = float(p_aver_frames(s.moments[None], np.array([s.last_price]))[0])
    return IndicatorFrame(s.t_now, s.last_price, P_AVER=paver, status=Status.READY if ready else Status.WARMUP, **vals)
