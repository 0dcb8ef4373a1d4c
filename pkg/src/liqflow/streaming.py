"""Exponential-measure moments of tick channels, updated tick by tick.

Time enters through the age y = (t_now - t) / tau of a past event. The two
time bases map it to a polynomial variable:

* shifted Legendre: x = exp(-y) on [0, 1], dmu = dx, "now" is x0 = 1;
* Laguerre: x = y on [0, inf), dmu = exp(-x) dx, "now" is x0 = 0.

In both cases a point event of weight w at age y contributes
Q_k(x(y)) * w * exp(-y) to moment k. Moving the anchor forward by s = dt/tau
multiplies every contribution by exp(-s) and maps the argument through an
affine law, which is applied to stored moments with ``shift_argument``.

Channels (second axis of the moment array):

0. mu      time measure; each tick adds the exact weight mass of the interval since the previous tick
1. v       volume
2. p       price times the mu increment (so p/mu averages price over time)
3. pv      price times volume
4. absdp   absolute price change against the previous tick
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .basis import LAGUERRE, SHIFTED_LEGENDRE, Basis, Poly, differentiate, multiply, shift_argument, xmul
from .errors import TickOrderError
from .tickio import Tick, TickArrays

CHANNELS = ("mu", "v", "p", "pv", "absdp")
MU, NU_V, NU_P, NU_PV, NU_ABSDP = range(5)
TIME_BASES = (SHIFTED_LEGENDRE, LAGUERRE)
NS_PER_S = 1_000_000_000

DEFAULT_BASIS = SHIFTED_LEGENDRE
DEFAULT_N = 6
DEFAULT_TAU = 128.0

# beyond this many tau the old moments are below double precision relative to new ones
_FORGET_SHIFT = 60.0


def _check_basis(basis: Basis) -> Basis:
    if basis not in TIME_BASES:
        raise ValueError(f"streaming moments need a time basis (shifted Legendre or Laguerre), got {basis!r}")
    return basis


def anchor(basis: Basis) -> float:
    """The polynomial variable value that corresponds to "now"."""
    return 1.0 if _check_basis(basis) == SHIFTED_LEGENDRE else 0.0


def coordinate(basis: Basis, age):
    """Polynomial variable for events ``age`` tau-units in the past."""
    age = np.asarray(age, dtype=float)
    if basis == SHIFTED_LEGENDRE:
        return np.exp(-age)
    return age


def min_timescale(n: int, tau: float) -> float:
    """Shortest resolvable feature, in seconds, for an order-n state."""
    return tau / (n + 1)


@functools.lru_cache(maxsize=4096)
def shift_operator(basis: Basis, order: int, s: float) -> np.ndarray:
    """Matrix taking moments at anchor t to moments at anchor t + s*tau."""
    decay = math.exp(-s)
    if basis == SHIFTED_LEGENDRE:
        S = shift_argument(basis, order, decay, 0.0)
    else:
        S = shift_argument(basis, order, 1.0, s)
    S = decay * S
    S.flags.writeable = False
    return S


def tick_weights(dt_s, price, volume, prev_price, tau: float, first: bool = False) -> np.ndarray:
    """Per-tick channel weights, shape (k, 5).

    ``dt_s`` is the time since the previous tick in seconds. When ``first``
    is set the first row belongs to the very first tick of the stream and
    gets no time mass.
    """
    dt_s = np.asarray(dt_s, dtype=float)
    price = np.asarray(price, dtype=float)
    volume = np.asarray(volume, dtype=float)
    mu = -np.expm1(-dt_s / tau)
    if first:
        mu = mu.copy()
        mu[0] = 0.0
    W = np.empty(price.shape + (5,))
    W[..., MU] = mu
    W[..., NU_V] = volume
    W[..., NU_P] = price * mu
    W[..., NU_PV] = price * volume
    W[..., NU_ABSDP] = np.abs(price - np.asarray(prev_price, dtype=float))
    return W


def batch_moments(basis: Basis, n: int, tau: float, ticks: TickArrays, t_anchor: int | None = None) -> np.ndarray:
    """Moments of all five channels computed in one pass from the full tick list.

    The anchor defaults to the last tick time.
    """
    _check_basis(basis)
    order = 2 * n + 2
    if len(ticks) == 0:
        return np.zeros((order + 1, 5))
    t = ticks.t_ns
    if t_anchor is None:
        t_anchor = int(t[-1])
    dt = np.diff(t, prepend=t[0]) / NS_PER_S
    prev_p = np.concatenate([ticks.price[:1], ticks.price[:-1]])
    W = tick_weights(dt, ticks.price, ticks.volume, prev_p, tau, first=True)
    age = (t_anchor - t) / NS_PER_S / tau
    V = basis.values(coordinate(basis, age), order)
    return V.T @ (W * np.exp(-age)[:, None])


@dataclass(frozen=True)
class MomentSnapshot:
    """Immutable copy of a stream state at one instant."""

    basis: Basis
    n: int
    tau: float
    t_now: int
    t_first: int
    last_price: float
    tick_count: int
    moments: np.ndarray  # (2n+3, 5)

    @property
    def x0(self) -> float:
        return anchor(self.basis)

    @property
    def history_s(self) -> float:
        return (self.t_now - self.t_first) / NS_PER_S

    def channel(self, name) -> np.ndarray:
        idx = CHANNELS.index(name) if isinstance(name, str) else int(name)
        return self.moments[:, idx]


class TickStreamState:
    """Streaming moment state of one instrument (single writer)."""

    def __init__(self, basis: Basis = DEFAULT_BASIS, n: int = DEFAULT_N, tau: float = DEFAULT_TAU):
        self.basis = _check_basis(basis)
        if n < 0:
            raise ValueError("n must be non-negative")
        if not tau > 0:
            raise ValueError("tau must be positive")
        self.n = int(n)
        self.tau = float(tau)
        self.order = 2 * self.n + 2
        self.moments = np.zeros((self.order + 1, 5))
        self.t_now: int | None = None
        self.t_first: int | None = None
        self.t_last_tick: int | None = None
        self.last_price: float | None = None
        self.tick_count = 0

    @property
    def x0(self) -> float:
        return anchor(self.basis)

    @property
    def min_timescale(self) -> float:
        return min_timescale(self.n, self.tau)

    def _move_anchor(self, t_ns: int) -> None:
        if self.t_now is None:
            self.t_now = t_ns
            return
        dt = t_ns - self.t_now
        if dt < 0:
            raise TickOrderError(f"time {t_ns} precedes the current anchor {self.t_now}")
        if dt == 0:
            return
        s = dt / NS_PER_S / self.tau
        if s > _FORGET_SHIFT:
            self.moments[:] = 0.0
        else:
            self.moments = shift_operator(self.basis, self.order, s) @ self.moments
        self.t_now = t_ns

    def advance_to(self, t_ns: int) -> "TickStreamState":
        """Clock tick: move "now" to t_ns without adding any event."""
        self._move_anchor(int(t_ns))
        return self

    def ingest(self, tick: Tick) -> "TickStreamState":
        t, p, v = int(tick.t_ns), float(tick.price), float(tick.volume)
        if not math.isfinite(p) or p <= 0:
            raise ValueError(f"price must be finite and positive, got {p!r}")
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"volume must be non-negative, got {v!r}")
        self._move_anchor(t)
        if self.t_last_tick is None:
            mu = 0.0
            dp = 0.0
            self.t_first = t
        else:
            mu = -math.expm1(-(t - self.t_last_tick) / NS_PER_S / self.tau)
            dp = abs(p - self.last_price)
        # Q_k(x0) = 1 for k >= 0 in both time bases
        self.moments += np.array([mu, v, p * mu, p * v, dp])
        self.t_last_tick = t
        self.last_price = p
        self.tick_count += 1
        return self

    def ingest_many(self, ticks: TickArrays) -> "TickStreamState":
        """Ingest a block of ticks with a single anchor move.

        Equivalent to calling ``ingest`` on each tick (up to rounding).
        """
        k = len(ticks)
        if k == 0:
            return self
        if k == 1:
            return self.ingest(ticks[0])
        t = ticks.t_ns
        if self.t_now is not None and t[0] < self.t_now:
            raise TickOrderError(f"time {int(t[0])} precedes the current anchor {self.t_now}")
        first = self.t_last_tick is None
        t_prev = t[0] if first else self.t_last_tick
        p_prev = ticks.price[0] if first else self.last_price
        dt = np.diff(t, prepend=t_prev) / NS_PER_S
        prev_p = np.concatenate([[p_prev], ticks.price[:-1]])
        W = tick_weights(dt, ticks.price, ticks.volume, prev_p, self.tau, first=first)
        t_end = int(t[-1])
        self._move_anchor(t_end)
        age = (t_end - t) / NS_PER_S / self.tau
        V = self.basis.values(coordinate(self.basis, age), self.order)
        self.moments += V.T @ (W * np.exp(-age)[:, None])
        if first:
            self.t_first = int(t[0])
        self.t_last_tick = t_end
        self.last_price = float(ticks.price[-1])
        self.tick_count += k
        return self

    def snapshot(self) -> MomentSnapshot:
        if self.t_now is None:
            raise ValueError("no ticks ingested")
        m = self.moments.copy()
        m.flags.writeable = False
        return MomentSnapshot(self.basis, self.n, self.tau, self.t_now, self.t_first if self.t_first is not None else self.t_now,
                              self.last_price if self.last_price is not None else math.nan, self.tick_count, m)

    def p_aver(self) -> float:
        return p_aver(self)


def ingest(state: TickStreamState, tick: Tick) -> TickStreamState:
    return state.ingest(tick)


def p_aver(state) -> float:
    """Exponential moving average of price: <p>/<1> on the time measure."""
    if getattr(state, "tick_count", 0) == 0:
        raise ValueError("p_aver of an empty state")
    m = state.moments
    if m[0, MU] <= 0.0:
        return float(state.last_price)
    return float(m[0, NU_P] / m[0, MU])


@dataclass(frozen=True)
class MomentFrames:
    """Stacked snapshots taken at selected ticks."""

    basis: Basis
    n: int
    tau: float
    t_ns: np.ndarray
    price: np.ndarray
    history_s: np.ndarray
    moments: np.ndarray  # (F, 2n+3, 5)

    def __len__(self):
        return int(self.t_ns.size)

    def snapshot(self, i: int) -> MomentSnapshot:
        t = int(self.t_ns[i])
        return MomentSnapshot(self.basis, self.n, self.tau, t, t - int(round(self.history_s[i] * NS_PER_S)),
                              float(self.price[i]), -1, self.moments[i])


def frame_indices(count: int, decimate: int) -> np.ndarray:
    """Indices of the ticks that produce a frame: every ``decimate``-th tick."""
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    return np.arange(decimate - 1, count, decimate)


def _block_sums(basis: Basis, order: int, tau: float, t, W, idx, start: int) -> np.ndarray:
    """Moments of each frame's own ticks, anchored at that frame's tick.

    Ticks ``start..idx[0]`` form the first block, ``idx[f-1]+1..idx[f]`` the rest.
    """
    ends = t[idx]
    owner = np.repeat(np.arange(idx.size), np.diff(np.concatenate([[start - 1], idx])))
    age = (ends[owner] - t[start: idx[-1] + 1]) / NS_PER_S / tau
    V = basis.values(coordinate(basis, age), order)
    Wd = W[start: idx[-1] + 1] * np.exp(-age)[:, None]
    out = np.zeros((idx.size, order + 1, W.shape[1]))
    step = 1 << 15
    for a in range(0, age.size, step):
        part = np.einsum("jk,jc->jkc", V[a:a + step], Wd[a:a + step])
        own = owner[a:a + step]
        heads = np.flatnonzero(np.diff(own, prepend=-1))
        out[own[heads]] += np.add.reduceat(part, heads, axis=0)
    return out


def moment_frames(ticks: TickArrays, basis: Basis = DEFAULT_BASIS, n: int = DEFAULT_N, tau: float = DEFAULT_TAU,
                  decimate: int = 1, state: TickStreamState | None = None) -> MomentFrames:
    """Run a stream through a state and record moments at every decimate-th tick.

    The ticks between two frames are summed in one vectorized pass, so only
    the anchor moves run per frame.
    """
    if state is None:
        state = TickStreamState(basis, n, tau)
    idx = frame_indices(len(ticks), decimate)
    out = np.empty((idx.size, state.order + 1, 5))
    if idx.size:
        t = np.asarray(ticks.t_ns, dtype=np.int64)
        price = np.asarray(ticks.price, dtype=float)
        volume = np.asarray(ticks.volume, dtype=float)
        if not (np.all(np.isfinite(price)) and np.all(price > 0)):
            raise ValueError("price must be finite and positive")
        if not (np.all(np.isfinite(volume)) and np.all(volume >= 0)):
            raise ValueError("volume must be non-negative")
        if np.any(np.diff(t) < 0) or (state.t_now is not None and t[0] < state.t_now):
            raise TickOrderError("tick times must be non-decreasing and not precede the current anchor")
        first = state.t_last_tick is None
        t_prev = t[0] if first else state.t_last_tick
        p_prev = price[0] if first else state.last_price
        dt = np.diff(t, prepend=t_prev) / NS_PER_S
        W = tick_weights(dt, price, volume, np.concatenate([[p_prev], price[:-1]]), state.tau, first=first)
        blocks = _block_sums(state.basis, state.order, state.tau, t, W, idx, 0)
        M = state.moments
        t_now = state.t_now
        for f, i in enumerate(idx):
            ti = int(t[i])
            if t_now is not None and ti != t_now:
                sh = (ti - t_now) / NS_PER_S / state.tau
                M = np.zeros_like(M) if sh > _FORGET_SHIFT else shift_operator(state.basis, state.order, sh) @ M
            M = M + blocks[f]
            out[f] = M
            t_now = ti
        last = int(idx[-1])
        state.moments = M.copy()
        state.t_now = t_now
        if first:
            state.t_first = int(t[0])
        state.t_last_tick = t_now
        state.last_price = float(price[last])
        state.tick_count += last + 1
        if last + 1 < len(ticks):
            state.ingest_many(ticks[last + 1:])
    else:
        state.ingest_many(ticks)
    t_first = int(ticks.t_ns[0]) if len(ticks) else 0
    t_sel = np.asarray(ticks.t_ns[idx], dtype=np.int64)
    return MomentFrames(state.basis, state.n, state.tau, t_sel, np.asarray(ticks.price[idx], dtype=float),
                        (t_sel - t_first) / NS_PER_S, out)


def derivative_moments(basis: Basis, m_p, p_now: float, tau: float, order: int, m_mu=None) -> np.ndarray:
    """<Q_k dp/dt>_mu for k = 0..order by integration by parts.

    ``m_p`` are the moments <Q_j p>_mu (the p channel); the boundary term at
    "now" uses ``p_now``. The result is in price units per second.

    Streamed moments put each interval's time mass at its closing tick, which
    breaks integration by parts at order dt/tau. Passing the matching ``m_mu``
    integrates (p - p_now) instead, whose boundary term vanishes, so a
    constant price gives exactly zero.
    """
    m_p = np.asarray(m_p, dtype=float)
    if m_mu is not None:
        m_p = m_p - p_now * np.asarray(m_mu, dtype=float)[: m_p.size]
        p_now = 0.0
    out = np.empty(order + 1)
    x0 = anchor(basis)
    ones = basis.values(x0, order)
    x_poly = Poly(basis, xmul(basis, [1.0]))
    for k in range(order + 1):
        qk = Poly.basis_element(basis, k)
        if basis == SHIFTED_LEGENDRE:
            g = differentiate(multiply(x_poly, qk))
            out[k] = ones[k] * p_now - g.coeffs @ m_p[: g.coeffs.size]
        else:
            g = differentiate(qk) - qk
            out[k] = ones[k] * p_now + g.coeffs @ m_p[: g.coeffs.size]
    return out / tau
