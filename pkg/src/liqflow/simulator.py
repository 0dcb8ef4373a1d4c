"""Deterministic backtester for liquidity-deficit / liquidity-excess trading.

Rules per Ready frame (WarmUp frames are ignored):

* deficit (I0 < I_IL) and flat: buy when last_dir > th, sell short when
  last_dir < -th, otherwise stay flat;
* excess (I0 > I_IH): take dir from the frame, remember it as last_dir,
  close a long when dir > th and cover a short when dir < -th;
* anything else: hold.

Positions are limited to {-unit, 0, +unit}, so long and short never flip
without passing through flat.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .basis import Basis
from .indicators import DEFAULT_WARMUP_TAU, Estimator, IndicatorFrame, IndicatorTable, compute_frames
from .linalg import solve_gev
from .matrices import build_matrix
from .streaming import DEFAULT_BASIS, DEFAULT_N, DEFAULT_TAU, MU, NU_P, derivative_moments, moment_frames
from .tickio import TickArrays


class Side(str, enum.Enum):
    BUY = "buy"  # open long
    SELL = "sell"  # close long
    SHORT = "short"  # open short
    COVER = "cover"  # close short


class Episode(str, enum.Enum):
    DEFICIT = "Deficit"
    NORMAL = "Normal"
    EXCESS = "Excess"


class Strategy(str, enum.Enum):
    LIQUIDITY_DIRECTIONAL = "LiquidityDirectional"
    VOLATILITY_SIGNAL = "VolatilitySignal"
    NULL = "Null"

    @classmethod
    def parse(cls, name) -> "Strategy":
        if isinstance(name, Strategy):
            return name
        key = str(name).replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ValueError(f"unknown strategy {name!r}; choose from {', '.join(s.value for s in cls)}")


@dataclass(frozen=True)
class StrategyConfig:
    th: float = 0.85
    unit_size: int = 100
    fee_per_share_taker: float = 0.003
    rebate_per_share_maker: float = 0.002
    force_flat_at_end: bool = True
    fill_slippage_ticks: float = 1.0
    tick_size: float = 0.01
    #: dir assumed before the first excess episode; None keeps the engine flat until then
    initial_dir: float | None = None
    #: entries rest as passive orders: no slippage, maker rebate instead of taker fee
    entry_as_maker: bool = False
    #: relative margin on I0 versus the thresholds, so rounding noise does not flip regimes
    signal_rtol: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.th < 1.0:
            raise ValueError("th must lie in (0, 1)")
        if int(self.unit_size) != self.unit_size or self.unit_size < 1:
            raise ValueError("unit_size must be a positive integer")
        if self.fill_slippage_ticks < 0 or self.tick_size <= 0:
            raise ValueError("slippage and tick size must be non-negative / positive")


@dataclass(frozen=True)
class PortfolioState:
    position: int = 0
    cash: float = 0.0
    last_dir: float | None = None
    episode: Episode = Episode.NORMAL


@dataclass(frozen=True)
class Order:
    t_ns: int
    side: Side
    price: float  # fill price
    shares: int
    fee: float  # positive = paid, negative = rebate received
    reason: str  # episode that triggered it, or "end"

    @property
    def signed_shares(self) -> int:
        return self.shares if self.side in (Side.BUY, Side.COVER) else -self.shares

    @property
    def opens(self) -> bool:
        return self.side in (Side.BUY, Side.SHORT)


def classify(frame: IndicatorFrame, config: StrategyConfig) -> Episode:
    r = config.signal_rtol
    if frame.I0 < frame.I_IL * (1.0 - r):
        return Episode.DEFICIT
    if frame.I0 > frame.I_IH * (1.0 + r):
        return Episode.EXCESS
    return Episode.NORMAL


def _fill(t_ns, side, price, shares, config, maker=False) -> Order:
    if maker:
        return Order(t_ns, side, price, shares, -config.rebate_per_share_maker * shares, "")
    slip = config.fill_slippage_ticks * config.tick_size
    px = price + slip if side in (Side.BUY, Side.COVER) else price - slip
    return Order(t_ns, side, px, shares, config.fee_per_share_taker * shares, "")


def apply_order(p: PortfolioState, order: Order) -> PortfolioState:
    ds = order.signed_shares
    return replace(p, position=p.position + ds, cash=p.cash - order.price * ds - order.fee)


def step(portfolio: PortfolioState, frame: IndicatorFrame, config: StrategyConfig):
    """Advance the state machine by one frame; returns (portfolio, order or None)."""
    if not frame.ready:
        return portfolio, None
    episode = classify(frame, config)
    p = replace(portfolio, episode=episode)
    u = int(config.unit_size)
    order = None
    if episode is Episode.EXCESS:
        d = frame.dir
        p = replace(p, last_dir=d)
        if p.position > 0 and d > config.th:
            order = _fill(frame.t_ns, Side.SELL, frame.price, u, config)
        elif p.position < 0 and d < -config.th:
            order = _fill(frame.t_ns, Side.COVER, frame.price, u, config)
    elif episode is Episode.DEFICIT and p.position == 0 and p.last_dir is not None:
        maker = config.entry_as_maker
        if p.last_dir > config.th:
            order = _fill(frame.t_ns, Side.BUY, frame.price, u, config, maker)
        elif p.last_dir < -config.th:
            order = _fill(frame.t_ns, Side.SHORT, frame.price, u, config, maker)
    if order is not None:
        order = replace(order, reason=episode.value)
        p = apply_order(p, order)
    return p, order


# ---------------------------------------------------------------------------
# reports


def _round(x: float) -> float:
    # stable JSON: 12 significant digits hide last-bit noise but keep cents exact
    return float(f"{x:.12g}")


@dataclass
class BacktestReport:
    strategy: str
    config: dict
    trades: list = field(default_factory=list)
    pnl_cash: float = 0.0
    fees_paid: float = 0.0
    rebates: float = 0.0
    max_drawdown: float = 0.0
    final_position: int = 0
    episode_counts: dict = field(default_factory=dict)
    frames: int = 0
    ready_frames: int = 0
    signals: list = field(default_factory=list)
    proxy_pnl: float = 0.0

    @property
    def trade_count(self) -> int:
        return len(self.trades)

    def reconcile(self) -> float:
        """P&L recomputed from the trade list: -sum p dS - fees + rebates."""
        terms = [-o.price * o.signed_shares for o in self.trades] + [-o.fee for o in self.trades]
        return math.fsum(terms)

    def to_dict(self) -> dict:
        trades = [
            {"t_ns": o.t_ns, "side": o.side.value, "price": _round(o.price), "shares": o.shares,
             "fee": _round(o.fee), "reason": o.reason}
            for o in self.trades
        ]
        summary = {
            "strategy": self.strategy,
            "pnl_cash": _round(self.pnl_cash),
            "fees_paid": _round(self.fees_paid),
            "rebates": _round(self.rebates),
            "max_drawdown": _round(self.max_drawdown),
            "trade_count": self.trade_count,
            "final_position": self.final_position,
            "episode_counts": self.episode_counts,
            "frames": self.frames,
            "ready_frames": self.ready_frames,
            "proxy_pnl": _round(self.proxy_pnl),
        }
        signals = [{"t_ns": t, "signal": s, "mark": _round(m)} for t, s, m in self.signals]
        return {"config": self.config, "summary": summary, "trades": trades, "signals": signals}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def blotter_rows(self):
        for o in self.trades:
            yield o.t_ns, o.side.value, o.price, o.shares, o.fee


def _episode_counts(episodes) -> dict:
    counts = {e.value: 0 for e in Episode}
    prev = None
    for e in episodes:
        if e is not None and e is not prev:
            counts[e.value] += 1
        prev = e
    return counts


def simulate(table: IndicatorTable, strategy, config: StrategyConfig, last_tick=None) -> BacktestReport:
    """Run the state machine over an indicator table.

    ``last_tick`` is (t_ns, price) of the final tick, used for the
    end-of-stream flattening; defaults to the last frame.
    """
    strategy = Strategy.parse(strategy)
    cfg = {k: (v.value if isinstance(v, enum.Enum) else v) for k, v in asdict(config).items()}
    report = BacktestReport(strategy.value, cfg, frames=len(table), ready_frames=int(np.sum(table.ready)))
    episodes = []
    if strategy is Strategy.NULL:
        report.episode_counts = _episode_counts([])
        return report
    if strategy is Strategy.VOLATILITY_SIGNAL:
        return _simulate_volatility(table, config, report)

    p = PortfolioState(last_dir=config.initial_dir)
    peak = 0.0
    mdd = 0.0
    for frame in table:
        p, order = step(p, frame, config)
        episodes.append(p.episode if frame.ready else None)
        if order is not None:
            report.trades.append(order)
        equity = p.cash + p.position * frame.price
        peak = max(peak, equity)
        mdd = max(mdd, peak - equity)
    if config.force_flat_at_end and p.position != 0:
        if last_tick is None:
            last_tick = (int(table.t_ns[-1]), float(table.price[-1]))
        side = Side.SELL if p.position > 0 else Side.COVER
        order = replace(_fill(int(last_tick[0]), side, float(last_tick[1]), abs(p.position), config), reason="end")
        p = apply_order(p, order)
        report.trades.append(order)
        peak = max(peak, p.cash)
        mdd = max(mdd, peak - p.cash)
    report.final_position = p.position
    report.pnl_cash = report.reconcile()
    report.fees_paid = math.fsum(o.fee for o in report.trades if o.fee > 0)
    report.rebates = math.fsum(-o.fee for o in report.trades if o.fee < 0)
    report.max_drawdown = mdd
    report.episode_counts = _episode_counts(episodes)
    return report


def _simulate_volatility(table: IndicatorTable, config: StrategyConfig, report: BacktestReport) -> BacktestReport:
    # abstract long-volatility signals marked against J; no cash trades
    holding = False
    entry = 0.0
    pnl = []
    episodes = []
    for frame in table:
        if not frame.ready:
            episodes.append(None)
            continue
        e = classify(frame, config)
        episodes.append(e)
        if e is Episode.DEFICIT and not holding:
            holding, entry = True, frame.J
            report.signals.append((frame.t_ns, "enter_long_vol", frame.J))
        elif e is Episode.EXCESS and holding:
            holding = False
            pnl.append((frame.J - entry) * config.unit_size)
            report.signals.append((frame.t_ns, "close_long_vol", frame.J))
    if holding and config.force_flat_at_end:
        ready = np.nonzero(table.ready)[0]
        last = table[int(ready[-1])]
        pnl.append((last.J - entry) * config.unit_size)
        report.signals.append((last.t_ns, "close_long_vol", last.J))
    report.proxy_pnl = math.fsum(pnl)
    report.episode_counts = _episode_counts(episodes)
    return report


def run_backtest(ticks: TickArrays, strategy=Strategy.LIQUIDITY_DIRECTIONAL, config: StrategyConfig | None = None,
                 basis: Basis = DEFAULT_BASIS, n: int = DEFAULT_N, tau: float = DEFAULT_TAU, decimate: int = 1,
                 estimator=Estimator.MATRIX, warmup_tau: float = DEFAULT_WARMUP_TAU) -> BacktestReport:
    """Ticks -> moments -> indicator frames -> state machine."""
    config = config or StrategyConfig()
    if len(ticks) == 0:
        return simulate(IndicatorTable.concat([]), strategy, config)
    frames = moment_frames(ticks, basis, n, tau, decimate)
    table = compute_frames(frames, estimator, warmup_tau)
    return simulate(table, strategy, config, last_tick=(int(ticks.t_ns[-1]), float(ticks.price[-1])))


# ---------------------------------------------------------------------------
# P&L operator spectra


class PnLSpectrum(NamedTuple):
    lam_min: float
    lam_max: float
    bound: float  # lam_max - lam_min: buy at the lowest, sell at the highest price state
    dpdt_extremal: float  # eigenvalue of M[dp/dt] with the largest magnitude (price units per second)


def pnl_spectrum(basis: Basis, m_mu, m_p, n: int, tau: float | None = None, p_now: float | None = None) -> PnLSpectrum:
    """Spectra of M[p] and M[dp/dt] against the Gram matrix of the time measure.

    ``m_mu`` and ``m_p`` are the mu and p channel moments to order 2n. The
    dp/dt part needs ``tau`` and ``p_now`` and is NaN without them.
    """
    G = build_matrix(basis, np.asarray(m_mu)[: 2 * n + 1], n)
    Mp = build_matrix(basis, np.asarray(m_p)[: 2 * n + 1], n)
    lam = solve_gev(Mp, G).eigenvalues
    ext = math.nan
    if tau is not None and p_now is not None:
        md = derivative_moments(basis, m_p, p_now, tau, 2 * n, m_mu=m_mu)
        lam_d = solve_gev(build_matrix(basis, md, n), G).eigenvalues
        ext = float(lam_d[np.argmax(np.abs(lam_d))])
    return PnLSpectrum(float(lam[0]), float(lam[-1]), float(lam[-1] - lam[0]), ext)


def pnl_operator_examples(state, n: int | None = None) -> PnLSpectrum:
    """P&L operator spectra of a stream state (or snapshot) at dimension n+1."""
    snap = state.snapshot() if hasattr(state, "snapshot") else state
    n = snap.n if n is None else n
    return pnl_spectrum(snap.basis, snap.moments[:, MU], snap.moments[:, NU_P], n, snap.tau, snap.last_price)
