import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liqflow.basis import SHIFTED_LEGENDRE
from liqflow.indicators import IndicatorFrame, Status, compute_frames
from liqflow.simulator import (
    Episode,
    PortfolioState,
    Side,
    Strategy,
    StrategyConfig,
    pnl_operator_examples,
    pnl_spectrum,
    run_backtest,
    simulate,
    step,
)
from liqflow.streaming import TickStreamState, moment_frames
from liqflow.synth import T0_NS, constant_rate, regime_switch, trend_burst
from liqflow.tickio import TickArrays

CFG = StrategyConfig()


def frame(I0, I_IL=50.0, I_IH=150.0, dir=0.0, price=10.0, ready=True):
    return IndicatorFrame(T0_NS, price, I0, I_IL, I_IH, price, price, price, 0.0, dir,
                          Status.READY if ready else Status.WARMUP)


def test_step_hold_region():
    p, o = step(PortfolioState(last_dir=0.99), frame(100.0), CFG)
    assert o is None and p.position == 0 and p.episode is Episode.NORMAL


def test_step_deficit_entries():
    p, o = step(PortfolioState(last_dir=0.9), frame(10.0), CFG)
    assert o.side is Side.BUY and o.shares == 100 and p.position == 100
    assert o.price == pytest.approx(10.01) and o.fee == pytest.approx(0.3)
    p, o = step(PortfolioState(last_dir=-0.9), frame(10.0), CFG)
    assert o.side is Side.SHORT and p.position == -100 and o.price == pytest.approx(9.99)
    p, o = step(PortfolioState(last_dir=0.5), frame(10.0), CFG)
    assert o is None and p.position == 0
    p, o = step(PortfolioState(last_dir=None), frame(10.0), CFG)
    assert o is None


def test_step_excess_exits_and_latches_dir():
    p, o = step(PortfolioState(position=100, last_dir=0.9), frame(200.0, dir=0.95), CFG)
    assert o.side is Side.SELL and p.position == 0 and p.last_dir == 0.95
    p, o = step(PortfolioState(position=100, last_dir=0.9), frame(200.0, dir=0.2), CFG)
    assert o is None and p.position == 100 and p.last_dir == 0.2
    p, o = step(PortfolioState(position=-100), frame(200.0, dir=-0.9), CFG)
    assert o.side is Side.COVER and p.position == 0
    # never opens during excess
    p, o = step(PortfolioState(), frame(200.0, dir=0.99), CFG)
    assert o is None and p.position == 0


def test_step_ignores_warmup_and_maker_entries():
    p0 = PortfolioState(last_dir=0.9)
    p, o = step(p0, frame(10.0, ready=False), CFG)
    assert p is p0 and o is None
    p, o = step(p0, frame(10.0), StrategyConfig(entry_as_maker=True))
    assert o.price == 10.0 and o.fee == pytest.approx(-0.2)


def test_config_validation():
    for bad in ({"th": 1.0}, {"th": 0.0}, {"unit_size": 0}, {"unit_size": 1.5}):
        with pytest.raises(ValueError):
            StrategyConfig(**bad)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 300), st.floats(-1, 1), st.booleans()), max_size=60))
def test_state_machine_invariants(seq):
    p = PortfolioState(last_dir=0.0)
    for I0, d, ready in seq:
        before = p.position
        p, o = step(p, frame(I0, dir=d, ready=ready), CFG)
        assert p.position in (-100, 0, 100)
        assert not (before != 0 and p.position != 0 and np.sign(before) != np.sign(p.position))
        if o is not None and o.opens:
            assert I0 < 50.0


def constructed_ticks(tau=64.0):
    # quiet accumulation at 10, a lull, a heavy burst at 11, then normal flow at 11
    segs = [(10 * tau, 10.0, 100.0), (1 * tau, 10.0, 5.0), (0.3 * tau, 11.0, 2000.0), (2 * tau, 11.0, 100.0)]
    t, p, v = [], [], []
    start = 0
    for dur, price, rate in segs:
        k = int(dur)
        t.append(start + np.arange(k))
        p.append(np.full(k, price))
        v.append(np.full(k, rate))
        start += k
    t = np.concatenate(t)
    return TickArrays(T0_NS + t.astype(np.int64) * 1_000_000_000, np.concatenate(p), np.concatenate(v))


def oracle(table, cfg):
    """Independent replay of the four-signal rules on plain Python rows."""
    pos, last_dir, cash, trades = 0, cfg.initial_dir, 0.0, []
    slip = cfg.fill_slippage_ticks * cfg.tick_size
    for i in range(len(table)):
        if not table.ready[i]:
            continue
        I0, lo, hi, price, d = (float(table.I0[i]), float(table.I_IL[i]), float(table.I_IH[i]),
                                float(table.price[i]), float(table.dir[i]))
        if I0 > hi * (1 + cfg.signal_rtol):
            last_dir = d
            if pos > 0 and d > cfg.th:
                trades.append(("sell", price - slip))
                cash += (price - slip) * pos - cfg.fee_per_share_taker * pos
                pos = 0
        elif I0 < lo * (1 - cfg.signal_rtol) and pos == 0 and last_dir is not None and last_dir > cfg.th:
            pos = cfg.unit_size
            trades.append(("buy", price + slip))
            cash -= (price + slip) * pos + cfg.fee_per_share_taker * pos
    return trades, cash, pos


def test_constructed_scenario_against_oracle():
    tau = 64.0
    ticks = constructed_ticks(tau)
    cfg = StrategyConfig(initial_dir=1.0)
    table = compute_frames(moment_frames(ticks, SHIFTED_LEGENDRE, 6, tau))
    report = simulate(table, Strategy.LIQUIDITY_DIRECTIONAL, cfg, last_tick=(int(ticks.t_ns[-1]), 11.0))
    trades, cash, pos = oracle(table, cfg)
    assert pos == 0
    assert [(o.side.value, o.price) for o in report.trades] == [(s, pytest.approx(px)) for s, px in trades]
    assert report.pnl_cash == pytest.approx(cash, abs=1e-9)
    assert [o.side for o in report.trades] == [Side.BUY, Side.SELL]
    assert report.trades[0].price == pytest.approx(10.01)
    assert report.trades[1].price == pytest.approx(10.99)
    assert report.trades[1].reason == "Excess"
    assert report.pnl_cash == pytest.approx(100 * 1.0 - 100 * 0.02 - 0.6, abs=1e-9)


def test_without_initial_dir_stays_flat_until_first_excess():
    tau = 64.0
    report = run_backtest(constructed_ticks(tau), config=StrategyConfig(), tau=tau)
    assert report.trade_count == 0


def test_null_strategy_and_empty_stream():
    r = run_backtest(regime_switch(600, seed=1, tau=64.0), Strategy.NULL, tau=64.0)
    assert r.trade_count == 0 and r.pnl_cash == 0.0
    assert run_backtest(TickArrays.empty()).trade_count == 0


def test_determinism_and_reconciliation():
    ticks = trend_burst(3000, seed=7)
    cfg = StrategyConfig(initial_dir=1.0)
    a = run_backtest(ticks, config=cfg, tau=64.0, decimate=2)
    b = run_backtest(ticks, config=cfg, tau=64.0, decimate=2)
    assert a.to_json() == b.to_json() and a.digest() == b.digest()
    expected = math.fsum(-o.price * o.signed_shares - o.fee for o in a.trades)
    assert a.pnl_cash == pytest.approx(expected, abs=1e-9)
    assert a.final_position == 0
    assert sum(o.signed_shares for o in a.trades) == 0
    assert a.max_drawdown >= 0.0
    doc = json.loads(a.to_json())
    assert doc["summary"]["trade_count"] == a.trade_count


def test_no_force_flat_keeps_position():
    tau = 64.0
    ticks = constructed_ticks(tau)
    cut = ticks[: int(10.5 * tau)]  # stops during the lull, after the buy
    r = run_backtest(cut, config=StrategyConfig(initial_dir=1.0, force_flat_at_end=False), tau=tau)
    assert r.final_position == 100
    r = run_backtest(cut, config=StrategyConfig(initial_dir=1.0), tau=tau)
    assert r.final_position == 0 and r.trades[-1].reason == "end"


def test_volatility_signal_strategy():
    r = run_backtest(regime_switch(2000, seed=2, tau=64.0), Strategy.VOLATILITY_SIGNAL, tau=64.0)
    kinds = [s for _, s, _ in r.signals]
    assert r.trade_count == 0
    assert kinds and kinds[0] == "enter_long_vol"
    assert all(a != b for a, b in zip(kinds, kinds[1:]))
    assert math.isfinite(r.proxy_pnl)


def test_pnl_operator_examples():
    st_ = TickStreamState(SHIFTED_LEGENDRE, 4, 64.0).ingest_many(constant_rate(640, price=12.5))
    s = pnl_operator_examples(st_)
    assert s.lam_min == pytest.approx(12.5) and s.lam_max == pytest.approx(12.5)
    assert abs(s.bound) < 1e-9 and abs(s.dpdt_extremal) < 1e-9

    t = np.arange(0, 640)
    two = TickArrays(T0_NS + t * 1_000_000_000, np.where(t < 320, 10.0, 20.0), np.ones(640))
    st2 = TickStreamState(SHIFTED_LEGENDRE, 2, 64.0).ingest_many(two)
    s2 = pnl_operator_examples(st2)
    assert 10.0 <= s2.lam_min < s2.lam_max <= 20.0
    assert s2.bound == pytest.approx(s2.lam_max - s2.lam_min)

    m = st2.moments
    s0 = pnl_spectrum(SHIFTED_LEGENDRE, m[:, 0], m[:, 2], 0)
    assert s0.lam_min == pytest.approx(st2.p_aver()) and math.isnan(s0.dpdt_extremal)
