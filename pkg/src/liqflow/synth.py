"""Seeded synthetic tick streams for tests, demos and the CLI."""

from __future__ import annotations

import enum

import numpy as np

from .tickio import TickArrays

NS_PER_S = 1_000_000_000
T0_NS = 1_348_146_000 * NS_PER_S  # arbitrary fixed epoch so files are reproducible


class Scenario(str, enum.Enum):
    CONSTANT_RATE = "ConstantRate"
    REGIME_SWITCH = "RegimeSwitch"
    TREND_BURST = "TrendBurst"
    PRICE_ONLY = "PriceOnly"

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        key = name.replace("-", "").replace("_", "").lower()
        for s in cls:
            if s.value.lower() == key:
                return s
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(s.value for s in cls)}")


def _clock(duration_s: float, dt_s: float = 1.0) -> np.ndarray:
    k = int(np.floor(duration_s / dt_s + 1e-9))
    return T0_NS + np.round(np.arange(k) * dt_s * NS_PER_S).astype(np.int64)


def _tick_round(p, tick=0.01):
    return np.round(np.asarray(p) / tick) * tick


def constant_rate(duration_s: float, rate: float = 100.0, price: float = 10.0, seed: int = 0,
                  dt_s: float = 1.0, walk: float = 0.0) -> TickArrays:
    """Regular ticks carrying rate*dt_s shares each; optional price random walk."""
    t = _clock(duration_s, dt_s)
    rng = np.random.default_rng(seed)
    p = price + np.cumsum(rng.normal(0.0, walk, t.size)) if walk > 0 else np.full(t.size, price)
    p = np.maximum(_tick_round(p), 0.01)
    v = np.full(t.size, rate * dt_s)
    return TickArrays(t, p, v)


def regime_switch(duration_s: float, seed: int = 0, tau: float = 128.0, low: float = 20.0, high: float = 200.0,
                  period_tau: float = 2.0, price: float = 10.0, vol: float = 0.01) -> TickArrays:
    """One tick per second; volume alternates between a low and a high regime.

    Each regime lasts period_tau * tau / 2 seconds. Volumes are Poisson
    around the regime level and the price follows a tick-sized random walk
    that drifts with the flow.
    """
    t = _clock(duration_s)
    rng = np.random.default_rng(seed)
    sec = np.arange(t.size)
    half = max(period_tau * tau / 2.0, 1.0)
    in_high = (sec // half).astype(int) % 2 == 1
    level = np.where(in_high, high, low)
    v = rng.poisson(level).astype(float)
    drift = np.where(in_high, rng.choice([-1.0, 1.0]) * 0.2 * vol, 0.0)
    p = price + np.cumsum(rng.normal(0.0, vol, t.size) + drift)
    return TickArrays(t, np.maximum(_tick_round(p), 0.01), v)


def trend_burst(duration_s: float, seed: int = 0, price: float = 20.0, base: float = 50.0) -> TickArrays:
    """Bear drift in the first half, then a volatile bull with volume bursts."""
    t = _clock(duration_s)
    rng = np.random.default_rng(seed)
    k = t.size
    split = k // 2
    steps = np.empty(k)
    steps[:split] = rng.normal(-0.004, 0.01, split)
    steps[split:] = rng.normal(0.006, 0.03, k - split)
    level = np.full(k, base)
    n_bursts = max(1, (k - split) // 300)
    for start in rng.integers(split, max(split + 1, k - 60), n_bursts):
        span = int(rng.integers(20, 60))
        level[start:start + span] *= rng.uniform(4.0, 8.0)
    v = rng.poisson(level).astype(float)
    p = price + np.cumsum(steps)
    return TickArrays(t, np.maximum(_tick_round(p), 0.01), v)


def price_only(duration_s: float, q: float = 0.05, price: float = 10.0, volume: float = 1.0) -> TickArrays:
    """Price alternating by +q / -q every second at constant volume."""
    t = _clock(duration_s)
    p = price + q * (np.arange(t.size) % 2)
    return TickArrays(t, p, np.full(t.size, volume))


def generate(scenario, duration_s: float, seed: int = 0, tau: float = 128.0) -> TickArrays:
    scenario = Scenario.parse(scenario) if isinstance(scenario, str) else scenario
    if scenario is Scenario.CONSTANT_RATE:
        return constant_rate(duration_s, seed=seed)
    if scenario is Scenario.REGIME_SWITCH:
        return regime_switch(duration_s, seed=seed, tau=tau)
    if scenario is Scenario.TREND_BURST:
        return trend_burst(duration_s, seed=seed)
    return price_only(duration_s)
