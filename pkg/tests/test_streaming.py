import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import eval_laguerre, eval_sh_legendre

from liqflow.basis import LAGUERRE, LEGENDRE, SHIFTED_LEGENDRE
from liqflow.errors import TickOrderError
from liqflow.estimators import rn_matrix
from liqflow.matrices import build_matrix
from liqflow.streaming import (
    MU,
    NS_PER_S,
    NU_ABSDP,
    NU_P,
    NU_PV,
    NU_V,
    TickStreamState,
    batch_moments,
    derivative_moments,
    frame_indices,
    ingest,
    min_timescale,
    moment_frames,
    p_aver,
)
from liqflow.synth import T0_NS, constant_rate, regime_switch
from liqflow.tickio import Tick, TickArrays

TIME_BASES = [SHIFTED_LEGENDRE, LAGUERRE]


def brute_force(basis, n, tau, ticks):
    """Direct sum over the tick list with scipy polynomials, anchor at the last tick."""
    order = 2 * n + 2
    out = np.zeros((order + 1, 5))
    t_end = ticks[-1].t_ns
    prev = None
    for tk in ticks:
        age = (t_end - tk.t_ns) / NS_PER_S / tau
        if basis is SHIFTED_LEGENDRE:
            q = np.array([eval_sh_legendre(k, math.exp(-age)) for k in range(order + 1)])
        else:
            q = np.array([eval_laguerre(k, age) for k in range(order + 1)])
        if prev is None:
            mu, dp = 0.0, 0.0
        else:
            mu = 1.0 - math.exp(-(tk.t_ns - prev.t_ns) / NS_PER_S / tau)
            dp = abs(tk.price - prev.price)
        w = np.array([mu, tk.volume, tk.price * mu, tk.price * tk.volume, dp])
        out += np.outer(q, w) * math.exp(-age)
        prev = tk
    return out


def random_ticks(seed, k, spacing_s=2.0):
    rng = np.random.default_rng(seed)
    t = T0_NS + np.cumsum(rng.exponential(spacing_s * NS_PER_S, k)).astype(np.int64)
    p = np.round(10 + np.cumsum(rng.normal(0, 0.02, k)), 2)
    v = rng.integers(0, 500, k).astype(float)
    return TickArrays(t, p, v)


@pytest.mark.parametrize("basis", TIME_BASES, ids=lambda b: b.kind.value)
def test_incremental_matches_brute_force(basis):
    ticks = random_ticks(1, 300)
    st_ = TickStreamState(basis, 3, 60.0)
    for tk in ticks:
        st_.ingest(tk)
    ref = brute_force(basis, 3, 60.0, list(ticks))
    assert np.allclose(st_.moments, ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


@pytest.mark.parametrize("basis", TIME_BASES, ids=lambda b: b.kind.value)
def test_two_batches_equal_one_pass(basis):
    ticks = random_ticks(2, 1000)
    one = TickStreamState(basis, 6, 128.0)
    for tk in ticks:
        one.ingest(tk)
    two = TickStreamState(basis, 6, 128.0)
    two.ingest_many(ticks[:437]).ingest_many(ticks[437:])
    scale = np.abs(one.moments).max(axis=0)
    assert np.all(np.abs(one.moments - two.moments) <= 1e-12 * scale)
    assert np.allclose(batch_moments(basis, 6, 128.0, ticks), one.moments, rtol=1e-12, atol=1e-12 * scale.max())


def test_single_tick_and_constant_price():
    st_ = TickStreamState(SHIFTED_LEGENDRE, 2, 10.0)
    st_.ingest(Tick(T0_NS, 12.5, 300))
    assert np.allclose(st_.moments[:, NU_V], 300.0)
    assert np.allclose(st_.moments[:, MU], 0.0)
    assert p_aver(st_) == 12.5
    for k in range(1, 50):
        ingest(st_, Tick(T0_NS + k * NS_PER_S, 12.5, k))
    assert st_.moments[0, NU_P] / st_.moments[0, MU] == pytest.approx(12.5, rel=1e-13)
    assert st_.tick_count == 50


def test_mu_mass_tends_to_one():
    ticks = constant_rate(30 * 128.0)
    st_ = TickStreamState(SHIFTED_LEGENDRE, 6, 128.0).ingest_many(ticks)
    assert 0 < st_.moments[0, MU] <= 1.0
    assert st_.moments[0, MU] == pytest.approx(1.0, abs=1e-10)


def test_p_aver_step_oracle():
    tau = 64.0
    step_age = tau * math.log(2.0)
    t_end = 40 * tau
    secs = np.arange(0, int(t_end) + 1)
    prices = np.where(secs < t_end - step_age, 10.0, 20.0)
    ticks = TickArrays(T0_NS + secs * NS_PER_S, prices, np.ones(secs.size))
    st_ = TickStreamState(SHIFTED_LEGENDRE, 6, tau).ingest_many(ticks)
    age = (t_end - secs) / tau
    w = np.exp(-age) * np.where(secs == 0, 0.0, 1.0 - math.exp(-1.0 / tau))
    expected = np.sum(w * prices) / np.sum(w)
    assert p_aver(st_) == pytest.approx(expected, rel=1e-12)
    # half-weight point splits the mass evenly (up to one-second granularity)
    assert p_aver(st_) == pytest.approx(15.0, abs=0.15)


def test_p_aver_between_first_price_and_target():
    tau = 30.0
    secs = np.arange(300)
    prices = 20.0 + 10.0 * np.exp(-secs / 40.0)
    st_ = TickStreamState(LAGUERRE, 3, tau).ingest_many(TickArrays(T0_NS + secs * NS_PER_S, prices, np.ones(300)))
    assert 20.0 < p_aver(st_) < 30.0


def test_p_aver_empty_raises():
    with pytest.raises(ValueError):
        p_aver(TickStreamState())


def test_errors():
    st_ = TickStreamState(SHIFTED_LEGENDRE, 2, 10.0)
    st_.ingest(Tick(T0_NS + 5, 10.0, 1))
    with pytest.raises(TickOrderError):
        st_.ingest(Tick(T0_NS, 10.0, 1))
    with pytest.raises(ValueError):
        st_.ingest(Tick(T0_NS + 10, float("nan"), 1))
    with pytest.raises(ValueError):
        TickStreamState(LEGENDRE, 2, 10.0)
    with pytest.raises(ValueError):
        TickStreamState(SHIFTED_LEGENDRE, 2, 0.0)


@pytest.mark.parametrize("basis", TIME_BASES, ids=lambda b: b.kind.value)
def test_clock_tick_only_rescales(basis):
    ticks = random_ticks(3, 200)
    a = TickStreamState(basis, 4, 50.0).ingest_many(ticks)
    b = TickStreamState(basis, 4, 50.0).ingest_many(ticks)
    nxt = Tick(int(ticks.t_ns[-1]) + 7 * NS_PER_S, 10.1, 42)
    b.advance_to(int(ticks.t_ns[-1]) + 3 * NS_PER_S)
    b.advance_to(int(ticks.t_ns[-1]) + 3 * NS_PER_S)  # same time again is a no-op
    a.ingest(nxt)
    b.ingest(nxt)
    assert np.allclose(a.moments, b.moments, rtol=1e-12, atol=1e-12 * np.abs(a.moments).max())


def test_clock_tick_keeps_rate_estimate_on_constant_stream():
    n, tau = 6, 128.0
    st_ = TickStreamState(SHIFTED_LEGENDRE, n, tau).ingest_many(constant_rate(20 * tau))

    def rate(state):
        m = state.moments
        G = build_matrix(SHIFTED_LEGENDRE, m[:, MU], n)
        Mv = build_matrix(SHIFTED_LEGENDRE, m[:, NU_V], n)
        return rn_matrix(SHIFTED_LEGENDRE, G, Mv, G, 1.0) / tau

    before = rate(st_)
    st_.advance_to(st_.t_now + NS_PER_S // 2)
    assert rate(st_) == pytest.approx(before, rel=0.02)


def test_long_gap_forgets_history():
    st_ = TickStreamState(SHIFTED_LEGENDRE, 2, 1.0)
    st_.ingest(Tick(T0_NS, 10.0, 5))
    st_.advance_to(T0_NS + 100 * NS_PER_S)
    assert np.all(st_.moments == 0.0)


def test_absdp_channel_counts_price_changes():
    t = T0_NS + np.arange(5) * NS_PER_S
    ticks = TickArrays(t, [10.0, 10.5, 10.5, 10.0, 10.25], np.ones(5))
    m = batch_moments(SHIFTED_LEGENDRE, 1, 1e9, ticks)
    assert m[0, NU_ABSDP] == pytest.approx(1.25, rel=1e-8)
    assert m[0, NU_PV] == pytest.approx(sum([10.0, 10.5, 10.5, 10.0, 10.25]), rel=1e-8)


def test_volume_gram_psd():
    ticks = regime_switch(600, seed=1, tau=60.0)
    st_ = TickStreamState(SHIFTED_LEGENDRE, 6, 60.0).ingest_many(ticks)
    for ch in (NU_V, NU_ABSDP):
        M = build_matrix(SHIFTED_LEGENDRE, st_.moments[:, ch], 6)
        assert np.linalg.eigvalsh(M).min() >= -1e-9 * np.abs(M).max()


def test_snapshot_is_immutable_copy():
    st_ = TickStreamState(SHIFTED_LEGENDRE, 2, 10.0)
    st_.ingest(Tick(T0_NS, 10.0, 1))
    snap = st_.snapshot()
    st_.ingest(Tick(T0_NS + NS_PER_S, 11.0, 1))
    assert snap.tick_count == 1 and snap.last_price == 10.0
    with pytest.raises(ValueError):
        snap.moments[0, 0] = 1.0
    assert np.array_equal(snap.channel("v"), snap.moments[:, NU_V])


def test_frames_match_per_tick_states():
    ticks = random_ticks(5, 103)
    frames = moment_frames(ticks, SHIFTED_LEGENDRE, 3, 40.0, decimate=10)
    assert frames.moments.shape == (10, 9, 5)
    assert np.array_equal(frame_indices(103, 10), np.arange(9, 103, 10))
    for f, idx in enumerate(frame_indices(103, 10)):
        ref = batch_moments(SHIFTED_LEGENDRE, 3, 40.0, ticks[: idx + 1])
        assert np.allclose(frames.moments[f], ref, rtol=1e-11, atol=1e-11 * np.abs(ref).max())
        assert frames.t_ns[f] == ticks.t_ns[idx]
    full = moment_frames(ticks, SHIFTED_LEGENDRE, 3, 40.0, decimate=1)
    assert np.allclose(full.moments[9::10], frames.moments, rtol=1e-11, atol=1e-9)



@pytest.mark.parametrize("basis", [SHIFTED_LEGENDRE, LAGUERRE], ids=lambda b: b.kind.value)
def test_frames_continue_a_state_like_per_tick_ingest(basis):
    ticks = random_ticks(8, 250)
    t = ticks.t_ns.copy()
    t[120:123] = t[120]  # repeated timestamps
    ticks = TickArrays(t, ticks.price, ticks.volume)
    ref = TickStreamState(basis, 4, 30.0)
    rows = []
    for i in range(len(ticks)):
        ref.ingest(ticks[i])
        rows.append(ref.moments.copy())
    rows = np.array(rows)
    st_ = TickStreamState(basis, 4, 30.0).ingest_many(ticks[:40])
    frames = moment_frames(ticks[40:], decimate=7, state=st_)
    want = rows[40:][6::7]
    assert np.allclose(frames.moments, want, rtol=1e-10, atol=1e-10 * np.abs(want).max())
    assert st_.tick_count == len(ticks) and st_.t_now == ref.t_now
    assert np.allclose(st_.moments, ref.moments, rtol=1e-10, atol=1e-10 * np.abs(ref.moments).max())

def test_min_timescale():
    assert min_timescale(6, 128.0) == pytest.approx(128.0 / 7)
    assert TickStreamState(n=3, tau=40.0).min_timescale == 10.0


def _continuous_moments(basis, func, order):
    """<Q_k func>_mu for the continuous time measure, by adaptive quadrature in the age variable."""
    out = []
    for k in range(order + 1):
        if basis is SHIFTED_LEGENDRE:
            f = lambda y: eval_sh_legendre(k, math.exp(-y)) * func(y) * math.exp(-y)  # noqa: E731
        else:
            f = lambda y: eval_laguerre(k, y) * func(y) * math.exp(-y)  # noqa: E731
        out.append(integrate.quad(f, 0, 80, limit=400)[0])
    return np.array(out)


@pytest.mark.parametrize("basis", TIME_BASES, ids=lambda b: b.kind.value)
def test_derivative_moments_against_quadrature(basis):
    tau, p_now = 20.0, 22.0
    # price as a function of age y: p = p_now - 0.3 y + 0.5 sin(y), so dp/dt = (0.3 - 0.5 cos y) / tau
    price = lambda y: p_now - 0.3 * y + 0.5 * math.sin(y)  # noqa: E731
    dpdt = lambda y: (0.3 - 0.5 * math.cos(y)) / tau  # noqa: E731
    order = 6
    m_p = _continuous_moments(basis, price, order + 1)
    d = derivative_moments(basis, m_p, p_now, tau, order)
    assert np.allclose(d, _continuous_moments(basis, dpdt, order), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), cut=st.integers(1, 59))
def test_split_point_does_not_matter(seed, cut):
    ticks = random_ticks(seed, 60, spacing_s=0.5)
    a = TickStreamState(SHIFTED_LEGENDRE, 3, 10.0).ingest_many(ticks)
    b = TickStreamState(SHIFTED_LEGENDRE, 3, 10.0).ingest_many(ticks[:cut]).ingest_many(ticks[cut:])
    scale = np.abs(a.moments).max()
    assert np.allclose(a.moments, b.moments, rtol=1e-11, atol=1e-12 * scale)
    assert a.tick_count == b.tick_count == 60


@pytest.mark.parametrize("basis", TIME_BASES, ids=lambda b: b.kind.value)
def test_streamed_derivative_spectrum(basis):
    from liqflow.matrices import solve_gev

    tau, n = 20.0, 2
    secs = np.arange(0, 4000)
    for slope in (0.0, 0.003):
        ticks = TickArrays(T0_NS + secs * NS_PER_S, 10.0 + slope * secs, np.ones(secs.size))
        s = TickStreamState(basis, n, tau).ingest_many(ticks)
        d = derivative_moments(basis, s.moments[:, NU_P], float(ticks.price[-1]), tau, 2 * n, m_mu=s.moments[:, MU])
        lam = solve_gev(build_matrix(basis, d, n), build_matrix(basis, s.moments[:, MU], n)).eigenvalues
        if slope == 0.0:
            assert np.allclose(lam, 0.0, atol=1e-12)
        else:
            # states localized at the start of history see the untimed first tick; the extremal one does not
            assert lam[np.argmax(np.abs(lam))] == pytest.approx(slope, rel=2e-3)
