import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wtm.evs import TwinPair
from wtm.waveform import TimeGrid, Waveform, wf_constant, wf_zero
from wtm.wtl import (
    HistoryError,
    ImpedanceError,
    ImpedanceWaveform,
    InitialWaveformPolicy,
    PortState,
    Wtl,
    incident_wave,
)

G = TimeGrid(0.0, 1.0, 0.1)
PAIR = TwinPair(0, 0, 1, 0, 2, 0)
Z15 = ImpedanceWaveform.constant(G, 1.5)


def const_state(u, i):
    return PortState(wf_constant(G, u), wf_constant(G, i))


def rand_state(rng):
    return PortState(Waveform(G, rng.normal(size=G.n_points)), Waveform(G, rng.normal(size=G.n_points)))


class TestIncidentWave:
    def test_direct_evaluation(self):
        # 1.0 - 1.5 * 0.5
        np.testing.assert_array_equal(incident_wave(const_state(1.0, 0.5), Z15).samples, 0.25)

    def test_zero(self):
        assert not np.any(incident_wave(const_state(0.0, 0.0), Z15).samples)

    def test_sign(self):
        # 1 - 1.5 * (-2)
        np.testing.assert_array_equal(incident_wave(const_state(1.0, -2.0), Z15).samples, 4.0)


class TestImpedance:
    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_constant_rejected(self, bad):
        with pytest.raises(ImpedanceError):
            ImpedanceWaveform.constant(G, bad)

    def test_one_bad_sample_rejected(self):
        s = np.full(G.n_points, 1.5)
        s[4] = 0.0
        with pytest.raises(ImpedanceError, match="t=0.4"):
            ImpedanceWaveform(Waveform(G, s))


class TestHistory:
    def test_zero_init_exchange(self):
        w = Wtl(0, PAIR, Z15, delay=1)
        w.init_history()
        to1, to2 = w.exchange(1)
        assert not np.any(to1.samples) and not np.any(to2.samples)

    def test_symmetric_histories(self):
        w = Wtl(0, PAIR, Z15)
        s = const_state(0.7, -0.2)
        w.push_history(0, s, s)
        to1, to2 = w.exchange(1)
        np.testing.assert_array_equal(to1.samples, to2.samples)

    def test_exchange_reads_far_end(self):
        w = Wtl(0, PAIR, Z15)
        p1, p2 = const_state(1.0, 0.5), const_state(1.0, -2.0)
        w.push_history(0, p1, p2)
        to1, to2 = w.exchange(1)
        np.testing.assert_array_equal(to1.samples, incident_wave(p2, Z15).samples)
        np.testing.assert_array_equal(to2.samples, incident_wave(p1, Z15).samples)

    def test_push_then_exchange(self):
        w = Wtl(0, PAIR, Z15)
        w.push_history(0, const_state(2.0, 0.0), const_state(3.0, 0.0))
        to1, _ = w.exchange(1)
        np.testing.assert_array_equal(to1.samples, 3.0)

    def test_double_push(self):
        w = Wtl(0, PAIR, Z15)
        w.push_history(0, const_state(0, 0), const_state(0, 0))
        with pytest.raises(HistoryError):
            w.push_history(0, const_state(0, 0), const_state(0, 0))

    def test_delay_two_reads_two_back(self):
        w = Wtl(0, PAIR, Z15, delay=2)
        w.push_history(0, const_state(0.0, 0.0), const_state(10.0, 0.0))
        w.push_history(1, const_state(0.0, 0.0), const_state(11.0, 0.0))
        to1, _ = w.exchange(2)
        np.testing.assert_array_equal(to1.samples, 10.0)

    def test_eviction(self):
        w = Wtl(0, PAIR, Z15, delay=1)
        for k in range(4):
            w.push_history(k, const_state(k, 0), const_state(k, 0))
        with pytest.raises(HistoryError):
            w.exchange(2)
        np.testing.assert_array_equal(w.exchange(4)[0].samples, 3.0)

    def test_missing_history(self):
        with pytest.raises(HistoryError):
            Wtl(0, PAIR, Z15).exchange(1)

    @pytest.mark.parametrize("delay", [0, -1, 1.5])
    def test_bad_delay(self, delay):
        with pytest.raises(ValueError):
            Wtl(0, PAIR, Z15, delay=delay)


class TestInitHistory:
    def test_zero(self):
        w = Wtl(0, PAIR, Z15, delay=2)
        w.init_history(InitialWaveformPolicy.ZERO)
        for k in (-1, 0):
            for s in w.state(k):
                assert not np.any(s.u.samples) and not np.any(s.i.samples)

    def test_flat_x0_zero_is_zero(self):
        a, b = Wtl(0, PAIR, Z15), Wtl(0, PAIR, Z15)
        a.init_history(InitialWaveformPolicy.ZERO)
        b.init_history(InitialWaveformPolicy.FLAT_X0, 0.0)
        for sa, sb in zip(a.state(0), b.state(0)):
            np.testing.assert_array_equal(sa.u.samples, sb.u.samples)
            np.testing.assert_array_equal(sa.i.samples, sb.i.samples)

    def test_flat_x0(self):
        w = Wtl(0, PAIR, Z15)
        w.init_history(InitialWaveformPolicy.FLAT_X0, 2.0)
        for s in w.state(0):
            np.testing.assert_array_equal(s.u.samples, 2.0)
            assert not np.any(s.i.samples)


def test_fixed_point_consistency():
    # same potential on both ends, opposite currents: the incident waves reproduce
    # each end's own u + Z i
    rng = np.random.default_rng(3)
    u = Waveform(G, rng.normal(size=G.n_points))
    i1 = Waveform(G, rng.normal(size=G.n_points))
    i2 = Waveform(G, -i1.samples)
    Z = ImpedanceWaveform(Waveform(G, rng.uniform(0.5, 2.0, G.n_points)))
    w = Wtl(0, PAIR, Z)
    w.push_history(0, PortState(u, i1), PortState(u, i2))
    to1, to2 = w.exchange(1)
    np.testing.assert_allclose(to1.samples, u.samples + Z.Z.samples * i1.samples, rtol=0, atol=1e-13)
    np.testing.assert_allclose(to2.samples, u.samples + Z.Z.samples * i2.samples, rtol=0, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_exchange_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    Z = ImpedanceWaveform(Waveform(G, rng.uniform(0.1, 3.0, G.n_points)))
    s1 = (rand_state(rng), rand_state(rng))
    s2 = (rand_state(rng), rand_state(rng))
    combo = tuple(
        PortState(Waveform(G, alpha * a.u.samples + beta * b.u.samples),
                  Waveform(G, alpha * a.i.samples + beta * b.i.samples))
        for a, b in zip(s1, s2)
    )
    outs = []
    for states in (s1, s2, combo):
        w = Wtl(0, PAIR, Z)
        w.push_history(0, *states)
        outs.append(w.exchange(1))
    for port in (0, 1):
        expect = alpha * outs[0][port].samples + beta * outs[1][port].samples
        np.testing.assert_allclose(outs[2][port].samples, expect, rtol=1e-12, atol=1e-11)
