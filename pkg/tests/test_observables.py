"""Mass integrals, porosity profiles, clog events, and storage indicators."""

import math

import numpy as np
import pytest

from clogsim.geometry import MicroConfig, SQRT2, porosity
from clogsim.macrosolver import MacroState
from clogsim.observables import (
    ClogEvent,
    ClogTrigger,
    detect_clogs,
    masses,
    porosity_field,
    storage_indicators,
)


def state_of(a_u, a_v, a_r, clogged=None, t=0.0):
    a_u = np.asarray(a_u, dtype=np.float64)
    a_v = np.asarray(a_v, dtype=np.float64)
    a_r = np.asarray(a_r, dtype=np.float64)
    if clogged is None:
        clogged = np.zeros(a_v.shape, dtype=bool)
    return MacroState(t=t, a_u=a_u, a_v=a_v, a_r=a_r, clogged=clogged)


# --- masses ------------------------------------------------------------------

def test_masses_of_constant_state_are_exact():
    # trapezoid weights resolve constants exactly: integral of c over [0,1] = c
    st = state_of(np.full((3, 11), 0.7), np.full(11, 0.2), np.full(11, 0.5))
    U, V = masses(st)
    assert np.allclose(U, 0.7, atol=1e-15)
    assert V == pytest.approx(0.2, abs=1e-15)


def test_masses_of_zero_state_vanish():
    st = state_of(np.zeros((2, 5)), np.zeros(5), np.full(5, 0.3))
    U, V = masses(st)
    assert np.all(U == 0.0) and V == 0.0


def test_masses_linear_field_integrates_exactly():
    # trapezoid is exact on linears: int_0^1 x dx = 1/2
    x = np.linspace(0.0, 1.0, 21)
    st = state_of(x[None, :], 2.0 * x, np.full(21, 0.5))
    U, V = masses(st)
    assert U[0] == pytest.approx(0.5, abs=1e-14)
    assert V == pytest.approx(1.0, abs=1e-14)


# --- porosity ----------------------------------------------------------------

def test_porosity_field_matches_scalar_map():
    r = np.array([0.0, 0.5, 0.88, 1.2, SQRT2])
    st = state_of(np.zeros((1, 5)), np.zeros(5), r)
    phi = porosity_field(st, MicroConfig.A)
    assert phi[0] == pytest.approx(1.0, abs=1e-15)
    assert phi[2] == pytest.approx(0.3918, abs=5e-4)
    assert phi[4] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(phi, porosity(r, MicroConfig.A))


# --- clog events ---------------------------------------------------------------

def test_no_transition_no_events():
    st = state_of(np.zeros((1, 5)), np.zeros(5), np.full(5, 0.5))
    assert detect_clogs(st, st) == []


def test_new_clog_reported_once_with_midpoint_time():
    r0 = np.full(6, 0.5)
    prev = state_of(np.zeros((1, 6)), np.zeros(6), r0, t=1.0)
    r1 = r0.copy()
    r1[2] = SQRT2
    nxt = state_of(
        np.zeros((1, 6)), np.zeros(6), r1,
        clogged=np.eye(6, dtype=bool)[2], t=1.01,
    )
    events = detect_clogs(prev, nxt)
    assert len(events) == 1
    ev = events[0]
    assert ev.node == 2
    assert ev.x == pytest.approx(0.4)
    assert ev.time == pytest.approx(1.005)
    assert ev.trigger is ClogTrigger.RADIUS_THRESHOLD
    # already-clogged nodes are not re-reported
    assert detect_clogs(nxt, nxt) == []


def test_area_floor_trigger_below_radius_cap():
    # flagged clogged while the radius is still visibly short of sqrt(2)
    r1 = np.full(4, 0.5)
    r1[0] = 1.41
    prev = state_of(np.zeros((1, 4)), np.zeros(4), np.full(4, 0.5), t=0.0)
    nxt = state_of(
        np.zeros((1, 4)), np.zeros(4), r1,
        clogged=np.array([True, False, False, False]), t=0.1,
    )
    (ev,) = detect_clogs(prev, nxt)
    assert ev.trigger is ClogTrigger.AREA_FLOOR
    assert ev.x == 0.0


def test_simultaneous_clogs_all_reported():
    prev = state_of(np.zeros((1, 5)), np.zeros(5), np.full(5, 0.5), t=0.0)
    nxt = state_of(
        np.zeros((1, 5)), np.zeros(5), np.full(5, SQRT2),
        clogged=np.ones(5, dtype=bool), t=0.2,
    )
    events = detect_clogs(prev, nxt)
    assert [e.node for e in events] == [0, 1, 2, 3, 4]


def test_clog_event_is_frozen():
    ev = ClogEvent(node=1, x=0.25, time=0.5, trigger=ClogTrigger.AREA_FLOOR)
    with pytest.raises(AttributeError):
        ev.time = 0.6


# --- storage indicators --------------------------------------------------------

def test_indicators_vanish_against_self():
    st = state_of(np.zeros((2, 7)), np.linspace(0, 1, 7), np.full(7, 0.5))
    ind = storage_indicators(st, st)
    assert np.all(ind.sc_local == 0.0)
    assert ind.sc_global == 0.0


def test_uniform_gain_reported_everywhere():
    base = state_of(np.zeros((1, 9)), np.full(9, 0.1), np.full(9, 0.5))
    later = state_of(np.zeros((1, 9)), np.full(9, 0.35), np.full(9, 0.5))
    ind = storage_indicators(later, base)
    assert np.allclose(ind.sc_local, 0.25, atol=1e-15)
    assert ind.sc_global == pytest.approx(0.25, abs=1e-14)


def test_global_indicator_is_integral_of_local(rng):
    v0 = rng.uniform(0.0, 0.4, 31)
    v1 = rng.uniform(0.0, 0.8, 31)
    base = state_of(np.zeros((1, 31)), v0, np.full(31, 0.5))
    later = state_of(np.zeros((1, 31)), v1, np.full(31, 0.5))
    ind = storage_indicators(later, base)
    w = np.full(31, 1.0 / 30)
    w[0] = w[-1] = 0.5 / 30
    assert ind.sc_global == pytest.approx(w @ ind.sc_local, abs=1e-15)
    assert np.allclose(ind.sc_local, v1 - v0)
