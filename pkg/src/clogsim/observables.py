"""Derived quantities of macro states: masses, porosity, clog events.

Works on the nodal arrays of any state snapshot; integrals use the
hat-function mass weighting (trapezoid weights on the uniform grid), so
the global indicators equal the weighted sums of the local ones by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import SQRT2, porosity


class ClogTrigger(Enum):
    RADIUS_THRESHOLD = "radius_threshold"
    AREA_FLOOR = "area_floor"


@dataclass(frozen=True)
class ClogEvent:
    """One node sealing shut; emitted at most once per node."""

    node: int
    x: float
    time: float
    trigger: ClogTrigger


@dataclass(frozen=True)
class StorageIndicators:
    """Deposit gained since the initial state, per node and integrated."""

    sc_local: np.ndarray
    sc_global: float


def _weights(n_nodes: int) -> np.ndarray:
    h = 1.0 / (n_nodes - 1)
    w = np.full(n_nodes, h)
    w[0] = w[-1] = h / 2.0
    return w


def masses(state) -> tuple:
    """Domain integrals (U_1..U_N, V) of the mobile species and deposit.

    Exact for the hat-function interpolant: the all-ones vector turns
    the mass matrix into trapezoid weights.
    """
    w = _weights(state.a_v.shape[0])
    return state.a_u @ w, float(w @ state.a_v)


def porosity_field(state, config) -> np.ndarray:
    """Nodal porosity of the current radius field."""
    return porosity(state.a_r, config)


def detect_clogs(state_prev, state_next) -> list:
    """Clog events for nodes that sealed during this step.

    The event time is the step midpoint.  A node whose radius reached
    the maximal value is reported as a radius hit; one that merely ran
    out of void area is an area-floor hit.
    """
    crossed = np.flatnonzero(state_next.clogged & ~state_prev.clogged)
    if len(crossed) == 0:
        return []
    n_nodes = state_next.a_v.shape[0]
    mid = 0.5 * (state_prev.t + state_next.t)
    events = []
    for j in crossed:
        full = state_next.a_r[j] >= SQRT2 - 1e-12
        events.append(ClogEvent(
            node=int(j),
            x=j / (n_nodes - 1),
            time=mid,
            trigger=(
                ClogTrigger.RADIUS_THRESHOLD if full else ClogTrigger.AREA_FLOOR
            ),
        ))
    return events


def storage_indicators(state, initial_state) -> StorageIndicators:
    """Deposit growth v(x,t) - v(x,0), local and domain-integrated."""
    local = state.a_v - initial_state.a_v
    w = _weights(state.a_v.shape[0])
    return StorageIndicators(sc_local=local, sc_global=float(w @ local))
