"""Closed-form geometry of the periodic unit cell with a growing solid core.

The microscopic cell is the square [-1, 1]^2 (area 4) holding a solid
grain that grows radially as colloidal mass deposits on it.  For radii
r <= 1 the grain is a centred disc.  Once r exceeds 1 the grain touches
the cell edges and the free boundary splits into four corner arcs; two
continuation rules are supported:

* config A: the cell edges stay tangent to the free boundary, which is
  a quarter circle of radius r_d = (sqrt(2) - r)/(sqrt(2) - 1) in each
  corner.
* config B: the free boundary remains an arc of the original circle of
  radius r, intersecting the cell edges at a varying angle.

Both continuations reach complete clogging at r = sqrt(2), where the
void area vanishes.  All quantities below are per cell: L is the length
of the solid-void interface inside the cell, A the void (pore) area, V
the solid area, and porosity = A / 4.

Functions accept scalars or numpy arrays and mirror the input shape.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import GeometryDomainError

SQRT2 = math.sqrt(2.0)

#: Area of the full square cell [-1, 1]^2.
CELL_AREA = 4.0


class MicroConfig(enum.Enum):
    """Continuation rule for the grain once it touches the cell edges."""

    A = "A"
    B = "B"

    @classmethod
    def parse(cls, label) -> "MicroConfig":
        if isinstance(label, cls):
            return label
        try:
            return cls(str(label).strip().upper())
        except ValueError:
            raise GeometryDomainError(
                f"unknown micro configuration {label!r}, expected 'A' or 'B'"
            ) from None


def _as_radius(r, tol: float = 1e-12) -> np.ndarray:
    """Validate r against [0, sqrt(2)] and return it as a float array."""
    arr = np.asarray(r, dtype=np.float64)
    if arr.size and (np.any(arr < -tol) or np.any(arr > SQRT2 + tol)):
        bad = arr[(arr < -tol) | (arr > SQRT2 + tol)]
        raise GeometryDomainError(
            f"radius out of range [0, sqrt(2)]: {np.ravel(bad)[:4]}"
        )
    return np.clip(arr, 0.0, SQRT2)


def _unwrap(value: np.ndarray, template) -> "float | np.ndarray":
    if np.isscalar(template) or np.ndim(template) == 0:
        return float(value)
    return value


def tangent_radius(r) -> "float | np.ndarray":
    """Corner-arc radius r_d of config A, defined for r in [1, sqrt(2)].

    r_d shrinks linearly from 1 at r = 1 to 0 at r = sqrt(2); the point
    where the free boundary crosses the cell diagonal sits at distance r
    from the cell centre.
    """
    arr = _as_radius(r)
    return _unwrap((SQRT2 - arr) / (SQRT2 - 1.0), r)


def interface_length(r, config: MicroConfig = MicroConfig.A) -> "float | np.ndarray":
    """Length L(r) of the solid-void interface inside one cell."""
    arr = _as_radius(r)
    out = 2.0 * math.pi * arr
    over = arr > 1.0
    if np.any(over):
        ro = arr[over]
        if config is MicroConfig.A:
            out_over = 2.0 * math.pi * (SQRT2 - ro) / (SQRT2 - 1.0)
        else:
            out_over = ro * (2.0 * math.pi - 8.0 * np.arccos(1.0 / ro))
        if out.ndim == 0:
            out = out_over.reshape(())
        else:
            out[over] = out_over
    return _unwrap(out, r)


def solid_area(r, config: MicroConfig = MicroConfig.A) -> "float | np.ndarray":
    """Area V(r) covered by the solid grain inside one cell."""
    arr = _as_radius(r)
    out = math.pi * arr**2
    over = arr > 1.0
    if np.any(over):
        ro = arr[over]
        if config is MicroConfig.A:
            rd = (SQRT2 - ro) / (SQRT2 - 1.0)
            out_over = 4.0 * (1.0 + rd**2 * (math.pi / 4.0 - 1.0))
        else:
            # Quarter-disc of radius r clipped to the unit quadrant: two
            # right triangles plus the circular sector between them.
            s = np.sqrt(ro**2 - 1.0)
            out_over = 4.0 * (s + 0.5 * ro**2 * (math.pi / 2.0 - 2.0 * np.arccos(1.0 / ro)))
        if out.ndim == 0:
            out = out_over.reshape(())
        else:
            out[over] = out_over
    return _unwrap(out, r)


def void_area(r, config: MicroConfig = MicroConfig.A) -> "float | np.ndarray":
    """Void (pore) area A(r) = 4 - V(r) of one cell.

    The complement is taken from the solid area for both branches, which
    keeps the partition identity A + V = 4 exact by construction.
    """
    arr = _as_radius(r)
    return _unwrap(CELL_AREA - np.asarray(solid_area(arr, config)), r)


def porosity(r, config: MicroConfig = MicroConfig.A) -> "float | np.ndarray":
    """Volumetric porosity of the cell, A(r) / 4."""
    arr = _as_radius(r)
    return _unwrap(np.asarray(void_area(arr, config)) / CELL_AREA, r)


def gamma_rate(r, alpha: float) -> "float | np.ndarray":
    """Config B large-radius rate factor gamma(r) = alpha / (2r(pi - 4 acos(1/r)))."""
    arr = _as_radius(r)
    if np.any(arr < 1.0):
        raise GeometryDomainError("gamma_rate is defined for r >= 1 only")
    denom = 2.0 * arr * (math.pi - 4.0 * np.arccos(1.0 / arr))
    return _unwrap(alpha / denom, r)


def radius_rate_coefficient(
    r, config: MicroConfig = MicroConfig.A, alpha: float = 1.0
) -> "float | np.ndarray":
    """Coefficient m(r) in the radius law  dr/dt = m(r) * (sum_i a_i u_i - beta v).

    The deposition-to-volume balance dV/dt = alpha * L * dv/dt collapses to

    * r <= 1:        m = 2 pi alpha                       (disc branch),
    * r > 1, conf A: m = 2 pi alpha (sqrt(2)-1) / (8 (1 - pi/4))  (constant),
    * r > 1, conf B: m = gamma(r) * L(r) = alpha          (constant).

    m jumps at r = 1 because the interface-per-unit-growth ratio changes
    when the grain reaches the cell edges; the jump is part of the model,
    not an artefact.
    """
    arr = _as_radius(r)
    out = np.full_like(arr, 2.0 * math.pi * alpha)
    over = arr > 1.0
    if np.any(over):
        if config is MicroConfig.A:
            alpha_bar = alpha * (SQRT2 - 1.0) ** 2 / (8.0 * (1.0 - math.pi / 4.0))
            m_over = 2.0 * math.pi * alpha_bar / (SQRT2 - 1.0)
        else:
            m_over = alpha
        if out.ndim == 0:
            out = np.asarray(m_over, dtype=np.float64).reshape(())
        else:
            out[over] = m_over
    return _unwrap(out, r)
