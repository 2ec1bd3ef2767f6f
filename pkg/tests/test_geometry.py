"""Closed-form cell geometry: identities, continuity and frozen values.

Expected numbers were evaluated directly from the defining formulas
(independently of the module) and are pinned here to 13+ digits.
"""

import math

import numpy as np
import pytest

from clogsim.errors import GeometryDomainError
from clogsim.geometry import (
    SQRT2,
    MicroConfig,
    gamma_rate,
    interface_length,
    porosity,
    radius_rate_coefficient,
    solid_area,
    tangent_radius,
    void_area,
)

CONFIGS = [MicroConfig.A, MicroConfig.B]


def radius_grid(config):
    """Radii covering both branches, avoiding the exact branch point."""
    lo = np.linspace(0.02, 1.0, 41)
    hi = np.linspace(1.0 + 1e-9, SQRT2 - 1e-9, 41)
    return np.concatenate([lo, hi])


# --- frozen point values -------------------------------------------------

def test_disc_interface_length():
    assert interface_length(0.5) == pytest.approx(math.pi, abs=1e-14)


def test_disc_void_area_and_porosity():
    assert void_area(0.88) == pytest.approx(4.0 - math.pi * 0.88**2, abs=1e-14)
    assert porosity(0.88) == pytest.approx(0.39178766226501605, abs=1e-13)


def test_config_a_large_radius_values():
    assert tangent_radius(1.2) == pytest.approx(0.5171572875253813, abs=1e-13)
    assert interface_length(1.2, MicroConfig.A) == pytest.approx(
        3.249395070480324, abs=1e-12
    )
    assert void_area(1.2, MicroConfig.A) == pytest.approx(
        0.22958246978846467, abs=1e-13
    )


def test_config_b_large_radius_values():
    assert void_area(1.1, MicroConfig.B) == pytest.approx(
        0.44538899534690835, abs=1e-13
    )
    assert interface_length(1.1, MicroConfig.B) == pytest.approx(
        3.130146775765009, abs=1e-12
    )


def test_full_clog_endpoint():
    for config in CONFIGS:
        assert void_area(SQRT2, config) == pytest.approx(0.0, abs=1e-12)
        assert solid_area(SQRT2, config) == pytest.approx(4.0, abs=1e-12)
        assert interface_length(SQRT2, config) == pytest.approx(0.0, abs=1e-7)


# --- identities over the whole range -------------------------------------

@pytest.mark.parametrize("config", CONFIGS)
def test_partition_identity(config):
    r = radius_grid(config)
    total = np.asarray(void_area(r, config)) + np.asarray(solid_area(r, config))
    assert np.max(np.abs(total - 4.0)) <= 1e-12


@pytest.mark.parametrize("config", CONFIGS)
def test_branch_continuity_at_one(config):
    # config B approaches r=1 with a sqrt branch (continuous, infinite
    # slope), so the probe must sit very close to the junction
    eps = 1e-12
    for fn in (interface_length, void_area, solid_area):
        below = fn(1.0 - eps, config)
        above = fn(1.0 + eps, config)
        assert below == pytest.approx(above, abs=1e-4)
    # the disc values at r = 1 exactly
    assert interface_length(1.0, config) == pytest.approx(2 * math.pi, abs=1e-14)
    assert void_area(1.0, config) == pytest.approx(4.0 - math.pi, abs=1e-14)


@pytest.mark.parametrize("config", CONFIGS)
def test_monotone_area(config):
    r = radius_grid(config)
    A = np.asarray(void_area(r, config))
    V = np.asarray(solid_area(r, config))
    assert np.all(np.diff(A) <= 1e-12)
    assert np.all(np.diff(V) >= -1e-12)
    assert np.all(A >= -1e-12)
    assert np.all(A <= 4.0 + 1e-12)


# --- radius-rate coefficient ---------------------------------------------

def test_rate_coefficient_disc_branch():
    for config in CONFIGS:
        assert radius_rate_coefficient(0.3, config, alpha=1.0) == pytest.approx(
            2 * math.pi, abs=1e-14
        )
        assert radius_rate_coefficient(0.9, config, alpha=0.5) == pytest.approx(
            math.pi, abs=1e-14
        )


def test_rate_coefficient_config_a_constant():
    # 2*pi*(sqrt(2)-1)/(8*(1-pi/4)) evaluated independently
    vals = radius_rate_coefficient(
        np.array([1.05, 1.2, 1.39]), MicroConfig.A, alpha=1.0
    )
    assert np.allclose(vals, 1.5159356336015397, atol=1e-13)


def test_rate_coefficient_config_b_is_alpha():
    vals = radius_rate_coefficient(
        np.array([1.05, 1.2, 1.39]), MicroConfig.B, alpha=0.73
    )
    assert np.allclose(vals, 0.73, atol=1e-14)


def test_gamma_times_length_is_alpha():
    # the config B rate factor times the interface length collapses to alpha
    r = np.linspace(1.01, SQRT2 - 1e-6, 25)
    alpha = 0.53
    g = np.asarray(gamma_rate(r, alpha))
    L = np.asarray(interface_length(r, MicroConfig.B))
    assert np.allclose(g * L, alpha, atol=1e-12)


# --- domain guards --------------------------------------------------------

def test_out_of_range_radius_raises():
    with pytest.raises(GeometryDomainError):
        void_area(-0.1)
    with pytest.raises(GeometryDomainError):
        interface_length(SQRT2 + 0.01)
    with pytest.raises(GeometryDomainError):
        gamma_rate(0.5, 1.0)


def test_config_parse():
    assert MicroConfig.parse(" a ") is MicroConfig.A
    assert MicroConfig.parse("B") is MicroConfig.B
    with pytest.raises(GeometryDomainError):
        MicroConfig.parse("C")


def test_array_shape_mirroring():
    r = np.array([[0.2, 0.7], [1.1, 1.3]])
    out = void_area(r, MicroConfig.B)
    assert isinstance(out, np.ndarray) and out.shape == r.shape
    assert isinstance(void_area(0.5), float)
