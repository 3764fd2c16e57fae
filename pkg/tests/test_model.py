import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanorod.model import (DimensionfulParams, Mode, ModelParams, adiabatic_surfaces,
                           dimensionalize, nondimensionalize, potential, potential_derivs,
                           strain_to_b2, well_minima)

SET1 = ModelParams(0.6, 0.4, -1.0, 0.5)
SET2 = ModelParams(0.6, 0.1, -0.01, 0.0004)


def test_potential_values():
    assert potential(0.0, SET1) == 0.0
    assert potential(math.sqrt(2), SET1) == pytest.approx(-0.5, abs=1e-15)
    assert potential(5.0, SET2) == pytest.approx(-0.0625, abs=1e-15)


def test_potential_derivs_values():
    assert potential_derivs(0.0, SET1) == (0.0, 0.0)
    v1, v3 = potential_derivs(math.sqrt(2), SET1)
    assert v1 == pytest.approx(0.0, abs=1e-15)
    assert v3 == pytest.approx(3 * math.sqrt(2), abs=1e-14)
    assert potential_derivs(1.3, ModelParams(0.6, 0.4, 1.0, 0.0))[1] == 0.0


def test_well_minima():
    assert well_minima(SET1) == pytest.approx((-1.414214, 1.414214), abs=1e-6)
    assert well_minima(SET2) == pytest.approx((-5.0, 5.0), abs=1e-12)
    assert well_minima(ModelParams(0.6, 0.4, -4.0, 1.0)) == pytest.approx((-2.0, 2.0))
    with pytest.raises(ValueError):
        well_minima(ModelParams(0.6, 0.4, 1.0, 0.5))


def test_adiabatic_surfaces():
    assert adiabatic_surfaces(0.0, SET1) == pytest.approx((-0.6, 0.6))
    lo, hi = adiabatic_surfaces(-1.6, SET1)
    assert lo == pytest.approx(-1.33807, abs=1e-5)
    assert hi == pytest.approx(0.41647, abs=1e-5)
    decoupled = ModelParams(0.6, 0.0, -1.0, 0.5)
    R = np.linspace(-3, 3, 11)
    lo, hi = adiabatic_surfaces(R, decoupled)
    assert np.allclose(lo, potential(R, decoupled) - 0.6)
    assert np.allclose(hi, potential(R, decoupled) + 0.6)


def test_strain():
    assert strain_to_b2(0.3, 0.3) == 0.0
    assert strain_to_b2(0.6, 0.3) == -1.0
    assert strain_to_b2(1.01 * 0.3, 0.3) == pytest.approx(-0.01)
    with pytest.raises(ValueError):
        strain_to_b2(0.1, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-0.1, 0.4, -1, 0.5)
    with pytest.raises(ValueError):
        ModelParams(0.6, 0.4, -1, -0.5)
    with pytest.raises(ValueError):
        ModelParams(0.6, 0.4, -1, 0.5, hbar=2.0)
    with pytest.raises(ValueError):
        ModelParams(0.6, math.nan, -1, 0.5)
    assert ModelParams(0.6, 0.4, -1, 0.5, "classical").mode is Mode.CLASSICAL
    assert not SET1.with_mode("classical").quantum


def test_nondimensionalize_identity_scales():
    d = DimensionfulParams(omega0=1.0, mass=1.0, b2_prime=-1.0, b4_prime=0.5, c_prime=0.4,
                           omega_prime=0.6, hbar_si=1.0)
    p = nondimensionalize(d)
    assert (p.omega, p.c, p.b2, p.b4) == (0.6, 0.4, -1.0, 0.5)


def test_nondimensionalize_published_pairs():
    d = DimensionfulParams(omega0=1e8, mass=1e-21, b2_prime=-1e-5, b4_prime=4.742e15,
                           c_prime=1.0, omega_prime=1.0, hbar_si=1.0546e-34)
    p = nondimensionalize(d)
    assert p.b2 == pytest.approx(-1.0, rel=1e-12)
    assert p.b4 == pytest.approx(0.5, rel=1e-3)


def test_nondimensionalize_rejects_bad_scales():
    with pytest.raises(ValueError):
        nondimensionalize(DimensionfulParams(0.0, 1e-21, -1e-5, 1.0, 1.0, 1.0))


@given(R=st.floats(-50, 50))
def test_potential_even(R):
    assert potential(R, SET1) == potential(-R, SET1)


@given(R=st.floats(-4, 4), b2=st.floats(-2, 2), b4=st.floats(0, 2))
def test_derivs_match_finite_differences(R, b2, b4):
    p = ModelParams(0.6, 0.4, b2, b4)
    h = 1e-3
    fd1 = (potential(R - 2 * h, p) - 8 * potential(R - h, p) + 8 * potential(R + h, p)
           - potential(R + 2 * h, p)) / (12 * h)
    v1, v3 = potential_derivs(R, p)
    assert fd1 == pytest.approx(v1, abs=1e-8)
    hh = 1e-2
    fd3 = (potential(R + 2 * hh, p) - 2 * potential(R + hh, p) + 2 * potential(R - hh, p)
           - potential(R - 2 * hh, p)) / (2 * hh**3)
    assert fd3 == pytest.approx(v3, abs=1e-6)


@given(b2=st.floats(-5, -1e-3), b4=st.floats(1e-3, 5))
def test_minima_are_stationary(b2, b4):
    p = ModelParams(0.6, 0.4, b2, b4)
    lo, hi = well_minima(p)
    assert potential(lo, p) == potential(hi, p)
    assert abs(potential_derivs(hi, p)[0]) <= 1e-12 * max(1.0, abs(b2 * hi))


@given(R=st.floats(-10, 10), omega=st.floats(0.01, 3), c=st.floats(-2, 2))
def test_gap_bounded_below(R, omega, c):
    p = ModelParams(omega, c, -1.0, 0.5)
    lo, hi = adiabatic_surfaces(R, p)
    assert lo <= hi
    assert hi - lo >= 2 * omega * (1 - 1e-12)


@given(omega0=st.floats(1e6, 1e10), mass=st.floats(1e-24, 1e-18),
       b2p=st.floats(-1e-3, 1e-3), b4p=st.floats(1e10, 1e18),
       cp=st.floats(1e-30, 1e-20), wp=st.floats(1e6, 1e10))
def test_conversion_round_trip(omega0, mass, b2p, b4p, cp, wp):
    d = DimensionfulParams(omega0, mass, b2p, b4p, cp, wp)
    back = dimensionalize(nondimensionalize(d), omega0, mass, d.hbar_si)
    for name in ("b2_prime", "b4_prime", "c_prime", "omega_prime"):
        assert getattr(back, name) == pytest.approx(getattr(d, name), rel=1e-12, abs=0)
