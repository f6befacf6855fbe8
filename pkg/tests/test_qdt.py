import math

import numpy as np
import pytest

from q2dscat.params import R6, R6_4
from q2dscat.qdt import (
    boundary_logderiv,
    boundary_logderiv_exact,
    check_rmin,
    loss_fraction,
    phase_from_s,
    reference_mixing,
    reflection_amplitude,
    s_from_phase,
    safe_boundary_logderiv,
    zero_energy_reference,
    zero_energy_reference_logderiv,
)


def test_s_of_phase_anchor():
    # phi = 0 gives sqrt(2) cot(pi/8) = 2 + sqrt(2)
    assert s_from_phase(0.0) == pytest.approx(2 + math.sqrt(2), abs=1e-12)
    assert s_from_phase(3 * math.pi / 8) == pytest.approx(1.0, abs=1e-12)
    assert abs(s_from_phase(-math.pi / 8 + 1e-9)) > 1e8


def test_s_is_one_plus_cot():
    phi = np.linspace(-1.0, 2.5, 50)
    np.testing.assert_allclose(s_from_phase(phi), 1 + 1 / np.tan(phi + math.pi / 8), rtol=1e-12)


def test_phase_round_trip():
    s = np.array([-40.0, -2.0, -0.5, 0.0, 0.5, 1.0, 3.0, 40.0])
    np.testing.assert_allclose(s_from_phase(phase_from_s(s)), s, rtol=1e-12, atol=1e-12)
    assert isinstance(phase_from_s(1.0), float)


def test_reflection_and_loss():
    assert reflection_amplitude(0.0) == 1.0
    assert reflection_amplitude(1.0) == 0.0
    assert loss_fraction(0.5) == pytest.approx(1 - 1 / 9)


def test_wkb_boundary_limits():
    r = 0.2
    k = R6**2 / r**3
    Z0 = boundary_logderiv(r, 1.3, 0.0)
    assert Z0.imag == 0.0
    # y = 1: pure incoming wave exp(iA), A decreasing outward
    Z1 = boundary_logderiv(r, 1.3, 1.0)
    assert Z1 == pytest.approx(1.5 / r - 1j * k, rel=1e-14)
    with pytest.raises(ValueError):
        boundary_logderiv(r, 0.0, 1.2)


def test_exact_boundary_matches_reference_function():
    r = 0.3
    for ell in (0, 1, 2, 5):
        for s in (-2.0, 0.5, 3.0):
            Z = boundary_logderiv_exact(r, s, 0.0, [ell])[0]
            assert Z.imag == 0.0
            assert Z.real == pytest.approx(zero_energy_reference_logderiv(r, ell, phase_from_s(s)), rel=1e-10)


def test_exact_boundary_reduces_to_wkb():
    # the two forms share the short-range phase; they converge as r_min -> 0
    gaps = []
    for r in (0.3, 0.2, 0.12):
        k = R6**2 / r**3
        zw = boundary_logderiv(r, 0.7, 1.0)
        ze = boundary_logderiv_exact(r, 0.7, 1.0, [0, 1, 2])
        gaps.append(np.abs(ze - zw).max() / k)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 2e-3


def test_exact_boundary_y1_is_incoming():
    r = 0.2
    k = R6**2 / r**3
    Z = boundary_logderiv_exact(r, 0.0, 1.0, [0, 1, 3])
    np.testing.assert_allclose(Z.imag / k, -1.0, atol=5e-3)


def test_reference_mixing_s_wave():
    for phi in (-0.3, 0.0, 0.4, 1.1):
        assert reference_mixing(0, phi) == pytest.approx(math.tan(phi + math.pi / 8), rel=1e-12)


@pytest.mark.parametrize("ell", [0, 1, 3])
def test_reference_solves_zero_energy_equation(ell):
    r = np.linspace(0.6, 4.0, 9)
    h = 2e-4
    phi = 0.37
    u = lambda x: zero_energy_reference(x, ell, phi)
    upp = (u(r + h) - 2 * u(r) + u(r - h)) / h**2
    rhs = (ell * (ell + 1) / r**2 - R6_4 / r**6) * u(r)
    np.testing.assert_allclose(upp, rhs, rtol=2e-5, atol=1e-6)
    fd = (u(r + h) - u(r - h)) / (2 * h) / u(r)
    np.testing.assert_allclose(zero_energy_reference_logderiv(r, ell, phi), fd, rtol=1e-5)


def test_reference_large_r_gives_s():
    # u ~ const * (r - a) at large r for l = 0 and zero energy
    phi = phase_from_s(-0.8)
    r = 3000.0
    L = zero_energy_reference_logderiv(r, 0, phi)
    assert r - 1 / L == pytest.approx(-0.8, abs=1e-5)


def test_safe_boundary_passthrough():
    Z, r = safe_boundary_logderiv(0.2, 1.0, 0.3, 0.01)
    assert r == 0.2 and Z == boundary_logderiv(0.2, 1.0, 0.3)


def test_check_rmin():
    assert check_rmin(0.15, 0.3)
    assert not check_rmin(2.0, 0.3)
