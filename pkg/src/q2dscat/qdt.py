"""
Quantum-defect short-range boundary condition.

The short-range wave is written in WKB form with the zero-energy van der
Waals local wavenumber k(r) = R6^2 / r^3:

    u(r) ~ k^(-1/2) [exp(i A(r)) - R exp(-i A(r))],
    A(r) = R6^2 / (2 r^2) - phi,      R = (1 - y) / (1 + y).

Its log-derivative at r_min is the complex boundary value Z shared by all
partial waves.  :func:`boundary_logderiv_exact` replaces the WKB waves by
the exact zero-energy van der Waals + centrifugal solutions (Hankel
functions of order (2l+1)/4 in x = R6^2/(2r^2)) that carry the same
l-independent short-range phase; the two agree as r_min -> 0.

With this phase reference the y = 0 wave is, for l = 0,
sqrt(r) [J_1/4(x) + tan(phi + pi/8) Y_1/4(x)], and its zero-energy
scattering length is a/abar = 1 + cot(phi + pi/8) = s.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import jv, yv

from .params import R6

_C8 = math.cos(math.pi / 8)
_S8 = math.sin(math.pi / 8)
_SQRT2 = math.sqrt(2.0)


def s_from_phase(phi):
    """Dimensionless scattering length s = a/abar for short-range phase ``phi``."""
    return _SQRT2 * np.cos(phi - math.pi / 8) / np.sin(phi + math.pi / 8)


def phase_from_s(s):
    """Inverse of :func:`s_from_phase` on the principal branch of atan2."""
    s = np.asarray(s, dtype=float)
    phi = np.arctan2(_SQRT2 * _C8 - s * _S8, s * _C8 - _SQRT2 * _S8)
    return float(phi) if phi.ndim == 0 else phi


def vdw_wavenumber(r):
    return R6**2 / np.asarray(r) ** 3


def reflection_amplitude(y: float) -> float:
    return (1.0 - y) / (1.0 + y)


def loss_fraction(y: float) -> float:
    """Fraction of the incoming short-range flux that is not reflected."""
    return 1.0 - reflection_amplitude(y) ** 2


class BoundaryPoleError(ArithmeticError):
    pass


def boundary_logderiv(r_min: float, s: float, y: float, phase_offset: float = 0.0) -> complex:
    """Complex log-derivative u'/u of the short-range QDT wave at ``r_min``.

    ``phase_offset`` shifts the WKB phase reference; it exists only as a
    negative-control hook for the validation suite.
    """
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"y out of [0,1]: {y}")
    phi = phase_from_s(s) if np.isfinite(s) else -math.pi / 8
    k = R6**2 / r_min**3
    A = R6**2 / (2.0 * r_min**2) - phi + phase_offset
    R = reflection_amplitude(y)
    ep, em = np.exp(1j * A), np.exp(-1j * A)
    den = ep - R * em
    if abs(den) < 1e-12 * (1.0 + R):
        raise BoundaryPoleError(f"boundary log-derivative has a pole at r_min={r_min}")
    Z = 1.5 / r_min - 1j * k * (ep + R * em) / den
    if y == 0.0:
        # unimodular reflection: the imaginary part vanishes identically
        Z = complex(Z.real, 0.0)
    return complex(Z)


def boundary_logderiv_exact(r_min: float, s: float, y: float, ells, phase_offset: float = 0.0) -> np.ndarray:
    """Per-channel boundary log-derivatives from the exact zero-energy vdW solutions.

    u_l = sqrt(r) [exp(i t) H1_nu(x) - R exp(-i t) H2_nu(x)] with
    nu = (2l+1)/4 and t = nu pi/2 + pi/4 - phi, which reduces to the WKB wave
    exp(iA) - R exp(-iA) deep inside the well for every l.
    """
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"y out of [0,1]: {y}")
    phi = (phase_from_s(s) if np.isfinite(s) else -math.pi / 8) - phase_offset
    ells = np.atleast_1d(np.asarray(ells))
    nu = (2 * ells + 1) / 4.0
    x = R6**2 / (2.0 * r_min**2)
    R = reflection_amplitude(y)
    J, Yn = jv(nu, x), yv(nu, x)
    dJ = jv(nu - 1, x) - nu / x * J
    dY = yv(nu - 1, x) - nu / x * Yn
    t = nu * math.pi / 2 + math.pi / 4 - phi
    a, b = np.exp(1j * t), R * np.exp(-1j * t)
    # a H1 - b H2 = (a - b) J + i (a + b) Y
    cJ, cY = a - b, 1j * (a + b)
    f = cJ * J + cY * Yn
    df = cJ * dJ + cY * dY
    if np.any(np.abs(f) < 1e-14 * (np.abs(cJ * J) + np.abs(cY * Yn))):
        raise BoundaryPoleError(f"boundary log-derivative has a pole at r_min={r_min}")
    Z = 0.5 / r_min - (R6**2 / r_min**3) * df / f
    if y == 0.0:
        Z = Z.real.astype(complex)
    return Z


def safe_boundary_logderiv(r_min: float, s: float, y: float, h: float, phase_offset: float = 0.0) -> tuple[complex, float]:
    """Like :func:`boundary_logderiv` but steps r_min by ``h`` past a pole."""
    try:
        return boundary_logderiv(r_min, s, y, phase_offset), r_min
    except BoundaryPoleError:
        warnings.warn(f"boundary pole at r_min={r_min:g}; using r_min={r_min + h:g}", RuntimeWarning)
        return boundary_logderiv(r_min + h, s, y, phase_offset), r_min + h


def reference_mixing(ell: int, phi: float) -> float:
    """Coefficient c in J_nu + c Y_nu for the y = 0 wave of short-range phase phi.

    Equals tan(phi + pi/8) for l = 0.
    """
    nu = (2 * ell + 1) / 4.0
    t = nu * math.pi / 2 + math.pi / 4 - phi
    return math.cos(t) / math.sin(t)


def zero_energy_reference(r, ell: int, phi: float):
    """Zero-energy vdW radial function sqrt(r) [J_nu(x) + c Y_nu(x)].

    nu = (2 l + 1) / 4, x = R6^2 / (2 r^2) and c = :func:`reference_mixing`.
    Test oracle only.
    """
    r = np.asarray(r, dtype=float)
    nu = (2 * ell + 1) / 4.0
    x = R6**2 / (2.0 * r**2)
    return np.sqrt(r) * (jv(nu, x) + reference_mixing(ell, phi) * yv(nu, x))


def zero_energy_reference_logderiv(r, ell: int, phi: float):
    """Log-derivative of :func:`zero_energy_reference`, from Bessel recurrences."""
    r = np.asarray(r, dtype=float)
    nu = (2 * ell + 1) / 4.0
    x = R6**2 / (2.0 * r**2)
    t = reference_mixing(ell, phi)
    f = jv(nu, x) + t * yv(nu, x)
    # d/dx C_nu = C_{nu-1} - nu/x C_nu
    df = (jv(nu - 1, x) + t * yv(nu - 1, x)) - nu / x * f
    dxdr = -R6**2 / r**3
    return 0.5 / r + df * dxdr / f


def check_rmin(r_min: float, energy: float, l_check: int = 3, ratio: float = 1e3, extra: float = 0.0) -> bool:
    """True when the vdW term dominates every other term at r_min by ``ratio``."""
    vdw = R6**4 / r_min**6
    other = max(l_check * (l_check + 1) / r_min**2, abs(energy), abs(extra))
    return vdw >= ratio * other
