"""
Partial-wave coupling matrices and harmonic-oscillator channel functions.

The interaction (1 - 3 cos^2 theta) = -2 P2(cos theta) and the trap term
cos^2 theta = (1 + 2 P2) / 3 are both built from the tridiagonal matrix of
cos(theta) between spherical harmonics of fixed m, so their matrix elements
are exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .params import R6_4


def _cos_element(l: int, m: int) -> float:
    """<l+1, m| cos(theta) |l, m>."""
    m = abs(m)
    if l < m:
        return 0.0
    return math.sqrt(((l + 1) ** 2 - m * m) / ((2 * l + 1) * (2 * l + 3)))


def _check_domain(lp: int, l: int, m: int) -> None:
    if abs(m) > l or abs(m) > lp:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {min(l, lp)}")


def cos2_element(lp: int, l: int, m: int) -> float:
    """<lp, m| cos^2(theta) |l, m>."""
    _check_domain(lp, l, m)
    if lp == l:
        # intermediate states l +- 1; l - 1 must still carry |m|
        return _cos_element(l, m) ** 2 + (_cos_element(l - 1, m) ** 2 if l - 1 >= abs(m) else 0.0)
    if abs(lp - l) == 2:
        lo = min(l, lp)
        return _cos_element(lo, m) * _cos_element(lo + 1, m)
    return 0.0


def p2_element(lp: int, l: int, m: int) -> float:
    """<lp, m| P2(cos theta) |l, m>."""
    _check_domain(lp, l, m)
    c2 = cos2_element(lp, l, m)
    return 0.5 * (3.0 * c2 - (1.0 if lp == l else 0.0))


@dataclass(frozen=True)
class ChannelBasis:
    """Spherical partial waves (l, m) of a single parity, l = l0, l0+2, ..., <= l_max."""

    m: int
    parity: int
    l_max: int

    @cached_property
    def ells(self) -> np.ndarray:
        m = abs(self.m)
        l0 = m if m % 2 == self.parity else m + 1
        return np.arange(l0, self.l_max + 1, 2)

    @property
    def size(self) -> int:
        return len(self.ells)

    @classmethod
    def for_params(cls, params, l_max: int) -> "ChannelBasis":
        return cls(m=int(params.m), parity=params.ell_parity, l_max=int(l_max))

    def centrifugal(self) -> np.ndarray:
        return (self.ells * (self.ells + 1)).astype(float)

    def _angular(self, fn) -> np.ndarray:
        ells = self.ells
        n = len(ells)
        A = np.zeros((n, n))
        for i in range(n):
            for j in range(max(0, i - 1), min(n, i + 2)):
                A[i, j] = fn(int(ells[i]), int(ells[j]), self.m)
        return A

    @cached_property
    def p2(self) -> np.ndarray:
        return self._angular(p2_element)

    @cached_property
    def cos2(self) -> np.ndarray:
        return self._angular(cos2_element)


class PotentialMatrix:
    """W(r) in the spherical basis, energies in E_a and lengths in abar.

    W_{l'l}(r) = delta_{l'l} [l(l+1)/r^2 - c6/r^6] - (4 a_d / r^3) <l'|P2|l>
                 + (r^2 / a_h^4) <l'|cos^2|l>

    ``c6`` defaults to (R6/abar)^4; pass 0 to switch the van der Waals
    attraction off.  ``a_h=None`` (or ``inf``) removes the trap.
    """

    def __init__(self, basis: ChannelBasis, a_d: float = 0.0, a_h: float | None = None, c6: float = R6_4):
        self.basis = basis
        self.a_d = float(a_d)
        self.inv_ah4 = 0.0 if a_h is None or not np.isfinite(a_h) else 1.0 / float(a_h) ** 4
        self.c6 = float(c6)
        self._cent = basis.centrifugal()
        self._dip = -4.0 * self.a_d * basis.p2
        self._trap = self.inv_ah4 * basis.cos2
        self._dip_diag = np.diag(self._dip).copy()
        self._trap_diag = np.diag(self._trap).copy()

    @property
    def size(self) -> int:
        return self.basis.size

    def __call__(self, r: float) -> np.ndarray:
        W = self._dip / r**3 + self._trap * r**2
        W[np.diag_indices_from(W)] += self._cent / r**2 - self.c6 / r**6
        return W

    def diagonal(self, r):
        """Diagonal of W at one or many radii (shape (..., N))."""
        r = np.asarray(r, dtype=float)[..., None]
        return self._cent / r**2 - self.c6 / r**6 + self._dip_diag / r**3 + self._trap_diag * r**2


def potential_matrix(r: float, basis: ChannelBasis, params, c6: float = R6_4) -> np.ndarray:
    return PotentialMatrix(basis, params.a_d, params.a_h, c6)(r)


# --- harmonic oscillator channel functions ---------------------------------

_LOG_BIG = 200.0


def oscillator_table(n_max: int, z, a_h: float) -> np.ndarray:
    """Normalized oscillator eigenfunctions phi_0..phi_{n_max} at points ``z``.

    Returns an array of shape (n_max + 1, *z.shape).  The three-term
    recursion is carried out on rescaled values with a running log-scale so
    that large n and large |z| neither overflow nor lose the Gaussian factor
    prematurely.
    """
    z = np.asarray(z, dtype=float)
    t = z / a_h
    out = np.zeros((n_max + 1,) + t.shape)
    # phi_n = exp(logs) * v_n; start with v_0 = 1
    logs = -0.5 * t * t - 0.25 * math.log(math.pi) - 0.5 * math.log(a_h)
    v_prev = np.zeros_like(t)
    v = np.ones_like(t)
    out[0] = np.exp(logs)
    for n in range(n_max):
        v_next = math.sqrt(2.0 / (n + 1)) * t * v - math.sqrt(n / (n + 1)) * v_prev
        v_prev, v = v, v_next
        big = np.abs(v) > math.exp(_LOG_BIG)
        if np.any(big):
            scale = np.where(big, math.exp(-_LOG_BIG), 1.0)
            v = v * scale
            v_prev = v_prev * scale
            logs = logs + np.where(big, _LOG_BIG, 0.0)
        with np.errstate(under="ignore", over="ignore"):
            out[n + 1] = v * np.exp(logs)
    return out


def oscillator_fn(n: int, z, a_h: float):
    return oscillator_table(n, z, a_h)[n]


def oscillator_dfn(n: int, z, a_h: float):
    """d phi_n / dz via phi_n' = [sqrt(n/2) phi_{n-1} - sqrt((n+1)/2) phi_{n+1}] / a_h."""
    tab = oscillator_table(n + 1, z, a_h)
    lower = math.sqrt(n / 2.0) * tab[n - 1] if n > 0 else 0.0
    return (lower - math.sqrt((n + 1) / 2.0) * tab[n + 1]) / a_h


def oscillator_table_with_derivative(n_max: int, z, a_h: float):
    tab = oscillator_table(n_max + 1, z, a_h)
    d = np.empty_like(tab[:-1])
    for n in range(n_max + 1):
        lower = math.sqrt(n / 2.0) * tab[n - 1] if n > 0 else 0.0
        d[n] = (lower - math.sqrt((n + 1) / 2.0) * tab[n + 1]) / a_h
    return tab[:-1], d
