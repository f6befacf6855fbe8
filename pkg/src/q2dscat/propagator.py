"""
Log-derivative propagation of the coupled radial equations u'' = [W(r) - E] u.

The integrator is Johnson's log-derivative method: Simpson-weighted
potential "kicks" alternate with exact free propagation over each step,
with the usual midpoint correction that makes the scheme fourth order.

Two forms are provided:

* :func:`propagate` carries a single log-derivative matrix Y(r).
* :func:`sector_propagator` accumulates the four-block propagator
  (R1, R2, R3, R4) defined by

      u'(a) = R1 u(a) + R2 u(b),   u'(b) = R3 u(a) + R4 u(b),

  so that Y(b) = R4 + R3 (Y(a) - R1)^{-1} R2 can be evaluated for any
  boundary value Y(a) without repeating the propagation.  Parameter sweeps
  over the short-range phase and reactivity reuse one propagator.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .params import R6_4
from .qdt import boundary_logderiv, boundary_logderiv_exact

logger = logging.getLogger(__name__)

_CHUNK = 256


@dataclass
class LogDerivState:
    r: float
    Y: np.ndarray
    steps: int = 0
    max_step_error: float = 0.0


@dataclass(frozen=True)
class RadialGrid:
    """Simpson grid: nodes r_0 < ... < r_{2M}; steps come in equal pairs."""

    nodes: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def R_max(self) -> float:
        return float(self.nodes[-1])

    def __len__(self) -> int:
        return len(self.nodes)


def build_grid(
    diag: Callable[[np.ndarray], np.ndarray],
    energy: float,
    r_min: float,
    R_max: float,
    ppw: float = 12.0,
    h_max: float = 0.5,
    h_rel: float = 0.05,
    refine: float = 1.0,
) -> RadialGrid:
    """Adaptive Simpson grid.

    The step is h(r) = min(lambda_local / ppw, h_max, h_rel r) with
    lambda_local = 2 pi / sqrt(max_channel |W_diag(r) - E|).  ``refine``
    divides every step by a single global factor.
    """
    if not r_min < R_max:
        raise ValueError("r_min < R_max required")

    def h_at(r):
        w = np.max(np.abs(np.atleast_1d(diag(r)) - energy))
        lam = 2.0 * math.pi / math.sqrt(w) if w > 0 else math.inf
        return min(lam / ppw, h_max, h_rel * r) / refine

    nodes = [r_min]
    r = r_min
    while r < R_max:
        h = h_at(r)
        h = min(h, h_at(min(r + 2 * h, R_max)))
        if r + 2 * h >= R_max * (1 - 1e-12) or R_max - (r + 2 * h) < 0.5 * h:
            h = 0.5 * (R_max - r)
            nodes += [r + h, R_max]
            break
        nodes += [r + h, r + 2 * h]
        r = r + 2 * h
    return RadialGrid(np.asarray(nodes))


def _kicks(potential, energy: float, grid: RadialGrid, i0: int, i1: int) -> np.ndarray:
    """Johnson quadrature kicks for nodes i0..i1-1 (added to the log-derivative)."""
    nodes = grid.nodes
    h = np.diff(nodes)
    n_last = len(nodes) - 1
    out = []
    for i in range(i0, i1):
        r = nodes[i]
        V = np.array(potential(r), dtype=float, copy=True)
        V[np.diag_indices_from(V)] -= energy
        if i % 2 == 1:
            hi = h[i - 1]
            A = np.eye(len(V)) - (hi * hi / 6.0) * V
            out.append((4.0 * hi / 3.0) * np.linalg.solve(A, V))
        else:
            w = (h[i - 1] if i > 0 else 0.0) + (h[i] if i < n_last else 0.0)
            out.append((w / 3.0) * V)
    return np.asarray(out)


def _iter_kicks(potential, energy, grid):
    n = len(grid.nodes)
    for i0 in range(0, n, _CHUNK):
        i1 = min(n, i0 + _CHUNK)
        for K in _kicks(potential, energy, grid, i0, i1):
            yield K


def init_state(n_channels: int, Z: complex | np.ndarray, r_min: float) -> LogDerivState:
    """Y(r_min) = diag(Z) (a scalar Z is shared by all channels)."""
    Z = np.broadcast_to(np.asarray(Z), (n_channels,))
    dtype = complex if np.iscomplexobj(Z) else float
    return LogDerivState(r=r_min, Y=np.diag(Z).astype(dtype))


def propagate(state: LogDerivState, grid: RadialGrid, potential, energy: float) -> LogDerivState:
    """Propagate Y from grid start to grid end (plain Johnson recursion)."""
    if not math.isclose(state.r, grid.r_min, rel_tol=1e-12):
        raise ValueError("state is not at the grid start")
    Y = np.array(state.Y, copy=True)
    dtype = np.result_type(Y.dtype, float)
    Y = Y.astype(dtype)
    I = np.eye(len(Y))
    steps = np.diff(grid.nodes)
    n = len(grid.nodes)
    for i, K in enumerate(_iter_kicks(potential, energy, grid)):
        Y = Y + K
        if i == n - 1:
            break
        h = steps[i]
        # Y <- Y (1 + h Y)^{-1} = (1 - (1 + h Y)^{-1}) / h
        try:
            Y = (I - np.linalg.inv(I + h * Y)) / h
        except np.linalg.LinAlgError:
            # exact node on the grid: split the step
            Y = _half_steps(Y, h, I)
    return LogDerivState(r=grid.R_max, Y=Y, steps=n - 1, max_step_error=state.max_step_error)


def _half_steps(Y, h, I):
    for _ in range(2):
        Y = (I - np.linalg.inv(I + 0.5 * h * Y)) / (0.5 * h)
    return Y


@dataclass
class SectorPropagator:
    """Log-derivative propagator of the interval [a, b] (see module docstring)."""

    a: float
    b: float
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray
    R4: np.ndarray
    _eig: Optional[tuple] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.R1)

    def apply(self, Ya) -> np.ndarray:
        """Y(b) for a boundary log-derivative matrix (or scalar) Y(a)."""
        Ya = np.asarray(Ya)
        if Ya.ndim == 0:
            return self.apply_scalar(complex(Ya))
        return self.R4 + self.R3 @ np.linalg.solve(Ya - self.R1, self.R2)

    def apply_scalar(self, Z: complex) -> np.ndarray:
        """Y(b) for Y(a) = Z * identity, using one cached eigendecomposition of R1."""
        if self._eig is None:
            lam, V = np.linalg.eig(self.R1)
            A = self.R3 @ V
            B = np.linalg.solve(V, self.R2)
            self._eig = (lam, A, B)
        lam, A, B = self._eig
        Y = self.R4 + (A / (Z - lam)) @ B
        if np.isrealobj(self.R1) and np.imag(Z) == 0:
            Y = Y.real
        return Y


def sector_propagator(grid: RadialGrid, potential, energy: float) -> SectorPropagator:
    nodes = grid.nodes
    steps = np.diff(nodes)
    n = len(nodes)
    kicks = _iter_kicks(potential, energy, grid)
    K0 = next(kicks)
    N = len(K0)
    I = np.eye(N)
    h = steps[0]
    R1 = -(I / h + K0)
    R2 = I / h
    R3 = -I / h
    R4 = I / h
    for i, K in enumerate(kicks, start=1):
        if i == n - 1:
            R4 = R4 + K
            break
        h = steps[i]
        G = np.linalg.inv(I / h + K + R4)
        GR3 = G @ R3
        R1 = R1 - (R2 @ GR3)
        R2 = (R2 @ G) / h
        R3 = GR3 / h
        R4 = I / h - G / (h * h)
    return SectorPropagator(a=float(nodes[0]), b=float(nodes[-1]), R1=R1, R2=R2, R3=R3, R4=R4)


def boundary_value(r_min: float, s: float, y: float, ells, mode: str = "exact", phase_offset: float = 0.0) -> np.ndarray:
    """Per-channel boundary log-derivatives in the requested form ("exact" or "wkb")."""
    if mode == "exact":
        return boundary_logderiv_exact(r_min, s, y, ells, phase_offset)
    if mode == "wkb":
        Z = boundary_logderiv(r_min, s, y, phase_offset)
        return np.full(len(np.atleast_1d(ells)), Z, dtype=complex)
    raise ValueError(f"unknown boundary mode {mode!r}")


# --- single-channel free-space reference ------------------------------------


class SingleChannelVdW:
    """l(l+1)/r^2 - c6/r^6 as a 1x1 potential."""

    def __init__(self, ell: int, c6: float = R6_4):
        self.ell = ell
        self.c6 = c6

    def __call__(self, r):
        return np.array([[self.ell * (self.ell + 1) / r**2 - self.c6 / r**6]])

    def diagonal(self, r):
        r = np.asarray(r, dtype=float)[..., None]
        return self.ell * (self.ell + 1) / r**2 - self.c6 / r**6


def riccati_pair(ell: int, x):
    """Riccati-Bessel s_l(x) = x j_l(x) ~ sin(x - l pi/2), c_l(x) = -x y_l(x) ~ cos(x - l pi/2), with derivatives."""
    j, dj = spherical_jn(ell, x), spherical_jn(ell, x, derivative=True)
    y, dy = spherical_yn(ell, x), spherical_yn(ell, x, derivative=True)
    s, ds = x * j, j + x * dj
    c, dc = -x * y, -(y + x * dy)
    return s, ds, c, dc


def kmatrix_3d(Y: complex, ell: int, k: float, R: float) -> complex:
    """Complex tan(delta) from the log-derivative at R: u ~ s_l(kr) + K c_l(kr)."""
    s, ds, c, dc = riccati_pair(ell, k * R)
    return -(Y * s - k * ds) / (Y * c - k * dc)


@dataclass
class Reference3D:
    """Cached single-channel vdW propagation at fixed (l, k)."""

    ell: int
    k: float
    r_min: float = 0.2
    R_max: float = 2000.0
    ppw: float = 64.0
    h_max: float = 0.5
    h_rel: float = 0.05
    phase_offset: float = 0.0
    boundary: str = "exact"

    def __post_init__(self):
        pot = SingleChannelVdW(self.ell)
        grid = build_grid(pot.diagonal, self.k**2, self.r_min, self.R_max, self.ppw, self.h_max, self.h_rel)
        self.grid = grid
        self.prop = sector_propagator(grid, pot, self.k**2)

    def scattering_length(self, s: float, y: float) -> complex:
        Z = boundary_value(self.r_min, s, y, [self.ell], self.boundary, self.phase_offset)[0]
        Y = complex(self.prop.apply_scalar(Z)[0, 0])
        K = kmatrix_3d(Y, self.ell, self.k, self.R_max)
        return -K / self.k


def solve_3d_reference(ell: int, s: float, y: float, k: float, **numerics) -> complex:
    """Complex scattering length abar-units for free-space vdW scattering in partial wave l.

    a(E) = (1/ik)(1 - S)/(1 + S) = -tan(delta)/k with the complex tan(delta)
    taken from the Riccati-Bessel matching at R_max.
    """
    return Reference3D(ell, k, **numerics).scattering_length(s, y)
