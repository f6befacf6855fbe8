"""
Asymptotic matching on the sphere r = R and scattering observables.

Outside the matching sphere the relative motion is described in trap
channels (n_z, m): an oscillator function phi_n(z) times a 2D radial
function of rho.  Open channels carry a pair of standing waves that behave
as J_m(q_n rho) and Y_m(q_n rho) at large rho; closed channels carry the
decaying K_m(kappa_n rho).  Every channel function is projected onto the
spherical harmonics Y_lm on the sphere, giving matrices F (and dF/dR) that
are matched to the propagated log-derivative matrix in least squares.

The open-channel standing waves are by default *distorted*: the 2D radial
equation including the z-averaged van der Waals and dipole potentials is
integrated inwards from a large radius where they reduce to J_m, Y_m.  The
1/rho^3 dipole tail otherwise makes the extracted scattering length depend
on where the matching sphere sits.
"""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import jv, yv, jvp, yvp, kve, sph_legendre_p

from .couplings import ChannelBasis, oscillator_table_with_derivative
from .params import R6_4, Statistics, threshold

logger = logging.getLogger(__name__)


# --- channels ----------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticChannels:
    """Parity-allowed trap channels (n_z, m) at total energy ``energy``.

    ``wavenumber`` holds q_n for open channels and kappa_n for closed ones.
    """

    m: int
    n_z: np.ndarray
    thresholds: np.ndarray
    energy: float

    @property
    def is_open(self) -> np.ndarray:
        return self.thresholds < self.energy

    @property
    def n_open(self) -> int:
        return int(np.count_nonzero(self.is_open))

    @property
    def n_closed(self) -> int:
        return len(self.n_z) - self.n_open

    @property
    def wavenumber(self) -> np.ndarray:
        return np.sqrt(np.abs(self.energy - self.thresholds))

    def __len__(self) -> int:
        return len(self.n_z)


def asymptotic_channels(m: int, parity: int, a_h: float, energy: float, count: int) -> AsymptoticChannels:
    """The first ``count`` channels with n_z = parity - m (mod 2)."""
    n0 = (parity - abs(m)) % 2
    n_z = n0 + 2 * np.arange(count)
    th = np.asarray(threshold(n_z, a_h), dtype=float)
    ch = AsymptoticChannels(m=int(m), n_z=n_z, thresholds=th, energy=float(energy))
    if ch.n_open == 0:
        raise ValueError("no open channel at this energy")
    if np.any(np.abs(th - energy) < 1e-12 * energy):
        raise ValueError("energy sits exactly on a channel threshold")
    return ch


# --- 2D radial functions -----------------------------------------------------


def averaged_potential(rho, n: int, a_h: float, a_d: float, c6: float = R6_4, order: int = 48):
    """<phi_n| -c6/r^6 + 2 a_d (1 - 3 z^2/r^2)/r^3 |phi_n> at in-plane distance rho."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    t, w = np.polynomial.hermite.hermgauss(order)
    z = a_h * t
    # phi_n(z)^2 = exp(-t^2) * poly^2 / a_h, so the Gauss-Hermite weight absorbs the Gaussian
    tab, _ = oscillator_table_with_derivative(n, z, a_h)
    dens = tab[n] ** 2 * np.exp(t * t) * a_h
    r2 = rho[:, None] ** 2 + z[None, :] ** 2
    v = -c6 / r2**3 + 2.0 * a_d * (1.0 - 3.0 * z[None, :] ** 2 / r2) / r2**1.5
    return (v * (w * dens)[None, :]).sum(axis=1)


class AveragedPotential:
    """Spline of rho^3 U_nn(rho) on [rho_in, rho_out] for fast repeated evaluation."""

    def __init__(self, n: int, a_h: float, a_d: float, rho_in: float, rho_out: float, c6: float = R6_4, points: int = 400):
        from scipy.interpolate import CubicSpline

        grid = np.geomspace(rho_in, rho_out, points)
        self._spline = CubicSpline(np.log(grid), grid**3 * averaged_potential(grid, n, a_h, a_d, c6))
        self.rho_in, self.rho_out = rho_in, rho_out

    def __call__(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        return self._spline(np.log(rho)) / rho**3


class RadialPair:
    """Standing-wave pair (f_J, f_Y) of one open channel, with derivatives."""

    def __call__(self, rho):  # pragma: no cover - interface
        raise NotImplementedError


class FreePair(RadialPair):
    def __init__(self, m: int, q: float):
        self.m, self.q = m, q

    def __call__(self, rho):
        x = self.q * np.asarray(rho, dtype=float)
        m = self.m
        return jv(m, x), self.q * jvp(m, x), yv(m, x), self.q * yvp(m, x)


class DistortedPair(RadialPair):
    """Solutions of f'' = -f'/rho + (m^2/rho^2 + U(rho) - q^2) f with J_m, Y_m asymptotics.

    Integrated inwards with an explicit Runge-Kutta scheme from ``rho_far``
    down to ``rho_in``; below ``rho_in`` the free functions are returned
    (those points carry negligible oscillator weight on the sphere).
    """

    def __init__(self, m: int, q: float, U, rho_in: float, rho_far: float, rtol: float = 1e-11):
        self.m, self.q = m, q
        self.rho_in = rho_in
        self._free = FreePair(m, q)
        fJ, dJ, fY, dY = self._free(rho_far)
        y0 = np.array([fJ, dJ, fY, dY], dtype=float)

        def rhs(rho, y):
            c = m * m / rho**2 + U(rho)[0] - q * q
            return [y[1], -y[1] / rho + c * y[0], y[3], -y[3] / rho + c * y[2]]

        sol = solve_ivp(rhs, (rho_far, rho_in), y0, method="DOP853", rtol=rtol, atol=1e-14, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"outer channel integration failed: {sol.message}")
        self._sol = sol.sol

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = [np.array(v, dtype=float, copy=True) for v in self._free(rho)]
        inside = rho >= self.rho_in
        if np.any(inside):
            vals = self._sol(rho[inside])
            for k in range(4):
                out[k][inside] = vals[k]
        return tuple(out)


# --- projection on the sphere -----------------------------------------------


@dataclass
class AsymptoticVectors:
    """Projections of the exterior channel functions on the spherical basis at R.

    Shapes are (N_sph, n_open) for the J and Y families and (N_sph, n_closed)
    for the decaying family; the ``d`` arrays are radial derivatives.
    """

    R: float
    FJ: np.ndarray
    dFJ: np.ndarray
    FY: np.ndarray
    dFY: np.ndarray
    FK: np.ndarray
    dFK: np.ndarray
    channels: AsymptoticChannels


def theta_functions(ells, m: int, theta) -> np.ndarray:
    """Normalized polar functions Theta_lm(theta), int Theta^2 sin(theta) dtheta = 1."""
    ells = np.asarray(ells)
    return np.sqrt(2.0 * math.pi) * np.array([sph_legendre_p(int(l), int(m), theta)[0] for l in ells])


def _project(R, ells, m, x, w, a_h, n_list, radial_fns):
    """F and dF/dR for channel functions phi_n(z) g(rho), with g, g' from radial_fns."""
    sin_t = np.sqrt(1.0 - x * x)
    z, rho = R * x, R * sin_t
    theta = np.arccos(x)
    Th = theta_functions(ells, m, theta)  # (N, nq)
    n_max = int(max(n_list))
    tab, dtab = oscillator_table_with_derivative(n_max, z, a_h)
    F = np.empty((len(ells), len(n_list)))
    dF = np.empty_like(F)
    for j, (n, fn) in enumerate(zip(n_list, radial_fns)):
        g, dg = fn(rho)
        chi = tab[n] * g
        dchi = x * dtab[n] * g + sin_t * tab[n] * dg
        F[:, j] = R * (Th * (w * chi)).sum(axis=1)
        dF[:, j] = (Th * (w * chi)).sum(axis=1) + R * (Th * (w * dchi)).sum(axis=1)
    return F, dF


class ProjectionError(RuntimeError):
    pass


def asymptotic_channel_vectors(
    R: float,
    basis: ChannelBasis,
    channels: AsymptoticChannels,
    a_h: float,
    pairs: Optional[list] = None,
    quad_order: Optional[int] = None,
    check: bool = True,
) -> AsymptoticVectors:
    """Project the exterior channel functions on the spherical partial waves at radius R.

    ``pairs`` holds one :class:`RadialPair` per open channel (free Bessel
    functions if omitted).  Closed channels use K_m(kappa rho) scaled by
    exp(kappa R) to keep entries of order one.
    """
    ells = basis.ells
    m = abs(channels.m)
    k = channels.wavenumber
    opn = channels.is_open
    if pairs is None:
        pairs = [FreePair(m, kk) for kk in k[opn]]
    # resolve both the partial waves and the in-plane oscillation of the open-channel waves
    order = quad_order or (2 * int(ells[-1]) + 40 + int(2 * R * k[opn].max()))

    def closed_fn(kap):
        def f(rho):
            x = kap * rho
            # K_m(x) e^{kappa R} and its rho-derivative, with K_m' = -K_{m-1} - m/x K_m
            scale = np.exp(-kap * (rho - R))
            Km = kve(m, x) * scale
            Kd = -kap * (kve(m - 1, x) * scale + m / np.where(x > 0, x, 1.0) * Km) if m > 0 else -kap * kve(1, x) * scale
            return Km, Kd

        return f

    def compute(order):
        x, w = np.polynomial.legendre.leggauss(order)
        n_open = channels.n_z[opn]
        FJ, dFJ = _project(R, ells, m, x, w, a_h, n_open, [lambda r, p=p: p(r)[0:2] for p in pairs])
        FY, dFY = _project(R, ells, m, x, w, a_h, n_open, [lambda r, p=p: p(r)[2:4] for p in pairs])
        if channels.n_closed:
            FK, dFK = _project(R, ells, m, x, w, a_h, channels.n_z[~opn], [closed_fn(kk) for kk in k[~opn]])
        else:
            FK = dFK = np.zeros((len(ells), 0))
        return FJ, dFJ, FY, dFY, FK, dFK

    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out = compute(order)
        if check:
            ref = compute(2 * order)
            scale = max(np.abs(a).max() for a in ref if a.size)
            diff = max(np.abs(a - b).max() for a, b in zip(out, ref) if a.size)
            if diff > 1e-8 * scale:
                raise ProjectionError(f"angular quadrature not converged: change {diff:.2e} on doubling")
    return AsymptoticVectors(R, *out, channels=channels)


# --- S-matrix ---------------------------------------------------------------


@dataclass
class SMatrixResult:
    S: np.ndarray
    K: np.ndarray
    D: np.ndarray
    residual: float
    condition: float
    converged: bool
    near_pole: bool = False

    @property
    def S00(self) -> complex:
        return complex(self.S[0, 0])

    @property
    def loss(self) -> float:
        """1 - sum_j |S_j0|^2, the reactive probability from the incident channel."""
        return float(1.0 - np.sum(np.abs(self.S[:, 0]) ** 2))


def extract_smatrix(Y: np.ndarray, vec: AsymptoticVectors, tol: float = 1e-3) -> SMatrixResult:
    """K and S from the log-derivative Y at the matching sphere.

    Solves (Y F^J - F^J') = (Y F^Y - F^Y') K - (Y F^K - F^K') D in least
    squares, so that the physical solutions behave as J - Y K in the open
    channels.  Rows are weighted by 1 / max(1, |Y_ii| R) to keep deeply
    closed spherical channels from dominating the fit.
    """
    Y = np.asarray(Y)
    L = Y @ vec.FJ - vec.dFJ
    M = np.hstack([Y @ vec.FY - vec.dFY, -(Y @ vec.FK - vec.dFK)])
    wts = 1.0 / np.maximum(1.0, np.abs(np.diag(Y)) * vec.R)
    Lw, Mw = L * wts[:, None], M * wts[:, None]
    # normalize columns so the condition number reflects geometry, not scaling
    cn = np.linalg.norm(Mw, axis=0)
    cn[cn == 0] = 1.0
    sol, _, rank, sv = np.linalg.lstsq(Mw / cn, Lw, rcond=None)
    sol = sol / cn[:, None]
    n_open = vec.FJ.shape[1]
    K = sol[:n_open]
    D = sol[n_open:]
    # relative to the size of the two terms whose difference forms the left-hand side
    scale = np.linalg.norm((Y @ vec.FJ) * wts[:, None]) + np.linalg.norm(vec.dFJ * wts[:, None])
    res = np.linalg.norm(Mw @ sol - Lw) / max(scale, 1e-300)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    I = np.eye(n_open)
    A = I - 1j * K
    near_pole = np.linalg.cond(A) > 1e10
    if near_pole:
        warnings.warn("near-singular (1 - iK): close to a resonance", RuntimeWarning)
    S = np.linalg.solve(A.T, (I + 1j * K).T).T
    return SMatrixResult(S=S, K=K, D=D, residual=float(res), condition=cond, converged=bool(res <= tol), near_pole=bool(near_pole))


# --- observables --------------------------------------------------------------


def complex_scattering_length(S00: complex, q: float) -> complex:
    """a = (1/iq) (1 - S00)/(1 + S00); infinite at S00 = -1."""
    if q <= 0:
        raise ValueError("q must be positive")
    den = 1.0 + S00
    if den == 0:
        return complex(math.inf, math.inf)
    return (1.0 - S00) / (1j * q * den)


def f_factor(a: complex, q: float) -> float:
    beta = -a.imag
    return 1.0 / (1.0 + q * q * abs(a) ** 2 + 2.0 * q * beta)


def rates(a: complex, q: float, g: int) -> tuple[float, float, float]:
    """(K_el, K_re, f) in units of hbar abar / mu.

    K_el = 4 pi g q |a|^2 f and K_re = 4 pi g beta f.  For an infinite
    scattering length the limits f |a|^2 -> 1/q^2 and f beta -> 0 are used.
    """
    if not np.isfinite(a.real) or not np.isfinite(a.imag):
        return 4.0 * math.pi * g / q, 0.0, 0.0
    f = f_factor(a, q)
    beta = -a.imag
    return 4.0 * math.pi * g * q * abs(a) ** 2 * f, 4.0 * math.pi * g * beta * f, f


@dataclass
class ScatteringObservables:
    """Scattering length, rates and diagnostics of one parameter point."""

    a: complex
    f: float
    K_el: float
    K_re: float
    S00: complex
    loss: float
    residual: float
    l_max: int
    n_open: int
    converged: bool
    pole: bool = False
    populations: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def alpha(self) -> float:
        return float(self.a.real)

    @property
    def beta(self) -> float:
        return float(-self.a.imag)


def observables(sm: SMatrixResult, q: float, g: int, l_max: int) -> ScatteringObservables:
    a = complex_scattering_length(sm.S00, q)
    pole = not np.isfinite(a.real) or sm.near_pole
    K_el, K_re, f = rates(a, q, g)
    return ScatteringObservables(
        a=a,
        f=f,
        K_el=K_el,
        K_re=K_re,
        S00=sm.S00,
        loss=sm.loss,
        residual=sm.residual,
        l_max=l_max,
        n_open=sm.S.shape[0],
        converged=sm.converged,
        pole=bool(pole),
        populations=np.abs(sm.S[:, 0]) ** 2,
    )


# --- universal rates -----------------------------------------------------------

#: g_j and L_j / abar for dimension N = 1, 2, 3; L_1 is given per unit abar1 and
#: per (kappa abar)^2, kappa being k, q or p in 3D, 2D and 1D.
UNIVERSAL_G = {3: (1.0 / math.pi, 1.0 / math.pi), 2: (2.0 / math.pi, 4.0 / math.pi), 1: (2.0, 6.0)}
UNIVERSAL_L0 = {3: 1.0, 2: math.sqrt(math.pi), 1: 2.0}
UNIVERSAL_L1 = {3: 1.0, 2: 1.5 * math.sqrt(math.pi), 1: 6.0}


@dataclass(frozen=True)
class UniversalRate:
    g_j: float
    L_j: float
    K: float
    beta: float


def universal_rates(kappa: float, N: int, j: int, g: int = 2, abar1: Optional[float] = None) -> UniversalRate:
    """Universal reactive rate factor of an N-dimensional gas in partial-wave parity j.

    K = 4 pi g_j L_j in units of hbar abar / mu.  The matching value of the
    scattering-length parameter follows from setting the per-particle rate
    equal to 4 pi g beta (the rate formula at f = 1): beta = g_j L_j / g.
    """
    if N not in UNIVERSAL_G or j not in (0, 1):
        raise ValueError("N must be 1, 2 or 3 and j must be 0 or 1")
    g_j = UNIVERSAL_G[N][j]
    if j == 0:
        L = UNIVERSAL_L0[N]
    else:
        if abar1 is None:
            abar1 = load_abar1()
        L = UNIVERSAL_L1[N] * kappa**2 * abar1
    return UniversalRate(g_j=g_j, L_j=L, K=4.0 * math.pi * g_j * L, beta=g_j * L / g)


# --- abar1 calibration ---------------------------------------------------------


class CalibrationMissing(RuntimeError):
    pass


@dataclass(frozen=True)
class Abar1Fit:
    value: float
    residual: float
    k: np.ndarray = field(repr=False)
    ratio: np.ndarray = field(repr=False)


def calibrate_abar1(k_values=None, **numerics) -> Abar1Fit:
    """abar1 = lim beta_1(k) / (k abar)^2 from the y = 1, l = 1 free-space solver.

    beta_1 / k^2 is fitted by a quadratic in k over k abar in [1e-3, 1e-2] and
    extrapolated to k = 0.
    """
    from .propagator import solve_3d_reference

    if k_values is None:
        k_values = np.geomspace(1e-3, 1e-2, 7)
    k_values = np.asarray(k_values, dtype=float)
    ratio = np.array([-solve_3d_reference(1, 0.0, 1.0, k, **numerics).imag / k**2 for k in k_values])
    coef = np.polyfit(k_values, ratio, 2)
    fit = np.polyval(coef, k_values)
    res = float(np.sqrt(np.mean((fit - ratio) ** 2)) / abs(coef[-1]))
    return Abar1Fit(value=float(coef[-1]), residual=res, k=k_values, ratio=ratio)


def abar1_cache_path() -> Path:
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "q2dscat" / "abar1.json"


def save_abar1(fit: Abar1Fit, path: Optional[Path] = None) -> Path:
    path = Path(path or abar1_cache_path())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"abar1": fit.value, "residual": fit.residual, "k": list(fit.k), "ratio": list(fit.ratio)}, indent=2))
    return path


def load_abar1(path: Optional[Path] = None, calibrate: bool = False) -> float:
    """Persisted abar1; with ``calibrate`` a missing value is computed and stored."""
    path = Path(path or abar1_cache_path())
    try:
        return float(json.loads(path.read_text())["abar1"])
    except (OSError, ValueError, KeyError):
        if not calibrate:
            raise CalibrationMissing(
                f"abar1 is not calibrated (no {path}); run 'q2dscat calibrate-abar1' "
                "or calibrate_abar1() from the free-space reference solver"
            ) from None
    fit = calibrate_abar1()
    save_abar1(fit, path)
    return fit.value
