"""
Oracle suite: closed forms, analytic limits and invariants across all modules.

Each check returns a :class:`Check` with the measured deviation and the
tolerance it is held to.  :func:`validate_suite` runs them all and also
calibrates (and persists) abar1.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .couplings import cos2_element, oscillator_table, p2_element
from .params import ModelParams, NumericsParams
from .propagator import RadialGrid, Reference3D, init_state, propagate
from .qdt import phase_from_s, s_from_phase
from .smatrix import calibrate_abar1, load_abar1, save_abar1, universal_rates, abar1_cache_path

logger = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: measured {self.measured:.3g}, tolerance {self.tolerance:.3g}{extra}"


def _check(name, measured, tol, detail="", passed=None) -> Check:
    ok = bool(measured <= tol) if passed is None else bool(passed)
    return Check(name, float(measured), float(tol), ok, detail)


# --- individual checks -----------------------------------------------------------


def angular_quadrature(l_max: int = 12) -> float:
    """Largest deviation of p2/cos2 elements from Gauss-Legendre angular quadrature."""
    from .smatrix import theta_functions

    x, w = np.polynomial.legendre.leggauss(64)
    theta = np.arccos(x)
    err = 0.0
    for m in range(0, 4):
        ells = np.arange(m, l_max + 1)
        T = theta_functions(ells, m, theta)
        c2 = (T * (w * x * x)) @ T.T
        for i, lp in enumerate(ells):
            for j, l in enumerate(ells):
                if abs(lp - l) > 2:
                    continue
                err = max(err, abs(cos2_element(lp, l, m) - c2[i, j]))
                err = max(err, abs(p2_element(lp, l, m) - 0.5 * (3 * c2[i, j] - (lp == l))))
    return err


def oscillator_normalization(n_max: int = 20, a_h: float = 1.7) -> float:
    x, w = np.polynomial.hermite.hermgauss(80)
    z = a_h * x
    tab = oscillator_table(n_max, z, a_h)
    gram = (tab * (w * np.exp(x * x) * a_h)) @ tab.T
    return float(np.abs(gram - np.eye(n_max + 1)).max())


def phase_round_trip() -> float:
    s = np.linspace(-50, 50, 2001)
    return float(np.max(np.abs(s_from_phase(phase_from_s(s)) - s) / np.maximum(1, np.abs(s))))


def free_particle(k: float = 2.0, r0: float = 0.3, R: float = 5.0) -> float:
    from .propagator import build_grid

    grid = build_grid(lambda r: np.zeros(1), k * k, r0, R, ppw=400, h_max=0.004)
    st = init_state(1, k / math.tan(k * r0), r0)
    out = propagate(st, grid, lambda r: np.zeros((1, 1)), k * k)
    exact = k / math.tan(k * R)
    return abs(out.Y[0, 0].real - exact) / abs(exact)


def free_space_identity(s_values=(-2.0, -0.5, 0.5, 3.0), k: float = 1e-3, phase_offset: float = 0.0, **numerics) -> tuple[float, list]:
    """Largest |alpha/abar - s|/|s| for l = 0, y = 0 free-space vdW scattering."""
    ref = Reference3D(0, k, R_max=200.0, phase_offset=phase_offset, **numerics)
    vals = [ref.scattering_length(s, 0.0).real for s in s_values]
    err = max(abs(a - s) / abs(s) for a, s in zip(vals, s_values))
    return err, vals


def universal_s_wave(k: float = 1e-3) -> tuple[float, complex]:
    a = Reference3D(0, k, R_max=200.0).scattering_length(0.0, 1.0)
    return max(abs(a.real - 1.0), abs(-a.imag - 1.0)), a


def p_wave_resonance(k: float = 1e-2, y: float = 0.1) -> tuple[float, float]:
    from .analysis import locate_resonance

    ref = Reference3D(1, k, R_max=2000.0)
    s = np.linspace(1.0, 3.0, 201)
    beta = np.array([-ref.scattering_length(x, y).imag for x in s])
    res = locate_resonance(s, beta)
    return abs(res.s_peak - 2.0), res.s_peak


def quasi2d_null(a_h: float = 1.7) -> float:
    """|S00 - 1| with van der Waals and dipole off and a regular inner boundary."""
    from .propagator import riccati_pair
    from .solver import QuasiTwoD

    p = ModelParams(a_h=a_h, q=0.05, a_d=0.0)
    Q = QuasiTwoD(p, NumericsParams(r_min=0.05), c6=0.0)
    k = math.sqrt(Q.energy)
    s, ds, _, _ = riccati_pair(Q.basis.ells, k * Q.numerics.r_min)
    sm = Q.smatrix_from_Y(np.diag(k * ds / s))
    return float(np.abs(sm.S - np.eye(len(sm.S))).max())


def quasi2d_unitarity(a_h_values=(1.7, 5.2), a_d_values=(0.0, 0.73, 2.0), s_values=np.linspace(-6, 6, 25)) -> float:
    from .solver import QuasiTwoD

    worst = 0.0
    for a_h in a_h_values:
        for a_d in a_d_values:
            Q = QuasiTwoD(ModelParams(a_h=a_h, a_d=a_d, q=0.05))
            for s in s_values:
                sm = Q.smatrix(float(s), 0.0)
                worst = max(worst, abs(sm.loss), abs(abs(np.linalg.det(sm.S)) - 1.0))
    return worst


def universal_quasi2d(abar1: float, a_h: float = 5.2, q: float = 0.05) -> tuple[float, float, float, float]:
    """Relative deviation of beta from g1 L1 / g, and the same for the 3D-equivalent beta."""
    from .solver import QuasiTwoD
    from .sweep import beta_3d_equivalent

    p = ModelParams(a_h=a_h, q=q, a_d=0.0, y=1.0)
    obs = QuasiTwoD(p).solve(0.0, 1.0)
    target = universal_rates(q, 2, 1, g=p.g, abar1=abar1).beta
    b_eff = beta_3d_equivalent(obs.beta, q, a_h, int(p.m))
    return abs(obs.beta - target) / target, abs(b_eff - target) / target, obs.beta, target


def determinism() -> bool:
    from .sweep import Axis, SweepSpec, run_sweep, to_csv

    spec = SweepSpec(
        base=ModelParams(y=0.7, a_h=1.7, q=0.05),
        axes=(Axis("a_d", spacing="list", values=(0.0, 0.73)), Axis("s", -2.0, 2.0, 5)),
    )
    return to_csv(run_sweep(spec, workers=1)) == to_csv(run_sweep(spec, workers=2))


# --- suite ---------------------------------------------------------------------------


def validate_suite(progress: Optional[Callable[[Check], None]] = None, cache_path=None) -> list[Check]:
    """Run every oracle and invariant check; returns the list of results."""
    checks: list[Check] = []

    def run(fn):
        t = time.perf_counter()
        c = fn()
        c.seconds = time.perf_counter() - t
        checks.append(c)
        if progress:
            progress(c)

    run(lambda: _check("angular elements vs quadrature", angular_quadrature(), 1e-10))
    run(lambda: _check("oscillator orthonormality n<=20", oscillator_normalization(), 1e-10))
    run(lambda: _check("s(phi) round trip", phase_round_trip(), 1e-12))
    run(lambda: _check("free-particle log-derivative", free_particle(), 1e-9))

    def fs():
        err, vals = free_space_identity()
        return _check("free-space a/abar = s (l=0, y=0)", err, 1e-3, "alpha = " + ", ".join(f"{v:.5f}" for v in vals))

    run(fs)

    def us():
        err, a = universal_s_wave()
        return _check("universal s-wave a = abar(1 - i)", err, 5e-3, f"a = {a:.5f}")

    run(us)

    def pw():
        err, sp = p_wave_resonance()
        return _check("p-wave resonance at s = 2", err, 0.05, f"s_peak = {sp:.4f}")

    run(pw)
    run(lambda: _check("quasi-2D null test |S - 1|", quasi2d_null(), 1e-6))
    run(lambda: _check("quasi-2D unitarity at y = 0", quasi2d_unitarity(), 1e-6))

    state = {}

    def cal():
        previous = None
        try:
            previous = load_abar1(cache_path)
        except Exception:
            pass
        fit = calibrate_abar1()
        save_abar1(fit, cache_path)
        state["abar1"] = fit.value
        change = abs(fit.value - previous) / fit.value if previous else 0.0
        return _check("abar1 calibration reproducible", change, 1e-3, f"abar1 = {fit.value:.6f}, fit residual {fit.residual:.1e}")

    run(cal)

    def uq():
        err, err_eff, beta, target = universal_quasi2d(state["abar1"])
        return _check(
            "universal quasi-2D beta = g1 L1 / g",
            err,
            0.10,
            f"beta = {beta:.5f}, target {target:.5f}; 3D-equivalent beta deviates by {err_eff:.3f}",
        )

    run(uq)
    run(lambda: _check("sweep determinism across worker counts", 0.0 if determinism() else 1.0, 0.0))
    return checks
