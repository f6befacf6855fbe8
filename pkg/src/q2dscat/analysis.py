"""
Post-processing of sweep tables: resonance location, circle fits, threshold laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Resonance:
    s_peak: float
    beta_peak: float
    width: float
    monotone: bool = False


def locate_resonance(s, beta) -> Resonance:
    """Peak of beta(s) by a parabola through the three samples around the maximum.

    The width is the distance between the half-maximum crossings (linear
    interpolation between samples); it is ``nan`` when a crossing lies
    outside the sampled range.  A maximum on the boundary of the range is
    reported with ``monotone=True``.
    """
    s = np.asarray(s, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ok = np.isfinite(beta)
    s, beta = s[ok], beta[ok]
    if len(s) < 20:
        raise ValueError("at least 20 finite samples are required")
    order = np.argsort(s)
    s, beta = s[order], beta[order]
    i = int(np.argmax(beta))
    if i == 0 or i == len(s) - 1:
        return Resonance(float(s[i]), float(beta[i]), math.nan, monotone=True)
    x, yv = s[i - 1 : i + 2], beta[i - 1 : i + 2]
    a, b, c = np.polyfit(x - x[1], yv, 2)
    if a < 0:
        dx = -b / (2 * a)
        s_peak, b_peak = x[1] + dx, c - b * b / (4 * a)
    else:
        s_peak, b_peak = x[1], yv[1]
    half = 0.5 * b_peak

    def crossing(idx_range):
        for j in idx_range:
            j0, j1 = j, j + 1 if idx_range.step > 0 else j - 1
            if (beta[j0] - half) * (beta[j1] - half) <= 0:
                t = (half - beta[j0]) / (beta[j1] - beta[j0])
                return s[j0] + t * (s[j1] - s[j0])
        return math.nan

    right = crossing(range(i, len(s) - 1, 1))
    left = crossing(range(i, 0, -1))
    return Resonance(float(s_peak), float(b_peak), float(right - left))


@dataclass(frozen=True)
class Circle:
    alpha_c: float
    beta_c: float
    radius: float
    rms: float

    @property
    def relative_rms(self) -> float:
        return self.rms / self.radius if self.radius > 0 else math.inf


class DegenerateFit(ValueError):
    pass


def circle_fit(alpha, beta, min_points: int = 3) -> Circle:
    """Algebraic (Kasa) least-squares circle through points (alpha, beta).

    Non-finite points are dropped.  ``rms`` is the root-mean-square of the
    geometric distances |p - c| - radius.  Points that coincide to rounding
    accuracy give a circle of zero radius centred on their mean.
    """
    x = np.asarray(alpha, dtype=float)
    y = np.asarray(beta, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if len(x) < min_points:
        raise ValueError(f"at least {min_points} points are required")
    # centre the data to keep the normal equations well scaled
    mx, my = x.mean(), y.mean()
    u, v = x - mx, y - my
    scale = float(np.sqrt(np.mean(u * u + v * v)))
    if scale <= 1e-12 * max(1.0, math.hypot(mx, my)):
        return Circle(alpha_c=float(mx), beta_c=float(my), radius=0.0, rms=scale)
    u, v = u / scale, v / scale
    A = np.column_stack([u, v, np.ones_like(u)])
    rhs = u * u + v * v
    sol, _, rank, sv = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < 3 or sv[-1] < 1e-10 * sv[0]:
        raise DegenerateFit("points are collinear or coincident")
    uc, vc = sol[0] / 2, sol[1] / 2
    r = math.sqrt(max(sol[2] + uc * uc + vc * vc, 0.0))
    d = np.hypot(u - uc, v - vc) - r
    return Circle(
        alpha_c=float(mx + scale * uc),
        beta_c=float(my + scale * vc),
        radius=float(scale * r),
        rms=float(scale * np.sqrt(np.mean(d * d))),
    )


@dataclass(frozen=True)
class ThresholdFit:
    slope: float
    stderr: float
    intercept: float


def threshold_fit(E, K, min_points: int = 8, min_decades: float = 1.0) -> ThresholdFit:
    """Least-squares slope of log K against log E, with its standard error."""
    E = np.asarray(E, dtype=float)
    K = np.asarray(K, dtype=float)
    ok = np.isfinite(E) & np.isfinite(K) & (E > 0) & (K > 0)
    E, K = E[ok], K[ok]
    if len(E) < min_points:
        raise ValueError(f"at least {min_points} positive points are required")
    if np.log10(E.max() / E.min()) < min_decades - 1e-9:
        raise ValueError("energy span below one decade")
    x, y = np.log(E), np.log(K)
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    dof = len(x) - 2
    resid = y - A @ coef
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(A.T @ A)
    return ThresholdFit(slope=float(coef[0]), stderr=float(math.sqrt(cov[0, 0])), intercept=float(coef[1]))
