"""
Dimensionless model parameters and derived scales.

Unit system
-----------
Lengths are measured in the mean scattering length ``abar`` and energies in
``E_a = hbar^2 / (2 mu abar^2)``.  In these units the radial equation for the
relative motion reads

    u''(r) = [W(r) - E_total] u(r)

with the van der Waals term ``-(R6/abar)^4 / r^6``, the dipole term
``2 a_d (1 - 3 cos^2 theta) / r^3``, the trap term ``r^2 cos^2 theta / a_h^4``
and the centrifugal term ``l (l + 1) / r^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.special import gamma

#: van der Waals length in units of abar, R6 = Gamma(1/4)^2 / (2 pi) abar
R6 = gamma(0.25) ** 2 / (2.0 * math.pi)
#: the vdW coefficient as it enters W(r): (R6/abar)^4
R6_4 = R6**4


class Statistics(str, Enum):
    FERMIONS = "fermions"
    BOSONS = "bosons"
    DISTINGUISHABLE = "distinguishable"

    @classmethod
    def parse(cls, value) -> "Statistics":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "identical-fermions": cls.FERMIONS,
            "fermion": cls.FERMIONS,
            "identical-bosons": cls.BOSONS,
            "boson": cls.BOSONS,
        }
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def g(self) -> int:
        """Statistical factor entering the rate constants."""
        return 1 if self is Statistics.DISTINGUISHABLE else 2


def default_m(statistics: Statistics) -> int:
    return 1 if Statistics.parse(statistics) is Statistics.FERMIONS else 0


@dataclass(frozen=True)
class ModelParams:
    """Physics inputs of a single scattering calculation.

    Attributes
    ----------
    s : float
        Short-range phase parameter, s = a / abar.
    y : float
        Short-range reaction amplitude, 0 <= y <= 1.
    a_d : float
        Dipolar length mu d^2 / hbar^2 in units of abar.
    a_h : float
        Trap length sqrt(hbar / (mu Omega)) in units of abar.
    q : float
        Relative 2D wave vector of the incident channel in units of 1/abar.
    m : int, optional
        Conserved azimuthal quantum number. Defaults to 1 for identical
        fermions and 0 otherwise.
    statistics : Statistics
    """

    s: float = 0.0
    y: float = 0.5
    a_d: float = 0.0
    a_h: float = 1.7
    q: float = 0.05
    m: Optional[int] = None
    statistics: Statistics = Statistics.FERMIONS

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        if self.m is None:
            object.__setattr__(self, "m", default_m(self.statistics))

    @property
    def g(self) -> int:
        return self.statistics.g

    @property
    def ell_parity(self) -> int:
        """Parity (0 even, 1 odd) of the spherical partial waves.

        The incident channel has n_z = 0, so exchange symmetry and the
        (-1)^l = (-1)^(m + n_z) selection rule both fix l = m (mod 2).
        """
        return abs(self.m) % 2

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["statistics"] = self.statistics.value
        return d


@dataclass(frozen=True)
class NumericsParams:
    """Numerical controls. ``None`` entries are filled by physics-based defaults.

    r_min, R_max are in abar units.  ``ppw`` is the number of grid points per
    local wavelength, ``n_z`` the number of parity-allowed asymptotic trap
    channels kept in the matching, ``quad_order`` the Gauss-Legendre order of
    the angular projection.  ``boundary`` selects the short-range wave at
    r_min: "exact" uses the zero-energy vdW + centrifugal Bessel solutions,
    "wkb" their leading WKB form.
    """

    r_min: float = 0.2
    R_max: Optional[float] = None
    l_max: Optional[int] = None
    n_z: int = 2
    ppw: float = 64.0
    quad_order: Optional[int] = None
    match_tol: float = 1e-3
    h_max: float = 0.5
    h_rel: float = 0.05
    outer: str = "distorted"
    rho_far: Optional[float] = None
    boundary: str = "exact"

    def replace(self, **changes) -> "NumericsParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DerivedScales:
    R6_over_abar: float
    hbar_omega: float
    thresholds: np.ndarray = field(repr=False)
    E_total: float = 0.0
    E_coll: float = 0.0


def hbar_omega(a_h: float) -> float:
    """Trap quantum in units of E_a."""
    return 2.0 / a_h**2


def threshold(n: int | np.ndarray, a_h: float):
    """Trap threshold (n + 1/2) hbar Omega in E_a units."""
    return (2 * np.asarray(n) + 1) / a_h**2


def total_energy(params: ModelParams) -> float:
    return float(threshold(0, params.a_h)) + params.q**2


def derive_scales(params: ModelParams, n_levels: int = 32) -> DerivedScales:
    return DerivedScales(
        R6_over_abar=R6,
        hbar_omega=hbar_omega(params.a_h),
        thresholds=threshold(np.arange(n_levels), params.a_h),
        E_total=total_energy(params),
        E_coll=params.q**2,
    )


def default_R_max(params: ModelParams) -> float:
    return max(8.0 * params.a_h, 10.0)


def default_l_max(params: ModelParams, R_max: float) -> int:
    m = abs(params.m)
    l_max = m + 2 * math.ceil(1.5 * R_max / params.a_h) + 8
    if (l_max - m) % 2:
        l_max += 1
    return l_max


@dataclass(frozen=True)
class Violation:
    field: str
    constraint: str
    value: object

    def __str__(self) -> str:
        return f"{self.field}: {self.constraint} (got {self.value!r})"


def validate(params: ModelParams, numerics: NumericsParams | None = None, incident_nz: int = 0) -> list[Violation]:
    """Check every input invariant; an empty list means the inputs are usable."""
    out: list[Violation] = []
    p = params

    def bad(name, constraint, value):
        out.append(Violation(name, constraint, value))

    for name in ("s", "y", "a_d", "a_h", "q"):
        v = getattr(p, name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            bad(name, "must be a finite number", v)
    if out:
        return out
    if not 0.0 <= p.y <= 1.0:
        bad("y", "y out of [0,1]", p.y)
    if p.a_h <= 0:
        bad("a_h", "a_h must be positive", p.a_h)
    if p.a_d < 0:
        bad("a_d", "a_d must be non-negative", p.a_d)
    if p.q <= 0:
        bad("q", "q must be positive", p.q)
    if int(p.m) != p.m:
        bad("m", "m must be an integer", p.m)
    parity = (abs(p.m) + incident_nz) % 2
    if p.statistics is Statistics.FERMIONS and parity == 0:
        bad("m", "exchange symmetry forbids (m+n_z) even for identical fermions", (p.m, incident_nz))
    if p.statistics is Statistics.BOSONS and parity == 1:
        bad("m", "exchange symmetry forbids (m+n_z) odd for identical bosons", (p.m, incident_nz))

    if numerics is not None:
        n = numerics
        if not n.r_min > 0:
            bad("r_min", "r_min must be positive", n.r_min)
        if n.R_max is not None and not n.R_max > n.r_min:
            bad("R_max", "r_min < R_max required", n.R_max)
        if n.l_max is not None and n.l_max < abs(p.m):
            bad("l_max", "l_max >= |m| required", n.l_max)
        for name in ("n_z", "ppw", "h_max", "h_rel", "match_tol"):
            if not getattr(n, name) > 0:
                bad(name, "must be positive", getattr(n, name))
        if n.quad_order is not None and n.quad_order <= 0:
            bad("quad_order", "must be positive", n.quad_order)
        if n.outer not in ("free", "distorted"):
            bad("outer", "outer must be 'free' or 'distorted'", n.outer)
        if n.boundary not in ("exact", "wkb"):
            bad("boundary", "boundary must be 'exact' or 'wkb'", n.boundary)
    return out


def check(params: ModelParams, numerics: NumericsParams | None = None) -> None:
    """Raise ``ValueError`` listing all violations, if any."""
    violations = validate(params, numerics)
    if violations:
        raise ValueError("; ".join(str(v) for v in violations))
