"""
End-to-end quasi-2D scattering: boundary -> propagation -> matching -> observables.

The short-range parameters (s, y) only enter through the boundary value at
r_min.  :class:`QuasiTwoD` therefore propagates once per (a_d, a_h, q, m)
group and stores the sector propagator together with the projected
exterior functions; every (s, y) point of that group then costs one small
linear solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .couplings import ChannelBasis, PotentialMatrix
from .params import ModelParams, NumericsParams, R6_4, check, default_l_max, default_R_max, total_energy
from .propagator import boundary_value, build_grid, sector_propagator
from .smatrix import (
    DistortedPair,
    ScatteringObservables,
    asymptotic_channel_vectors,
    asymptotic_channels,
    AveragedPotential,
    extract_smatrix,
    observables,
)

logger = logging.getLogger(__name__)


def resolve_numerics(params: ModelParams, numerics: Optional[NumericsParams] = None) -> NumericsParams:
    """Fill the ``None`` entries of ``numerics`` with the physics-based defaults."""
    n = numerics or NumericsParams()
    R = n.R_max if n.R_max is not None else default_R_max(params)
    l_max = n.l_max if n.l_max is not None else default_l_max(params, R)
    if (l_max - abs(params.m)) % 2:
        l_max += 1
    rho_far = n.rho_far if n.rho_far is not None else max(4.0 * R, 200.0 / params.q)
    return n.replace(R_max=R, l_max=l_max, rho_far=rho_far)


@dataclass(frozen=True)
class GroupKey:
    a_d: float
    a_h: float
    q: float
    m: int
    parity: int

    @classmethod
    def of(cls, p: ModelParams) -> "GroupKey":
        return cls(p.a_d, p.a_h, p.q, int(p.m), p.ell_parity)


class QuasiTwoD:
    """Cached solver for all (s, y) at fixed (a_d, a_h, q, m).

    Parameters
    ----------
    params : ModelParams
        Any member of the group; s and y are ignored here.
    numerics : NumericsParams, optional
    c6 : float
        van der Waals coefficient in W(r); 0 switches the attraction off
        (used by the interaction-free null test).
    """

    def __init__(self, params: ModelParams, numerics: Optional[NumericsParams] = None, c6: float = R6_4):
        check(params, numerics)
        self.key = GroupKey.of(params)
        self.params = params
        self.numerics = n = resolve_numerics(params, numerics)
        self.c6 = c6
        self.basis = ChannelBasis.for_params(params, n.l_max)
        self.energy = total_energy(params)
        self.potential = PotentialMatrix(self.basis, params.a_d, params.a_h, c6)
        self.grid = build_grid(self.potential.diagonal, self.energy, n.r_min, n.R_max, n.ppw, n.h_max, n.h_rel)
        self.prop = sector_propagator(self.grid, self.potential, self.energy)
        self.channels = asymptotic_channels(params.m, params.ell_parity, params.a_h, self.energy, n.n_z)
        if self.channels.n_closed == 0:
            # keep at least one closed channel in the matching
            self.channels = asymptotic_channels(params.m, params.ell_parity, params.a_h, self.energy, self.channels.n_open + 1)
        self.vectors = asymptotic_channel_vectors(n.R_max, self.basis, self.channels, params.a_h, self._pairs(), n.quad_order)
        logger.debug("group %s: N=%d, %d nodes", self.key, self.basis.size, len(self.grid))

    def _pairs(self):
        n = self.numerics
        if n.outer == "free":
            return None
        p = self.params
        ch = self.channels
        pairs = []
        rho_in = 0.3 * n.R_max
        for nz, q in zip(ch.n_z[ch.is_open], ch.wavenumber[ch.is_open]):
            U = AveragedPotential(int(nz), p.a_h, p.a_d, rho_in, n.rho_far, self.c6)
            pairs.append(DistortedPair(abs(p.m), float(q), U, rho_in, n.rho_far))
        return pairs

    def log_derivative(self, s: float, y: float, phase_offset: float = 0.0) -> np.ndarray:
        Z = boundary_value(self.numerics.r_min, s, y, self.basis.ells, self.numerics.boundary, phase_offset)
        if np.allclose(Z, Z[0]):
            return self.prop.apply_scalar(complex(Z[0]))
        return self.prop.apply(np.diag(Z))

    def smatrix(self, s: float, y: float, phase_offset: float = 0.0):
        return extract_smatrix(self.log_derivative(s, y, phase_offset), self.vectors, self.numerics.match_tol)

    def solve(self, s: float, y: float) -> ScatteringObservables:
        sm = self.smatrix(s, y)
        return observables(sm, self.params.q, self.params.g, int(self.basis.ells[-1]))

    def smatrix_from_Y(self, Ya: np.ndarray):
        """S-matrix for an arbitrary boundary log-derivative matrix at r_min."""
        return extract_smatrix(self.prop.apply(Ya), self.vectors, self.numerics.match_tol)


def solve(params: ModelParams, numerics: Optional[NumericsParams] = None) -> ScatteringObservables:
    """Observables of a single quasi-2D parameter point."""
    return QuasiTwoD(params, numerics).solve(params.s, params.y)
