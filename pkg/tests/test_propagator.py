import math

import numpy as np
import pytest

from q2dscat.params import R6_4
from q2dscat.propagator import (
    Reference3D,
    SingleChannelVdW,
    build_grid,
    init_state,
    kmatrix_3d,
    propagate,
    riccati_pair,
    sector_propagator,
)
from q2dscat.qdt import zero_energy_reference_logderiv


class ConstantPotential:
    def __init__(self, V):
        self.V = np.atleast_2d(np.asarray(V, dtype=float))

    def __call__(self, r):
        return self.V

    def diagonal(self, r):
        r = np.asarray(r, dtype=float)[..., None]
        return np.broadcast_to(np.diag(self.V), r.shape[:-1] + (len(self.V),))


def _fine_grid(pot, E, a, b, h=0.004):
    return build_grid(pot.diagonal, E, a, b, ppw=400, h_max=h)


def test_grid_is_simpson_paired():
    pot = SingleChannelVdW(1)
    g = build_grid(pot.diagonal, 0.01, 0.2, 30.0, ppw=40)
    steps = g.steps
    assert len(g) % 2 == 1
    np.testing.assert_allclose(steps[0::2], steps[1::2], rtol=1e-12)
    assert g.r_min == 0.2 and g.R_max == pytest.approx(30.0)
    assert steps.max() <= 0.5 + 1e-12
    with pytest.raises(ValueError):
        build_grid(pot.diagonal, 0.01, 2.0, 1.0)


def test_free_particle_logderivative():
    k, a, b = 2.0, 0.3, 5.0
    pot = ConstantPotential([[0.0]])
    out = propagate(init_state(1, k / math.tan(k * a), a), _fine_grid(pot, k * k, a, b), pot, k * k)
    exact = k / math.tan(k * b)
    assert abs(out.Y[0, 0] - exact) / abs(exact) < 1e-9


def test_closed_channel_and_rotation_invariance():
    # two uncoupled channels, one open and one closed, then rotated
    E, kap2 = 1.0, 3.0
    V = np.diag([0.0, E + kap2])
    a, b = 0.5, 3.0
    k, kap = 1.0, math.sqrt(kap2)
    Y0 = np.diag([0.7, -0.4])
    grid = _fine_grid(ConstantPotential(V), E, a, b)
    out = propagate(init_state(2, np.diag(Y0), a), grid, ConstantPotential(V), E)
    L = b - a
    open_ = k * (0.7 - k * math.tan(k * L)) / (k + 0.7 * math.tan(k * L))
    closed = kap * (-0.4 + kap * math.tanh(kap * L)) / (kap - 0.4 * math.tanh(kap * L))
    np.testing.assert_allclose(np.diag(out.Y), [open_, closed], rtol=1e-8)

    c, s = math.cos(0.6), math.sin(0.6)
    O = np.array([[c, -s], [s, c]])
    Vr = O @ V @ O.T
    st = init_state(2, 0.0, a)
    st.Y = O @ Y0 @ O.T
    rot = propagate(st, _fine_grid(ConstantPotential(Vr), E, a, b), ConstantPotential(Vr), E)
    np.testing.assert_allclose(rot.Y, O @ out.Y @ O.T, atol=1e-7)
    np.testing.assert_allclose(rot.Y, rot.Y.T, atol=1e-10)


def test_state_must_start_on_grid():
    pot = ConstantPotential([[0.0]])
    with pytest.raises(ValueError):
        propagate(init_state(1, 1.0, 0.1), _fine_grid(pot, 1.0, 0.3, 1.0), pot, 1.0)


def test_sector_propagator_matches_recursion():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3))
    V = 0.5 * (A + A.T)
    pot = ConstantPotential(V)
    grid = build_grid(pot.diagonal, 0.8, 0.4, 4.0, ppw=40, h_max=0.05)
    sp = sector_propagator(grid, pot, 0.8)
    Z = np.array([0.3 - 0.2j, 1.1, -0.5 + 0.1j])
    Ya = np.diag(Z)
    ref = propagate(init_state(3, Z, 0.4), grid, pot, 0.8).Y
    np.testing.assert_allclose(sp.apply(Ya), ref, rtol=1e-9, atol=1e-9)
    ref_s = propagate(init_state(3, 0.7, 0.4), grid, pot, 0.8).Y
    np.testing.assert_allclose(sp.apply_scalar(0.7), ref_s, rtol=1e-9, atol=1e-9)
    assert np.isrealobj(sp.apply_scalar(0.7))


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_zero_energy_vdw_propagation(ell):
    # propagate the exact zero-energy vdW solution; error falls as h^4
    phi, a, b = 0.4, 0.3, 6.0
    pot = SingleChannelVdW(ell)
    exact = zero_energy_reference_logderiv(b, ell, phi)
    errs = []
    for ppw, h in ((200, 0.01), (400, 0.005), (800, 0.0025)):
        grid = build_grid(pot.diagonal, 0.0, a, b, ppw=ppw, h_max=h)
        out = propagate(init_state(1, zero_energy_reference_logderiv(a, ell, phi), a), grid, pot, 0.0)
        errs.append(abs(out.Y[0, 0] / exact - 1))
    assert errs[-1] < 2e-7
    if errs[0] > 1e-9:
        assert 10 < errs[0] / errs[1] < 22


def test_kmatrix_vanishes_for_free_wave():
    for ell in (0, 1, 3):
        k, R = 0.7, 9.0
        s, ds, c, dc = riccati_pair(ell, k * R)
        assert abs(kmatrix_3d(k * ds / s, ell, k, R)) < 1e-12
        # a pure c_l wave is K = infinity; tan(delta) = 1 for s + c
        Y = k * (ds + dc) / (s + c)
        assert kmatrix_3d(Y, ell, k, R) == pytest.approx(1.0, rel=1e-10)


def test_reference_3d_grid_and_y0_real():
    ref = Reference3D(0, 1e-3, R_max=200.0)
    a = ref.scattering_length(0.5, 0.0)
    assert abs(a.imag) < 1e-12
    assert a.real == pytest.approx(0.5, rel=1e-3)
    assert ref.grid.r_min == 0.2
