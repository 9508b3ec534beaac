"""Modified fields, pseudo-spectral sources, divergence and transform count."""

import numpy as np
import pytest
import sympy as sp

from cylflow.nonlinear import (
    NonlinearWorkspace,
    cross_product_sources,
    divergence_max,
    modified_fields,
    velocity_fields,
)
from cylflow.polynomial import _r, _z
from cylflow.radial import BasisParams, build_basis, forward_transform
from cylflow.spectral import CoefficientField, SpectralGrid


@pytest.fixture(scope="module")
def setup():
    basis = build_basis(BasisParams(N=16, m_max=4))
    grid = SpectralGrid(M=8, K=16, N=16, h=2.0, basis=basis)
    return grid, NonlinearWorkspace(grid)


def place_m0(grid, expr):
    """Project an axisymmetric sympy polynomial into a CoefficientField."""
    from cylflow.polynomial import project_expr

    f = CoefficientField.zeros(grid)
    f.blocks[0][:] = project_expr(expr, 0, grid)
    return f


def test_solid_body_modified_fields(setup):
    grid, ws = setup
    psi = CoefficientField.zeros(grid)
    phi = CoefficientField.zeros(grid)
    psi.blocks[0][0, :] = forward_transform(-grid.r**2 / 2.0, 0, grid.basis)
    ur, uth, uz, wr, wth, wz = modified_fields(psi, phi, ws)
    want = forward_transform(grid.r**2, 0, grid.basis)
    assert np.abs(uth.blocks[0][0] - want).max() < 1e-12
    assert max(np.abs(b).max() for b in ur.blocks) < 1e-14
    assert max(np.abs(b).max() for b in uz.blocks) < 1e-14
    assert abs(wz.blocks[0][0, 0] - 2.0) < 1e-11
    assert max(np.abs(b).max() for b in wr.blocks) < 1e-14


def test_solid_body_sources_vanish(setup):
    # S = -u x w is a pure gradient for solid-body rotation: curls kill it
    grid, ws = setup
    psi = CoefficientField.zeros(grid)
    phi = CoefficientField.zeros(grid)
    psi.blocks[0][0, :] = forward_transform(-grid.r**2 / 2.0, 0, grid.basis)
    s_psi, s_phi = cross_product_sources(psi, phi, ws)
    assert max(np.abs(b).max() for b in s_psi.blocks) < 1e-12
    assert max(np.abs(b).max() for b in s_phi.blocks) < 1e-12


def test_zero_potentials(setup):
    grid, ws = setup
    zero = CoefficientField.zeros(grid)
    s_psi, s_phi = cross_product_sources(zero, zero, ws)
    assert max(np.abs(b).max() for b in s_psi.blocks) == 0.0
    assert max(np.abs(b).max() for b in s_phi.blocks) == 0.0


def test_transform_count_is_ten(setup):
    grid, ws = setup
    rng = np.random.default_rng(0)
    psi = CoefficientField.zeros(grid)
    phi = CoefficientField.zeros(grid)
    psi.blocks[0][:4, :4] = rng.standard_normal((4, 4))
    phi.blocks[0][:4, :4] = rng.standard_normal((4, 4))
    before = grid.transform_count
    cross_product_sources(psi, phi, ws)
    assert grid.transform_count - before == 10


def test_sources_match_symbolic_oracle(setup):
    # low-order axisymmetric potentials; oracle forms S = -u x w and the two
    # curls symbolically, evaluated pointwise on a doubled-resolution grid
    grid, ws = setup
    r, z = _r, _z
    psi_e = (r**2 - r**4) * z
    phi_e = r**2 * (1 - z**2) / 4

    u_r = sp.diff(phi_e, _r, _z)
    u_th = -sp.diff(psi_e, _r)
    lap_h = lambda e: sp.expand(sp.diff(r * sp.diff(e, r), r) / r)
    u_z = -lap_h(phi_e)
    w_r = -sp.diff(u_th, z)
    w_th = sp.diff(u_r, z) - sp.diff(u_z, r)
    w_z = sp.expand(sp.diff(r * u_th, r) / r)
    s_r = -(u_th * w_z - u_z * w_th)
    s_th = -(u_z * w_r - u_r * w_z)
    s_z = -(u_r * w_th - u_th * w_r)
    s_psi_e = sp.expand(sp.diff(r * s_th, r) / r)
    s_phi_e = sp.expand(-sp.diff(sp.diff(r * s_r, r) / r, z) + lap_h(s_z))

    psi = place_m0(grid, psi_e)
    phi = place_m0(grid, phi_e)
    s_psi, s_phi = cross_product_sources(psi, phi, ws)

    fine_basis = build_basis(BasisParams(N=32, m_max=1))
    fine = SpectralGrid(M=2, K=32, N=32, h=2.0, basis=fine_basis)
    from cylflow.spectral import chebyshev_synthesis

    def on_fine(block):
        full = np.zeros((fine.K, fine.N), dtype=complex)
        vals = chebyshev_synthesis(block @ grid.basis.eval[0].T.astype(complex), axis=0)
        return vals   # on the coarse grid itself

    # S_phi is a fourth-derivative-level functional, so its round-off floor
    # sits two orders above the S_psi one (eps amplified by ~n^2 per level)
    for got_blk, expr, tol in ((s_psi.blocks[0], s_psi_e, 1e-11),
                               (s_phi.blocks[0], s_phi_e, 5e-11)):
        got = chebyshev_synthesis(got_blk @ grid.basis.eval[0].T.astype(complex), axis=0)
        fun = sp.lambdify((r, z), expr, "numpy")
        want = np.broadcast_to(np.asarray(fun(grid.r[None, :], grid.z[:, None]),
                                          dtype=complex), got.shape)
        scale = max(np.abs(want).max(), 1.0)
        assert np.abs(got - want).max() < tol * scale


def test_divergence_free_random_potentials(setup):
    grid, ws = setup
    rng = np.random.default_rng(5)
    psi = CoefficientField.zeros(grid)
    phi = CoefficientField.zeros(grid)
    for m in grid.m_list:
        shape = psi.blocks[m].shape
        decay = np.exp(-0.4 * np.arange(shape[0]))[:, None] * np.exp(-0.4 * np.arange(shape[1]))
        psi.blocks[m][:] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * decay
        phi.blocks[m][:] = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * decay
    psi.blocks[0] = psi.blocks[0].real.astype(complex)
    phi.blocks[0] = phi.blocks[0].real.astype(complex)
    ur, uth, uz = velocity_fields(psi, phi, ws)
    umax = max(np.abs(ur).max(), np.abs(uth).max(), np.abs(uz).max())
    assert divergence_max(psi, phi, ws) < 1e-11 * umax


def test_resolution_doubling_stability(setup):
    # aliasing stays confined: doubled resolution changes the sources little
    grid, ws = setup
    r, z = _r, _z
    psi_e = (r**2 - r**4) * z
    phi_e = r**2 * (1 - z**2) / 4
    psi = place_m0(grid, psi_e)
    phi = place_m0(grid, phi_e)
    s1, _ = cross_product_sources(psi, phi, ws)

    basis2 = build_basis(BasisParams(N=32, m_max=4))
    grid2 = SpectralGrid(M=8, K=32, N=32, h=2.0, basis=basis2)
    ws2 = NonlinearWorkspace(grid2)
    psi2 = place_m0(grid2, psi_e)
    phi2 = place_m0(grid2, phi_e)
    s2, _ = cross_product_sources(psi2, phi2, ws2)
    K, nm = s1.blocks[0].shape
    diff = np.abs(s2.blocks[0][:K, :nm] - s1.blocks[0]).max()
    assert diff < 1e-10 * max(np.abs(s2.blocks[0]).max(), 1.0)


def test_dealias_flag_available(setup):
    grid, _ = setup
    ws_pad = NonlinearWorkspace(grid, dealias=True)
    psi = CoefficientField.zeros(grid)
    phi = CoefficientField.zeros(grid)
    psi.blocks[0][1, 1] = 0.3
    s_psi, s_phi = cross_product_sources(psi, phi, ws_pad)
    assert all(np.isfinite(b).all() for b in s_psi.blocks)
    assert s_psi.blocks[0].shape == (grid.K, grid.N)
