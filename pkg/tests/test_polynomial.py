"""Symbolic exact-solution generator: identities and projections."""

import numpy as np
import pytest
import sympy as sp

from cylflow.errors import ConfigurationError
from cylflow.polynomial import _delta_h, _r, _z, polynomial_case, project_expr
from cylflow.radial import BasisParams, build_basis
from cylflow.spectral import SpectralGrid


@pytest.fixture(scope="module")
def grid():
    basis = build_basis(BasisParams(N=16, m_max=5))
    return SpectralGrid(M=10, K=16, N=16, h=2.0, basis=basis)


def test_m0_velocity_identities():
    case = polynomial_case(0)
    u_r, u_th, u_z = case.velocity
    assert sp.expand(-_delta_h(case.phi, 0) - u_z) == 0
    assert sp.expand(sp.diff(case.phi, _r, _z) - u_r) == 0
    assert sp.expand(-sp.diff(case.psi, _r) - u_th) == 0


def test_m0_velocity_boundary_factors():
    # u_r(1, z) = 0 and u_r(r, +-1) = 0 for h = 2
    case = polynomial_case(0)
    u_r = case.velocity[0]
    assert sp.expand(u_r.subs(_r, 1)) == 0
    assert sp.expand(u_r.subs(_z, 1)) == 0
    assert sp.expand(u_r.subs(_z, -1)) == 0


def test_m0_psi_vanishes_on_axis():
    case = polynomial_case(0)
    assert sp.expand(case.psi.subs(_r, 0)) == 0


def test_m0_disk_condition():
    case = polynomial_case(0)
    f = _delta_h(case.psi, 0)
    assert sp.expand(f.subs(_z, 1) - case.fpsi_disk(+1)) == 0
    assert sp.expand(f.subs(_z, -1) - case.fpsi_disk(-1)) == 0


def test_m0_disk_profile_matches_uth():
    # u_theta(r, +-1) = r omega_pm with omega_pm = +-(1 - r^6)
    case = polynomial_case(0)
    u_th = case.velocity[1]
    assert sp.expand(u_th.subs(_z, 1) - _r * (1 - _r**6)) == 0
    assert sp.expand(u_th.subs(_z, -1) + _r * (1 - _r**6)) == 0


@pytest.mark.parametrize("m", [1, 3, 5])
@pytest.mark.parametrize("parity", ["sym", "anti"])
def test_manufactured_conditions(m, parity):
    case = polynomial_case(m, h=2.0, parity=parity)
    psi, phi = case.psi, case.phi
    # wall conditions of the coupled problem
    assert sp.expand(sp.diff(psi, _r).subs(_r, 1)) == 0
    assert sp.expand(phi.subs(_r, 1)) == 0
    assert sp.expand(_delta_h(phi, m).subs(_r, 1)) == 0
    c2 = sp.expand((sp.I * m * psi + sp.diff(phi, _r, _z)).subs(_r, 1))
    assert c2 == 0
    ddh = _delta_h(_delta_h(phi, m), m) + sp.diff(_delta_h(phi, m), _z, 2)
    c1 = sp.expand((sp.diff(_delta_h(psi, m), _r, _z) - sp.I * m * ddh).subs(_r, 1))
    assert c1 == 0
    # disk conditions
    h2 = sp.Rational(1)
    for s in (h2, -h2):
        assert sp.expand(_delta_h(psi, m).subs(_z, s)) == 0
        assert sp.expand(_delta_h(phi, m).subs(_z, s)) == 0
        assert sp.expand(sp.diff(_delta_h(phi, m), _z).subs(_z, s)) == 0


def test_projection_exact_roundtrip(grid):
    case = polynomial_case(2, h=2.0)
    blk = project_expr(case.psi, 2, grid)
    # evaluate back on the grid and compare pointwise with the expression
    from cylflow.spectral import chebyshev_synthesis

    vals = chebyshev_synthesis(blk @ grid.basis.eval[2].T.astype(complex), axis=0)
    fun = sp.lambdify((_r, _z), case.psi, "numpy")
    want = np.asarray(fun(grid.r[None, :], grid.z[:, None]), dtype=complex)
    assert np.abs(vals - want).max() < 1e-12 * max(np.abs(want).max(), 1.0)


def test_projection_rejects_low_resolution():
    basis = build_basis(BasisParams(N=4, m_max=1))
    small = SpectralGrid(M=2, K=4, N=4, h=2.0, basis=basis)
    case = polynomial_case(0)
    with pytest.raises(ConfigurationError):
        project_expr(case.rhs_psi, 0, small)
