"""Nested five-problem solves, influence correction, polynomial reproduction."""

import numpy as np
import pytest

from cylflow.influence import BlockSolver
from cylflow.polynomial import polynomial_case, project_expr, project_radial
from cylflow.radial import BasisParams, build_basis
from cylflow.spectral import SpectralGrid, split_parity


@pytest.fixture(scope="module")
def grid():
    basis = build_basis(BasisParams(N=16, m_max=5))
    return SpectralGrid(M=10, K=16, N=16, h=2.0, basis=basis)


@pytest.fixture(scope="module")
def block_m0_anti(grid):
    return BlockSolver(grid, 0, "anti", re_over_dt=1.0)


@pytest.fixture(scope="module")
def block_m0_sym(grid):
    return BlockSolver(grid, 0, "sym", re_over_dt=1.0)


@pytest.fixture(scope="module")
def block_m2(grid):
    return BlockSolver(grid, 2, "sym", re_over_dt=1.0)


def test_zero_rhs_gives_zero(block_m0_anti):
    fields = block_m0_anti.solve_nested()
    assert all(np.abs(x).max() == 0.0 for x in fields._tuple())
    assert np.abs(block_m0_anti.residuals(fields)).max() == 0.0


def test_polynomial_m0_reproduced(grid, block_m0_anti, block_m0_sym):
    case = polynomial_case(0, h=2.0, c=1.0)
    psi = project_expr(case.psi, 0, grid)
    phi = project_expr(case.phi, 0, grid)
    rpsi = project_expr(case.rhs_psi, 0, grid)
    rphi = project_expr(case.rhs_phi, 0, grid)
    _, psi_a = split_parity(psi)
    _, phi_a = split_parity(phi)
    _, rpsi_a = split_parity(rpsi)
    _, rphi_a = split_parity(rphi)
    dp = project_radial(case.fpsi_disk(+1), 0, grid.basis)
    dm = project_radial(case.fpsi_disk(-1), 0, grid.basis)

    # psi lives in the anti block (counter-rotating disks)
    psi_num, phi_num, info = block_m0_anti.corrected_solve(
        rhs_psi=rpsi_a, fpsi_disk=0.5 * (dp - dm), collect=True)
    assert np.abs(psi_num - psi_a).max() <= 1e-12 * np.abs(psi_a).max()
    assert np.abs(phi_num).max() == 0.0
    assert info["residual_rel"] <= 1e-12

    # phi (odd) lives in the sym block
    psi2, phi_num2, info2 = block_m0_sym.corrected_solve(rhs_phi=rphi_a, collect=True)
    assert np.abs(phi_num2 - phi_a).max() <= 1e-12 * np.abs(phi_a).max()
    assert info2["residual_rel"] <= 1e-12


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("parity", ["sym", "anti"])
def test_polynomial_m_nonzero_reproduced(grid, m, parity):
    case = polynomial_case(m, h=2.0, c=1.0, parity=parity)
    psi = project_expr(case.psi, m, grid)
    phi = project_expr(case.phi, m, grid)
    rpsi = project_expr(case.rhs_psi, m, grid)
    rphi = project_expr(case.rhs_phi, m, grid)
    s = 0 if parity == "sym" else 1
    psi_p = split_parity(psi)[s]
    phi_q = split_parity(phi)[1 - s]
    rpsi_p = split_parity(rpsi)[s]
    rphi_q = split_parity(rphi)[1 - s]

    blk = BlockSolver(grid, m, parity, re_over_dt=1.0)
    psi_num, phi_num, info = blk.corrected_solve(rhs_psi=rpsi_p, rhs_phi=rphi_q,
                                                 collect=True)
    assert np.abs(psi_num - psi_p).max() <= 1e-12 * np.abs(psi_p).max()
    assert np.abs(phi_num - phi_q).max() <= 1e-12 * np.abs(phi_q).max()
    assert info["residual_rel"] <= 1e-12


def test_influence_columns_match_unit_solves(block_m2):
    # three spot checks: columns are residuals of unit-sigma homogeneous solves
    rng = np.random.default_rng(0)
    n = block_m2.unknowns.size
    for j in rng.choice(n, size=3, replace=False):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        fields = block_m2.solve_nested(sigma=e)
        col = block_m2.residuals(fields)[:, 0]
        assert np.abs(col - block_m2.influence[:, j]).max() < 1e-12 * max(
            1.0, np.abs(col).max())


def test_corrected_solve_linearity(grid, block_m2):
    rng = np.random.default_rng(1)
    K2, nm = block_m2.K2, block_m2.nm
    rp = rng.standard_normal((K2, nm)) + 1j * rng.standard_normal((K2, nm))
    rf = rng.standard_normal((K2, nm)) + 1j * rng.standard_normal((K2, nm))
    psi1, phi1 = block_m2.corrected_solve(rhs_psi=rp, rhs_phi=rf)
    psi2, phi2 = block_m2.corrected_solve(rhs_psi=2.5 * rp, rhs_phi=2.5 * rf)
    assert np.abs(psi2 - 2.5 * psi1).max() <= 1e-12 * max(np.abs(psi2).max(), 1.0)
    assert np.abs(phi2 - 2.5 * phi1).max() <= 1e-12 * max(np.abs(phi2).max(), 1.0)


def test_corrected_solve_consistent_rhs_residual(grid, block_m2):
    # data produced by the solver itself is consistent: residuals at the
    # relative round-off floor even for random spectral input
    rng = np.random.default_rng(7)
    K2, nm = block_m2.K2, block_m2.nm
    decay_k = np.exp(-0.45 * np.arange(K2))[:, None]
    decay_n = np.exp(-0.45 * np.arange(nm))[None, :]
    rp = (rng.standard_normal((K2, nm)) + 1j * rng.standard_normal((K2, nm))) * decay_k * decay_n
    rf = (rng.standard_normal((K2, nm)) + 1j * rng.standard_normal((K2, nm))) * decay_k * decay_n
    _, _, info = block_m2.corrected_solve(rhs_psi=rp, rhs_phi=rf, collect=True)
    assert info["residual_rel"] <= 1e-12


def test_psi_poisson_gauge_unique(grid, block_m0_anti):
    # the m=0 pin makes psi independent of any constant-mode ambiguity:
    # solving twice gives bit-identical output
    rng = np.random.default_rng(3)
    K2, nm = block_m0_anti.K2, block_m0_anti.nm
    rp = rng.standard_normal((K2, nm)).astype(complex)
    a = block_m0_anti.corrected_solve(rhs_psi=rp)[0]
    b = block_m0_anti.corrected_solve(rhs_psi=rp)[0]
    assert np.array_equal(a, b)
    # and psi(0) = 0 after every solve
    origin = grid.basis.origin_value[0]
    assert np.abs(a @ origin).max() < 1e-12 * max(np.abs(a).max(), 1.0)


def test_truncated_directions_reported(block_m2):
    assert block_m2.truncated_directions >= 1
