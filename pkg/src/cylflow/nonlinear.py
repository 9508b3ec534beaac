"""Pseudo-spectral source terms S_psi, S_phi from the potentials.

Velocity and vorticity components are not individually representable in the
regular radial basis, so the pipeline works with the modified fields

    u* = (r u_r, r u_theta, u_z)
       = (d_th psi + r d_rz phi, d_thz phi - r d_r psi, -Delta_h phi)
    w* = (r w_r, r w_theta, w_z)
       = (d_th u_z - d_z u*_th, d_z u*_r - r d_r u_z, -Delta_h psi)

built exclusively from parity-preserving operators, transformed to physical
space (6 transforms) where S* = -u* x w* is formed pointwise; S*_z carries
the 1/r^2 division on the grid.  Three forward transforms return S*_r,
S*_th, S_z to spectral space for the regular terms of

    S_psi = (1/r^2)(r d_r - m) S*_th - (i m / r^2)(S*_r + i S*_th)
    S_phi = -(1/r^2) d_z (r d_r - m) S*_r + Delta_h S_z
            - (m / r^2) d_z (S*_r + i S*_th)

while the aliasing-sensitive combination (S*_r + i S*_th)/r^2 is divided in
physical space per Fourier mode and transformed once more: 10 scalar
transforms per evaluation in total.  The (r d_r - m) groups annihilate the
leading r^m monomial, so their output is divisible by r^2 inside the basis
algebra (a tridiagonal solve).

Note the sign u_z = -Delta_h phi: it is forced by div u = 0 together with
u_r, u_theta as written, and matches the exact axisymmetric test solution.
"""

import numpy as np

from .radial import operator_banded
from .spectral import CoefficientField, SpectralGrid


class ModeOps:
    """Banded radial operator set for one azimuthal mode."""

    def __init__(self, table, m):
        self.m = abs(m)
        self.r_dr = operator_banded("r_dr", m, table=table)
        self.lap = operator_banded("rdr2_minus_m2", m, table=table)
        self.r2 = operator_banded("r2", m, table=table)

    def apply_r_dr(self, c):
        return self.r_dr.apply(c)

    def div_r2(self, c):
        """Coefficients of f / r^2 for f divisible by r^2 (tridiagonal solve)."""
        return self.r2.L.solve(c)

    def delta_h(self, c):
        """Delta_h in coefficient space: (1/r^2) [(r d_r)^2 - m^2]."""
        return self.div_r2(self.lap.apply(c))


class NonlinearWorkspace:
    """Operator caches (and optional padded grid) for source evaluations."""

    def __init__(self, grid, dealias=False):
        self.grid = grid
        self.ops = [ModeOps(grid.basis, m) for m in grid.m_list]
        self.dealias = dealias
        self._padded = None

    def mode_ops(self, m):
        return self.ops[abs(m)]

    def padded_grid(self):
        if self._padded is None:
            from .radial import BasisParams, build_basis

            g = self.grid
            Mp = max(1, (3 * g.M) // 2)
            Kp = (3 * g.K) // 2
            Kp += Kp % 2
            Np = (3 * g.N) // 2
            basis = build_basis(BasisParams(N=Np, m_max=max(g.basis.params.m_max,
                                                            Mp // 2)))
            self._padded = SpectralGrid(M=Mp, K=Kp, N=Np, h=g.h, basis=basis)
        return self._padded


def _dz(grid, blk):
    return grid.d1z @ blk


def modified_fields(psi, phi, ws):
    """Modified velocity/vorticity fields (u*_r, u*_th, u_z, w*_r, w*_th, w_z)."""
    grid = ws.grid
    out = [CoefficientField.zeros(grid) for _ in range(6)]
    for m in grid.m_list:
        ops = ws.mode_ops(m)
        pb = psi.blocks[m]
        fb = phi.blocks[m]
        dz_phi = _dz(grid, fb)
        u_r = 1j * m * pb + ops.apply_r_dr(dz_phi)
        u_th = 1j * m * dz_phi - ops.apply_r_dr(pb)
        u_z = -ops.delta_h(fb)
        w_r = 1j * m * u_z - _dz(grid, u_th)
        w_th = _dz(grid, u_r) - ops.apply_r_dr(u_z)
        w_z = -ops.delta_h(pb)
        for f, b in zip(out, (u_r, u_th, u_z, w_r, w_th, w_z)):
            f.blocks[m][:] = b
    return out


def _project_up(field, grid_p):
    out = CoefficientField.zeros(grid_p)
    for m in field.grid.m_list:
        K, nm = field.blocks[m].shape
        out.blocks[m][:K, :nm] = field.blocks[m]
    return out


def _project_down(field_p, grid):
    out = CoefficientField.zeros(grid)
    for m in grid.m_list:
        K, nm = out.blocks[m].shape
        out.blocks[m][:] = field_p.blocks[m][:K, :nm]
    return out


def cross_product_sources(psi, phi, ws):
    """Source pair (S_psi, S_phi) from the potentials; 10 scalar transforms."""
    grid = ws.grid
    fields = modified_fields(psi, phi, ws)

    work = ws.padded_grid() if ws.dealias else grid
    if ws.dealias:
        fields_w = [_project_up(f, work) for f in fields]
    else:
        fields_w = fields

    ur, uth, uz, wr, wth, wz = (work.to_physical(f) for f in fields_w)

    r2 = work.r[None, None, :] ** 2
    s_r = -(uth * wz - uz * wth)
    s_th = -(uz * wr - ur * wz)
    s_z = -(ur * wth - uth * wr) / r2

    sr_hat = work.to_spectral(s_r)
    sth_hat = work.to_spectral(s_th)
    sz_hat = work.to_spectral(s_z)

    # 10th transform: per-mode division of (S*_r + i S*_th) by r^2 on the grid
    from .spectral import chebyshev_analysis, fourier_analysis

    fr = fourier_analysis(s_r, axis=0)
    fth = fourier_analysis(s_th, axis=0)
    t_hat = CoefficientField.zeros(work)
    for m in work.m_list:
        combo = (fr[m] + 1j * fth[m]) / r2[0]
        t_hat.blocks[m][:] = chebyshev_analysis(combo, axis=0) @ work.basis.fwd[m].T
    work.transform_count += 1

    if ws.dealias:
        sr_hat = _project_down(sr_hat, grid)
        sth_hat = _project_down(sth_hat, grid)
        sz_hat = _project_down(sz_hat, grid)
        t_hat = _project_down(t_hat, grid)

    s_psi = CoefficientField.zeros(grid)
    s_phi = CoefficientField.zeros(grid)
    for m in grid.m_list:
        ops = ws.mode_ops(m)
        reg_th = ops.div_r2(ops.apply_r_dr(sth_hat.blocks[m]) - m * sth_hat.blocks[m])
        s_psi.blocks[m][:] = reg_th - 1j * m * t_hat.blocks[m]
        reg_r = ops.div_r2(ops.apply_r_dr(sr_hat.blocks[m]) - m * sr_hat.blocks[m])
        s_phi.blocks[m][:] = (-_dz(grid, reg_r) + ops.delta_h(sz_hat.blocks[m])
                              - m * _dz(grid, t_hat.blocks[m]))
    if grid.M >= 1:
        s_psi.blocks[0] = s_psi.blocks[0].real.astype(complex)
        s_phi.blocks[0] = s_phi.blocks[0].real.astype(complex)
    return s_psi, s_phi


def velocity_fields(psi, phi, ws):
    """Physical (u_r, u_theta, u_z) on the grid, via the modified fields."""
    grid = ws.grid
    ur_s, uth_s, uz_s = modified_fields(psi, phi, ws)[:3]
    r = grid.r[None, None, :]
    return (grid.to_physical(ur_s) / r,
            grid.to_physical(uth_s) / r,
            grid.to_physical(uz_s))


def divergence_max(psi, phi, ws):
    """max |div u| over spectral coefficients (scaled bound on the grid)."""
    grid = ws.grid
    ur_s, uth_s, uz_s = modified_fields(psi, phi, ws)[:3]
    worst = 0.0
    for m in grid.m_list:
        ops = ws.mode_ops(m)
        horiz = ops.div_r2(ops.apply_r_dr(ur_s.blocks[m]) + 1j * m * uth_s.blocks[m])
        div = horiz + _dz(grid, uz_s.blocks[m])
        worst = max(worst, np.abs(div).max())
    return worst
