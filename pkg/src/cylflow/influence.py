"""Nested five-problem solves and the influence-matrix boundary coupling.

Each (m, z-parity) block advances the pair (psi, phi) by solving, in order,

    (I - dt/Re Delta) f_psi = rhs_psi      f_psi|w = sigma_f, disk data given
    Delta_h psi = f_psi                    d/dr psi|w = neumann data, psi(0)=0
    (I - dt/Re Delta) g = rhs_phi          g|w = sigma_g, g|disk = sigma_g_pm
    Delta f_phi = g                        f_phi|w = 0, f_phi|disk = 0
    Delta_h phi = f_phi                    phi|w = 0

(w = wall r = 1; parity here is the z-parity of psi, with phi, g, f_phi in
the opposite parity).  The unknown Dirichlet data sigma = (sigma_f, sigma_g,
sigma_g_pm) is fixed by three coupled conditions evaluated spectrally:

    c1:  d/dr d/dz f_psi - (i m / r) g = 0          at r = 1    (m != 0)
    c1:  <f_psi, Q_0>_w = 0 per axial mode                      (m = 0)
    c2:  (i m / r) psi + d/dr d/dz phi = 0          at r = 1
    c3:  d/dz f_phi = 0                             at z = +- h/2

The m = 0 form of c1 is the compatibility of the Neumann Poisson stage
Delta_h psi = f_psi: <f_psi, 1>_w = d/dr psi(1), so zeroing the lowest
radial coefficient of f_psi per axial mode makes the wall condition
d/dr psi(1) = 0 hold exactly (zero tau residual).  The mixed-derivative
form cannot be used at m = 0: with counter-rotating disk data the corner
value of d/dr f_psi(1, z) is pinned by the disk condition while z-parity
forbids a nonzero constant, so no regular field can satisfy it; the exact
polynomial solution indeed carries a nonzero d/dr d/dz f_psi(1, z).

The influence matrix maps unit sigma components to condition residuals of
the homogeneous nested solve; it is built once per block and applied through
a truncated-SVD pseudo-inverse (relative cutoff 1e-10).  A rank deficiency
is structural: the wall value of the highest axial mode of each Helmholtz
solve is slaved to its disk data, and with nonzero disk data the corner
compatibility makes one residual direction unreachable (the discrete
fingerprint of the corner singularity), so plain inversion would be wrong.
"""

from dataclasses import dataclass, field

import numpy as np

from .elliptic import Axial2DSolver, PerKRadialSolver
from .errors import ConfigurationError
from .spectral import build_axial_operator

_SVD_RTOL = 1e-10


@dataclass
class BoundaryUnknowns:
    """sigma layout helper: (sigma_f, sigma_g, sigma_g_pm) concatenated."""

    K2: int
    nm: int

    @property
    def size(self):
        return 2 * self.K2 + self.nm

    def split(self, vec):
        K2 = self.K2
        return vec[..., :K2], vec[..., K2:2 * K2], vec[..., 2 * K2:]

    def join(self, sigma_f, sigma_g, sigma_g_pm):
        return np.concatenate([sigma_f, sigma_g, sigma_g_pm], axis=-1)


@dataclass
class NestedFields:
    f_psi: np.ndarray
    psi: np.ndarray
    g: np.ndarray
    f_phi: np.ndarray
    phi: np.ndarray

    def __add__(self, other):
        return NestedFields(*(a + b for a, b in zip(self._tuple(), other._tuple())))

    def _tuple(self):
        return (self.f_psi, self.psi, self.g, self.f_phi, self.phi)


class BlockSolver:
    """All solvers, condition rows and the influence matrix for one (m, parity)."""

    def __init__(self, grid, m, parity, re_over_dt, build_matrix=True):
        if parity not in ("sym", "anti"):
            raise ConfigurationError("parity must be 'sym' or 'anti'")
        self.grid = grid
        self.m = m
        self.parity = parity
        self.other = "anti" if parity == "sym" else "sym"
        self.re_over_dt = float(re_over_dt)
        table = grid.basis
        K = grid.K
        self.K2 = K // 2
        self.nm = grid.n_modes(m)

        self.ax_p = build_axial_operator(K, parity, grid.h)
        self.ax_q = build_axial_operator(K, self.other, grid.h)

        c0 = self.re_over_dt
        self.helm_fpsi = Axial2DSolver.build(table, m, self.ax_p, lam0=c0, rhs_scale=-c0)
        self.pois_psi = PerKRadialSolver(table, m, "neumann")
        self.helm_g = Axial2DSolver.build(table, m, self.ax_q, lam0=c0, rhs_scale=-c0)
        self.pois_fphi = Axial2DSolver.build(table, m, self.ax_q, lam0=0.0, rhs_scale=1.0)
        self.pois_phi = PerKRadialSolver(table, m, "dirichlet")

        # parity-restricted z-derivative couplings (p <- q and q <- p)
        sel_s = np.arange(0, K, 2)
        sel_a = np.arange(1, K, 2)
        sel = {"sym": sel_s, "anti": sel_a}
        d1 = grid.d1z
        self.dz_q_from_p = d1[np.ix_(sel[self.other], sel[parity])]
        self.dz_p_from_q = d1[np.ix_(sel[parity], sel[self.other])]

        self.wall_value = table.wall_value[m]
        self.wall_deriv = table.wall_deriv[m]

        self.unknowns = BoundaryUnknowns(K2=self.K2, nm=self.nm)
        if build_matrix:
            self._build_influence()

    # -- nested particular solve ------------------------------------------
    def solve_nested(self, rhs_psi=None, rhs_phi=None, fpsi_disk=None,
                     psi_wall_neumann=None, sigma=None, lanes=None):
        """Sequential solve of the five problems for one block.

        All arrays may carry a trailing lane axis (used to batch the unit
        solves of the influence construction).
        """
        K2, nm = self.K2, self.nm
        R = 1 if lanes is None else lanes
        shape3 = (K2, nm, R)

        def blk(x):
            if x is None:
                return np.zeros(shape3, dtype=complex)
            x = np.asarray(x, dtype=complex)
            return x[:, :, None] if x.ndim == 2 else x

        rhs_psi = blk(rhs_psi)
        rhs_phi = blk(rhs_phi)
        disk = (np.zeros((nm, R), dtype=complex) if fpsi_disk is None
                else np.asarray(fpsi_disk, dtype=complex).reshape(nm, -1))
        neu = (np.zeros((K2, R), dtype=complex) if psi_wall_neumann is None
               else np.asarray(psi_wall_neumann, dtype=complex).reshape(K2, -1))
        if sigma is None:
            sig_f = np.zeros((K2, R), dtype=complex)
            sig_g = np.zeros((K2, R), dtype=complex)
            sig_pm = np.zeros((nm, R), dtype=complex)
        else:
            sigma = np.asarray(sigma, dtype=complex)
            if sigma.ndim == 1:
                sigma = sigma[:, None]
            sig_f, sig_g, sig_pm = (x.copy() for x in
                                    np.split(sigma, [K2, 2 * K2], axis=0))

        f_psi = self.helm_fpsi.solve(rhs_psi, wall=sig_f, disk=disk)
        psi = self._per_k(self.pois_psi, f_psi, wall=neu)
        g = self.helm_g.solve(rhs_phi, wall=sig_g, disk=sig_pm)
        f_phi = self.pois_fphi.solve(g)
        phi = self._per_k(self.pois_phi, f_phi)
        return NestedFields(f_psi=f_psi, psi=psi, g=g, f_phi=f_phi, phi=phi)

    @staticmethod
    def _per_k(solver, rhs3, wall=None):
        K2, nm, R = rhs3.shape
        rhs2 = np.moveaxis(rhs3, 2, 0).reshape(K2 * R, nm).T[None]     # (1, nm, K2*R)
        if wall is None:
            beta = np.zeros((1, K2 * R))
        else:
            beta = np.moveaxis(np.asarray(wall, dtype=complex), 1, 0).reshape(1, K2 * R)
        f_re = solver.tau.solve(rhs2.real, beta.real)
        f_im = solver.tau.solve(rhs2.imag, beta.imag)
        out = (f_re + 1j * f_im)[0].T.reshape(R, K2, nm)
        return np.moveaxis(out, 0, 2)

    # -- condition residuals ----------------------------------------------
    def residuals(self, fields):
        """Stacked (c1, c2, c3) residual vector(s); trailing lane axis kept."""
        m = self.m
        if m == 0:
            c1 = fields.f_psi[:, 0, :]
        else:
            w_dfpsi = np.einsum("knr,n->kr", fields.f_psi, self.wall_deriv)
            g_wall = np.einsum("knr,n->kr", fields.g, self.wall_value)
            c1 = self.dz_q_from_p @ w_dfpsi - 1j * m * g_wall

        psi_wall = np.einsum("knr,n->kr", fields.psi, self.wall_value)
        w_dphi = np.einsum("knr,n->kr", fields.phi, self.wall_deriv)
        c2 = 1j * m * psi_wall + self.dz_p_from_q @ w_dphi

        dz_fphi = np.einsum("ke,enr->knr", self.dz_p_from_q, fields.f_phi)
        c3 = dz_fphi.sum(axis=0)                      # value at z = +h/2
        return np.concatenate([c1, c2, c3], axis=0)

    def residual_scale(self, fields):
        """Natural magnitude of each condition functional (for relative residuals).

        The mixed-derivative conditions carry operator norms ~ K^2 n^2, so
        their round-off floor is that scale times machine epsilon; residuals
        should be judged against it.
        """
        dz_n = np.abs(self.dz_q_from_p).sum(axis=1).max()
        wd_n = np.abs(self.wall_deriv).max()
        wv_n = np.abs(self.wall_value).max()
        m = self.m
        f_psi = np.abs(fields.f_psi).max()
        g = np.abs(fields.g).max()
        psi = np.abs(fields.psi).max()
        phi = np.abs(fields.phi).max()
        f_phi = np.abs(fields.f_phi).max()
        if m == 0:
            s1 = max(f_psi, 1e-300)
        else:
            s1 = dz_n * wd_n * f_psi + m * wv_n * g
        s2 = m * wv_n * psi + dz_n * wd_n * phi
        s3 = dz_n * f_phi
        return max(s1, s2, s3, 1e-300)

    # -- influence matrix ---------------------------------------------------
    def _build_influence(self):
        K2, nm = self.K2, self.nm
        n_sig = self.unknowns.size
        cols = np.empty((n_sig, n_sig), dtype=complex)

        eye_f = np.zeros((n_sig, K2), dtype=complex)
        eye_f[:K2] = np.eye(K2)
        fields = self.solve_nested(sigma=eye_f, lanes=K2)
        cols[:, :K2] = self.residuals(fields)

        eye_g = np.zeros((n_sig, K2), dtype=complex)
        eye_g[K2:2 * K2] = np.eye(K2)
        fields = self.solve_nested(sigma=eye_g, lanes=K2)
        cols[:, K2:2 * K2] = self.residuals(fields)

        eye_pm = np.zeros((n_sig, nm), dtype=complex)
        eye_pm[2 * K2:] = np.eye(nm)
        fields = self.solve_nested(sigma=eye_pm, lanes=nm)
        cols[:, 2 * K2:] = self.residuals(fields)

        self.influence = cols
        U, s, Vh = np.linalg.svd(cols)
        if s[0] == 0.0:
            raise ConfigurationError(
                f"influence matrix identically zero for m={self.m} ({self.parity})"
            )
        keep = s > _SVD_RTOL * s[0]
        self._svd = (U[:, keep], s[keep], Vh[keep])
        self.truncated_directions = int((~keep).sum())

    def correction(self, residual):
        """sigma = - pinv(influence) @ residual via the truncated SVD."""
        U, s, Vh = self._svd
        return -(Vh.conj().T @ ((U.conj().T @ residual) / s[:, None]))

    # -- public entry --------------------------------------------------------
    def corrected_solve(self, rhs_psi=None, rhs_phi=None, fpsi_disk=None,
                        psi_wall_neumann=None, collect=False):
        """Particular + influence-corrected solve; returns (psi, phi[, info])."""
        part = self.solve_nested(rhs_psi=rhs_psi, rhs_phi=rhs_phi,
                                 fpsi_disk=fpsi_disk,
                                 psi_wall_neumann=psi_wall_neumann)
        res = self.residuals(part)
        sigma = self.correction(res)
        hom = self.solve_nested(sigma=sigma)
        fields = part + hom
        if not collect:
            return fields.psi[:, :, 0], fields.phi[:, :, 0]
        res = self.residuals(fields)[:, 0]
        info = {
            "sigma": sigma[:, 0],
            "residual": res,
            "residual_rel": np.abs(res).max() / self.residual_scale(fields),
            "fields": fields,
        }
        return fields.psi[:, :, 0], fields.phi[:, :, 0], info
