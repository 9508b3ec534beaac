"""Radial Helmholtz/Poisson tau solves and their assembly into 2-D mode solvers.

The one-dimensional problem for azimuthal mode m and shift lam >= 0 is

    [ (1/r) d/dr r d/dr - m^2/r^2 - lam ] f = g,      B^T f = beta,

handled in the r^2-multiplied banded form L f = Q g + Q e_N tau with
Q = R S (S = multiplication by r^2).  The highest spectral equation is
surrendered to the boundary row (tau method).  Following the row
permutation that brings the dominant superdiagonal of L onto the diagonal,
the system differs from a banded, diagonally dominant matrix A only in its
first and last rows: a rank-two correction handled by the
Sherman-Morrison-Woodbury formula, whose closure is a 2 x 2 solve.  No
pivoting is ever performed; pivot magnitudes are checked instead.

For m = 0, lam = 0 with a Neumann wall condition the operator has a constant
null vector; the permuted first row (the pin slot) then carries the genuine
condition f(r=0) = 0 instead of the deflation row, which fixes the gauge.

`BatchedTauSolver` factors a stack of such systems (one per axial eigenvalue)
and solves them simultaneously with vectorized forward/back substitution.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .radial import _mode_ops, operator_banded

_PIVOT_RTOL = 1e-11   # documented no-pivot threshold, relative to the row scale


class BatchedBandedLU:
    """Pivot-free LU of a stack of banded matrices with fixed bandwidths.

    Storage is LAPACK band layout per batch entry: ab[b, u + i - j, j] holds
    A_b[i, j].  Factorization overwrites ab with L (unit diagonal, stored
    multipliers) and U.  Raises SolverError when a pivot falls below the
    documented threshold relative to its row scale, instead of pivoting.
    """

    def __init__(self, ab, l, u, context=""):
        self.ab = np.ascontiguousarray(ab, dtype=float)
        if self.ab.ndim == 2:
            self.ab = self.ab[None]
        self.l = l
        self.u = u
        self.n = self.ab.shape[-1]
        self.B = self.ab.shape[0]
        self._factor(context)

    def _factor(self, context):
        ab, l, u, n = self.ab, self.l, self.u, self.n
        row_scale = np.abs(ab).max(axis=(1, 2))
        row_scale = np.where(row_scale > 0, row_scale, 1.0)
        self.min_pivot_ratio = np.inf
        for k in range(n):
            piv = ab[:, u, k]
            ratio = (np.abs(piv) / row_scale).min()
            self.min_pivot_ratio = min(self.min_pivot_ratio, ratio)
            if ratio < _PIVOT_RTOL:
                raise SolverError(
                    f"pivot {ratio:.2e} below no-pivot threshold {_PIVOT_RTOL:.1e}"
                    f" at column {k}{' in ' + context if context else ''}"
                )
            for i in range(1, min(l, n - 1 - k) + 1):
                mult = ab[:, u + i, k] / piv
                ab[:, u + i, k] = mult
                for j in range(1, min(u, n - 1 - k) + 1):
                    ab[:, u + i - j, k + j] -= mult * ab[:, u - j, k + j]

    def _solve_views(self):
        # U-row coefficients gathered once: uband[b, j-1, k] = U[k, k+j]
        if not hasattr(self, "_uband"):
            ab, u, n = self.ab, self.u, self.n
            uband = np.zeros((self.B, u, n))
            for j in range(1, u + 1):
                uband[:, j - 1, : n - j] = ab[:, u - j, j:]
            self._uband = uband
        return self._uband

    def solve(self, rhs):
        """Solve A x = rhs; rhs has shape (B, n) or (B, n, R)."""
        ab, l, u, n = self.ab, self.l, self.u, self.n
        uband = self._solve_views()
        x = np.array(rhs, dtype=np.result_type(rhs, float), copy=True)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[:, :, None]
        for k in range(n - 1):
            i_hi = min(l, n - 1 - k)
            mult = ab[:, u + 1:u + 1 + i_hi, k]
            x[:, k + 1:k + 1 + i_hi] -= mult[:, :, None] * x[:, k, None, :]
        for k in range(n - 1, -1, -1):
            j_hi = min(u, n - 1 - k)
            if j_hi:
                x[:, k] -= np.einsum("bj,bjr->br", uband[:, :j_hi, k],
                                     x[:, k + 1:k + 1 + j_hi])
            x[:, k] /= ab[:, u, k, None]
        return x[:, :, 0] if squeeze else x


def _band_to_ab(bands_stack, offsets, n, l, u):
    """(B, len(offsets), n) diagonal stack -> LAPACK ab of shape (B, l+u+1, n)."""
    B = bands_stack.shape[0]
    ab = np.zeros((B, l + u + 1, n))
    for d, off in enumerate(offsets):
        band = bands_stack[:, d, :]
        if off >= 0:
            ab[:, u - off, off:] = band[:, : n - off]
        else:
            ab[:, u - off, : n + off] = band[:, -off:]
    return ab


class BatchedTauSolver:
    """Stack of radial tau solves sharing (m, bc_kind), one lam per batch entry.

    bc_kind: 'dirichlet' imposes f(1) = beta, 'neumann' imposes f'(1) = beta.

    pin_origin handles the (m = 0, lam = 0, Neumann) Poisson gauge: the
    operator annihilates constants and discrete compatibility makes the
    Neumann row dependent on the full equation set, so the equation row of
    the lowest radial wavenumber is replaced by the condition f(r=0) = 0.
    That system is prefactored once with a pivoted LU (it is not diagonally
    dominant in the deflated sense); the pivot-free SMW path covers all
    Helmholtz and Dirichlet-Poisson solves.
    """

    def __init__(self, table, m, lams, bc_kind, pin_origin=False):
        self.table = table
        self.m = abs(m)
        self.lams = np.atleast_1d(np.asarray(lams, dtype=float))
        self.bc_kind = bc_kind
        self.pin_origin = pin_origin
        B = self.lams.size
        nm = table.n_modes(m)
        self.nm = nm
        ops = _mode_ops(table, m)
        self.Ms = ops.Ms

        pair0 = operator_banded("rdr2_minus_m2", m, table=table)
        R3 = pair0.R
        # solver operator is r^2 [Delta_h^m - lam] = M3-op - lam * s-op;
        # products in extended precision, matching the pair construction
        R3_ld = ops.R3_dense_ld()
        RMs_ld = R3_ld @ ops._Ms_ld
        L3_ld = R3_ld @ ops._M3_ld
        offsets = (-1, 0, 1, 2, 3)
        Lstack = np.zeros((B, len(offsets), nm))
        for bi, lam in enumerate(self.lams):
            Ld = (L3_ld - np.longdouble(lam) * RMs_ld).astype(float)
            for d, off in enumerate(offsets):
                diag = np.diagonal(Ld, off)
                if off >= 0:
                    Lstack[bi, d, : nm - off] = diag
                else:
                    Lstack[bi, d, -off:] = diag
        self.L_offsets = offsets
        self.Lstack = Lstack
        self.R = R3

        # tau column q = R S e_last
        e_last = np.zeros(nm)
        e_last[-1] = 1.0
        self.q = R3.matvec(self.Ms.matvec(e_last))        # (nm,)

        if bc_kind == "dirichlet":
            self.bc_row = table.wall_value[self.m].copy()
        elif bc_kind == "neumann":
            self.bc_row = table.wall_deriv[self.m].copy()
        else:
            raise SolverError(f"unknown bc_kind {bc_kind!r}")
        self.pin_row = table.origin_value[self.m].copy() if pin_origin else None

        if pin_origin:
            self._assemble_pinned()
        else:
            self._assemble()

    def _assemble_pinned(self):
        from scipy.linalg import lu_factor

        if self.lams.size != 1:
            raise SolverError("pinned gauge solve supports a single lam only")
        nm = self.nm
        L = np.zeros((nm, nm))
        for d, off in enumerate(self.L_offsets):
            idx = np.arange(max(0, -off), min(nm, nm - off))
            L[idx, idx + off] = self.Lstack[0, d][idx]
        T = np.zeros((nm + 1, nm + 1))
        T[0, :nm] = self.pin_row
        T[1:nm, :nm] = L[1:]
        T[1:nm, nm] = -self.q[1:]
        T[nm, :nm] = self.bc_row
        self._pin_lu = lu_factor(T)

    def _last_L_rows(self):
        """Dense last row of each batched L (needed by the SMW correction)."""
        rows = np.zeros((self.lams.size, self.nm))
        i = self.nm - 1
        for d, off in enumerate(self.L_offsets):
            j = i + off
            if 0 <= j < self.nm:
                rows[:, j] = self.Lstack[:, d, i]
        return rows

    def _assemble(self):
        B, nm = self.lams.size, self.nm
        # deflation scale: max |entry| on the dominant diagonal of L
        band_maxes = np.abs(self.Lstack).max(axis=2)           # (B, ndiag)
        dom = band_maxes.argmax(axis=1)
        self.a_scale = band_maxes[np.arange(B), dom]
        self.a_scale = np.where(self.a_scale > 0, self.a_scale, 1.0)

        # A_main: row 0 = a * e_0; row k = L row k-1 (k = 1..nm-1)
        # bandwidths relative to row index: lower 2, upper 2
        l_bw, u_bw = 2, 2
        ab = np.zeros((B, l_bw + u_bw + 1, nm))
        ab[:, u_bw, 0] = self.a_scale
        for d, off in enumerate(self.L_offsets):
            # L[k-1, k-1+off] -> A[k, j] with j = k - 1 + off, i.e. A-offset off-1
            a_off = off - 1
            if abs(a_off) > 2:
                continue
            for k in range(1, nm):
                j = k + a_off
                if 0 <= j < nm:
                    ab[:, u_bw + k - j, j] = self.Lstack[:, d, k - 1]
        self.lu = BatchedBandedLU(ab, l_bw, u_bw,
                                  context=f"tau solver m={self.m} bc={self.bc_kind}")

        # permuted tau column: row 0 gets q[last], rows 1.. get q[0:last]
        q_perm = np.empty(nm)
        q_perm[0] = self.q[-1]
        q_perm[1:] = self.q[:-1]
        self.q_perm = q_perm

        # SMW pieces.  Unknown vector is (f, tau); A acts on it as
        # [A_main, -q_perm; 0, 1].  True system adds v w^T with
        # v = [e_0 | e_tau] and
        #   w1 = (first_true_row - a e_0,  tau-coef difference)
        #   w2 = (B_row, -1)
        last_rows = self._last_L_rows()                       # (B, nm)
        if self.pin_origin:
            w1f = np.broadcast_to(self.pin_row, (B, nm)).copy()
            w1t = np.full(B, self.q[-1])                      # 0 - (-q_last)
        else:
            w1f = last_rows.copy()
            w1t = np.zeros(B)
        w1f[:, 0] -= self.a_scale
        self.w1f, self.w1t = w1f, w1t
        self.w2f = np.broadcast_to(self.bc_row, (B, nm)).copy()

        # A^-1 v for the two v columns
        x1 = self.lu.solve(np.broadcast_to(np.eye(nm)[0], (B, nm)).copy())   # tau = 0
        x2 = self.lu.solve(np.broadcast_to(q_perm, (B, nm)).copy())          # tau = 1
        self.Ainv_v_f = np.stack([x1, x2], axis=-1)           # (B, nm, 2)
        self.Ainv_v_t = np.array([0.0, 1.0])

        # closure C = I + W^T A^-1 V, 2 x 2 per batch entry
        C = np.empty((B, 2, 2))
        C[:, 0, 0] = 1.0 + np.einsum("bn,bn->b", w1f, x1)
        C[:, 0, 1] = np.einsum("bn,bn->b", w1f, x2) + self.w1t * 1.0
        C[:, 1, 0] = np.einsum("bn,bn->b", self.w2f, x1) + (-1.0) * 0.0
        C[:, 1, 1] = 1.0 + np.einsum("bn,bn->b", self.w2f, x2) + (-1.0) * 1.0
        det = C[:, 0, 0] * C[:, 1, 1] - C[:, 0, 1] * C[:, 1, 0]
        if np.any(np.abs(det) < 1e-13 * np.abs(C).max()):
            bad = int(np.argmin(np.abs(det)))
            raise SolverError(
                f"singular 2x2 SMW closure for m={self.m}, lam={self.lams[bad]:.6g}"
            )
        self.Cinv = np.empty_like(C)
        self.Cinv[:, 0, 0] = C[:, 1, 1] / det
        self.Cinv[:, 1, 1] = C[:, 0, 0] / det
        self.Cinv[:, 0, 1] = -C[:, 0, 1] / det
        self.Cinv[:, 1, 0] = -C[:, 1, 0] / det

    def _apply_L(self, f):
        """Banded matvec with the per-batch L stacks; f: (B, nm, R)."""
        B, nm, R = f.shape
        out = np.zeros_like(f)
        for d, off in enumerate(self.L_offsets):
            band = self.Lstack[:, d, :, None]
            if off >= 0:
                out[:, : nm - off] += band[:, : nm - off] * f[:, off:]
            else:
                out[:, -off:] += band[:, -off:] * f[:, : nm + off]
        return out

    def _residual(self, rhs, beta, f, tau):
        """Residual of the permuted tau system at (f, tau)."""
        Lf = self._apply_L(f)
        rows = np.empty_like(rhs)
        rows[:, 0] = Lf[:, -1] - self.q[-1] * tau
        rows[:, 1:] = Lf[:, :-1] - self.q[:-1, None] * tau[:, None, :]
        r_rows = rhs - rows
        r_bc = beta - np.einsum("bn,bnr->br", self.w2f, f)
        return r_rows, r_bc

    def _solve_once(self, rhs, beta):
        tau0 = beta
        f0 = self.lu.solve(rhs + self.q_perm[None, :, None] * tau0[:, None, :])
        w_u = np.empty((rhs.shape[0], 2, rhs.shape[2]))
        w_u[:, 0, :] = np.einsum("bn,bnr->br", self.w1f, f0) + self.w1t[:, None] * tau0
        w_u[:, 1, :] = np.einsum("bn,bnr->br", self.w2f, f0) - tau0
        t = np.einsum("bij,bjr->bir", self.Cinv, w_u)
        f = f0 - np.einsum("bnk,bkr->bnr", self.Ainv_v_f, t)
        tau = tau0 - self.Ainv_v_t[1] * t[:, 1, :]
        return f, tau

    def solve(self, g, beta, collect_tau=False, refine=1):
        """Solve for f with source g and boundary values beta.

        g: (B, nm) or (B, nm, R) spectral right-hand sides (already the g of
        H f = g; the r^2 multiplication happens here).  beta: (B,) or (B, R).
        One step of iterative refinement (refine=1) keeps the boundary row
        satisfied to ~1e-15 relative even at lam ~ 1e5.
        """
        g = np.asarray(g)
        squeeze = g.ndim == 2
        if squeeze:
            g = g[:, :, None]
            beta = np.asarray(beta)[:, None]
        B, nm, R = g.shape
        beta = np.broadcast_to(np.asarray(beta), (B, R)).astype(float)

        gm = np.moveaxis(g, 1, -1)                       # (B, R, nm)
        Qg = self.R.matvec(self.Ms.matvec(gm))
        Qg = np.moveaxis(Qg, -1, 1)                      # (B, nm, R)

        if self.pin_origin:
            from scipy.linalg import lu_solve

            rhs = np.zeros((nm + 1, R))
            rhs[1:nm] = Qg[0, 1:, :]
            rhs[nm] = beta[0]
            sol = lu_solve(self._pin_lu, rhs)
            f = sol[None, :nm, :]
            tau = sol[None, nm, :]
            if squeeze:
                return (f[:, :, 0], tau[:, 0]) if collect_tau else f[:, :, 0]
            return (f, tau) if collect_tau else f

        rhs = np.empty_like(Qg)
        rhs[:, 0, :] = Qg[:, -1, :]
        rhs[:, 1:, :] = Qg[:, :-1, :]

        f, tau = self._solve_once(rhs, beta)
        for _ in range(refine):
            r_rows, r_bc = self._residual(rhs, beta, f, tau)
            df, dtau = self._solve_once(r_rows, r_bc)
            f = f + df
            tau = tau + dtau

        if squeeze:
            f = f[:, :, 0]
            tau = tau[:, 0]
        return (f, tau) if collect_tau else f


def solve_radial(m, lam, g, beta_bc, bc_kind, table, pin_origin=None):
    """Single radial tau solve (convenience wrapper over BatchedTauSolver).

    Solves [ (1/r) d/dr r d/dr - m^2/r^2 - lam ] f = g with the wall row
    B^T f = beta_bc; lam must be >= 0.
    """
    if lam < 0:
        raise SolverError("lam must be non-negative")
    if pin_origin is None:
        pin_origin = (m == 0 and lam == 0.0 and bc_kind == "neumann")
    solver = BatchedTauSolver(table, m, [lam], bc_kind, pin_origin=pin_origin)
    g = np.asarray(g, dtype=complex)
    f_re = solver.solve(g.real[None, :], np.array([np.real(beta_bc)]))[0]
    f_im = solver.solve(g.imag[None, :], np.array([np.imag(beta_bc)]))[0]
    return f_re + 1j * f_im


@dataclass
class Axial2DSolver:
    """One nested sub-problem: Helmholtz/Poisson on a (k, n) parity block.

    Couples the diagonalized axial operator with a batch of radial tau
    solves, one per axial eigenvalue.  Disk (z = +-h/2) Dirichlet data enters
    through the Schur elimination of the highest axial mode; wall (r = 1)
    data is imposed per eigenrow.
    """

    ax: object                     # AxialOperator
    tau: BatchedTauSolver
    lam0: float                    # Re/dt for Helmholtz solves, 0 for Poisson
    rhs_scale: float               # -Re/dt for Helmholtz solves, +1 for Poisson

    @classmethod
    def build(cls, table, m, ax, lam0, rhs_scale, bc_kind="dirichlet"):
        lams = lam0 - ax.eigvals           # eigvals < 0, so lams > 0
        pin = (m == 0 and lam0 == 0.0 and bc_kind == "neumann")
        tau = BatchedTauSolver(table, m, lams, bc_kind, pin_origin=pin)
        return cls(ax=ax, tau=tau, lam0=lam0, rhs_scale=rhs_scale)

    def solve(self, rhs, wall=None, disk=None):
        """rhs: (K2, nm[, R]) parity block; wall: (K2[, R]); disk: (nm[, R])."""
        rhs = np.asarray(rhs, dtype=complex)
        squeeze = rhs.ndim == 2
        if squeeze:
            rhs = rhs[:, :, None]
        K2, nm, R = rhs.shape
        wall = (np.zeros((K2, R), dtype=complex) if wall is None
                else np.asarray(wall, dtype=complex).reshape(K2, -1))
        disk = (np.zeros((nm, R), dtype=complex) if disk is None
                else np.asarray(disk, dtype=complex).reshape(nm, -1))
        wall = np.broadcast_to(wall, (K2, R))
        disk = np.broadcast_to(disk, (nm, R))

        ax = self.ax
        block = ax.d2_block
        g = self.rhs_scale * rhs
        # Schur shift: eliminate the highest axial mode using the disk data
        g_lo = g[:-1] - block[:-1, -1][:, None, None] * disk[None, :, :]
        g_t = np.einsum("ek,knr->enr", ax.Einv, g_lo)
        beta_t = np.einsum("ek,kr->er", ax.Einv, wall[:-1])

        # real and imaginary parts ride as extra right-hand-side lanes
        g_ri = np.concatenate([g_t.real, g_t.imag], axis=2)
        beta_ri = np.concatenate([beta_t.real, beta_t.imag], axis=1)
        f_ri = self.tau.solve(g_ri, beta_ri)
        f_t = f_ri[:, :, :R] + 1j * f_ri[:, :, R:]
        u_lo = np.einsum("ke,enr->knr", ax.E, f_t)
        u_hi = disk[None, :, :] - u_lo.sum(axis=0, keepdims=True)
        u = np.concatenate([u_lo, u_hi], axis=0)
        return u[:, :, 0] if squeeze else u


class PerKRadialSolver:
    """Radial-only Poisson solves, identical for every axial coefficient row.

    Used for the Delta_h psi = f_psi and Delta_h phi = f_phi stages, which
    carry no z derivatives: one factorization, K2 right-hand-side lanes.
    """

    def __init__(self, table, m, bc_kind):
        pin = (m == 0 and bc_kind == "neumann")
        self.tau = BatchedTauSolver(table, m, [0.0], bc_kind, pin_origin=pin)

    def solve(self, rhs, wall=None):
        """rhs: (K2, nm) block; wall: (K2,) boundary values per axial row."""
        rhs = np.asarray(rhs, dtype=complex)
        K2, nm = rhs.shape
        wall = np.zeros(K2, dtype=complex) if wall is None else np.asarray(wall, dtype=complex)
        g = rhs.T[None, :, :]                       # (1, nm, K2) lanes
        f_re = self.tau.solve(g.real, wall.real[None, :])
        f_im = self.tau.solve(g.imag, wall.imag[None, :])
        return (f_re + 1j * f_im)[0].T              # (K2, nm)


def solve_mode_2d(solver, rhs, wall_bc=None, disk_bc=None):
    """Solve one (m, parity) Helmholtz/Poisson block via axial diagonalization.

    `solver` is an Axial2DSolver; rhs is the (K2, N_m) coefficient block of
    the right-hand side in the natural (not eigen) axial basis; wall_bc holds
    Dirichlet wall values per axial mode, disk_bc Dirichlet disk data per
    radial coefficient (parity-recombined).
    """
    return solver.solve(rhs, wall=wall_bc, disk=disk_bc)
