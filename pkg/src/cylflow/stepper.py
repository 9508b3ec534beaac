"""Time advancement: backward-Euler diffusion with Adams-Bashforth-2 sources.

One step solves, per azimuthal mode and z-parity block,

    (I - dt/Re Delta) Delta_h psi^(n+1) = Delta_h psi^n
                                          + (dt/2) (3 S_psi^n - S_psi^(n-1))
    (I - dt/Re Delta) Delta Delta_h phi^(n+1) = Delta Delta_h phi^n + (...)

through the nested influence-corrected solver.  The very first step uses
explicit Euler on the source (no history yet); Stokes startup steps force
the sources to zero.  The solver set is factored once per (Re, dt, grid)
and is immutable afterwards; per-block solves are independent and can run
on a thread pool.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .influence import BlockSolver
from .nonlinear import (
    NonlinearWorkspace,
    cross_product_sources,
    divergence_max,
    modified_fields,
    velocity_fields,
)
from .profiles import RegularizationConfig, disk_profile, lateral_profile
from .spectral import CoefficientField, chebyshev_analysis, merge_parity, split_parity

# Typical stable time-step bands and resolutions (Re upper bound, dt range,
# (M, K, N)); exceeding the band warns but does not stop the run.
TIMESTEP_TABLE_2D = [
    (500.0, 0.05, 0.1, (1, 32, 16)),
    (1000.0, 0.02, 0.05, (1, 64, 32)),
    (3000.0, 0.01, 0.02, (1, 96, 48)),
    (5000.0, 0.005, 0.01, (1, 128, 64)),
    (10000.0, 0.001, 0.0025, (1, 180, 90)),
]
TIMESTEP_TABLE_3D = [
    (500.0, 0.04, 0.1, (8, 64, 32)),
    (1000.0, 0.01, 0.04, (16, 80, 40)),
    (3000.0, 0.0025, 0.01, (32, 100, 60)),
    (5000.0, 0.001, 0.0025, (96, 128, 80)),
]


def timestep_band(re, three_d=False):
    """(dt_min, dt_max, resolution) recommended for the Reynolds number."""
    table = TIMESTEP_TABLE_3D if three_d else TIMESTEP_TABLE_2D
    for re_max, dt_lo, dt_hi, res in table:
        if re <= re_max:
            return dt_lo, dt_hi, res
    return table[-1][1], table[-1][2], table[-1][3]


@dataclass
class BoundaryData:
    """Per-run boundary data consumed by the nested solves (m = 0 only)."""

    fpsi_disk_plus: np.ndarray          # (N,) m=0 radial coefficients
    fpsi_disk_minus: np.ndarray
    psi_wall_neumann: np.ndarray | None  # (K,) Chebyshev coefficients or None

    def disk_parity(self, parity):
        s = 0.5 * (self.fpsi_disk_plus + self.fpsi_disk_minus)
        a = 0.5 * (self.fpsi_disk_plus - self.fpsi_disk_minus)
        return s if parity == "sym" else a

    def neumann_parity(self, parity, K):
        if self.psi_wall_neumann is None:
            return None
        sym, anti = split_parity(self.psi_wall_neumann)
        return sym if parity == "sym" else anti


def boundary_data(config, grid):
    """Assemble BoundaryData from a RegularizationConfig."""
    prof = disk_profile(config, grid.basis)
    neumann = None
    if config.kind == "lateral":
        u_lat = lateral_profile(config, grid.z, grid.h)
        neumann = chebyshev_analysis(-u_lat)
    return BoundaryData(
        fpsi_disk_plus=prof.fpsi_coeffs[0],
        fpsi_disk_minus=prof.fpsi_coeffs[1],
        psi_wall_neumann=neumann,
    )


@dataclass
class SimState:
    """Time-stepping state: potentials, source histories, clock."""

    psi: CoefficientField
    phi: CoefficientField
    t: float = 0.0
    step: int = 0
    s_psi: CoefficientField | None = None
    s_phi: CoefficientField | None = None
    s_psi_prev: CoefficientField | None = None
    s_phi_prev: CoefficientField | None = None
    last_rhs: tuple | None = field(default=None, repr=False)

    @classmethod
    def rest(cls, grid):
        return cls(psi=CoefficientField.zeros(grid), phi=CoefficientField.zeros(grid))


class Stepper:
    """Prefactored solver set for fixed (grid, Re, dt, boundary data)."""

    def __init__(self, grid, re, dt, bdata=None, threads=1, check_every=1,
                 bc_rtol=1e-12, div_rtol=1e-11, warn_band=True):
        self.grid = grid
        self.re = float(re)
        self.dt = float(dt)
        self.bdata = bdata
        self.threads = int(threads)
        self.check_every = int(check_every)
        self.bc_rtol = bc_rtol
        self.div_rtol = div_rtol
        if warn_band:
            lo, hi, _ = timestep_band(re, three_d=grid.M > 1)
            if not lo <= dt <= hi:
                warnings.warn(
                    f"dt={dt} outside the typical stable band [{lo}, {hi}] "
                    f"for Re={re}", stacklevel=2)
        self.ws = NonlinearWorkspace(grid)
        self.blocks = {}
        for m in grid.m_list:
            for parity in ("sym", "anti"):
                self.blocks[(m, parity)] = BlockSolver(
                    grid, m, parity, re_over_dt=self.re / self.dt)
        self.last_bc_residual = 0.0
        self.last_divergence = (0.0, 0.0)

    # -- rhs assembly -------------------------------------------------------
    def _rhs_fields(self, state, stokes):
        grid = self.grid
        rhs_psi = CoefficientField.zeros(grid)
        rhs_phi = CoefficientField.zeros(grid)
        if stokes:
            s_n = None
        else:
            s_n = cross_product_sources(state.psi, state.phi, self.ws)
        for m in grid.m_list:
            ops = self.ws.mode_ops(m)
            f = ops.delta_h(state.psi.blocks[m])
            rhs_psi.blocks[m][:] = f
            q = ops.delta_h(state.phi.blocks[m])
            rhs_phi.blocks[m][:] = ops.delta_h(q) + grid.d2z @ q
        if s_n is not None:
            s_psi_n, s_phi_n = s_n
            if state.s_psi is None:
                for m in grid.m_list:
                    rhs_psi.blocks[m] += self.dt * s_psi_n.blocks[m]
                    rhs_phi.blocks[m] += self.dt * s_phi_n.blocks[m]
            else:
                for m in grid.m_list:
                    rhs_psi.blocks[m] += 0.5 * self.dt * (
                        3.0 * s_psi_n.blocks[m] - state.s_psi.blocks[m])
                    rhs_phi.blocks[m] += 0.5 * self.dt * (
                        3.0 * s_phi_n.blocks[m] - state.s_phi.blocks[m])
        return rhs_psi, rhs_phi, s_n

    def _solve_block(self, key, rhs_psi, rhs_phi):
        m, parity = key
        blk = self.blocks[key]
        s = 0 if parity == "sym" else 1
        rp = split_parity(rhs_psi.blocks[m])[s]
        rf = split_parity(rhs_phi.blocks[m])[1 - s]
        kwargs = {}
        if m == 0 and self.bdata is not None:
            kwargs["fpsi_disk"] = self.bdata.disk_parity(parity)
            neu = self.bdata.neumann_parity(parity, self.grid.K)
            if neu is not None:
                kwargs["psi_wall_neumann"] = neu
        psi_b, phi_b, info = blk.corrected_solve(rhs_psi=rp, rhs_phi=rf,
                                                 collect=True, **kwargs)
        return key, psi_b, phi_b, info["residual_rel"]

    def _advance(self, state, stokes, inject_source=None):
        grid = self.grid
        rhs_psi, rhs_phi, s_n = self._rhs_fields(state, stokes)
        if inject_source is not None:
            rhs_psi, rhs_phi, s_n = inject_source(state, rhs_psi, rhs_phi)

        keys = list(self.blocks)
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(
                    lambda k: self._solve_block(k, rhs_psi, rhs_phi), keys))
        else:
            results = [self._solve_block(k, rhs_psi, rhs_phi) for k in keys]

        psi_new = CoefficientField.zeros(grid)
        phi_new = CoefficientField.zeros(grid)
        halves_psi = {}
        halves_phi = {}
        worst_bc = 0.0
        for key, psi_b, phi_b, rel in results:
            m, parity = key
            halves_psi[(m, parity)] = psi_b
            halves_phi[(m, "anti" if parity == "sym" else "sym")] = phi_b
            worst_bc = max(worst_bc, rel)
        for m in grid.m_list:
            psi_new.blocks[m][:] = merge_parity(halves_psi[(m, "sym")],
                                                halves_psi[(m, "anti")])
            phi_new.blocks[m][:] = merge_parity(halves_phi[(m, "sym")],
                                                halves_phi[(m, "anti")])

        new = SimState(psi=psi_new, phi=phi_new, t=state.t + self.dt,
                       step=state.step + 1,
                       s_psi=(s_n[0] if s_n else None),
                       s_phi=(s_n[1] if s_n else None),
                       s_psi_prev=state.s_psi, s_phi_prev=state.s_phi,
                       last_rhs=(rhs_psi, rhs_phi))
        self.last_bc_residual = worst_bc
        self._checks(new, worst_bc)
        return new

    def _checks(self, state, worst_bc):
        amp = max(state.psi.norm_max(), state.phi.norm_max())
        if not np.isfinite(amp) or amp > 1e12:
            lo, hi, res = timestep_band(self.re, three_d=self.grid.M > 1)
            raise DivergenceError(
                f"fields diverged at step {state.step} (t={state.t:.4g}); "
                f"typical stable settings for Re={self.re}: "
                f"dt in [{lo}, {hi}], resolution {res}")
        if worst_bc > self.bc_rtol:
            raise DivergenceError(
                f"coupled boundary residual {worst_bc:.2e} above {self.bc_rtol} "
                f"at step {state.step}")
        if self.check_every and state.step % self.check_every == 0:
            div = divergence_max(state.psi, state.phi, self.ws)
            u = modified_fields(state.psi, state.phi, self.ws)[:3]
            u_scale = max(max(np.abs(b).max() for b in f.blocks) for f in u)
            self.last_divergence = (div, u_scale)
            if u_scale > 1e-13 and div > self.div_rtol * max(u_scale, 1e-300) * 10:
                # spectral divergence bound; factor 10 covers grid-sup vs
                # coefficient-sup norm mismatch
                raise DivergenceError(
                    f"divergence {div:.2e} vs velocity scale {u_scale:.2e} "
                    f"at step {state.step}")

    # -- public API ---------------------------------------------------------
    def step(self, state):
        """One backward-Euler / AB2 step (explicit Euler source on step one)."""
        return self._advance(state, stokes=False)

    def stokes_step(self, state):
        """One linear step with the sources forced to zero."""
        return self._advance(state, stokes=True)

    def step_manufactured(self, state, source_fn):
        """Step with an injected analytic source pair (order/validation runs).

        source_fn(t) must return (S_psi, S_phi) CoefficientFields at time t;
        it replaces the pseudo-spectral sources but follows the same AB2
        (first step: explicit Euler) treatment.
        """
        def inject(st, rhs_psi, rhs_phi):
            s_now = source_fn(st.t)
            if st.s_psi is None:
                for m in self.grid.m_list:
                    rhs_psi.blocks[m] += self.dt * s_now[0].blocks[m]
                    rhs_phi.blocks[m] += self.dt * s_now[1].blocks[m]
            else:
                s_prev = (st.s_psi, st.s_phi)
                for m in self.grid.m_list:
                    rhs_psi.blocks[m] += 0.5 * self.dt * (
                        3.0 * s_now[0].blocks[m] - s_prev[0].blocks[m])
                    rhs_phi.blocks[m] += 0.5 * self.dt * (
                        3.0 * s_now[1].blocks[m] - s_prev[1].blocks[m])
            return rhs_psi, rhs_phi, s_now

        return self._advance(state, stokes=True, inject_source=inject)

    def velocity(self, state):
        """Physical-grid (u_r, u_theta, u_z)."""
        return velocity_fields(state.psi, state.phi, self.ws)

    def kinetic_energy(self, state):
        """(1/2) int |u|^2 dV over the cylinder."""
        grid = self.grid
        ur, uth, uz = self.velocity(state)
        wz = _clenshaw_curtis_weights(grid.K) * (grid.h / 2.0)
        wr = grid.basis.weights
        dens = ur**2 + uth**2 + uz**2
        return 0.5 * (2.0 * np.pi / grid.M) * np.einsum(
            "mkn,k,n->", dens, wz, wr)


def _clenshaw_curtis_weights(K):
    """Integration weights on the CGL grid for int_{-1}^{1} f dx."""
    k = np.arange(K)
    w = np.zeros(K)
    ints = np.zeros(K)
    ev = np.arange(0, K, 2)
    ints[ev] = 2.0 / (1.0 - ev**2)
    # analysis matrix applied to the T-integral vector
    from .spectral import chebyshev_analysis

    A = chebyshev_analysis(np.eye(K), axis=0)
    return A.T @ ints
