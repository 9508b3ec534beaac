"""Exact polynomial solutions of the time-discretized nested solver.

The axisymmetric case couples the two potentials to the realistic disk
profile omega_pm = +-(1 - r^6) and reproduces two recirculation rolls; its
closed form (and the derived velocity field) is hard-coded.  For m >= 1,
manufactured solutions are generated symbolically: with

    psi^m = P(r) A(z),    phi^m = i Q(r) B(z),    A = B',

where P = r^m p(r^2), Q = r^m q(r^2) and B = (z^2 - h^2/4)^2 g(z), every
coupled wall/disk condition reduces to a small linear system on the
polynomial coefficients:

    [d/dr P](1) = 0,   [d/dr Delta_h P](1) = 0,
    Q(1) = 0,  [Delta_h Q](1) = 0,  [Delta_h^2 Q](1) = 0,
    [d/dr Q](1) = -m P(1).

Right-hand sides rhs = (I - dt/Re Delta) Delta_h psi (and the Delta
Delta_h phi analogue) are produced symbolically, so the projected data is
exact in the discretization and the nested solver must reproduce psi and
phi to round-off.
"""

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .errors import ConfigurationError

_r, _z = sp.symbols("r z", real=True)


def _delta_h(expr, m):
    """Azimuthal-mode-m horizontal Laplacian (1/r) d/dr r d/dr - m^2/r^2."""
    return sp.expand(sp.diff(_r * sp.diff(expr, _r), _r) / _r - m**2 * expr / _r**2)


def _delta_full(expr, m):
    return sp.expand(_delta_h(expr, m) + sp.diff(expr, _z, 2))


@dataclass
class PolynomialCase:
    """Symbolically generated exact solution for one azimuthal mode."""

    m: int
    h: float
    c: float                    # dt / Re in (I - c Delta)
    psi: sp.Expr                # complex coefficient of e^{i m theta}
    phi: sp.Expr
    rhs_psi: sp.Expr
    rhs_phi: sp.Expr
    omega_plus: sp.Expr         # disk angular-velocity profiles (m = 0 only)
    omega_minus: sp.Expr
    velocity: tuple | None      # (u_r, u_theta, u_z) sympy exprs, m = 0 only

    def fpsi_disk(self, sign):
        """f_psi disk data -(1/r) d/dr(omega r^2) at z = sign * h/2."""
        omega = self.omega_plus if sign > 0 else self.omega_minus
        return sp.expand(-sp.diff(omega * _r**2, _r) / _r)

    def r_degree(self):
        return max(sp.degree(sp.expand(e), _r)
                   for e in (self.psi, self.phi, self.rhs_psi, self.rhs_phi))

    def z_degree(self):
        return max(sp.degree(sp.expand(e), _z)
                   for e in (self.psi, self.phi, self.rhs_psi, self.rhs_phi))


def _paper_m0_case(h, c):
    if h != 2.0:
        raise ConfigurationError("the axisymmetric polynomial case is built for h = 2")
    r, z = _r, _z
    psi = (sp.Rational(1, 64) * z * (-30 * z**2 + 33 * z**4 + 5) * r**8
           - sp.Rational(5, 48) * z * (z - 1) * (z + 1) * (5 * z**2 - 1) * r**6
           - sp.Rational(1, 2) * z**5 * r**2)
    phi = -sp.Rational(1, 2) * (r - 1)**3 * (r + 1)**3 * (z - 1)**2 * (z + 1)**2 * z
    u_r = -3 * r * (z - 1) * (z + 1) * (5 * z**2 - 1) * (r - 1)**2 * (r + 1)**2
    u_th = -sp.Rational(1, 8) * z * r * (r - 1) * (r + 1) * (
        -30 * r**4 * z**2 + 5 * r**4 + 33 * r**4 * z**4 + 8 * r**2 * z**4 + 8 * z**4)
    u_z = 6 * z * (z - 1)**2 * (z + 1)**2 * (r - 1) * (r + 1) * (3 * r**2 - 1)
    omega_p = (1 - r**6)
    omega_m = -(1 - r**6)

    f = _delta_h(psi, 0)
    rhs_psi = sp.expand(f - c * _delta_full(f, 0))
    g = _delta_full(_delta_h(phi, 0), 0)
    rhs_phi = sp.expand(g - c * _delta_full(g, 0))
    return PolynomialCase(m=0, h=h, c=c, psi=psi, phi=phi,
                          rhs_psi=rhs_psi, rhs_phi=rhs_phi,
                          omega_plus=omega_p, omega_minus=omega_m,
                          velocity=(u_r, u_th, u_z))


def _manufactured_case(m, h, c, parity="sym"):
    r, z = _r, _z
    zeta = r**2

    # radial factors: P with two wall conditions, Q with four
    p0, p1 = sp.symbols("p0 p1")
    P = r**m * (p0 + p1 * zeta + zeta**2)
    conds = [sp.diff(P, r).subs(r, 1),
             sp.diff(_delta_h(P, m), r).subs(r, 1)]
    sol = sp.solve(conds, [p0, p1], dict=True)[0]
    P = sp.expand(P.subs(sol))

    q0, q1, q2, q3 = sp.symbols("q0 q1 q2 q3")
    Q = r**m * (q0 + q1 * zeta + q2 * zeta**2 + q3 * zeta**3)
    conds = [Q.subs(r, 1),
             _delta_h(Q, m).subs(r, 1),
             _delta_h(_delta_h(Q, m), m).subs(r, 1),
             sp.diff(Q, r).subs(r, 1) + m * P.subs(r, 1)]
    sol = sp.solve(conds, [q0, q1, q2, q3], dict=True)[0]
    Q = sp.expand(Q.subs(sol))
    if Q == 0:
        raise ConfigurationError(f"degenerate manufactured case for m={m}")

    hh = sp.Rational(h).limit_denominator(10**6) if not isinstance(h, sp.Rational) else h
    g_z = z if parity == "sym" else sp.Integer(1)     # parity of psi = parity of B'
    B = (z**2 - hh**2 / 4) ** 2 * g_z
    A = sp.diff(B, z)
    psi = sp.expand(P * A)
    phi_real = sp.expand(Q * B)

    f = _delta_h(psi, m)
    rhs_psi = sp.expand(f - c * _delta_full(f, m))
    g = _delta_full(_delta_h(phi_real, m), m)
    rhs_phi_real = sp.expand(g - c * _delta_full(g, m))
    return PolynomialCase(m=m, h=float(h), c=c, psi=psi, phi=sp.I * phi_real,
                          rhs_psi=rhs_psi, rhs_phi=sp.I * rhs_phi_real,
                          omega_plus=sp.Integer(0), omega_minus=sp.Integer(0),
                          velocity=None)


def polynomial_case(m=0, h=2.0, c=1.0, parity="sym"):
    """Exact solution family for mode m (paper profile for m = 0).

    For m >= 1, `parity` selects the z-parity of psi in the manufactured
    solution (phi has the opposite one); ignored at m = 0, where the paper's
    counter-rotating solution has both potentials odd.
    """
    if m == 0:
        return _paper_m0_case(h, c)
    return _manufactured_case(m, h, c, parity=parity)


def project_expr(expr, m, grid, sparsify=True):
    """Exact projection of a polynomial e^{i m theta}-coefficient onto a block.

    Returns the (K, N_m) complex coefficient block.  Raises when the
    polynomial degree exceeds what the discretization represents exactly.
    """
    from .spectral import chebyshev_analysis

    expr = sp.expand(expr)
    r_deg = sp.degree(expr, _r) if expr != 0 else 0
    z_deg = sp.degree(expr, _z) if expr != 0 else 0
    if r_deg > 2 * grid.N - 2 or z_deg > grid.K - 1:
        raise ConfigurationError(
            f"resolution ({grid.K}, {grid.N}) below polynomial degree ({z_deg}, {r_deg})"
        )
    fun = sp.lambdify((_r, _z), expr, "numpy")
    vals = np.asarray(fun(grid.r[None, :], grid.z[:, None]), dtype=complex)
    vals = np.broadcast_to(vals, (grid.K, grid.N))
    block = chebyshev_analysis(vals, axis=0) @ grid.basis.fwd[abs(m)].T.astype(complex)
    if sparsify:
        scale = np.abs(block).max()
        if scale > 0:
            block[np.abs(block) < 1e-13 * scale] = 0.0
    return block


def project_radial(expr, m, table, sparsify=True):
    """Exact projection of a z-independent polynomial onto mode-m coefficients."""
    expr = sp.expand(expr)
    fun = sp.lambdify(_r, expr, "numpy")
    vals = np.asarray(fun(table.nodes), dtype=float)
    vals = np.broadcast_to(vals, table.nodes.shape)
    coeffs = vals @ table.fwd[abs(m)].T
    if sparsify:
        scale = np.abs(coeffs).max()
        if scale > 0:
            coeffs[np.abs(coeffs) < 1e-13 * scale] = 0.0
    return coeffs
