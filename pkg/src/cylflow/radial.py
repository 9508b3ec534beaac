"""Regular radial polynomial basis on the unit disk and its banded operator algebra.

The basis functions Q_n^m(r) are polynomial solutions of a singular
Sturm-Liouville problem on (0, 1], orthogonal with respect to the weight
r^beta (1-r^2)^(alpha-1).  Writing s = r^2 and j = (n - |m|)/2 they reduce to
shifted Jacobi polynomials,

    Q_n^m(r) = kappa_j * r^|m| * P_j^(a,b)(2 r^2 - 1),
    a = alpha - 1,   b = |m| + (beta - 1)/2,
    kappa_j = (a+b+1)_j / (b+1)_j      (= 1 when alpha = 1),

which is what all evaluation and recursion code below uses.  Only powers
r^|m|, r^|m|+2, ... appear, so every expansion is analytic at the axis.

Quadrature is Gauss-Radau in s with the node s = 1 pinned (the grid must
contain the cylinder wall r = 1); the interior nodes are the roots of the
deflated combination of the first two neglected m = 0 polynomials.  Weights
absorb the full weight function: sum_i w_i f(r_i) ~ int_0^1 f r^beta
(1-r^2)^(alpha-1) dr, exact for even polynomials of degree <= 4N - 4.

Banded operator pairs (L, R) with H = R^-1 L exist for the four
parity-preserving operators {r d/dr, r^2, (r d/dr)^2 - m^2,
(r d/dr)^2 + lambda r^2}.  They are constructed here for alpha = 1 from the
rank-two structure of the far field of the dense operator matrix: testing
<p_i, H p_j> by parts leaves, for j >= i + 3, only boundary terms at s = 1
proportional to p_j(1) and p_j'(1), and a short R-stencil chosen orthogonal
to those two generators makes R @ M banded.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, NodeConvergenceError, SolverError

OPERATOR_KINDS = ("r_dr", "r2", "rdr2_minus_m2", "helmholtz")

_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 60


@dataclass(frozen=True)
class BasisParams:
    """Parameters of the radial basis family."""

    N: int
    m_max: int = 0
    alpha: float = 1.0
    beta: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.beta) != self.beta or self.beta < 1:
            raise ConfigurationError(f"beta must be a positive integer, got {self.beta}")
        if self.N < 4:
            raise ConfigurationError(f"N must be at least 4, got {self.N}")
        if self.m_max < 0:
            raise ConfigurationError("m_max must be non-negative")

    def n_modes(self, m):
        """Number of radial basis functions N_m = N - floor(|m|/2)."""
        return self.N - abs(m) // 2


def _jacobi_ab(params, m):
    return params.alpha - 1.0, abs(m) + (params.beta - 1.0) / 2.0


def jacobi_eval(n_max, a, b, x):
    """Table of shifted-argument Jacobi polynomials P_j^(a,b)(x), j = 0..n_max-1.

    Returns an array of shape (len(x), n_max).  Three-term recurrence, stable
    for the parameter ranges used here (a in [-1, 0], b >= 0).  Preserves the
    dtype of x (the operator assembly runs this in extended precision).
    """
    x = np.atleast_1d(np.asarray(x))
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(float)
    out = np.empty((x.size, n_max), dtype=x.dtype)
    out[:, 0] = 1.0
    if n_max > 1:
        out[:, 1] = 0.5 * (a + b + 2.0) * x + 0.5 * (a - b)
    c = a + b
    for j in range(2, n_max):
        a1 = 2.0 * j * (j + c) * (2.0 * j + c - 2.0)
        a2 = (2.0 * j + c - 1.0) * (a * a - b * b)
        a3 = (2.0 * j + c - 1.0) * (2.0 * j + c) * (2.0 * j + c - 2.0)
        a4 = 2.0 * (j + a - 1.0) * (j + b - 1.0) * (2.0 * j + c)
        out[:, j] = ((a2 + a3 * x) * out[:, j - 1] - a4 * out[:, j - 2]) / a1
    return out


def _jacobi_eval_single(j, a, b, x):
    return jacobi_eval(j + 1, a, b, x)[:, j]


def _jacobi_deriv(n_max, a, b, x):
    """d/ds of shifted Jacobi J_j(s) = P_j^(a,b)(2s-1), via the promoted family."""
    x = np.atleast_1d(np.asarray(x))
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(float)
    out = np.zeros((x.size, n_max), dtype=x.dtype)
    if n_max > 1:
        prom = jacobi_eval(n_max - 1, a + 1.0, b + 1.0, x)
        j = np.arange(1, n_max)
        out[:, 1:] = (j + a + b + 1.0) * prom
    return out


def _jacobi_deriv2(n_max, a, b, x):
    """(d/ds)^2 of shifted Jacobi J_j(s)."""
    x = np.atleast_1d(np.asarray(x))
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(float)
    out = np.zeros((x.size, n_max), dtype=x.dtype)
    if n_max > 2:
        prom = jacobi_eval(n_max - 2, a + 2.0, b + 2.0, x)
        j = np.arange(2, n_max)
        out[:, 2:] = (j + a + b + 1.0) * (j + a + b + 2.0) * prom
    return out


def _jacobi_norm_chain(n, a, b, dtype=float):
    """h_j by the exact ratio recurrence, avoiding lgamma roundoff mixing."""
    h = np.empty(n, dtype=dtype)
    h[0] = math.gamma(a + 1.0) * math.gamma(b + 1.0) / math.gamma(a + b + 2.0)
    for j in range(n - 1):
        num = (j + a + 1.0) * (j + b + 1.0) * (2.0 * j + a + b + 1.0)
        den = (j + 1.0) * (j + a + b + 1.0) * (2.0 * j + a + b + 3.0)
        h[j + 1] = h[j] * (dtype(num) / dtype(den))
    return h


def _jacobi_norm_s(j, a, b):
    """h_j = int_0^1 (1-s)^a s^b J_j(s)^2 ds for the shifted family."""
    j = np.asarray(j, dtype=float)
    lg = math.lgamma
    num = np.array([lg(jj + a + 1.0) + lg(jj + b + 1.0) for jj in np.atleast_1d(j)])
    den = np.array(
        [lg(jj + a + b + 1.0) + lg(jj + 1.0) + math.log(2.0 * jj + a + b + 1.0)
         for jj in np.atleast_1d(j)]
    )
    return np.exp(num - den)


def _kappa(j, a, b):
    """kappa_j = (a+b+1)_j / (b+1)_j, the Q-vs-Jacobi normalization ratio."""
    j = np.atleast_1d(np.asarray(j, dtype=int))
    out = np.empty(j.size)
    for idx, jj in enumerate(j):
        acc = 0.0
        for i in range(jj):
            acc += math.log(a + b + 1.0 + i) - math.log(b + 1.0 + i)
        out[idx] = math.exp(acc)
    return out


@dataclass
class RadialBasisTable:
    """Quadrature rule, norms and evaluation tables for the Q_n^m basis."""

    params: BasisParams
    nodes: np.ndarray          # (N,) radii, strictly increasing, last = 1
    weights: np.ndarray        # (N,) weights absorbing r^beta (1-r^2)^(alpha-1)
    norms: list[np.ndarray] = field(repr=False)    # per m: (N_m,) I_n^m
    eval: list[np.ndarray] = field(repr=False)     # per m: (N, N_m) Q_n^m(r_i)
    deval: list[np.ndarray] = field(repr=False)    # per m: (N, N_m) dQ_n^m/dr(r_i)
    fwd: list[np.ndarray] = field(repr=False)      # per m: (N_m, N) forward transform
    wall_value: list[np.ndarray] = field(repr=False)   # per m: Q_n^m(1)
    wall_deriv: list[np.ndarray] = field(repr=False)   # per m: dQ_n^m/dr(1)
    origin_value: list[np.ndarray] = field(repr=False)  # per m: Q_n^m(0)

    @property
    def N(self):
        return self.params.N

    def n_modes(self, m):
        return self.params.n_modes(m)

    def degrees(self, m):
        """Polynomial degrees n = |m|, |m|+2, ... carried by mode m."""
        m = abs(m)
        return m + 2 * np.arange(self.n_modes(m))


def _bracketed_roots(fun, n_roots, poly_index, grid_size, dtype=float):
    """All sign-change roots of fun on (0, 1), Newton-polished with bisection safeguard."""
    t = np.linspace(0.0, 1.0, grid_size, dtype=dtype)
    s_grid = 0.5 * (1.0 - np.cos(np.pi * t))
    s_grid = s_grid[1:-1]
    vals = fun(s_grid)
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if idx.size != n_roots:
        raise NodeConvergenceError(
            poly_index, f"found {idx.size} sign changes, expected {n_roots}"
        )
    tol = _NEWTON_TOL if dtype is float else np.finfo(dtype).eps * 8.0
    roots = np.empty(n_roots, dtype=dtype)
    for k, i in enumerate(idx):
        lo, hi = s_grid[i], s_grid[i + 1]
        flo = vals[i]
        s = dtype(0.5) * (lo + hi)
        converged = False
        for _ in range(_NEWTON_MAXIT):
            f, df = fun(np.array([s], dtype=dtype), deriv=True)
            if df != 0.0:
                step = f / df
                s_new = s - step
            else:
                s_new = np.nan
            if not (lo < s_new < hi):
                # bisection safeguard
                if f * flo < 0:
                    hi = s
                else:
                    lo = s
                    flo = f
                s_new = dtype(0.5) * (lo + hi)
            if abs(s_new - s) < tol * max(1.0, abs(s)):
                s = s_new
                converged = True
                break
            s = s_new
        if not converged and hi - lo > 1e-13:
            raise NodeConvergenceError(poly_index, f"Newton stalled near s={s}")
        roots[k] = s
    return np.sort(roots)


def quadrature_nodes(N, params):
    """Gauss-Radau nodes/weights in r for the m = 0 family, wall node pinned at r = 1.

    Interior nodes are the roots (in s = r^2) of the deflated combination
    J_N - (J_N(1)/J_{N-1}(1)) J_{N-1} of the first neglected m = 0
    polynomials, which vanishes at s = 1 by construction.  Weights come from
    the Christoffel sum 1/w_i = sum_l phi_l(s_i)^2 over the orthonormalized
    retained polynomials, exact at the Radau degree 2N - 2 in s.
    """
    if N < 4:
        raise ConfigurationError("N must be at least 4")
    a, b0 = _jacobi_ab(params, 0)

    j1 = _jacobi_eval_single(N, a, b0, np.array([1.0]))[0]
    j0 = _jacobi_eval_single(N - 1, a, b0, np.array([1.0]))[0]
    c_defl = j1 / j0

    def radau_poly(s, deriv=False):
        x = 2.0 * s - 1.0
        tab = jacobi_eval(N + 1, a, b0, x)
        val = tab[:, N] - c_defl * tab[:, N - 1]
        if not deriv:
            return val
        dtab = _jacobi_deriv(N + 1, a, b0, x)
        dval = dtab[:, N] - c_defl * dtab[:, N - 1]
        return val[0], dval[0]

    s_int = _bracketed_roots(radau_poly, N - 1, poly_index=2 * N, grid_size=20 * N + 50)
    s = np.concatenate([s_int, [1.0]])

    h = _jacobi_norm_s(np.arange(N), a, b0)
    phi = jacobi_eval(N, a, b0, 2.0 * s - 1.0) / np.sqrt(0.5 * h)
    w = 1.0 / np.sum(phi**2, axis=1)
    nodes = np.sqrt(s)
    return nodes, w


def build_basis(params):
    """Build the full radial table: nodes, weights, norms, evaluation and transforms."""
    N = params.N
    nodes, weights = quadrature_nodes(N, params)
    s = nodes**2
    x = 2.0 * s - 1.0

    norms, evals, devals, fwds = [], [], [], []
    wall_v, wall_d, origin_v = [], [], []
    for m in range(params.m_max + 1):
        a, b = _jacobi_ab(params, m)
        nm = params.n_modes(m)
        j = np.arange(nm)
        kap = _kappa(j, a, b)

        jac = jacobi_eval(nm, a, b, x)
        djac = _jacobi_deriv(nm, a, b, x)
        rm = nodes[:, None] ** m
        E = kap[None, :] * rm * jac
        # dQ/dr = m r^(m-1) J + 2 r^(m+1) J'
        dE = 2.0 * nodes[:, None] ** (m + 1) * djac
        if m > 0:
            dE = dE + m * nodes[:, None] ** (m - 1) * jac
        dE = kap[None, :] * dE
        # Discrete norms: equal to the analytic kap^2 h_j / 2 wherever the
        # Radau rule is exact; for odd m the top product exceeds exactness by
        # one s-degree, and the discrete value is the one that keeps the
        # forward/inverse pair exactly mutually inverse.
        I = np.einsum("i,ij,ij->j", weights, E, E)
        F = (E * weights[:, None]).T / I[:, None]

        one = np.array([1.0])
        jac1 = jacobi_eval(nm, a, b, one)[0]
        djac1 = _jacobi_deriv(nm, a, b, one)[0]
        wv = kap * jac1
        wd = kap * (m * jac1 + 2.0 * djac1)
        jac0 = jacobi_eval(nm, a, b, np.array([-1.0]))[0]
        ov = kap * jac0 if m == 0 else np.zeros(nm)

        norms.append(I)
        evals.append(E)
        devals.append(dE)
        fwds.append(F)
        wall_v.append(wv)
        wall_d.append(wd)
        origin_v.append(ov)

    return RadialBasisTable(
        params=params, nodes=nodes, weights=weights, norms=norms,
        eval=evals, deval=devals, fwd=fwds,
        wall_value=wall_v, wall_deriv=wall_d, origin_value=origin_v,
    )


def forward_transform(values, m, table):
    """Radial samples at the quadrature nodes -> N_m spectral coefficients.

    Works on the trailing axis.  f_n^m = sum_i w_i f(r_i) Q_n^m(r_i) / I_n^m.
    """
    values = np.asarray(values)
    if values.shape[-1] != table.N:
        raise ValueError(f"expected {table.N} radial samples, got {values.shape[-1]}")
    return values @ table.fwd[abs(m)].T


def inverse_transform(coeffs, m, table):
    """N_m spectral coefficients -> samples at the quadrature nodes (trailing axis)."""
    coeffs = np.asarray(coeffs)
    nm = table.n_modes(m)
    if coeffs.shape[-1] != nm:
        raise ValueError(f"expected {nm} coefficients for m={m}, got {coeffs.shape[-1]}")
    return coeffs @ table.eval[abs(m)].T


# ---------------------------------------------------------------------------
# banded operator algebra
# ---------------------------------------------------------------------------

@dataclass
class BandedMatrix:
    """Rectangular-free banded storage: data[d] holds diagonal at offset offsets[d].

    Row i, column i + offsets[d] lives at data[d][i]; entries running past the
    matrix edge are zero-padded.
    """

    n: int
    offsets: tuple
    data: np.ndarray  # (len(offsets), n)

    @classmethod
    def from_dense(cls, M, lo, up, tol=None, context=""):
        n = M.shape[0]
        offsets = tuple(range(-lo, up + 1))
        data = np.zeros((len(offsets), n))
        for d, off in enumerate(offsets):
            diag = np.diagonal(M, off)
            if off >= 0:
                data[d, : n - off] = diag
            else:
                data[d, -off:] = diag
        if tol is not None:
            resid = M.copy()
            for off in offsets:
                idx = np.arange(max(0, -off), min(n, n - off))
                resid[idx, idx + off] = 0.0
            scale = max(np.abs(M).max(), 1.0)
            if np.abs(resid).max() > tol * scale:
                raise SolverError(
                    f"matrix is not banded within offsets {offsets}"
                    f" (residual {np.abs(resid).max():.2e} vs scale {scale:.2e})"
                    f"{' in ' + context if context else ''}"
                )
        return cls(n=n, offsets=offsets, data=data)

    def matvec(self, x):
        """Apply to x along its last axis."""
        x = np.asarray(x)
        y = np.zeros(x.shape, dtype=np.result_type(x, self.data))
        n = self.n
        for d, off in enumerate(self.offsets):
            if off >= 0:
                y[..., : n - off] += self.data[d, : n - off] * x[..., off:]
            else:
                y[..., -off:] += self.data[d, -off:] * x[..., : n + off]
        return y

    def todense(self):
        M = np.zeros((self.n, self.n))
        for d, off in enumerate(self.offsets):
            idx = np.arange(max(0, -off), min(self.n, self.n - off))
            M[idx, idx + off] = self.data[d][idx]
        return M

    def row(self, i):
        out = np.zeros(self.n)
        for d, off in enumerate(self.offsets):
            j = i + off
            if 0 <= j < self.n:
                out[j] = self.data[d][i]
        return out

    def solve(self, rhs):
        """Solve self @ x = rhs (trailing axis of rhs)."""
        lo = -min(self.offsets)
        up = max(self.offsets)
        ab = np.zeros((lo + up + 1, self.n))
        dense_rows = {off: self.data[d] for d, off in enumerate(self.offsets)}
        for off in range(-lo, up + 1):
            band = dense_rows.get(off)
            if band is None:
                continue
            if off >= 0:
                ab[up - off, off:] = band[: self.n - off]
            else:
                ab[up - off, : self.n + off] = band[-off:]
        rhs = np.asarray(rhs)
        flat = rhs.reshape(-1, rhs.shape[-1]).T
        sol = solve_banded((lo, up), ab, flat)
        return sol.T.reshape(rhs.shape)


class _ModeOperatorCache:
    """Per-(table, m) dense operator matrices and banded building blocks.

    Assembled in extended precision: the dense matrices carry entries up to
    O(n^4), and the banded pairs live in their small differences, so float64
    quadrature sums would leave O(eps * ||M||) absolute noise in every band.
    """

    def __init__(self, table, m):
        params = table.params
        if params.alpha != 1.0:
            raise ConfigurationError(
                "banded operator pairs are implemented for alpha = 1 only"
            )
        self.table = table
        self.m = abs(m)
        a, b = _jacobi_ab(params, m)
        self.a, self.b = a, b
        nm = params.n_modes(m)
        self.nm = nm
        ld = np.longdouble

        # assembly quadrature (Gauss, no endpoint) exact to s-degree 2*(nm+4)-1
        nq = nm + 4
        s_q, w_q = _gauss_rule_s(a, b, nq, dtype=ld)
        x_q = 2.0 * s_q - ld(1.0)
        J = jacobi_eval(nm, a, b, x_q)
        dJ = _jacobi_deriv(nm, a, b, x_q)
        d2J = _jacobi_deriv2(nm, a, b, x_q)
        h = _jacobi_norm_chain(nm, a, b, dtype=ld)
        self.h = h.astype(float)
        proj = (J * w_q[:, None]).T / h[:, None]   # (nm, nq)

        m_ = self.m
        # dense matrices of (m + 2 theta) and 4 theta(theta+m) in the J basis
        act1 = m_ * J + 2.0 * s_q[:, None] * dJ
        act3 = 4.0 * (s_q**2)[:, None] * d2J + 4.0 * (m_ + 1.0) * s_q[:, None] * dJ
        self._M1_ld = proj @ act1
        self._M3_ld = proj @ act3
        self._Ms_ld = proj @ (s_q[:, None] * J)
        self.M1 = self._M1_ld.astype(float)
        self.M3 = self._M3_ld.astype(float)
        self.Ms_dense = self._Ms_ld.astype(float)

        # multiplication by s from the recurrence (tridiagonal, exact)
        self.Ms = BandedMatrix.from_dense(self.Ms_dense, lo=1, up=1,
                                          tol=1e-10, context=f"Ms m={m}")

        # far-field generators at s = 1 (alpha = 1: J_j(1) = 1, J_j'(1) = j(j+b+1))
        j = np.arange(nm)
        dj1 = j * (j + ld(b) + 1.0)
        self.g1 = 2.0 / h                               # r d/dr, rank one
        self.u1 = 4.0 / h                               # pairs with p_j'(1)
        self.u2 = -4.0 * ((ld(b) - m_ + 1.0) + dj1) / h  # pairs with p_j(1)

        self._R1 = None
        self._R1_ld = None
        self._R3 = None
        self._R3_ld = None

    def R1(self):
        if self._R1 is None:
            nm = self.nm
            data = np.zeros((2, nm), dtype=np.longdouble)
            g = self.g1
            for i in range(nm):
                if i + 1 < nm:
                    row = np.array([g[i + 1], -g[i]], dtype=np.longdouble)
                else:
                    row = np.array([1.0, 0.0], dtype=np.longdouble)
                row /= np.abs(row).max()
                data[0, i] = row[0]
                data[1, i] = row[1] if i + 1 < nm else 0.0
            self._R1_ld = data
            self._R1 = BandedMatrix(n=nm, offsets=(0, 1), data=data.astype(float))
        return self._R1

    def R1_dense_ld(self):
        self.R1()
        return _bands_to_dense_ld(self._R1_ld, (0, 1), self.nm)

    def R3(self):
        if self._R3 is None:
            nm = self.nm
            data = np.zeros((3, nm), dtype=np.longdouble)
            u1, u2 = self.u1, self.u2
            for i in range(nm):
                if i + 2 < nm:
                    a3 = np.array([u1[i], u1[i + 1], u1[i + 2]])
                    b3 = np.array([u2[i], u2[i + 1], u2[i + 2]])
                    row = np.array([
                        a3[1] * b3[2] - a3[2] * b3[1],
                        a3[2] * b3[0] - a3[0] * b3[2],
                        a3[0] * b3[1] - a3[1] * b3[0],
                    ])
                elif i + 1 < nm:
                    row = np.array([u1[i + 1], -u1[i], np.longdouble(0.0)])
                else:
                    row = np.array([1.0, 0.0, 0.0], dtype=np.longdouble)
                row = row / np.abs(row).max()
                if abs(row[0]) < 1e-12:
                    raise SolverError(f"singular R diagonal at row {i} (m={self.m})")
                data[:, i] = row
            self._R3_ld = data
            self._R3 = BandedMatrix(n=nm, offsets=(0, 1, 2), data=data.astype(float))
        return self._R3

    def R3_dense_ld(self):
        self.R3()
        return _bands_to_dense_ld(self._R3_ld, (0, 1, 2), self.nm)


def _bands_to_dense_ld(data, offsets, n):
    M = np.zeros((n, n), dtype=np.longdouble)
    for d, off in enumerate(offsets):
        idx = np.arange(max(0, -off), min(n, n - off))
        M[idx, idx + off] = data[d][idx]
    return M


def _gauss_rule_s(a, b, n, dtype=float):
    """Gauss rule in s on [0, 1] for weight (1-s)^a s^b: nodes and weights."""
    def poly(s, deriv=False):
        x = 2.0 * s - dtype(1.0)
        val = _jacobi_eval_single(n, a, b, x)
        if not deriv:
            return val
        dval = _jacobi_deriv(n + 1, a, b, x)[:, n]
        return val[0], dval[0]

    s = _bracketed_roots(poly, n, poly_index=n, grid_size=20 * n + 50, dtype=dtype)
    h = _jacobi_norm_chain(n, a, b, dtype=dtype)
    phi = jacobi_eval(n, a, b, 2.0 * s - dtype(1.0)) / np.sqrt(h)
    w = 1.0 / np.sum(phi**2, axis=1)
    return s, w


_op_cache = {}


def _mode_ops(table, m):
    key = (id(table), abs(m))
    cache = _op_cache.get(key)
    if cache is None:
        cache = _ModeOperatorCache(table, m)
        _op_cache[key] = cache
    return cache


@dataclass
class BandedOperatorPair:
    """Banded pair (L, R) with H = R^-1 L for one radial operator on mode m."""

    kind: str
    m: int
    lam: float
    L: BandedMatrix
    R: BandedMatrix

    def apply(self, coeffs):
        """Coefficients of H f from coefficients of f (trailing axis)."""
        return self.R.solve(self.L.matvec(coeffs))


def operator_banded(kind, m, lam=0.0, table=None):
    """Build the banded (L, R) pair for one of the four radial operators.

    kind is one of 'r_dr', 'r2', 'rdr2_minus_m2', 'helmholtz'; the last one is
    (r d/dr)^2 + lam * r^2 with lam of either sign.
    """
    if kind not in OPERATOR_KINDS:
        raise ConfigurationError(f"unknown operator kind {kind!r}")
    if table is None:
        raise ConfigurationError("operator_banded requires a RadialBasisTable")
    if abs(m) > table.params.m_max:
        raise ConfigurationError(f"m={m} exceeds tabulated m_max={table.params.m_max}")
    ops = _mode_ops(table, m)
    nm = ops.nm
    # construction roundoff in the far-field cancellation grows ~ nm^3
    tol = 1e-11 * max(1.0, (nm / 64.0) ** 3)
    if kind == "r2":
        ident = BandedMatrix(n=nm, offsets=(0,), data=np.ones((1, nm)))
        return BandedOperatorPair(kind, m, 0.0, L=ops.Ms, R=ident)
    if kind == "r_dr":
        R = ops.R1()
        Ld = (ops.R1_dense_ld() @ ops._M1_ld).astype(float)
        L = BandedMatrix.from_dense(Ld, lo=0, up=1, tol=tol, context=f"r_dr m={m}")
        return BandedOperatorPair(kind, m, 0.0, L=L, R=R)
    if kind == "rdr2_minus_m2":
        R = ops.R3()
        Ld = (ops.R3_dense_ld() @ ops._M3_ld).astype(float)
        L = BandedMatrix.from_dense(Ld, lo=0, up=2, tol=tol,
                                    context=f"rdr2_minus_m2 m={m}")
        return BandedOperatorPair(kind, m, 0.0, L=L, R=R)
    # helmholtz: (r d/dr)^2 + lam r^2 = [4 theta(theta+m)] + m^2 + lam s
    R = ops.R3()
    M4 = ops._M3_ld + np.longdouble(ops.m**2) * np.eye(nm) + np.longdouble(lam) * ops._Ms_ld
    Ld = (ops.R3_dense_ld() @ M4).astype(float)
    L = BandedMatrix.from_dense(Ld, lo=1, up=3, tol=tol,
                                context=f"helmholtz m={m} lam={lam}")
    return BandedOperatorPair(kind, m, lam, L=L, R=R)


def dense_operator(kind, m, lam=0.0, table=None):
    """Dense matrix of the same operator, assembled by exact quadrature projection.

    Test/diagnostic oracle for the banded pairs and the tau solver.
    """
    ops = _mode_ops(table, m)
    nm = ops.nm
    if kind == "r2":
        return ops.Ms_dense.copy()
    if kind == "r_dr":
        return ops.M1.copy()
    if kind == "rdr2_minus_m2":
        return ops.M3.copy()
    if kind == "helmholtz":
        return ops.M3 + (ops.m**2) * np.eye(nm) + lam * ops.Ms_dense
    raise ConfigurationError(f"unknown operator kind {kind!r}")


def gamma_formula_eval(n, m, params, r, derivative=False):
    """Evaluate Q_n^m(r) from the explicit Gamma-function series (test oracle only).

    Uses log-Gamma arithmetic per term with mpmath high-precision summation to
    survive the cancellation near r = 1 at large n.  Never used by the solver.
    """
    import mpmath as mp

    m = abs(m)
    if (n - m) % 2 != 0 or n < m:
        raise ValueError("need n >= |m| with n + m even")
    gamma = 2.0 * params.alpha + params.beta
    p_max = (n - m) // 2
    with mp.workdps(60):
        out = []
        for rv in np.atleast_1d(r):
            rv = mp.mpf(float(rv))
            acc = mp.mpf(0)
            for p in range(p_max + 1):
                lg = (
                    mp.loggamma(mp.mpf(n + m + gamma - 1) / 2 + p)
                    + mp.loggamma(mp.mpf(2 * m + params.beta + 1) / 2)
                    - mp.loggamma(p + 1)
                    - mp.loggamma(mp.mpf(n - m) / 2 - p + 1)
                    - mp.loggamma(mp.mpf(2 * m + params.beta + 1) / 2 + p)
                    - mp.loggamma(mp.mpf(2 * m + gamma - 1) / 2)
                )
                sign = (-1) ** (p + p_max)
                power = m + 2 * p
                if derivative:
                    if power == 0:
                        continue
                    acc += sign * mp.e**lg * power * rv ** (power - 1)
                else:
                    acc += sign * mp.e**lg * rv**power
            out.append(float(acc))
    return np.array(out) if np.ndim(r) else out[0]
