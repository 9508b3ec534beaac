"""Azimuthal Fourier and axial Chebyshev machinery on the cylinder grid.

Conventions
-----------
* Physical grid: theta_j = 2 pi j / M, z_k = (h/2) cos(pi k / (K-1))
  (Chebyshev-Gauss-Lobatto, stored in natural descending-z order with
  z_0 = +h/2), r_i = radial quadrature nodes (ascending, r_{N-1} = 1).
* Real fields are stored spectrally as Hermitian half-spectra: blocks for
  m = 0 .. M//2 with f^{-m} = conj(f^m) implied.  Each block has shape
  (K, N_m) with axial Chebyshev index k and radial index n (triangular set).
* z-parity: T_k has the parity of k, so splitting by k parity separates
  fields symmetric/antisymmetric about the midplane.  K must be even.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct, irfft, rfft
from scipy.linalg import eig, inv

from .errors import ConfigurationError, SolverError
from .radial import BasisParams, RadialBasisTable, build_basis

PARITIES = ("sym", "anti")


def _cheb_synthesis(coeffs, axis=-1):
    """Chebyshev coefficients -> values at CGL points (descending x)."""
    c = np.moveaxis(np.asarray(coeffs), axis, -1).copy()
    c[..., 0] *= 2.0
    c[..., -1] *= 2.0
    vals = 0.5 * dct(c, type=1, axis=-1)
    return np.moveaxis(vals, -1, axis)


def _cheb_analysis(values, axis=-1):
    """Values at CGL points -> Chebyshev coefficients."""
    v = np.moveaxis(np.asarray(values), axis, -1)
    K = v.shape[-1]
    d = dct(v, type=1, axis=-1) / (K - 1.0)
    d[..., 0] *= 0.5
    d[..., -1] *= 0.5
    return np.moveaxis(d, -1, axis)


def chebyshev_synthesis(coeffs, axis=-1):
    """Complex-safe Chebyshev synthesis along `axis`."""
    c = np.asarray(coeffs)
    if np.iscomplexobj(c):
        return _cheb_synthesis(c.real, axis) + 1j * _cheb_synthesis(c.imag, axis)
    return _cheb_synthesis(c, axis)


def chebyshev_analysis(values, axis=-1):
    """Complex-safe Chebyshev analysis along `axis`."""
    v = np.asarray(values)
    if np.iscomplexobj(v):
        return _cheb_analysis(v.real, axis) + 1j * _cheb_analysis(v.imag, axis)
    return _cheb_analysis(v, axis)


def fourier_analysis(values, axis=0):
    """Real theta samples -> Hermitian half-spectrum f^m, m = 0..M//2."""
    values = np.asarray(values)
    M = values.shape[axis]
    return np.moveaxis(rfft(np.moveaxis(values, axis, -1)) / M, -1, axis)


def fourier_synthesis(coeffs, M, axis=0):
    """Hermitian half-spectrum -> real theta samples (inverse of fourier_analysis)."""
    coeffs = np.moveaxis(np.asarray(coeffs), axis, -1)
    vals = irfft(coeffs * M, n=M)
    return np.moveaxis(vals, -1, axis)


def chebyshev_derivative_matrix(K, h):
    """Coefficient-space d/dz for T_k(2z/h): upper-triangular K x K matrix."""
    D = np.zeros((K, K))
    for n in range(1, K):
        for p in range(n - 1, -1, -2):
            D[p, n] = 2.0 * n
    D[0, :] *= 0.5
    return D * (2.0 / h)


def split_parity(block):
    """(K, ...) coefficient block -> (symmetric, antisymmetric) halves."""
    K = block.shape[0]
    if K % 2 != 0:
        raise ConfigurationError("parity splitting requires even K")
    return block[0::2], block[1::2]


def merge_parity(sym, anti):
    """Inverse of split_parity."""
    K = sym.shape[0] + anti.shape[0]
    out = np.empty((K,) + sym.shape[1:], dtype=np.result_type(sym, anti))
    out[0::2] = sym
    out[1::2] = anti
    return out


@dataclass
class AxialOperator:
    """Parity-restricted d^2/dz^2 with the Dirichlet tau row built in.

    The last coefficient row of the parity block is surrendered to the
    boundary condition (value at z = +h/2, the two disk conditions having
    been recombined by parity), and the remaining (K/2 - 1)-square Schur
    block is diagonalized once.  Eigenvalues are the lambda_z entering the
    radial Helmholtz shifts.
    """

    parity: str
    K: int
    h: float
    d2_block: np.ndarray          # (K2, K2) parity-restricted d^2/dz^2
    bc_row: np.ndarray            # (K2,) values T_k(+h/2-edge) = 1
    eigvals: np.ndarray           # (K2-1,) real, negative
    E: np.ndarray                 # (K2-1, K2-1) eigenvectors of the Schur block
    Einv: np.ndarray

    def apply(self, coeffs):
        """d^2/dz^2 on a parity coefficient block (leading axis = k)."""
        return np.tensordot(self.d2_block, coeffs, axes=(1, 0))


def build_axial_operator(K, parity, h):
    """Diagonalized Dirichlet-tau d^2/dz^2 for one z-parity."""
    if K % 2 != 0:
        raise ConfigurationError("K must be even")
    if h <= 0:
        raise ConfigurationError("h must be positive")
    if parity not in PARITIES:
        raise ConfigurationError(f"parity must be one of {PARITIES}")
    D1 = chebyshev_derivative_matrix(K, h)
    D2 = D1 @ D1
    sel = np.arange(0, K, 2) if parity == "sym" else np.arange(1, K, 2)
    block = D2[np.ix_(sel, sel)]
    bc = np.ones(len(sel))
    # Schur elimination of the highest retained mode against the BC row
    S = block[:-1, :-1] - np.outer(block[:-1, -1], bc[:-1] / bc[-1])
    w, V = eig(S)
    if np.abs(w.imag).max() > 1e-8 * max(np.abs(w.real).max(), 1.0):
        raise SolverError(f"axial eigenvalues not real (parity={parity}, K={K})")
    w = w.real
    order = np.argsort(w)[::-1]
    w = w[order]
    V = V[:, order].real
    try:
        Vinv = inv(V)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"axial eigenvector matrix singular (parity={parity}, K={K})") from exc
    return AxialOperator(parity=parity, K=K, h=h, d2_block=block, bc_row=bc,
                         eigvals=w, E=V, Einv=Vinv)


@dataclass
class SpectralGrid:
    """Grid metadata plus the 1-D transform machinery, shared by all fields."""

    M: int
    K: int
    N: int
    h: float
    basis: RadialBasisTable
    theta: np.ndarray = field(init=False)
    z: np.ndarray = field(init=False)
    r: np.ndarray = field(init=False)
    d1z: np.ndarray = field(init=False)
    d2z: np.ndarray = field(init=False)
    transform_count: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.M < 1 or self.K < 4 or self.K % 2 != 0:
            raise ConfigurationError("need M >= 1 and even K >= 4")
        if self.h <= 0:
            raise ConfigurationError("h must be positive")
        if self.basis.params.m_max < self.M // 2:
            raise ConfigurationError("basis m_max too small for azimuthal resolution")
        if self.basis.N != self.N:
            raise ConfigurationError("basis N does not match grid N")
        self.theta = 2.0 * np.pi * np.arange(self.M) / self.M
        x = np.cos(np.pi * np.arange(self.K) / (self.K - 1))
        self.z = 0.5 * self.h * x
        self.r = self.basis.nodes
        self.d1z = chebyshev_derivative_matrix(self.K, self.h)
        self.d2z = self.d1z @ self.d1z

    @property
    def m_list(self):
        return list(range(self.M // 2 + 1))

    def n_modes(self, m):
        return self.basis.n_modes(m)

    def zeros(self):
        return CoefficientField.zeros(self)

    # -- full 3-D transforms -------------------------------------------------
    def to_physical(self, coeffs):
        """CoefficientField -> real values on the (M, K, N) grid."""
        spec = np.zeros((self.M // 2 + 1, self.K, self.N), dtype=complex)
        for m in self.m_list:
            radial = coeffs.blocks[m] @ self.basis.eval[m].T     # (K, N)
            spec[m] = chebyshev_synthesis(radial, axis=0)
        vals = fourier_synthesis(spec, self.M, axis=0)
        self.transform_count += 1
        return vals

    def to_spectral(self, values):
        """Real values on the (M, K, N) grid -> CoefficientField."""
        spec = fourier_analysis(np.asarray(values), axis=0)
        blocks = []
        for m in self.m_list:
            radial = chebyshev_analysis(spec[m], axis=0)
            blocks.append(radial @ self.basis.fwd[m].T)
        self.transform_count += 1
        return CoefficientField(grid=self, blocks=blocks)


class CoefficientField:
    """Hermitian half-spectrum of one real scalar field."""

    __slots__ = ("grid", "blocks")

    def __init__(self, grid, blocks):
        self.grid = grid
        self.blocks = blocks

    @classmethod
    def zeros(cls, grid):
        blocks = [np.zeros((grid.K, grid.n_modes(m)), dtype=complex) for m in grid.m_list]
        return cls(grid, blocks)

    def copy(self):
        return CoefficientField(self.grid, [b.copy() for b in self.blocks])

    def __add__(self, other):
        return CoefficientField(
            self.grid, [a + b for a, b in zip(self.blocks, other.blocks)]
        )

    def __sub__(self, other):
        return CoefficientField(
            self.grid, [a - b for a, b in zip(self.blocks, other.blocks)]
        )

    def __mul__(self, scalar):
        return CoefficientField(self.grid, [scalar * b for b in self.blocks])

    __rmul__ = __mul__

    def norm_max(self):
        return max(np.abs(b).max() for b in self.blocks) if self.blocks else 0.0

    def m0_real_error(self):
        """Imaginary contamination of the axisymmetric block (should be ~0)."""
        return np.abs(self.blocks[0].imag).max()
