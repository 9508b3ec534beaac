"""Regularized boundary data replacing the discontinuous corner conditions.

The raw rotor-stator conditions u_theta = r omega_pm on the disks and
u_theta = 0 on the lateral wall are discontinuous at the corners.  Two
mutually exclusive smoothings are supported:

* disk regularization: replace the disk profile by r (1 - e^((r-1)/delta))
  omega_pm (kind 'exp_disk') or r (1 - r^mu) omega_pm ('poly_disk'), keeping
  the wall at rest;
* lateral regularization ('lateral'): keep the uniform disk profiles and let
  the wall carry u_theta(1, z) = omega_+ e^(-(1-2z/h)/delta)
  + omega_- e^(-(1+2z/h)/delta).

Disk profiles are odd in r and are projected on the m = 1 radial family;
with N nodes that transform is square and interpolatory, so the projected
profile vanishes identically at r = 0 (parity) and at r = 1 (Radau node).
The disk data actually consumed by the nested solver is
f_psi|disk = -(1/r) d/dr (r u_theta), returned per disk in the m = 0 family.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .radial import forward_transform, jacobi_eval, _jacobi_ab, _kappa

PROFILE_KINDS = ("exp_disk", "poly_disk", "lateral")


@dataclass(frozen=True)
class RegularizationConfig:
    kind: str
    delta: float = 0.01
    mu: int = 10
    omega_plus: float = 0.0
    omega_minus: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigurationError(f"kind must be one of {PROFILE_KINDS}")
        if self.kind in ("exp_disk", "lateral") and not 0.005 <= self.delta <= 0.06:
            raise ConfigurationError(
                f"delta={self.delta} outside the supported range [0.005, 0.06]"
            )
        if self.kind == "poly_disk" and (self.mu < 2 or self.mu % 2 != 0):
            raise ConfigurationError("mu must be an even integer >= 2")
        if self.omega_minus not in (0.0, 1.0):
            raise ConfigurationError(
                "omega_minus must be 0 (tests) or 1 (time-unit convention)"
            )
        if abs(self.omega_plus) > 1.0:
            raise ConfigurationError("|omega_plus| must not exceed 1")


def _disk_shape(config, r):
    """u_theta / omega on one disk for the disk-regularized kinds (raw for lateral)."""
    r = np.asarray(r, dtype=float)
    if config.kind == "exp_disk":
        return r * (1.0 - np.exp((r - 1.0) / config.delta))
    if config.kind == "poly_disk":
        return r * (1.0 - r**config.mu)
    return r


def suggested_min_n(delta):
    """Radial resolution able to represent an exponential profile of width delta.

    Wall node spacing of the Radau grid scales like (pi / 2N)^2; requiring a
    node inside the layer and the factor-two margin for nonlinear generation
    gives N ~ pi / sqrt(delta).
    """
    return int(math.ceil(math.pi / math.sqrt(delta)))


def evaluate_mode(coeffs, m, params, r):
    """Evaluate a mode-m radial expansion at arbitrary radii."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    a, b = _jacobi_ab(params, m)
    nm = len(coeffs)
    jac = jacobi_eval(nm, a, b, 2.0 * r**2 - 1.0)
    kap = _kappa(np.arange(nm), a, b)
    return (jac * kap[None, :] * r[:, None] ** abs(m)) @ np.asarray(coeffs)


@dataclass
class DiskProfile:
    """Projected disk data for one configuration (per-disk arrays, + then -)."""

    config: object
    uth_coeffs: np.ndarray      # (2, N) m=1 coefficients of u_theta on (+, -) disks
    psi_values: np.ndarray      # (2, N) psi = -int_0^r u_theta at the nodes
    psi_coeffs: np.ndarray      # (2, N) m=0 coefficients of the same
    fpsi_coeffs: np.ndarray     # (2, N) m=0 coefficients of -(1/r) d(r u_theta)/dr


def disk_profile(config, table):
    """Project the disk angular-velocity profile and derive psi and f_psi data.

    Raises ConfigurationError when the profile is not resolved by the radial
    basis (projection error above 1% of the profile peak).
    """
    params = table.params
    N = params.N
    r = table.nodes
    omegas = (config.omega_plus, config.omega_minus)

    shape_vals = _disk_shape(config, r)
    uth = np.zeros((2, N))
    psi_vals = np.zeros((2, N))
    psi_cf = np.zeros((2, N))
    fpsi = np.zeros((2, N))

    # resolution check on the omega-independent shape
    c_shape = forward_transform(shape_vals, 1, table)
    r_fine = np.linspace(1e-3, 1.0, 2001)
    rep = evaluate_mode(c_shape, 1, params, r_fine)
    exact = _disk_shape(config, r_fine)
    peak = max(np.abs(exact).max(), 1e-30)
    rel = np.abs(rep - exact).max() / peak
    if config.kind != "lateral" and rel > 0.01:
        raise ConfigurationError(
            f"disk profile unresolved at N={N} (deviation {rel:.1%} of peak); "
            f"need N >= {suggested_min_n(config.delta)}"
        )

    if config.kind == "poly_disk":
        # exactly representable: strip transform noise so downstream operator
        # applications (which amplify high-n noise by ~n^2) stay clean
        c_shape[np.abs(c_shape) < 1e-14 * np.abs(c_shape).max()] = 0.0

    # derivative of the projected profile at the nodes (exact in-space)
    du_shape = table.deval[1] @ c_shape

    # antiderivative: psi(r) = -int_0^r u; exact Gauss-Legendre per node
    from numpy.polynomial.legendre import leggauss

    xg, wg = leggauss(N + 2)
    psi_shape = np.empty(N)
    for i, ri in enumerate(r):
        pts = 0.5 * ri * (xg + 1.0)
        psi_shape[i] = -0.5 * ri * np.sum(wg * evaluate_mode(c_shape, 1, params, pts))
    psi_shape_cf = forward_transform(psi_shape, 0, table)

    # f_psi disk data: -(1/r) d(r u)/dr = -u/r - du/dr
    u_rep = table.eval[1] @ c_shape
    fpsi_shape = forward_transform(-u_rep / r - du_shape, 0, table)
    if config.kind == "poly_disk":
        psi_shape_cf[np.abs(psi_shape_cf) < 1e-14 * np.abs(psi_shape_cf).max()] = 0.0
        fpsi_shape[np.abs(fpsi_shape) < 1e-14 * np.abs(fpsi_shape).max()] = 0.0

    for d, omega in enumerate(omegas):
        uth[d] = omega * c_shape
        psi_vals[d] = omega * psi_shape
        psi_cf[d] = omega * psi_shape_cf
        if config.kind == "lateral":
            # raw disk data: -(1/r) d(omega r^2)/dr = -2 omega, a constant
            fpsi[d, 0] = -2.0 * omega
        else:
            fpsi[d] = omega * fpsi_shape

    return DiskProfile(config=config, uth_coeffs=uth, psi_values=psi_vals,
                       psi_coeffs=psi_cf, fpsi_coeffs=fpsi)


def lateral_profile(config, z, h):
    """Wall angular-velocity filter evaluated on the axial grid (r = 1)."""
    z = np.asarray(z, dtype=float)
    if config.kind != "lateral":
        return np.zeros_like(z)
    zeta = 2.0 * z / h
    return (config.omega_plus * np.exp(-(1.0 - zeta) / config.delta)
            + config.omega_minus * np.exp(-(1.0 + zeta) / config.delta))
