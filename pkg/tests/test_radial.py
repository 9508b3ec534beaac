"""Radial basis: quadrature, transforms, and the banded operator algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylflow.errors import ConfigurationError
from cylflow.radial import (
    BasisParams,
    build_basis,
    dense_operator,
    forward_transform,
    gamma_formula_eval,
    inverse_transform,
    operator_banded,
    quadrature_nodes,
)


@pytest.fixture(scope="module")
def table():
    return build_basis(BasisParams(N=16, m_max=6))


def test_params_validation():
    with pytest.raises(ConfigurationError):
        BasisParams(N=3)
    with pytest.raises(ConfigurationError):
        BasisParams(N=8, alpha=1.5)
    with pytest.raises(ConfigurationError):
        BasisParams(N=8, beta=0)


def test_nodes_increasing_wall_pinned(table):
    r = table.nodes
    assert np.all(np.diff(r) > 0)
    assert r[0] > 0.0
    assert r[-1] == 1.0


def test_weights_positive_and_integrate_r(table):
    # sum w_i ~ int_0^1 r dr = 1/2 for alpha = beta = 1
    assert np.all(table.weights > 0)
    assert abs(table.weights.sum() - 0.5) < 1e-13


def test_quadrature_exactness_even_polynomials():
    nodes, w = quadrature_nodes(10, BasisParams(N=10))
    # int_0^1 r^(2k) * r dr = 1/(2k+2), exact up to r-degree 4N-4
    for k in range(0, 2 * 10 - 1):
        val = np.sum(w * nodes ** (2 * k))
        assert abs(val - 1.0 / (2 * k + 2)) < 1e-13


def test_q00_is_one_and_qmm_is_rm(table):
    assert np.abs(table.eval[0][:, 0] - 1.0).max() == 0.0
    for m in (1, 2, 5):
        assert np.abs(table.eval[m][:, 0] - table.nodes**m).max() < 1e-14


def test_discrete_orthonormality(table):
    for m in range(table.params.m_max + 1):
        E, I = table.eval[m], table.norms[m]
        G = (E * table.weights[:, None]).T @ E / I[:, None]
        assert np.abs(G - np.eye(table.n_modes(m))).max() < 1e-12


def test_norm_closed_form_m0(table):
    # alpha = beta = 1: I_n^0 = 1/(2(n+1))
    n = table.degrees(0)
    assert np.abs(table.norms[0] - 1.0 / (2.0 * (n + 1))).max() < 1e-14


@pytest.mark.parametrize("n,m", [(0, 0), (8, 0), (20, 0), (10, 2), (15, 3), (21, 5), (26, 6)])
def test_recursion_matches_gamma_formula(table, n, m):
    j = (n - m) // 2
    q_rec = table.eval[m][:, j]
    q_gamma = gamma_formula_eval(n, m, table.params, table.nodes)
    assert np.abs(q_rec - q_gamma).max() < 1e-12
    dq_rec = table.deval[m][:, j]
    dq_gamma = gamma_formula_eval(n, m, table.params, table.nodes, derivative=True)
    scale = max(np.abs(dq_gamma).max(), 1.0)
    assert np.abs(dq_rec - dq_gamma).max() < 1e-12 * scale


def test_forward_transform_r2_at_m2(table):
    c = forward_transform(table.nodes**2, 2, table)
    assert abs(c[0] - 1.0) < 1e-13
    assert np.abs(c[1:]).max() < 1e-13


def test_forward_transform_zero(table):
    c = forward_transform(np.zeros(table.N), 1, table)
    assert np.all(c == 0.0)


def test_unit_coefficient_gives_eval_column(table):
    e = np.zeros(table.n_modes(3))
    e[2] = 1.0
    vals = inverse_transform(e, 3, table)
    assert np.abs(vals - table.eval[3][:, 2]).max() == 0.0


def test_transform_length_mismatch(table):
    with pytest.raises(ValueError):
        forward_transform(np.zeros(table.N - 1), 0, table)
    with pytest.raises(ValueError):
        inverse_transform(np.zeros(table.N + 2), 2, table)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(min_value=0, max_value=6), seed=st.integers(0, 2**32 - 1))
def test_roundtrip_identity(table, m, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(table.n_modes(m))
    c2 = forward_transform(inverse_transform(c, m, table), m, table)
    assert np.abs(c - c2).max() < 1e-13 * max(1.0, np.abs(c).max())


def test_operator_r2_on_q00(table):
    pair = operator_banded("r2", 0, table=table)
    e0 = np.zeros(table.n_modes(0))
    e0[0] = 1.0
    got = pair.apply(e0)
    oracle = forward_transform(table.nodes**2, 0, table)
    assert np.abs(got - oracle).max() < 1e-13
    assert np.count_nonzero(np.abs(oracle) > 1e-12) == 2


def test_operator_annihilates_qmm(table):
    for m in (1, 3, 6):
        pair = operator_banded("rdr2_minus_m2", m, table=table)
        e0 = np.zeros(table.n_modes(m))
        e0[0] = 1.0
        assert np.abs(pair.apply(e0)).max() < 1e-12


@pytest.mark.parametrize("kind", ["r_dr", "r2", "rdr2_minus_m2"])
@pytest.mark.parametrize("m", range(6))
def test_banded_vs_dense(table, kind, m):
    rng = np.random.default_rng(101 + m)
    pair = operator_banded(kind, m, table=table)
    D = dense_operator(kind, m, table=table)
    c = rng.standard_normal(table.n_modes(m))
    want = D @ c
    got = pair.apply(c)
    assert np.abs(got - want).max() < 1e-12 * max(np.abs(want).max(), 1.0)


@pytest.mark.parametrize("lam", [0.0, 10.0, 1e5])
@pytest.mark.parametrize("m", range(6))
def test_banded_vs_dense_helmholtz(table, lam, m):
    rng = np.random.default_rng(7 + m)
    pair = operator_banded("helmholtz", m, lam, table=table)
    D = dense_operator("helmholtz", m, lam, table=table)
    c = rng.standard_normal(table.n_modes(m))
    want = D @ c
    got = pair.apply(c)
    assert np.abs(got - want).max() < 1e-12 * max(np.abs(want).max(), 1.0)


def test_helmholtz_bandwidths(table):
    pair = operator_banded("helmholtz", 2, 10.0, table=table)
    assert pair.L.offsets == (-1, 0, 1, 2, 3)   # pentadiagonal
    assert pair.R.offsets == (0, 1, 2)          # tridiagonal


def test_parity_closure(table):
    # operators keep coefficients inside the mode-m triangular set: applying
    # any pair to an in-space vector returns an in-space vector of length N_m
    rng = np.random.default_rng(3)
    for m in (0, 3):
        c = rng.standard_normal(table.n_modes(m))
        for kind, lam in [("r_dr", 0.0), ("r2", 0.0), ("rdr2_minus_m2", 0.0), ("helmholtz", 12.5)]:
            out = operator_banded(kind, m, lam, table=table).apply(c)
            assert out.shape == (table.n_modes(m),)
            assert np.all(np.isfinite(out))


def test_operator_rejects_unknown_kind_and_large_m(table):
    with pytest.raises(ConfigurationError):
        operator_banded("nope", 0, table=table)
    with pytest.raises(ConfigurationError):
        operator_banded("r2", table.params.m_max + 1, table=table)
