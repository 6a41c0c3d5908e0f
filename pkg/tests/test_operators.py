import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rkcompact import DomainError, SpaceDescriptor
from rkcompact.kernels import correlation_closed_form
from rkcompact.operators import (SymbolBoundError, TruncatedOperator, adjoint, berezin, coefficient_tail, combine,
                                 compose, correlation, default_toeplitz_rule, identity, kernel_coefficients,
                                 monomial_basis, operator_norm, singular_values, sub_degree, toeplitz, zero)
from rkcompact.symbols import angular, constant, expression, gaussian_decay, one_minus_r2, r2, radial_step

B = SpaceDescriptor.bergman()
B2 = SpaceDescriptor.bergman(2)
F = SpaceDescriptor.fock()

disk = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(0, 0.9), st.floats(0, 2 * math.pi))


def berezin_one_minus_r2(x):
    """Closed form of the Berezin transform of T_{1-|w|^2} on the disk, x = |z|^2."""
    if x == 0:
        return 0.5
    return (1 - x) + (1 - x) ** 2 * (math.log1p(-x) + x) / x ** 2


def berezin_step(x, radius, inside, outside):
    a = (1 - x) ** 2 * radius ** 2 / (1 - x * radius ** 2) ** 2
    return outside - (outside - inside) * a


# -- bases and coefficients ------------------------------------------------


def test_basis_constants():
    b = monomial_basis(B, 5)
    assert b.constants[0] == 1.0
    assert b.constants[3] == pytest.approx(2.0)
    f = monomial_basis(F, 5)
    assert f.constants[4] == pytest.approx(1 / math.sqrt(24))
    np.testing.assert_allclose(monomial_basis(F, 3).evaluate(2.0), [1, 2, 4 / math.sqrt(2), 8 / math.sqrt(6)])


def test_basis_two_dimensional():
    b = monomial_basis(B2, 2)
    assert b.dim == 6
    assert list(b.degrees) == sorted(b.degrees)
    assert b.prefix(1) == 3
    # ||z_1 z_2||^2 = 2! 1! 1! / 4! on the normalized 2-ball
    k = [i for i, m in enumerate(b.indices.tolist()) if m == [1, 1]][0]
    assert b.constants[k] == pytest.approx(math.sqrt(12))


def test_kernel_coefficient_examples():
    v = kernel_coefficients(B, 0.0, 10)
    np.testing.assert_array_equal(v, np.eye(11)[0])
    v = kernel_coefficients(B, 0.5, 60)
    assert v[1] == pytest.approx(0.75 * math.sqrt(2) * 0.5, abs=1e-15)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("space, z, D", [(B, 0.8, 30), (B, 0.95j, 60), (F, 3.0, 20), (F, 1 - 2j, 40),
                                         (B2, [0.5, 0.3j], 20)])
def test_coefficient_tail_matches_vector(space, z, D):
    v = kernel_coefficients(space, z, D)
    assert 1 - np.sum(np.abs(v) ** 2) == pytest.approx(float(coefficient_tail(space, z, D)), abs=1e-12)


def test_n1_fast_path_matches_log_path():
    z = np.array([0.0, 0.3 - 0.1j, 0.99j])
    fast = kernel_coefficients(B, z, 80)
    bas = monomial_basis(B, 80)
    k = np.arange(81)
    slow = (1 - np.abs(z[:, None]) ** 2) * bas.constants * np.conj(z[:, None]) ** k
    np.testing.assert_allclose(fast, slow, atol=1e-15)


def test_far_fock_points_stay_finite():
    v = kernel_coefficients(F, 30.0, 60)
    assert np.all(np.isfinite(v))


# -- Toeplitz oracles -------------------------------------------------------


@pytest.mark.parametrize("space", [B, F, B2], ids=["bergman", "fock", "bergman2"])
def test_identity_symbol(space):
    D = 60 if space.n == 1 else 10
    T = toeplitz(space, constant(1.0), D)
    np.testing.assert_allclose(T.matrix, np.eye(T.dim), atol=1e-10)


def test_r2_diagonals():
    k = np.arange(61)
    np.testing.assert_allclose(np.diag(toeplitz(B, r2(), 60).matrix).real, (k + 1) / (k + 2), atol=1e-8)
    np.testing.assert_allclose(np.diag(toeplitz(F, r2(1000.0), 60).matrix).real, k + 1, atol=1e-8)


def test_r2_two_dimensional():
    T = toeplitz(B2, r2(), 6)
    deg = monomial_basis(B2, 6).degrees
    np.testing.assert_allclose(T.matrix, np.diag((deg + 2) / (deg + 3)), atol=1e-12)


@pytest.mark.parametrize("space, u", [(B, r2()), (B, radial_step(0.5, -1.0, 1.0)), (F, gaussian_decay(1.0)),
                                      (B2, one_minus_r2())], ids=["b-r2", "b-step", "f-gauss", "b2-1mr2"])
def test_full_rule_agrees_with_radial_path(space, u):
    D = 12 if space.n == 1 else 4
    fast = toeplitz(space, u, D)
    full = toeplitz(space, u, D, default_toeplitz_rule(space, D, u))
    np.testing.assert_allclose(full.matrix, fast.matrix, atol=1e-10)


@pytest.mark.parametrize("u", [angular(1), expression("x*y + r", 2.0)], ids=["angular", "expr"])
def test_truncation_stability(u):
    small, big = toeplitz(B, u, 15), toeplitz(B, u, 30)
    np.testing.assert_allclose(big.matrix[:16, :16], small.matrix, atol=1e-10)


def test_angular_symbol_oracle():
    D = 20
    T = toeplitz(B, angular(1), D)
    j = np.arange(D)
    expected = np.zeros((D + 1, D + 1))
    expected[j + 1, j] = np.sqrt((j + 1) * (j + 2)) * 2 / (2 * j + 3)
    np.testing.assert_allclose(T.matrix, expected, atol=1e-10)


def test_symbol_bound_violation():
    u = expression("2*x", 1.0)
    with pytest.raises(SymbolBoundError, match="sup_bound"):
        toeplitz(B, u, 4)
    with pytest.raises(SymbolBoundError):
        toeplitz(F, r2(10.0), 10)


def test_rule_mismatch_rejected():
    with pytest.raises(DomainError):
        toeplitz(B, angular(1), 4, default_toeplitz_rule(F, 4))


@pytest.mark.parametrize("u, bound", [(constant(1.0), 1.0), (radial_step(), 1.0), (angular(2), 1.0),
                                      (expression("x*y", 0.5), 0.5)])
def test_toeplitz_norm_within_sup_bound(u, bound):
    T = toeplitz(B, u, 30)
    assert operator_norm(T) <= bound * (1 + 1e-8)


# -- Berezin transform and correlations ---------------------------------------


def test_berezin_examples():
    assert berezin(identity(B, 20), 0.3j) == pytest.approx(1.0 - coefficient_tail(B, 0.3j, 20), abs=1e-14)
    assert berezin(toeplitz(B, r2(), 40), 0.0) == pytest.approx(0.5, abs=1e-12)
    assert berezin(toeplitz(F, r2(1000.0), 40), 0.0) == pytest.approx(1.0, abs=1e-10)
    assert berezin(zero(B, 10), 0.5) == 0


@given(disk)
def test_identity_berezin_is_coefficient_mass(z):
    val = berezin(identity(B, 30), z)
    assert val.real == pytest.approx(1 - float(coefficient_tail(B, z, 30)), abs=1e-12)
    assert abs(val.imag) < 1e-14


@pytest.mark.parametrize("rad", [0.0, 0.3, 0.6, 0.8, 0.9])
def test_berezin_one_minus_r2_closed_form(rad):
    T = toeplitz(B, one_minus_r2(), 150)
    val, bar = berezin(T, rad * np.exp(0.4j), True)
    ref = berezin_one_minus_r2(rad ** 2)
    assert abs(val - ref) <= max(1e-10, 2 * bar)


def test_frozen_berezin_values():
    # closed forms cross-checked against a direct 2-d scipy integral, frozen
    assert berezin_one_minus_r2(0.95 ** 2) == pytest.approx(0.0808639, abs=1e-7)
    assert berezin_step(0.95 ** 2, 0.5, -1.0, 1.0) == pytest.approx(0.9920736, abs=1e-7)


@pytest.mark.parametrize("rad", [0.0, 0.5, 0.9, 0.95])
def test_berezin_step_closed_form(rad):
    T = toeplitz(B, radial_step(0.5, -1.0, 1.0), 200)
    val, bar = berezin(T, rad, True)
    assert abs(val - berezin_step(rad ** 2, 0.5, -1.0, 1.0)) <= max(1e-9, 2 * bar)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("rad", [0.0, 1.0, 2.5])
def test_fock_gaussian_berezin(s, rad):
    T = toeplitz(F, gaussian_decay(s), 80)
    ref = 1 / (1 + s) * math.exp(-s * rad ** 2 / (1 + s))
    assert berezin(T, rad * 1j) == pytest.approx(ref, abs=1e-9)


def test_identity_correlation_matches_closed_form():
    rng = np.random.default_rng(3)
    z = 0.7 * np.sqrt(rng.random(30)) * np.exp(2j * np.pi * rng.random(30))
    w = 0.7 * np.sqrt(rng.random(30)) * np.exp(2j * np.pi * rng.random(30))
    I = identity(B, 60)
    np.testing.assert_allclose(correlation(I, z, w), correlation_closed_form(B, z, w), atol=1e-8)
    assert np.all(correlation(zero(B, 60), z, w) == 0)


def test_correlation_error_bar_shrinks_inward():
    T = toeplitz(B, radial_step(), 60)
    _, near = correlation(T, 0.3, 0.2, True)
    _, far = correlation(T, 0.97, 0.96, True)
    assert near < 1e-12 < far


# -- algebra -------------------------------------------------------------------

matrices = arrays(np.complex128, (6, 6), elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                                     allow_infinity=False))


@given(matrices, matrices, matrices)
def test_algebra_properties(a, b, c):
    A, Bm, C = (TruncatedOperator(B, 5, m, "m") for m in (a, b, c))
    assert np.array_equal(adjoint(adjoint(A)).matrix, A.matrix)
    assert np.array_equal(compose(identity(B, 5), A).matrix, A.matrix)
    np.testing.assert_allclose(compose(compose(A, Bm), C).matrix, compose(A, compose(Bm, C)).matrix,
                               atol=1e-9 * (1 + np.abs(a).max() * np.abs(b).max() * np.abs(c).max()))
    np.testing.assert_allclose(adjoint(compose(A, Bm)).matrix, compose(adjoint(Bm), adjoint(A)).matrix, atol=1e-9)
    np.testing.assert_allclose(combine(2, A, -1j, Bm).matrix, 2 * a - 1j * b)


@given(matrices, disk, disk)
def test_adjoint_correlation(a, z, w):
    A = TruncatedOperator(B, 5, a)
    lhs = correlation(adjoint(A), z, w)
    assert lhs == pytest.approx(np.conj(correlation(A, w, z)), abs=1e-9)


@pytest.mark.parametrize("u", [one_minus_r2(), radial_step(), expression("cos(theta)*r", 1.0)],
                         ids=["1-r2", "step", "expr"])
def test_real_symbol_gives_hermitian_matrix(u):
    T = toeplitz(B, u, 20)
    np.testing.assert_allclose(T.matrix, T.matrix.conj().T, atol=1e-12)


def test_compose_diagonal_entry():
    T = toeplitz(B, r2(), 20)
    assert compose(T, T).matrix[0, 0] == pytest.approx(0.25, abs=1e-13)


def test_frame_mismatch():
    with pytest.raises(DomainError):
        compose(identity(B, 4), identity(B, 5))
    with pytest.raises(DomainError):
        combine(1, identity(B, 4), 1, identity(F, 4))
    with pytest.raises(DomainError):
        TruncatedOperator(B, 4, np.eye(4))


def test_adjoint_provenance_roundtrip():
    T = toeplitz(B, r2(), 3)
    assert adjoint(T).provenance == "adjoint(toeplitz(|z|^2))"
    assert adjoint(adjoint(T)).provenance == T.provenance


def test_singular_value_examples():
    assert np.all(singular_values(identity(B, 8)) == 1)
    k = np.arange(31)
    T = TruncatedOperator(B, 30, np.diag((k + 1) / (k + 2)))
    assert singular_values(T)[0] == pytest.approx(31 / 32)
    assert operator_norm(zero(B, 5)) == 0


def test_operator_json_roundtrip():
    T = toeplitz(B, angular(1), 6)
    back = TruncatedOperator.from_json(T.to_json())
    assert np.array_equal(back.matrix, T.matrix)
    assert back.provenance == T.provenance and back.space == T.space


def test_sub_degree():
    assert sub_degree(60) == 40
    assert sub_degree(200) == 133
