import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lindblad_modes.errors import DimensionMismatchError
from lindblad_modes.models import ModelSpec, ladder_set, two_level_ladders
from lindblad_modes.operators import annihilation, creation, fock_ket_bra, random_density
from lindblad_modes.superalgebra import (
    Superoperator,
    add,
    anticommutator,
    apply,
    commutator,
    compose,
    interior_residual,
    scale,
    to_matrix,
    unvec,
    vec,
)

DIM = 5
DIMS = (DIM,)


def left(A):
    return Superoperator.left(A, DIMS)


def right(A):
    return Superoperator.right(A, DIMS)


def random_matrix(rng, side=DIM):
    return rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))


def test_left_annihilation_on_fock_one():
    out = apply(left(annihilation(DIM)), fock_ket_bra(1, 1, DIM))
    assert out.allclose(fock_ket_bra(0, 1, DIM))


def test_raising_on_vacuum():
    ad = creation(DIM)
    m_up = left(ad) - right(ad)
    rho = fock_ket_bra(0, 0, DIM)
    out = apply(m_up, rho)
    assert out.allclose(fock_ket_bra(1, 0, DIM))
    dense = unvec(to_matrix(m_up) @ vec(rho.entries), DIM)
    assert np.allclose(dense, out.entries)


def test_identity_superoperator_leaves_state(rng):
    rho = random_density(rng, DIMS)
    assert apply(Superoperator.identity(DIMS), rho).allclose(rho)


def test_compose_left_factors(rng):
    A, B = random_matrix(rng), random_matrix(rng)
    rho = random_density(rng, DIMS)
    out = apply(compose(left(A), left(B)), rho)
    assert np.allclose(out.entries, A @ B @ rho.entries)


def test_compose_right_then_left(rng):
    A, B = random_matrix(rng), random_matrix(rng)
    rho = random_density(rng, DIMS)
    out = apply(compose(right(B), left(A)), rho)
    assert np.allclose(out.entries, A @ rho.entries @ B)


def test_compose_right_factors_reverse(rng):
    A, B = random_matrix(rng), random_matrix(rng)
    rho = random_density(rng, DIMS)
    out = apply(compose(right(A), right(B)), rho)
    assert np.allclose(out.entries, rho.entries @ B @ A)


def test_add_negative_is_zero(rng):
    S = left(random_matrix(rng)) + right(random_matrix(rng))
    Z = add(S, scale(-1, S))
    assert Z.is_zero()
    assert np.allclose(apply(Z, random_density(rng, DIMS)).entries, 0)


def test_left_right_commute(rng):
    A, B = random_matrix(rng), random_matrix(rng)
    assert commutator(left(A), right(B)).is_zero()


def test_left_commutator_is_interior_identity():
    a, ad = annihilation(DIM), creation(DIM)
    residual = interior_residual(commutator(left(a), left(ad)) - Superoperator.identity(DIMS), 1)
    assert residual <= 1e-12


def test_two_level_lowering_squares_to_zero():
    for primed in (False, True):
        _, p_down, _, _ = two_level_ladders(0.2, primed=primed)
        assert np.allclose(to_matrix(anticommutator(p_down, p_down)), 0, atol=1e-14)


def test_to_matrix_identity():
    assert np.allclose(to_matrix(Superoperator.identity(DIMS)), np.eye(DIM * DIM))


def test_to_matrix_left_is_kron(rng):
    A = random_matrix(rng)
    assert np.allclose(to_matrix(left(A)), np.kron(np.eye(DIM), A))


def test_to_matrix_sparse_matches_dense(rng):
    S = left(random_matrix(rng)) + Superoperator.sandwich(random_matrix(rng), random_matrix(rng), DIMS)
    assert np.allclose(to_matrix(S, sparse=True).toarray(), to_matrix(S))


def test_vec_unvec_column_stacking():
    mat = np.arange(6).reshape(2, 3)
    assert list(vec(mat)) == [0, 3, 1, 4, 2, 5]
    square = np.arange(9).reshape(3, 3)
    assert np.array_equal(unvec(vec(square)), square)


def test_simplified_merges_terms(rng):
    A = random_matrix(rng)
    S = left(A) + left(A) + right(A) - right(A)
    assert len(S.simplified().terms) == 1
    rho = random_density(rng, DIMS)
    assert np.allclose(apply(S, rho).entries, 2 * A @ rho.entries)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        Superoperator.identity((3,)) + Superoperator.identity((4,))
    with pytest.raises(DimensionMismatchError):
        apply(Superoperator.identity((3,)), fock_ket_bra(0, 0, 4))


def test_dual_action_is_trace_adjoint(rng):
    S = Superoperator.sandwich(random_matrix(rng), random_matrix(rng), DIMS) + left(random_matrix(rng))
    X, Y = random_matrix(rng), random_matrix(rng)
    lhs = np.trace(Y @ S.apply_matrix(X))
    rhs = np.trace(S.apply_dual(Y) @ X)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_power_matches_repeated_compose(rng):
    S = left(random_matrix(rng)) - right(random_matrix(rng))
    assert np.allclose(to_matrix(S ** 3), np.linalg.matrix_power(to_matrix(S), 3))


@pytest.mark.parametrize("tag,kw", [
    ("single-zero-T", {"dim": 6}),
    ("single-thermal", {"dim": 6, "nbar": 0.3}),
    ("two-level-thermal", {"nbar": 0.4}),
])
def test_ladder_algebra_residuals(tag, kw):
    ladders = ladder_set(ModelSpec(tag, **kw))
    margin = 0 if tag == "two-level-thermal" else 2
    for name, residual in ladders.algebra_residuals(margin).items():
        assert residual <= 1e-10, name


matrices = arrays(np.float64, (3, 3), elements=st.floats(-2, 2))


@settings(max_examples=40, deadline=None)
@given(a=matrices, b=matrices, c=matrices, d=matrices, r=matrices)
def test_to_matrix_is_homomorphism(a, b, c, d, r):
    S1 = Superoperator((3,), [(1.0, a, b), (0.5j, c, np.eye(3))])
    S2 = Superoperator((3,), [(2.0, d, c), (-1.0, np.eye(3), a)])
    assert np.allclose(to_matrix(compose(S1, S2)), to_matrix(S1) @ to_matrix(S2), atol=1e-9)
    assert np.allclose(unvec(to_matrix(S1) @ vec(r), 3), S1.apply_matrix(r.astype(complex)), atol=1e-9)
