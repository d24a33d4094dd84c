import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_modes.errors import DimensionMismatchError, TruncationError
from lindblad_modes.operators import (
    FockOperator,
    StateSpec,
    annihilation,
    build_state,
    coherent_density,
    creation,
    fidelity,
    fock_density,
    fock_ket_bra,
    frobenius_norm,
    identity,
    min_eigenvalue_hermitian,
    partial_trace,
    purity,
    random_density,
    read_matrix_file,
    tensor,
    thermal_density,
    top_level_leakage,
    trace_distance,
    two_level_thermal,
    write_matrix_file,
)


def test_fock_ket_bra_vacuum_projector():
    assert np.allclose(fock_ket_bra(0, 0, 4).entries, np.diag([1, 0, 0, 0]))


def test_fock_ket_bra_unit_entry():
    op = fock_ket_bra(1, 0, 4)
    expected = np.zeros((4, 4))
    expected[1, 0] = 1
    assert np.allclose(op.entries, expected)


def test_fock_ket_bra_out_of_range():
    with pytest.raises(IndexError):
        fock_ket_bra(4, 0, 4)


def test_coherent_vacuum():
    assert coherent_density(0, 5).allclose(fock_ket_bra(0, 0, 5))


def test_coherent_vacuum_population():
    rho = coherent_density(1, 30)
    assert rho.entries[0, 0].real == pytest.approx(math.exp(-1), abs=1e-12)
    series = 1 / sum(1 / math.factorial(k) for k in range(30))
    assert rho.entries[0, 0].real == pytest.approx(series, abs=1e-14)


def test_coherent_strict_tail():
    with pytest.raises(TruncationError):
        coherent_density(1, 2, strict=True)


def test_coherent_lenient_records_tail():
    with pytest.warns(UserWarning, match="tail weight"):
        rho = coherent_density(1, 2)
    assert rho.meta["tail_weight"] > 0.1
    assert rho.trace() == pytest.approx(1)


def test_thermal_zero_is_vacuum():
    assert thermal_density(0, 5).allclose(fock_ket_bra(0, 0, 5))


def test_thermal_geometric_populations():
    pops = np.real(np.diag(thermal_density(1, 60).entries))
    assert np.allclose(pops[:5], [1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32], atol=1e-15)


def test_thermal_ground_population():
    rho = thermal_density(0.2, 40)
    assert rho.entries[0, 0].real == pytest.approx(1 / 1.2, abs=1e-12)


def test_tensor_vacua():
    out = tensor(fock_ket_bra(0, 0, 2), fock_ket_bra(0, 0, 2))
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    assert out.dims == (2, 2)
    assert np.allclose(out.entries, expected)


def test_tensor_identity():
    assert np.allclose(tensor(identity((2,)), identity((2,))).entries, np.eye(4))


def test_tensor_index_convention():
    out = tensor(fock_ket_bra(1, 0, 2), fock_ket_bra(0, 1, 2))
    expected = np.zeros((4, 4))
    expected[2, 1] = 1
    assert np.allclose(out.entries, expected)


def test_trace_values():
    assert fock_ket_bra(0, 0, 3).trace() == 1
    assert fock_ket_bra(1, 0, 3).trace() == 0


def test_trace_distance_self_zero(rng):
    rho = random_density(rng, (5,))
    assert trace_distance(rho, rho) == pytest.approx(0, abs=1e-14)


def test_trace_distance_orthogonal_states():
    assert trace_distance(fock_density(0, 3), fock_density(1, 3)) == pytest.approx(1)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        fock_density(0, 3) + fock_density(0, 4)
    with pytest.raises(DimensionMismatchError):
        trace_distance(fock_density(0, 3), fock_density(0, 4))


def test_ladder_matrices():
    a, ad = annihilation(5), creation(5)
    comm = a @ ad - ad @ a
    assert np.allclose(np.diag(comm)[:-1], 1)
    assert np.allclose(ad, a.conj().T)


def test_adjoint_and_norm():
    op = fock_ket_bra(2, 1, 4) * (1 + 2j)
    assert op.dag().allclose(fock_ket_bra(1, 2, 4) * (1 - 2j))
    assert frobenius_norm(op) == pytest.approx(math.sqrt(5))


def test_min_eigenvalue_requires_hermitian():
    with pytest.raises(ValueError):
        min_eigenvalue_hermitian(fock_ket_bra(1, 0, 3))
    assert min_eigenvalue_hermitian(fock_density(1, 3)) == pytest.approx(0, abs=1e-15)


def test_partial_trace_and_purity():
    rho = tensor(thermal_density(0.3, 6), fock_density(1, 4))
    assert partial_trace(rho, 0).allclose(thermal_density(0.3, 6))
    assert partial_trace(rho, 1).allclose(fock_density(1, 4))
    assert purity(fock_density(2, 4)) == pytest.approx(1)


def test_fidelity_pure_overlap():
    assert fidelity(fock_density(1, 3), fock_density(1, 3)) == pytest.approx(1)
    assert fidelity(fock_density(0, 3), fock_density(1, 3)) == pytest.approx(0, abs=1e-12)


def test_two_level_thermal_state():
    rho = two_level_thermal(0.25)
    assert np.allclose(rho.entries, np.diag([0.75, 0.25]))


def test_leakage_of_top_levels():
    assert top_level_leakage(fock_density(4, 5)) == pytest.approx(1)
    assert top_level_leakage(fock_density(0, 5)) == 0


def test_build_state_product():
    spec = StateSpec("product", parts=(StateSpec("fock", n=1), StateSpec("coherent", alpha=0.3)))
    rho = build_state(spec, (4, 12))
    assert rho.dims == (4, 12)
    assert rho.trace() == pytest.approx(1)
    assert partial_trace(rho, 0).allclose(fock_density(1, 4))


def test_statespec_rejects_bad_input():
    with pytest.raises(ValueError):
        StateSpec("squeezed")
    with pytest.raises(ValueError):
        StateSpec("fock", n=-1)


def test_matrix_file_round_trip(tmp_path, rng):
    rho = random_density(rng, (3, 2))
    path = tmp_path / "rho.txt"
    write_matrix_file(path, rho)
    back = read_matrix_file(path)
    assert back.dims == (3, 2)
    assert back.allclose(rho, atol=0)


def test_matrix_file_rejects_non_state(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("dims 2\n0 0 2.0 0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_matrix_file(path)


def test_operator_shape_checked():
    with pytest.raises(DimensionMismatchError):
        FockOperator((3,), np.eye(4))


@settings(max_examples=30, deadline=None)
@given(re=st.floats(-1.5, 1.5), im=st.floats(-1.5, 1.5))
def test_coherent_is_pure_unit_trace(re, im):
    rho = coherent_density(complex(re, im), 30)
    assert rho.trace() == pytest.approx(1, abs=1e-12)
    assert purity(rho) == pytest.approx(1, abs=1e-12)
    assert rho.is_hermitian()


@settings(max_examples=30, deadline=None)
@given(nbar=st.floats(0, 0.5), dim=st.integers(20, 60))
def test_thermal_is_normalised_and_diagonal(nbar, dim):
    rho = thermal_density(nbar, dim)
    assert rho.trace() == pytest.approx(1, abs=1e-12)
    assert np.allclose(rho.entries, np.diag(np.diag(rho.entries)))
