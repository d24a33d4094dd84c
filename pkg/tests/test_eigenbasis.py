import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_modes.eigenbasis import (
    coefficients_by_superoperators,
    coherent_coefficients,
    convergence_diagnostic,
    default_max_index,
    eigenstate_explicit,
    eigenstate_ladder,
    enumerate_indices,
    expansion_coefficients,
    mixing_coefficient_D,
    reconstruct,
    steady_state,
)
from lindblad_modes.errors import DivergenceError
from lindblad_modes.models import ModelSpec, ladder_set, liouvillian, two_mode_coefficients
from lindblad_modes.operators import (
    FockOperator,
    coherent_density,
    fock_density,
    fock_ket_bra,
    random_density,
    tensor,
    thermal_density,
    trace_distance,
)
from lindblad_modes.superalgebra import apply

ZERO_T = ModelSpec("single-zero-T", omega=1.0, gamma=1.0, dim=8)
THERMAL = ModelSpec("single-thermal", omega=1.0, gamma=1.0, nbar=0.2, dim=40)
TWO_LEVEL = ModelSpec("two-level-thermal", omega=1.0, gamma=0.6, nbar=0.3)
PAIR = ModelSpec("two-mode-zero-T", omega_a=1.0, omega_b=1.3, gamma_a=0.4, gamma_b=0.2,
                 g=0.3, gamma_c=0.1j, dim=8)
PAIR_THERMAL = ModelSpec("two-mode-thermal", omega_a=1.0, omega_b=1.3, gamma_a=0.4, gamma_b=0.2,
                         g=0.3, nbar=0.05, dim=12)


def test_zero_T_ground_eigenstate():
    assert eigenstate_explicit(ZERO_T, (0, 0)).allclose(fock_ket_bra(0, 0, 8))


def test_zero_T_diagonal_eigenstate():
    expected = fock_ket_bra(1, 1, 8) - fock_ket_bra(0, 0, 8)
    assert eigenstate_explicit(ZERO_T, (1, 1)).allclose(expected)
    assert eigenstate_ladder(ZERO_T, (1, 1)).allclose(expected)


def test_two_level_diagonal_eigenstate():
    # basis order |g>, |e>
    assert np.allclose(eigenstate_explicit(TWO_LEVEL, (1, 1)).entries, np.diag([-1, 1]))


def test_ladder_eigenstate_raising_vacuum():
    assert eigenstate_ladder(ZERO_T, (1, 0)).allclose(fock_ket_bra(1, 0, 8))


def test_two_mode_dark_state_is_vacuum():
    vac = tensor(fock_density(0, 8), fock_density(0, 8))
    assert eigenstate_ladder(PAIR, (0, 0, 0, 0)).allclose(vac)


def test_steady_states():
    pops = np.real(np.diag(steady_state(ModelSpec("single-thermal", nbar=1.0, dim=60)).entries))
    assert np.allclose(pops[:4], [1 / 2, 1 / 4, 1 / 8, 1 / 16], atol=1e-12)
    N = TWO_LEVEL.fermionic_occupation
    assert np.allclose(steady_state(TWO_LEVEL).entries, np.diag([1 - N, N]))
    th = thermal_density(0.05, 12)
    assert steady_state(PAIR_THERMAL).allclose(tensor(th, th))


def test_mixing_coefficient_examples():
    c = two_mode_coefficients(PAIR)
    assert mixing_coefficient_D(1, 1, 0, c) == pytest.approx(c.r_plus)
    assert mixing_coefficient_D(0, 1, 0, c) == pytest.approx(c.s_plus)
    with pytest.raises((ValueError, IndexError)):
        mixing_coefficient_D(2, 1, 0, c)


@pytest.mark.parametrize("model", [PAIR, PAIR_THERMAL], ids=lambda m: m.tag)
def test_two_mode_explicit_equals_ladder(model):
    for idx in [(m, n, p, q) for m in range(3) for n in range(3) for p in range(3) for q in range(3)
                if m + n <= 2 and p + q <= 2]:
        explicit = eigenstate_explicit(model, idx)
        assert np.max(np.abs(explicit.entries - eigenstate_ladder(model, idx).entries)) <= 1e-9


@pytest.mark.parametrize("model", [ZERO_T, ModelSpec("single-thermal", nbar=0.3, dim=30), TWO_LEVEL,
                                   PAIR, PAIR_THERMAL], ids=lambda m: m.tag)
def test_eigen_relation_and_trace(model):
    K = liouvillian(model)
    table = expansion_coefficients(model, steady_state(model), M=2)
    keep = slice(None) if model.tag == "two-level-thermal" else slice(0, model.dim - 4)
    for idx, lam in zip(table.indices, table.eigenvalues):
        R = eigenstate_explicit(model, idx)
        residual = apply(K, R).entries - lam * R.entries
        if model.is_two_mode:
            d = model.dim
            residual = residual.reshape(d, d, d, d)[keep, keep, keep, keep]
        else:
            residual = residual[keep, keep]
        assert np.max(np.abs(residual)) <= 1e-9, idx
        if not model.is_thermal and any(idx):
            assert abs(R.trace()) <= 1e-12


def test_zero_T_trace_property():
    for m in range(4):
        for n in range(4):
            expected = 1.0 if (m, n) == (0, 0) else 0.0
            assert eigenstate_explicit(ZERO_T, (m, n)).trace() == pytest.approx(expected, abs=1e-12)


def test_fock_two_coefficients():
    table = expansion_coefficients(ZERO_T, fock_density(2, 8))
    for (m, n), c in table.coefficients.items():
        expected = {0: 1, 1: 2, 2: 1}.get(n, 0) if m == n else 0
        assert c == pytest.approx(expected, abs=1e-12)
    assert sorted(table.nonzero) == [(0, 0), (1, 1), (2, 2)]
    assert table.coefficients[(0, 1)] == 0


def test_coherent_coefficients_truncated_and_exact():
    alpha = 0.6 - 0.3j
    model = ModelSpec("single-zero-T", dim=30)
    rho = coherent_density(alpha, 30)
    table = expansion_coefficients(model, rho, M=6)
    exact = coherent_coefficients(model, (alpha,), rho, M=6)
    for m in range(4):
        for n in range(4):
            value = alpha ** m * np.conj(alpha) ** n / math.sqrt(math.factorial(m) * math.factorial(n))
            assert table.coefficients[(m, n)] == pytest.approx(value, abs=1e-12)
            assert exact.coefficients[(m, n)] == pytest.approx(value, abs=1e-15)


def test_thermal_basis_coefficients():
    rho = thermal_density(0.5, 40)
    table = expansion_coefficients(THERMAL, rho, M=8)
    for (m, n), c in table.coefficients.items():
        expected = (0.5 - 0.2) ** n if m == n else 0
        assert c == pytest.approx(expected, abs=1e-10)


def test_two_level_coefficients():
    rho = FockOperator((2,), np.array([[0.7, 0.1 - 0.2j], [0.1 + 0.2j, 0.3]]))
    table = expansion_coefficients(TWO_LEVEL, rho)
    assert reconstruct(table).allclose(rho, atol=1e-14)
    ref = coefficients_by_superoperators(TWO_LEVEL, rho, table.indices)
    assert np.allclose(table.coefficient_array, ref, atol=1e-14)


@pytest.mark.parametrize("model", [ZERO_T, ModelSpec("single-thermal", nbar=0.2, dim=12),
                                   ModelSpec("two-mode-zero-T", omega_b=1.3, gamma_a=0.4, gamma_b=0.2,
                                             g=0.3, dim=4)], ids=lambda m: m.tag)
def test_matrix_route_matches_superoperator_route(model, rng):
    support = 3 if not model.is_two_mode else 2
    rho = random_density(rng, model.dims, support=support)
    table = expansion_coefficients(model, rho, M=3)
    ref = coefficients_by_superoperators(model, rho, table.indices)
    assert np.allclose(table.coefficient_array, ref, atol=1e-10)


def test_reconstruct_fock_one():
    rho = fock_density(1, 8)
    table = expansion_coefficients(ZERO_T, rho, M=1)
    assert reconstruct(table).allclose(rho, atol=1e-14)


def test_reconstruct_random_low_fock(rng):
    model = ModelSpec("single-zero-T", dim=6)
    rho = random_density(rng, (6,), support=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = expansion_coefficients(model, rho, M=12)
    assert trace_distance(reconstruct(table), rho) <= 1e-8


def test_max_index_clamped_with_warning():
    with pytest.warns(UserWarning, match="clamped"):
        table = expansion_coefficients(ZERO_T, fock_density(0, 8), M=50)
    assert table.max_index == 7


def test_default_max_index():
    assert default_max_index(ZERO_T) == 7
    assert default_max_index(THERMAL) == 36
    assert default_max_index(TWO_LEVEL) == 1
    assert default_max_index(PAIR) == 14


def test_index_ordering_and_counts():
    idx = enumerate_indices(ZERO_T, 2)
    assert idx[0] == (0, 0)
    assert [sum(i) for i in idx] == sorted(sum(i) for i in idx)
    assert len(idx) == 9
    assert len(enumerate_indices(PAIR, 1)) == 9


def test_index_out_of_range():
    with pytest.raises(IndexError):
        eigenstate_explicit(ZERO_T, (8, 0))
    with pytest.raises(IndexError):
        eigenstate_explicit(TWO_LEVEL, (2, 0))


def test_thermal_in_zero_T_basis_converges_below_one():
    model = ModelSpec("single-zero-T", dim=60)
    rho = thermal_density(0.5, 60)
    table = expansion_coefficients(model, rho)
    report = convergence_diagnostic(table, rho)
    assert report.status == "CONVERGED"
    assert trace_distance(reconstruct(table), rho) <= 1e-6


def test_thermal_in_zero_T_basis_diverges_above_one():
    model = ModelSpec("single-zero-T", dim=60)
    rho = thermal_density(1.5, 60)
    table = expansion_coefficients(model, rho)
    report = convergence_diagnostic(table, rho)
    assert report.status == "DIVERGENT"
    assert tuple(report.divergent_elements[0]) == (0, 0)
    assert "DIVERGENT" in report.summary()
    with pytest.raises(DivergenceError):
        reconstruct(table)


def test_finite_rank_converges(rng):
    rho = random_density(rng, (8,), support=3)
    report = convergence_diagnostic(expansion_coefficients(ZERO_T, rho), rho)
    assert report.converged


def test_thermal_basis_too_few_shells_not_converged():
    rho = fock_density(1, 40)
    table = expansion_coefficients(ModelSpec("single-thermal", nbar=0.5, dim=40), rho, M=3)
    assert convergence_diagnostic(table, rho).status == "NOT_CONVERGED"


def test_two_mode_reconstruction(rng):
    rho = random_density(rng, PAIR.dims, support=3)
    table = expansion_coefficients(PAIR, rho)
    assert trace_distance(reconstruct(table), rho) <= 1e-10


def test_biorthogonality_via_lowering():
    ladders = ladder_set(ZERO_T)
    for idx in [(0, 0), (1, 0), (0, 2), (2, 1)]:
        R = eigenstate_explicit(ZERO_T, idx)
        coeffs = coefficients_by_superoperators(ZERO_T, R, enumerate_indices(ZERO_T, 3))
        for other, c in zip(enumerate_indices(ZERO_T, 3), coeffs):
            assert c == pytest.approx(1.0 if other == idx else 0.0, abs=1e-10)
    assert len(ladders) == 2


@settings(max_examples=25, deadline=None)
@given(re=st.floats(-1, 1), im=st.floats(-1, 1), m=st.integers(0, 4), n=st.integers(0, 4))
def test_coherent_coefficient_formula(re, im, m, n):
    alpha = complex(re, im)
    model = ModelSpec("single-zero-T", dim=30)
    table = expansion_coefficients(model, coherent_density(alpha, 30), M=4)
    value = alpha ** m * np.conj(alpha) ** n / math.sqrt(math.factorial(m) * math.factorial(n))
    assert table.coefficients[(m, n)] == pytest.approx(value, abs=1e-10)
