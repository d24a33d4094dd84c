import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_modes.errors import (
    DimensionCapError,
    DivergenceError,
    TruncationError,
    UnsupportedInitialStateError,
)
from lindblad_modes.evolution import (
    TimeGrid,
    closed_form,
    closed_form_supported,
    evolve_closed_form,
    evolve_eigenmode,
    evolve_oracle,
    expm_at,
    observables,
    product_amplitudes,
    state_dump_lines,
    to_csv,
)
from lindblad_modes.models import ModelSpec
from lindblad_modes.operators import (
    StateSpec,
    build_state,
    fock_density,
    random_density,
    thermal_density,
    trace_distance,
)

ZERO_T = ModelSpec("single-zero-T", omega=1.0, gamma=1.0, dim=8)
PAIR = ModelSpec("two-mode-zero-T", omega_a=1.0, omega_b=1.3, gamma_a=0.4, gamma_b=0.2,
                 g=0.3, dim=6)


def quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kw)


def test_grid_points():
    assert np.allclose(TimeGrid(0, 1, 4).times, [0, 0.25, 0.5, 0.75, 1])
    assert list(TimeGrid.single(0.3).times) == [0.3]
    with pytest.raises(ValueError):
        TimeGrid(1, 0, 3)
    with pytest.raises(ValueError):
        TimeGrid(0, 1, 0)


def test_time_zero_reconstructs(rng):
    for model in (ZERO_T, ModelSpec("two-level-thermal", nbar=0.2), PAIR):
        rho = random_density(rng, model.dims, support=3)
        res = evolve_eigenmode(model, rho, TimeGrid.single(0.0))
        assert trace_distance(res.states[0], rho) <= 1e-10


def test_decay_to_vacuum(rng):
    rho = random_density(rng, (8,), support=4)
    res = evolve_eigenmode(ZERO_T, rho, TimeGrid.single(60.0))
    assert trace_distance(res.states[0], fock_density(0, 8)) <= 1e-12


def test_fock_one_half_life():
    res = evolve_eigenmode(ZERO_T, fock_density(1, 8), TimeGrid.single(math.log(2)))
    assert np.allclose(res.states[0].entries, np.diag([0.5, 0.5, 0, 0, 0, 0, 0, 0]), atol=1e-14)
    orc = evolve_oracle(ZERO_T, fock_density(1, 8), TimeGrid.single(math.log(2)))
    assert trace_distance(orc.states[0], res.states[0]) <= 1e-10


def test_product_amplitudes_identity_at_zero():
    assert product_amplitudes(PAIR, 0.7, 0.5, 0.0) == pytest.approx((0.7, 0.5))


def test_product_amplitudes_match_propagator():
    from lindblad_modes.models import two_mode_coefficients

    P = two_mode_coefficients(PAIR).propagator(1.7)
    a, b = product_amplitudes(PAIR, 0.7, 0.5j, 1.7)
    assert np.allclose([a, b], P @ np.array([0.7, 0.5j]), atol=1e-14)


def test_thermal_closed_form_value():
    model = ModelSpec("single-thermal", gamma=1.0, nbar=0.2, dim=40)
    rho = closed_form(model, StateSpec("thermal", nbar0=0.5), 1.0)
    n = np.trace(np.diag(np.arange(40)) @ rho.entries).real
    assert n == pytest.approx(0.2 + 0.3 * math.exp(-1), abs=1e-10)
    assert n == pytest.approx(0.31036, abs=1e-5)


def test_closed_form_unsupported():
    with pytest.raises(UnsupportedInitialStateError):
        closed_form(ZERO_T, StateSpec("thermal", nbar0=0.1), 1.0)
    assert not closed_form_supported(ZERO_T, StateSpec("thermal", nbar0=0.1))
    assert closed_form_supported(PAIR, StateSpec("product", parts=(StateSpec("coherent", alpha=1),
                                                                   StateSpec("coherent", alpha=0))))


def test_oracle_time_zero_and_steady(rng):
    rho = random_density(rng, (5,))
    model = ZERO_T.with_dim(5)
    assert evolve_oracle(model, rho, TimeGrid.single(0.0)).states[0].allclose(rho, atol=0)
    vac = fock_density(0, 5)
    for kind in ("exp", "stepper"):
        res = evolve_oracle(model, vac, TimeGrid(0, 3, 6), kind=kind)
        assert all(s.allclose(vac, atol=1e-14) for s in res.states)


def test_oracle_kinds_agree(rng):
    model = ModelSpec("single-thermal", gamma=0.7, nbar=0.3, dim=10)
    rho = random_density(rng, (10,), support=3)
    grid = TimeGrid(0, 2, 8)
    a = evolve_oracle(model, rho, grid, kind="exp")
    b = evolve_oracle(model, rho, grid, kind="stepper")
    assert max(trace_distance(x, y) for x, y in zip(a.states, b.states)) <= 1e-9


def test_stepper_step_halving(rng):
    rho = random_density(rng, (8,), support=3)
    grid = TimeGrid(0, 2, 4)
    a = evolve_oracle(ZERO_T, rho, grid, kind="stepper")
    b = evolve_oracle(ZERO_T, rho, grid, kind="stepper", step=a.meta["step"] / 2)
    assert max(trace_distance(x, y) for x, y in zip(a.states, b.states)) <= 1e-9


def test_oracle_point_propagator(rng):
    rho = random_density(rng, (6,), support=3)
    model = ZERO_T.with_dim(6)
    res = evolve_oracle(model, rho, TimeGrid(0, 1.5, 3))
    assert trace_distance(res.states[-1], expm_at(model, rho, 1.5)) <= 1e-12


def test_oracle_dimension_cap():
    model = ModelSpec("two-mode-zero-T", omega_b=1.3, g=0.2, dim=21)
    rho = build_state(StateSpec("product", parts=(StateSpec("fock"), StateSpec("fock"))), model.dims)
    with pytest.raises(DimensionCapError):
        evolve_oracle(model, rho, TimeGrid.single(1.0))


def test_eigenmode_matches_oracle_two_mode(rng):
    rho = random_density(rng, PAIR.dims, support=2)
    grid = TimeGrid(0, 3, 6)
    a = evolve_eigenmode(PAIR, rho, grid)
    b = evolve_oracle(PAIR, rho, grid)
    assert max(trace_distance(x, y) for x, y in zip(a.states, b.states)) <= 1e-9


def test_branch_invariance(rng):
    rho = random_density(rng, PAIR.dims, support=2)
    grid = TimeGrid(0, 2, 4)
    a = evolve_eigenmode(PAIR, rho, grid, branch=1)
    b = evolve_eigenmode(PAIR, rho, grid, branch=-1)
    assert max(trace_distance(x, y) for x, y in zip(a.states, b.states)) <= 1e-10


def test_divergent_expansion_refused():
    model = ModelSpec("single-zero-T", dim=60)
    with pytest.raises(DivergenceError):
        evolve_eigenmode(model, thermal_density(1.5, 60), TimeGrid.single(1.0))


def test_leakage_warns_and_strict_raises():
    model = ModelSpec("single-zero-T", dim=4)
    rho = fock_density(3, 4)
    with pytest.warns(UserWarning, match="truncation insufficient"):
        evolve_eigenmode(model, rho, TimeGrid.single(0.1))
    with pytest.raises(TruncationError):
        evolve_eigenmode(model, rho, TimeGrid.single(0.1), strict=True)


def test_observables_and_csv():
    res = evolve_closed_form(ZERO_T, StateSpec("fock", n=2), TimeGrid(0, 1, 2))
    table = observables(res, ("trace", "purity", "occupation", "populations", "min_eigenvalue",
                              "fidelity"), reference=fock_density(2, 8))
    assert np.allclose(table["trace"], 1)
    assert table["n"][0] == pytest.approx(2)
    assert table["n"][-1] == pytest.approx(2 * math.exp(-1))
    assert table["fidelity"][0] == pytest.approx(1)
    assert table["pop_2"][-1] == pytest.approx(math.exp(-2))
    text = to_csv(res.times, table)
    header = text.splitlines()[0].split(",")
    assert header[:4] == ["t", "trace_re", "trace_im", "purity"]
    assert len(text.splitlines()) == 4
    with pytest.raises(ValueError):
        observables(res, ("fidelity",))
    with pytest.raises(ValueError):
        observables(res, ("entropy",))


def test_two_mode_occupation_names():
    rho = build_state(StateSpec("product", parts=(StateSpec("fock", n=1), StateSpec("fock"))),
                      PAIR.dims)
    res = evolve_eigenmode(PAIR, rho, TimeGrid.single(0.0))
    table = observables(res, ("occupation",))
    assert set(table) == {"n_a", "n_b"}
    assert table["n_a"][0] == pytest.approx(1)


def test_state_dump_lines():
    res = evolve_closed_form(ZERO_T.with_dim(2), StateSpec("fock", n=1), TimeGrid.single(0.0))
    lines = state_dump_lines(res)
    assert lines[0] == "0.0 0 0 0.0 0.0"
    assert "1 1 1.0 0.0" in lines[-1]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(0.0, 4.0), nbar=st.floats(0.0, 0.3))
def test_semigroup_and_trace(seed, t, nbar):
    rng = np.random.default_rng(seed)
    tag = "single-thermal" if nbar > 0 else "single-zero-T"
    model = ModelSpec(tag, omega=1.0, gamma=0.8, nbar=nbar, dim=24)
    rho = random_density(rng, (24,), support=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = evolve_eigenmode(model, rho, TimeGrid.single(t)).states[0]
        half = evolve_eigenmode(model, rho, TimeGrid.single(t / 2)).states[0]
        again = evolve_eigenmode(model, half, TimeGrid.single(t / 2)).states[0]
    assert abs(full.trace() - 1) <= 1e-8
    assert trace_distance(full, again) <= 1e-7
