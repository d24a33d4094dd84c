"""Invariant suites shared by the ``verify`` subcommand and the test-suite.

Each check yields a :class:`CheckRecord` with the measured residual, the
tolerance it is held to and a pass flag.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .eigenbasis import (
    coefficients_by_superoperators,
    eigenstate_explicit,
    eigenstate_ladder,
    eigenvalue,
    expansion_coefficients,
    interior,
    ladder_shifts,
    reconstruct,
    steady_state,
)
from .evolution import (
    TimeGrid,
    closed_form,
    evolve_eigenmode,
    evolve_oracle,
)
from .models import (
    SINGLE_THERMAL,
    SINGLE_ZERO_T,
    TAGS,
    TWO_LEVEL,
    TWO_MODE_THERMAL,
    TWO_MODE_ZERO_T,
    ModelSpec,
    ladder_set,
    liouvillian,
    two_mode_coefficients,
)
from .operators import (
    FockOperator,
    StateSpec,
    build_state,
    min_eigenvalue_hermitian,
    random_density,
    trace_distance,
)
from .superalgebra import apply, commutator, interior_residual


@dataclass
class CheckRecord:
    suite: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)

    def to_dict(self):
        out = asdict(self)
        out["residual"] = float(self.residual)
        out["passed"] = self.passed
        return out


def suite_models(deep=True):
    """Small models, one per tag.

    ``deep`` truncations leave thermal tails negligible (needed for traces and
    dual pairings); interior-only algebra checks use the shallow ones.
    """
    coupled = dict(omega_a=1.0, omega_b=1.3, gamma_a=0.4, gamma_b=0.2, g=0.3, gamma_c=0.15)
    return {
        SINGLE_ZERO_T: ModelSpec(SINGLE_ZERO_T, omega=1.0, gamma=0.7, dim=12),
        SINGLE_THERMAL: ModelSpec(SINGLE_THERMAL, omega=1.1, gamma=0.6, nbar=0.3,
                                  dim=40 if deep else 12),
        TWO_LEVEL: ModelSpec(TWO_LEVEL, omega=1.3, gamma=0.8, nbar=0.6),
        TWO_MODE_ZERO_T: ModelSpec(TWO_MODE_ZERO_T, dim=7 if deep else 6, **coupled),
        TWO_MODE_THERMAL: ModelSpec(TWO_MODE_THERMAL, nbar=0.05 if deep else 0.4,
                                    dim=14 if deep else 6, **coupled),
    }


def _margin(model, extra=0):
    return 0 if model.tag == TWO_LEVEL else 2 + extra


# --------------------------------------------------------------------------
# algebra


def algebra_suite():
    records = []
    for tag, model in suite_models(deep=False).items():
        margin = _margin(model)
        K = liouvillian(model)
        sets = [("", ladder_set(model))]
        if tag == TWO_LEVEL:
            sets.append(("primed ", ladder_set(model, primed=True)))
        for label, lad in sets:
            for rel, res in lad.algebra_residuals(margin).items():
                records.append(CheckRecord("algebra", f"{tag} {label}{rel}", res, 1e-10))
            res = interior_residual(K - lad.factorized(), margin)
            records.append(CheckRecord("algebra", f"{tag} {label}factorisation", res, 1e-9))
            for name, up, down, lam in zip(lad.names, lad.raising, lad.lowering, lad.shifts):
                res = interior_residual(commutator(K, up) - lam * up, margin)
                records.append(CheckRecord("algebra", f"{tag} {label}[K,{name}+]={name}+ shift", res, 1e-10))
                res = interior_residual(commutator(K, down) + lam * down, margin)
                records.append(CheckRecord("algebra", f"{tag} {label}[K,{name}-]=-{name}- shift", res, 1e-10))
    return records


# --------------------------------------------------------------------------
# eigenstructure


def _small_indices(model):
    if model.tag == TWO_LEVEL:
        return [(p, q) for p in (0, 1) for q in (0, 1)]
    if model.is_two_mode:
        rng = range(2)
        return [(m, n, p, q) for m in rng for n in rng for p in rng for q in rng]
    return [(m, n) for m in range(4) for n in range(4)]


def _step(idx, i, delta):
    out = list(idx)
    out[i] += delta
    return tuple(out)


def _ladder_factor(model, idx, i, raising):
    """Expected prefactor of a ladder step on ``R_idx``: 1 for the two-level set, roots otherwise."""
    if model.tag == TWO_LEVEL:
        return 1.0
    return math.sqrt(idx[i] + 1) if raising else math.sqrt(idx[i])


def eigen_suite(seed=42):
    records = []
    rng = np.random.default_rng(seed)
    for tag, model in suite_models().items():
        K = liouvillian(model)
        lad = ladder_set(model)
        indices = _small_indices(model)
        shifts = lad.shifts
        states = {idx: eigenstate_explicit(model, idx) for idx in indices}
        worst = {"eigen": 0.0, "trace": 0.0, "ladder-eq": 0.0, "raise": 0.0, "lower": 0.0,
                 "biorth": 0.0, "eigval": 0.0}
        for idx, R in states.items():
            lam = eigenvalue(model, idx, shifts)
            worst["eigval"] = max(worst["eigval"], max(lam.real, 0.0))
            diff = apply(K, R) - lam * R
            worst["eigen"] = max(worst["eigen"], float(np.linalg.norm(interior(diff, model))))
            target = 1.0 if not any(idx) else 0.0
            worst["trace"] = max(worst["trace"], abs(R.trace() - target))
            margin = _margin(model, sum(idx))
            ladder = eigenstate_ladder(model, idx, ladders=lad)
            worst["ladder-eq"] = max(worst["ladder-eq"], float(np.max(np.abs(
                interior(R - ladder, model, margin)), initial=0.0)))
            for i, (up, down) in enumerate(zip(lad.raising, lad.lowering)):
                hi = _step(idx, i, 1)
                if hi in states:
                    want = _ladder_factor(model, idx, i, True) * states[hi]
                    got = apply(up, R)
                    worst["raise"] = max(worst["raise"], float(np.max(np.abs(
                        interior(got - want, model, margin + 1)), initial=0.0)))
                if idx[i] > 0:
                    lo = _step(idx, i, -1)
                    want = _ladder_factor(model, idx, i, False) * states[lo]
                    got = apply(down, R)
                    worst["lower"] = max(worst["lower"], float(np.max(np.abs(
                        interior(got - want, model, margin)), initial=0.0)))
            duals = coefficients_by_superoperators(model, R, indices)
            delta = np.array([1.0 if j == idx else 0.0 for j in indices])
            worst["biorth"] = max(worst["biorth"], float(np.max(np.abs(np.array(duals) - delta))))
        tol = {"eigen": 1e-9, "trace": 1e-12, "ladder-eq": 1e-9, "raise": 1e-10, "lower": 1e-10,
               "biorth": 1e-10, "eigval": 0.0}
        labels = {"eigen": "eigen-relation", "trace": "trace property",
                  "ladder-eq": "explicit equals ladder", "raise": "raising relation",
                  "lower": "lowering relation", "biorth": "biorthogonality",
                  "eigval": "Re(lambda) <= 0"}
        for key, val in worst.items():
            records.append(CheckRecord("eigen", f"{tag} {labels[key]}", val, tol[key]))

        ss = steady_state(model)
        res = max(float(np.linalg.norm(interior(apply(down, ss), model))) for down in lad.lowering)
        records.append(CheckRecord("eigen", f"{tag} steady state annihilated by lowering", res, 1e-10))
        res = float(np.linalg.norm(interior(apply(K, ss), model)))
        records.append(CheckRecord("eigen", f"{tag} steady state K rho = 0", res, 1e-10))

        if not model.is_two_mode and tag != TWO_LEVEL:
            res = max(float(np.max(np.abs(states[(m, n)].dag().entries - states[(n, m)].entries)))
                      for m, n in indices)
            records.append(CheckRecord("eigen", f"{tag} adjoint pairing R^(m,n)", res, 1e-14))
            rho = random_density(rng, model.dims, 3)
            table = expansion_coefficients(model, rho, 6)
            res = max(abs(table.coefficients[(m, n)] - np.conj(table.coefficients[(n, m)]))
                      for m, n in table.indices)
            records.append(CheckRecord("eigen", f"{tag} coefficient pairing C^(m,n)", res, 1e-12))

    model = ModelSpec(SINGLE_ZERO_T, omega=1.0, gamma=0.7, dim=8)
    rho = random_density(rng, model.dims, 4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = expansion_coefficients(model, rho, 12)
    res = trace_distance(reconstruct(table), rho)
    records.append(CheckRecord("eigen", "single-zero-T completeness (Fock <= 3, dim 8)", res, 1e-8))
    return records


# --------------------------------------------------------------------------
# closed forms


def worked_examples():
    """(model, initial state, grid) for each closed-form example."""
    coherent_pair = StateSpec("product", parts=(StateSpec("coherent", alpha=0.7),
                                                StateSpec("coherent", alpha=0.5)))
    coupled = dict(omega_a=1.0, omega_b=1.3, gamma_a=0.4, gamma_b=0.2, g=0.3)
    return [
        ("fock decay", ModelSpec(SINGLE_ZERO_T, omega=1.0, gamma=1.0, dim=12),
         StateSpec("fock", n=3), TimeGrid(0.0, 3.0, 12)),
        ("coherent decay", ModelSpec(SINGLE_ZERO_T, omega=1.0, gamma=0.5, dim=30),
         StateSpec("coherent", alpha=1.2), TimeGrid(0.0, 6.0, 12)),
        ("thermal relaxation", ModelSpec(SINGLE_THERMAL, omega=1.0, gamma=1.0, nbar=0.2, dim=40),
         StateSpec("thermal", nbar0=0.5), TimeGrid(0.0, 3.0, 12)),
        ("two-level relaxation", ModelSpec(TWO_LEVEL, omega=1.0, gamma=1.0, nbar=0.7),
         StateSpec("two-level-thermal", nbar0=0.9), TimeGrid(0.0, 3.0, 12)),
        ("coupled coherent pair", ModelSpec(TWO_MODE_ZERO_T, dim=10, **coupled),
         coherent_pair, TimeGrid(0.0, 7.5, 12)),
    ]


def closed_form_suite():
    records = []
    for name, model, initial, grid in worked_examples():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rho0 = build_state(initial, model.dims)
        result = evolve_eigenmode(model, rho0, grid, initial=initial)
        res = max(trace_distance(s, closed_form(model, initial, t))
                  for t, s in zip(grid.times, result.states))
        records.append(CheckRecord("closed-form", f"{model.tag} {name}", res, 1e-8))
    return records


# --------------------------------------------------------------------------
# eigenmode against the direct-integration oracle


def random_model(rng, tag):
    """Random valid parameters; truncation deep enough that states stay well inside."""
    omega, gamma = rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.5)
    if tag == SINGLE_ZERO_T:
        return ModelSpec(tag, omega=omega, gamma=gamma, dim=8), 4
    if tag == SINGLE_THERMAL:
        return ModelSpec(tag, omega=omega, gamma=gamma, nbar=rng.uniform(0.02, 0.2), dim=32), 3
    if tag == TWO_LEVEL:
        return ModelSpec(tag, omega=omega, gamma=gamma, nbar=rng.uniform(0.0, 2.0)), 2
    ga, gb = rng.uniform(0.2, 1.0, 2)
    gc = rng.choice([0.0, 0.5, 1.0]) * math.sqrt(ga * gb) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    coupled = dict(omega_a=rng.uniform(0.5, 2.0), omega_b=rng.uniform(0.5, 2.0),
                   gamma_a=ga, gamma_b=gb, gamma_c=gc,
                   g=rng.uniform(0.0, 0.5) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
    if tag == TWO_MODE_ZERO_T:
        return ModelSpec(tag, dim=6, **coupled), 2
    return ModelSpec(tag, dim=11, nbar=rng.uniform(0.01, 0.06), **coupled), 2


def random_instance(rng, tag):
    model, support = random_model(rng, tag)
    rho0 = random_density(rng, model.dims, support)
    rate = (model.gamma_a + model.gamma_b) / 2 if model.is_two_mode else model.gamma
    return model, rho0, TimeGrid(0.0, 3.0 / rate, 9)


def cross_check(model, rho0, grid):
    """Residuals of one random instance: oracle distance, semigroup, trace/Hermiticity/positivity."""
    eig = evolve_eigenmode(model, rho0, grid)
    orc = evolve_oracle(model, rho0, grid)
    out = {"oracle": max(trace_distance(a, b) for a, b in zip(eig.states, orc.states))}
    mid = len(grid.times) // 2
    t1, t2 = grid.times[mid], grid.times[-1]
    later = evolve_eigenmode(model, eig.states[mid], TimeGrid.single(t2 - t1))
    out["semigroup"] = trace_distance(later.states[0], eig.states[-1])
    out["trace"] = max(abs(s.trace() - 1) for s in eig.states)
    out["hermitian"] = max(float(np.max(np.abs(s.entries - s.entries.conj().T))) for s in eig.states)
    out["positivity"] = max(-min_eigenvalue_hermitian(s) for s in eig.states)
    if model.is_two_mode:
        other = evolve_eigenmode(model, rho0, grid, branch=-1)
        out["branch"] = max(trace_distance(a, b) for a, b in zip(eig.states, other.states))
    return out


CROSS_TOLERANCES = {"oracle": 1e-7, "semigroup": 1e-7, "trace": 1e-8, "hermitian": 1e-8,
                    "positivity": 1e-6, "branch": 1e-9}


def oracle_suite(seed=42, count=25):
    records = []
    rng = np.random.default_rng(seed)
    for k in range(count):
        tag = TAGS[k % len(TAGS)]
        model, rho0, grid = random_instance(rng, tag)
        for key, val in cross_check(model, rho0, grid).items():
            records.append(CheckRecord("oracle", f"#{k} {tag} {key}", val, CROSS_TOLERANCES[key]))
    return records


SUITES = {
    "algebra": lambda seed: algebra_suite(),
    "eigen": eigen_suite,
    "closed-form": lambda seed: closed_form_suite(),
    "oracle": oracle_suite,
}


def run_suite(name, seed=42):
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](seed)]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[name](seed)
