"""Time evolution: eigenmode expansion, closed forms and a direct-integration oracle."""

from __future__ import annotations

import cmath
import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .eigenbasis import (
    coherent_coefficients,
    convergence_diagnostic,
    expansion_coefficients,
    populate_parallel,
)
from .errors import (
    DimensionCapError,
    DivergenceError,
    TruncationError,
    UnsupportedInitialStateError,
)
from .models import (
    SINGLE_THERMAL,
    SINGLE_ZERO_T,
    TWO_LEVEL,
    TWO_MODE_ZERO_T,
    liouvillian,
    two_mode_coefficients,
)
from .operators import (
    FockOperator,
    build_state,
    coherent_density,
    embed,
    fidelity,
    min_eigenvalue_hermitian,
    number,
    purity,
    tensor,
    thermal_density,
    top_level_leakage,
    two_level_thermal,
)
from .superalgebra import to_matrix, unvec, vec

#: leakage onto the top two Fock levels above this triggers a warning (error in strict mode)
LEAKAGE_TOL = 1e-6
#: largest total Hilbert-space dimension the oracle accepts
ORACLE_DIM_CAP = 400
#: dense exponential below this many vectorised entries, stepping above
EXPM_LIMIT = 2_500
STEPPER_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    t0: float = 0.0
    t1: float = 1.0
    steps: int = 10

    def __post_init__(self):
        if self.t1 < self.t0:
            raise ValueError(f"grid end {self.t1} precedes start {self.t0}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("grid steps must be a positive integer")

    @property
    def times(self):
        if self.t1 == self.t0:
            return np.array([float(self.t0)])
        return np.linspace(self.t0, self.t1, int(self.steps) + 1)

    @classmethod
    def single(cls, t):
        return cls(t, t, 1)


@dataclass
class EvolutionResult:
    grid: TimeGrid
    states: list
    observables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.grid.times

    def state_at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        return self.states[k]


def _leakage_check(model, states, strict):
    if model.tag == TWO_LEVEL:
        return 0.0
    leak = max(top_level_leakage(s) for s in states)
    if leak > LEAKAGE_TOL:
        msg = (f"truncation insufficient: weight {leak:.3e} on the top two Fock levels "
               f"at dimension {model.dim}")
        if strict:
            raise TruncationError(msg)
        warnings.warn(msg, stacklevel=3)
    return leak


def coherent_amplitudes_of(model, initial):
    """Coherent amplitudes of ``initial`` when exact coefficients apply, else ``None``."""
    if initial is None or model.tag not in (SINGLE_ZERO_T, TWO_MODE_ZERO_T):
        return None
    if model.tag == SINGLE_ZERO_T and initial.kind == "coherent":
        return (complex(initial.alpha),)
    if model.tag == TWO_MODE_ZERO_T and initial.kind == "product" and all(
            p.kind == "coherent" for p in initial.parts):
        return tuple(complex(p.alpha) for p in initial.parts)
    return None


def eigen_table(model, rho0, M=None, branch=1, initial=None):
    """Coefficient table, exact for coherent inputs in zero-temperature bases."""
    amps = coherent_amplitudes_of(model, initial)
    if amps is not None:
        return coherent_coefficients(model, amps, rho0, M, branch)
    return expansion_coefficients(model, rho0, M, branch)


def evolve_eigenmode(model, rho0, grid, M=None, strict=False, branch=1, table=None,
                     initial=None):
    """``rho(t) = sum C R exp(lambda t)`` on every grid point.

    Coefficients and eigenstates are built once; each time point costs one
    weighted sum.  A divergent expansion raises :class:`DivergenceError`.
    Passing the ``initial`` description lets coherent inputs use exact
    coefficients instead of those of the truncated matrix.
    """
    if table is None:
        table = eigen_table(model, rho0, M, branch, initial)
    report = convergence_diagnostic(table, rho0)
    if report.status == "DIVERGENT":
        raise DivergenceError(
            f"expansion diverges (partial sums reach {report.max_partial_sum:.3e}, "
            f"||rho0||={report.rho_norm:.3e})", report)
    if report.status == "NOT_CONVERGED":
        warnings.warn(f"expansion not converged: {report.summary()}", stacklevel=2)
    table.engine()
    times = grid.times
    states = populate_parallel(
        lambda t: FockOperator(model.dims, table.weighted_sum(t)), list(times))
    leak = _leakage_check(model, states, strict)
    return EvolutionResult(grid, states, meta={
        "method": "eigenmode", "max_index": table.max_index, "diagnostic": report.status,
        "leakage": leak, "terms": len(table.nonzero)})


# --------------------------------------------------------------------------
# closed forms of the worked examples


def product_amplitudes(model, alpha, beta, t):
    """``(alpha(t), beta(t))`` for coupled damped modes via explicit F, G, H, I."""
    c = two_mode_coefficients(model)
    S, U, V, D, R = c.S, c.U, c.V, c.Delta, c.R
    phase = cmath.exp(-1j * R * t)
    cos, sin = cmath.cos(D * t), cmath.sin(D * t)
    F = (cos - 1j * S / D * sin) * phase
    G = -1j * U / D * sin * phase
    H = -1j * V / D * sin * phase
    I = (cos + 1j * S / D * sin) * phase
    return alpha * F + beta * G, alpha * H + beta * I


def closed_form(model, initial, t):
    """Exact ``rho(t)`` for the supported (model, initial state) pairs."""
    t = float(t)
    tag, kind = model.tag, initial.kind
    if tag == SINGLE_ZERO_T and kind == "fock":
        N, dim = int(initial.n), model.dim
        if N >= dim:
            raise UnsupportedInitialStateError(f"fock {N} does not fit dimension {dim}")
        p = math.exp(-model.gamma * t)
        pops = np.zeros(dim)
        for k in range(N + 1):
            pops[k] = math.comb(N, k) * p**k * (1 - p) ** (N - k)
        return FockOperator(model.dims, np.diag(pops))
    if tag == SINGLE_ZERO_T and kind == "coherent":
        alpha_t = complex(initial.alpha) * cmath.exp((-1j * model.omega - model.gamma / 2) * t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return coherent_density(alpha_t, model.dim)
    if tag == SINGLE_THERMAL and kind == "thermal":
        n_t = model.nbar + (initial.nbar0 - model.nbar) * math.exp(-model.gamma * t)
        return thermal_density(n_t, model.dim)
    if tag == TWO_LEVEL and kind == "two-level-thermal":
        N = model.fermionic_occupation
        N_t = N + (initial.nbar0 - N) * math.exp(-model.Gamma * t)
        return two_level_thermal(N_t)
    if tag == TWO_MODE_ZERO_T and kind == "product" and all(
            p.kind == "coherent" for p in initial.parts):
        a_t, b_t = product_amplitudes(
            model, complex(initial.parts[0].alpha), complex(initial.parts[1].alpha), t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return tensor(coherent_density(a_t, model.dim), coherent_density(b_t, model.dim))
    raise UnsupportedInitialStateError(
        f"no closed form for initial state {kind!r} in model {tag!r}")


def closed_form_supported(model, initial):
    pairs = {(SINGLE_ZERO_T, "fock"), (SINGLE_ZERO_T, "coherent"),
             (SINGLE_THERMAL, "thermal"), (TWO_LEVEL, "two-level-thermal")}
    if (model.tag, initial.kind) in pairs:
        return True
    return (model.tag == TWO_MODE_ZERO_T and initial.kind == "product"
            and all(p.kind == "coherent" for p in initial.parts))


def evolve_closed_form(model, initial, grid):
    states = [closed_form(model, initial, t) for t in grid.times]
    return EvolutionResult(grid, states, meta={"method": "closed-form"})


# --------------------------------------------------------------------------
# direct-integration oracle


def _rk4_step(K, v, h):
    k1 = K @ v
    k2 = K @ (v + 0.5 * h * k1)
    k3 = K @ (v + 0.5 * h * k2)
    k4 = K @ (v + h * k3)
    return v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def stepper_step_size(K, v, span, tol=STEPPER_TOL):
    """Fixed RK4 step whose step-doubling local error estimate stays below ``tol * h``.

    Bounding the error per unit time (rather than per step) keeps the
    accumulated error near ``tol * T`` however many steps the span needs.
    """
    norm_k = scipy.sparse.linalg.norm(K, 1) if scipy.sparse.issparse(K) else np.linalg.norm(K, 1)
    h = min(span if span > 0 else 1.0, 1.0 / max(norm_k, 1e-300))
    scale = max(np.linalg.norm(v), 1e-300)
    for _ in range(60):
        full = _rk4_step(K, v, h)
        half = _rk4_step(K, _rk4_step(K, v, h / 2), h / 2)
        if np.linalg.norm(full - half) / 15 <= tol * scale * min(h, 1.0):
            return h
        h /= 2
    return h


def _pad_state(rho0, dims):
    d_old, d_new = rho0.dims, tuple(dims)
    big = np.zeros(d_new + d_new, dtype=complex)
    small = rho0.entries.reshape(d_old + d_old)
    big[tuple(slice(0, d) for d in d_old + d_old)] = small
    return FockOperator(d_new, big.reshape(math.prod(d_new), -1))


def _project_state(rho, dims):
    d_old, dims = rho.dims, tuple(dims)
    block = rho.entries.reshape(d_old + d_old)[tuple(slice(0, d) for d in dims + dims)]
    return FockOperator(dims, block.reshape(math.prod(dims), -1))


def evolve_oracle(model, rho0, grid, kind="auto", step=None, cap=ORACLE_DIM_CAP,
                  pad=0, initial=None):
    """Evolve ``vec(rho)`` under the vectorised Liouvillian, independent of the eigenbasis.

    ``kind="exp"`` propagates with dense ``expm(K dt)``; ``kind="stepper"``
    uses fixed-step RK4 on the sparse matrix.  ``auto`` picks ``exp`` when
    the vectorised size is at most ``EXPM_LIMIT``.

    ``pad > 0`` integrates on a space with ``pad`` extra Fock levels per mode
    (the initial state rebuilt there from ``initial`` when given, otherwise
    zero-padded) and projects back, removing the truncation of the generator.
    """
    if pad and model.tag != TWO_LEVEL:
        big = model.with_dim(model.dim + int(pad))
        start = build_state(initial, big.dims) if initial is not None else _pad_state(rho0, big.dims)
        res = evolve_oracle(big, start, grid, kind, step, cap)
        res.states = [_project_state(s, model.dims) for s in res.states]
        res.meta["pad"] = int(pad)
        return res
    side = rho0.side
    if side > cap:
        raise DimensionCapError(f"total dimension {side} exceeds oracle cap {cap}")
    if kind == "auto":
        kind = "exp" if side * side <= EXPM_LIMIT else "stepper"
    if kind not in ("exp", "stepper"):
        raise ValueError(f"unknown oracle kind {kind!r}")
    K = liouvillian(model)
    times = grid.times
    v = vec(rho0.entries).astype(complex)
    out = []
    meta = {"method": "oracle", "oracle": kind}
    if kind == "exp":
        Kd = to_matrix(K)
        if times[0] != 0:
            v = scipy.linalg.expm(Kd * times[0]) @ v
        out.append(v)
        if len(times) > 1:
            # uniform grid: one propagator serves every interval
            P = scipy.linalg.expm(Kd * (times[1] - times[0]))
            for _ in times[1:]:
                v = P @ v
                out.append(v)
    else:
        Ks = to_matrix(K, sparse=True)
        span = times[1] - times[0] if len(times) > 1 else times[0]
        h = step if step else stepper_step_size(Ks, v, span if span > 0 else 1.0)
        meta["step"] = h

        def advance(v, dt):
            if dt <= 0:
                return v
            n = max(1, math.ceil(dt / h - 1e-9))
            for _ in range(n):
                v = _rk4_step(Ks, v, dt / n)
            return v

        v = advance(v, times[0])
        out.append(v)
        for a, b in zip(times[:-1], times[1:]):
            v = advance(v, b - a)
            out.append(v)
    states = [FockOperator(model.dims, unvec(x, side)) for x in out]
    return EvolutionResult(grid, states, meta=meta)


def expm_at(model, rho0, t):
    """Single-point reference: ``unvec(expm(K t) vec(rho0))``."""
    Kd = to_matrix(liouvillian(model))
    x = scipy.linalg.expm(Kd * t) @ vec(rho0.entries)
    return FockOperator(model.dims, unvec(x, rho0.side))


# --------------------------------------------------------------------------
# observables and export

OBSERVABLES = ("trace", "purity", "occupation", "populations", "min_eigenvalue", "fidelity")


def _occupation_operators(dims):
    if dims == (2,):
        return {"n_e": np.diag([0.0, 1.0]).astype(complex)}
    if len(dims) == 1:
        return {"n": number(dims[0])}
    return {"n_a": embed(number(dims[0]), 0, dims),
            "n_b": embed(number(dims[1]), 1, dims)}


def observables(result, which=("trace", "purity", "occupation"), reference=None):
    """Per-time observables as ``name -> array``; also stored on the result."""
    table = {}
    dims = result.states[0].dims
    for name in which:
        if name not in OBSERVABLES:
            raise ValueError(f"observable {name!r} undefined; choose from {OBSERVABLES}")
        if name == "trace":
            table["trace"] = np.array([s.trace() for s in result.states], dtype=complex)
        elif name == "purity":
            table["purity"] = np.array([purity(s) for s in result.states])
        elif name == "occupation":
            for key, op in _occupation_operators(dims).items():
                table[key] = np.array([np.trace(op @ s.entries).real for s in result.states])
        elif name == "populations":
            diag = np.array([np.real(np.diag(s.entries)) for s in result.states])
            for k in range(diag.shape[1]):
                table[f"pop_{k}"] = diag[:, k]
        elif name == "min_eigenvalue":
            table["min_eigenvalue"] = np.array(
                [min_eigenvalue_hermitian(s) for s in result.states])
        elif name == "fidelity":
            if reference is None:
                raise ValueError("fidelity needs a reference state")
            table["fidelity"] = np.array([fidelity(s, reference) for s in result.states])
    result.observables.update(table)
    return table


def _columns(table):
    cols = []
    for name, values in table.items():
        values = np.asarray(values)
        if np.iscomplexobj(values):
            cols.append((f"{name}_re", values.real))
            cols.append((f"{name}_im", values.imag))
        else:
            cols.append((name, values))
    return cols


def to_csv(times, table):
    """CSV text ``t, obs...`` with complex columns split; repr floats, '.' decimal."""
    cols = _columns(table)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [c[0] for c in cols])
    for k, t in enumerate(times):
        writer.writerow([repr(float(t))] + [repr(float(c[1][k])) for c in cols])
    return buf.getvalue()


def state_dump_lines(result, threshold=0.0):
    """One block per time: lines ``t i j re im``."""
    lines = []
    for t, s in zip(result.times, result.states):
        for (i, j), z in np.ndenumerate(s.entries):
            z = complex(z)
            if abs(z) > threshold or threshold == 0.0:
                lines.append(f"{float(t)!r} {i} {j} {z.real!r} {z.imag!r}")
    return lines
