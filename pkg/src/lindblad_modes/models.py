"""The five quadratic Lindblad models, their Liouvillians and ladder sets.

Tags:

* ``single-zero-T``      damped oscillator, zero-temperature bath
* ``single-thermal``     damped oscillator, thermal bath with occupation ``nbar``
* ``two-level-thermal``  two-level system, thermal bath
* ``two-mode-zero-T``    two coupled oscillators, zero temperature
* ``two-mode-thermal``   two coupled oscillators, one thermal bath

hbar = 1; frequencies and rates share inverse-time units.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DegenerateSpectrumError, InvalidModelError
from .operators import annihilation, embed, sigma_minus, sigma_plus, sigma_z
from .superalgebra import LadderSet, Superoperator

SINGLE_ZERO_T = "single-zero-T"
SINGLE_THERMAL = "single-thermal"
TWO_LEVEL = "two-level-thermal"
TWO_MODE_ZERO_T = "two-mode-zero-T"
TWO_MODE_THERMAL = "two-mode-thermal"
TAGS = (SINGLE_ZERO_T, SINGLE_THERMAL, TWO_LEVEL, TWO_MODE_ZERO_T, TWO_MODE_THERMAL)

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    tag: str
    omega: float = 1.0
    gamma: float = 1.0
    nbar: float = 0.0
    omega_a: float = 1.0
    omega_b: float = 1.0
    gamma_a: float = 1.0
    gamma_b: float = 1.0
    g: complex = 0j
    gamma_c: complex = 0j
    dim: int | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise InvalidModelError(f"unknown model tag {self.tag!r}; expected one of {TAGS}")
        if self.nbar < 0:
            raise InvalidModelError("nbar must be non-negative")
        if self.tag == TWO_LEVEL:
            object.__setattr__(self, "dim", 2)
        elif self.dim is None or self.dim < 1:
            raise InvalidModelError(f"{self.tag} needs a positive per-mode dimension")
        if self.is_two_mode:
            if self.gamma_a <= 0 or self.gamma_b <= 0:
                raise InvalidModelError("gamma_a and gamma_b must be positive")
            bound = math.sqrt(self.gamma_a * self.gamma_b)
            if abs(self.gamma_c) > bound * (1 + 1e-12):
                raise InvalidModelError(
                    f"|gamma_c|={abs(self.gamma_c):.6g} exceeds sqrt(gamma_a gamma_b)={bound:.6g}")
            object.__setattr__(self, "g", complex(self.g))
            object.__setattr__(self, "gamma_c", complex(self.gamma_c))
        elif self.gamma <= 0:
            raise InvalidModelError("gamma must be positive")

    @property
    def is_two_mode(self):
        return self.tag in (TWO_MODE_ZERO_T, TWO_MODE_THERMAL)

    @property
    def is_thermal(self):
        return self.tag in (SINGLE_THERMAL, TWO_LEVEL, TWO_MODE_THERMAL)

    @property
    def dims(self):
        if self.tag == TWO_LEVEL:
            return (2,)
        return (self.dim, self.dim) if self.is_two_mode else (self.dim,)

    @property
    def reservoir(self):
        """``common`` (|gamma_c| saturates the bound), ``separate`` (gamma_c = 0) or ``partial``."""
        if not self.is_two_mode:
            return None
        if self.gamma_c == 0:
            return "separate"
        if math.isclose(abs(self.gamma_c), math.sqrt(self.gamma_a * self.gamma_b), rel_tol=1e-9):
            return "common"
        return "partial"

    @property
    def fermionic_occupation(self):
        """``N = nbar / (2 nbar + 1)``, the Fermi-Dirac occupation at the bath temperature."""
        return self.nbar / (2 * self.nbar + 1)

    @property
    def Gamma(self):
        """Two-level relaxation rate ``gamma (2 nbar + 1) = gamma coth(beta omega / 2)``."""
        return self.gamma * (2 * self.nbar + 1)

    def with_dim(self, dim):
        return replace(self, dim=dim)

    def to_dict(self):
        out = asdict(self)
        for key in ("g", "gamma_c"):
            out[key] = complex(out[key])
        return out


def nbar_from_temperature(omega, beta):
    return 1.0 / math.expm1(beta * omega)


# --------------------------------------------------------------------------
# Liouvillians


def dissipator(rate, A, B, dims):
    """``rate/2 (2 A..B - BA. - .BA)``."""
    BA = B @ A
    return Superoperator(dims, [
        (rate, A, B),
        (-rate / 2, BA, np.eye(A.shape[0])),
        (-rate / 2, np.eye(A.shape[0]), BA),
    ])


def hamiltonian_part(H, dims):
    """``-i (H. - .H)``."""
    eye = np.eye(H.shape[0])
    return Superoperator(dims, [(-1j, H, eye), (1j, eye, H)])


def mode_operators(model):
    """Annihilation matrices on the full space: ``(a,)`` or ``(a, b)``."""
    if model.tag == TWO_LEVEL:
        return (sigma_minus(),)
    a = annihilation(model.dim)
    if model.is_two_mode:
        return embed(a, 0, model.dims), embed(a, 1, model.dims)
    return (a,)


def hamiltonian(model):
    if model.tag == TWO_LEVEL:
        return model.omega * sigma_z() / 2
    if model.is_two_mode:
        a, b = mode_operators(model)
        ad, bd = a.conj().T, b.conj().T
        return (model.omega_a * ad @ a + model.omega_b * bd @ b
                + model.g * ad @ b + np.conj(model.g) * a @ bd)
    (a,) = mode_operators(model)
    return model.omega * a.conj().T @ a


def liouvillian(model):
    """Total generator ``K = -i(H. - .H) + L`` on the truncated space."""
    dims = model.dims
    K = hamiltonian_part(hamiltonian(model), dims)
    n = model.nbar
    if model.tag == TWO_LEVEL:
        sm, spl = sigma_minus(), sigma_plus()
        N, G = model.fermionic_occupation, model.Gamma
        K = K + dissipator((1 - N) * G, sm, spl, dims) + dissipator(N * G, spl, sm, dims)
        return K
    if model.is_two_mode:
        a, b = mode_operators(model)
        ad, bd = a.conj().T, b.conj().T
        gc = model.gamma_c
        parts = [
            ((n + 1) * model.gamma_a, a, ad), ((n + 1) * model.gamma_b, b, bd),
            ((n + 1) * gc, b, ad), ((n + 1) * np.conj(gc), a, bd),
        ]
        if model.tag == TWO_MODE_THERMAL:
            parts += [
                (n * model.gamma_a, ad, a), (n * model.gamma_b, bd, b),
                (n * gc, ad, b), (n * np.conj(gc), bd, a),
            ]
        for rate, A, B in parts:
            if rate != 0:
                K = K + dissipator(rate, A, B, dims)
        return K
    (a,) = mode_operators(model)
    ad = a.conj().T
    K = K + dissipator((n + 1) * model.gamma if model.tag == SINGLE_THERMAL else model.gamma,
                       a, ad, dims)
    if model.tag == SINGLE_THERMAL and n > 0:
        K = K + dissipator(n * model.gamma, ad, a, dims)
    return K


# --------------------------------------------------------------------------
# two-mode normal-mode coefficients


@dataclass(frozen=True)
class TwoModeCoefficients:
    U: complex
    V: complex
    S: complex
    Delta: complex
    R: complex
    lam_plus: complex
    lam_minus: complex
    r_plus: complex
    r_minus: complex
    s_plus: complex
    s_minus: complex
    u_plus: complex
    u_minus: complex
    v_plus: complex
    v_minus: complex

    @property
    def right(self):
        """``[[r+, r-], [s+, s-]]``."""
        return np.array([[self.r_plus, self.r_minus], [self.s_plus, self.s_minus]])

    @property
    def left(self):
        """``[[u+, v+], [u-, v-]]``."""
        return np.array([[self.u_plus, self.v_plus], [self.u_minus, self.v_minus]])

    def propagator(self, t):
        """``[[F, G], [H, I]]`` mapping ``(alpha, beta)`` at 0 to time ``t``."""
        t = float(t)
        phase = np.diag([cmath.exp(self.lam_plus * t), cmath.exp(self.lam_minus * t)])
        return self.right @ phase @ self.left


def _normal_vectors(S, U, V, Delta, sign):
    """Right/left eigenvector pair for the ``sign`` branch, scaled so ``u r + v s = 1``.

    The closed-form scaling ``1/sqrt(2i Delta (S +- Delta))`` is singular when
    ``S +- Delta`` vanishes (uncoupled modes); there the equivalent vectors
    ``(-U, S -+ Delta)`` / ``(-V, S -+ Delta)`` are used instead.
    """
    x1 = S + sign * Delta
    right, left = (x1, V), (x1, U)
    overlap = right[0] * left[0] + right[1] * left[1]
    alt_right, alt_left = (-U, S - sign * Delta), (-V, S - sign * Delta)
    alt_overlap = alt_right[0] * alt_left[0] + alt_right[1] * alt_left[1]
    if abs(overlap) < 1e-8 * abs(alt_overlap):
        right, left, overlap = alt_right, alt_left, alt_overlap
    norm = cmath.sqrt(1j * sign * overlap)
    r, s = 1j * right[0] / norm, 1j * right[1] / norm
    u, v = sign * left[0] / norm, sign * left[1] / norm
    return r, s, u, v


def two_mode_coefficients(model, branch=1):
    """Normal-mode parameters of the coupled-mode Liouvillian.

    ``branch=-1`` selects the other square-root branch of ``Delta``; it swaps
    the ``+``/``-`` labels but describes the same dynamics.
    """
    if not model.is_two_mode:
        raise InvalidModelError("two_mode_coefficients needs a two-mode model")
    U = model.g - 0.5j * model.gamma_c
    V = np.conj(model.g) - 0.5j * np.conj(model.gamma_c)
    S = (model.omega_a - model.omega_b) / 2 - 0.25j * (model.gamma_a - model.gamma_b)
    R = (model.omega_a + model.omega_b) / 2 - 0.25j * (model.gamma_a + model.gamma_b)
    Delta = complex(np.sqrt(complex(S * S + U * V)))
    if Delta.real == 0 and Delta.imag < 0:
        Delta = -Delta
    Delta *= branch
    scale = max(abs(S), abs(U), abs(V), 1.0)
    if abs(Delta) < DEGENERACY_RTOL * scale:
        raise DegenerateSpectrumError(
            f"Delta = {Delta:.3e} vanishes: exceptional point, normal modes are not diagonalisable")
    rp, sp_, up, vp = _normal_vectors(S, U, V, Delta, +1)
    rm, sm, um, vm = _normal_vectors(S, U, V, Delta, -1)
    return TwoModeCoefficients(
        U=complex(U), V=complex(V), S=complex(S), Delta=Delta, R=complex(R),
        lam_plus=-1j * R - 1j * Delta, lam_minus=-1j * R + 1j * Delta,
        r_plus=rp, r_minus=rm, s_plus=sp_, s_minus=sm,
        u_plus=up, u_minus=um, v_plus=vp, v_minus=vm,
    )


# --------------------------------------------------------------------------
# ladder sets


def single_mode_ladders(a, nbar, dims):
    """``(M+, M-, N+, N-)`` for one mode; ``nbar = 0`` gives the zero-temperature set."""
    ad = a.conj().T
    eye = np.eye(a.shape[0])
    m_up = Superoperator(dims, [(1.0, ad, eye), (-1.0, eye, ad)])
    n_up = Superoperator(dims, [(1.0, eye, a), (-1.0, a, eye)])
    if nbar == 0:
        m_down = Superoperator(dims, [(1.0, a, eye)])
        n_down = Superoperator(dims, [(1.0, eye, ad)])
    else:
        m_down = Superoperator(dims, [(-nbar, eye, a), (nbar + 1, a, eye)])
        n_down = Superoperator(dims, [(-nbar, ad, eye), (nbar + 1, eye, ad)])
    return m_up, m_down, n_up, n_down


def two_level_ladders(N, dims=(2,), primed=False):
    """``(P+, P-, Q+, Q-)`` for the two-level system; ``primed`` gives the alternative set."""
    sm, spl, sz = sigma_minus(), sigma_plus(), sigma_z()
    eye = np.eye(2)
    if primed:
        p_up = Superoperator(dims, [(1.0, eye, spl), (-1.0, spl, sz)])
        p_down = Superoperator(dims, [(N, eye, sm), (-(1 - N), sm, sz)])
        q_up = Superoperator(dims, [(1.0, sm, eye), (-1.0, sz, sm)])
        q_down = Superoperator(dims, [(N, spl, eye), (-(1 - N), sz, spl)])
    else:
        p_up = Superoperator(dims, [(1.0, spl, eye), (1.0, sz, spl)])
        p_down = Superoperator(dims, [(1 - N, sm, eye), (N, sz, sm)])
        q_up = Superoperator(dims, [(1.0, eye, sm), (1.0, sm, sz)])
        q_down = Superoperator(dims, [(1 - N, eye, spl), (N, spl, sz)])
    return p_up, p_down, q_up, q_down


def ladder_set(model, branch=1, primed=False):
    """Ladder superoperators and eigenvalue shifts that factorise the Liouvillian."""
    dims = model.dims
    if model.tag == TWO_LEVEL:
        p_up, p_down, q_up, q_down = two_level_ladders(model.fermionic_occupation, dims, primed)
        w, G = model.omega, model.Gamma
        return LadderSet((p_up, q_up), (p_down, q_down),
                         (-1j * w - G / 2, 1j * w - G / 2), "fermionic", ("P", "Q"))
    nbar = model.nbar if model.is_thermal else 0.0
    if not model.is_two_mode:
        (a,) = mode_operators(model)
        m_up, m_down, n_up, n_down = single_mode_ladders(a, nbar, dims)
        w, g = model.omega, model.gamma
        return LadderSet((m_up, n_up), (m_down, n_down),
                         (-1j * w - g / 2, 1j * w - g / 2), "bosonic", ("M", "N"))
    c = two_mode_coefficients(model, branch)
    a, b = mode_operators(model)
    ma_up, ma_down, na_up, na_down = single_mode_ladders(a, nbar, dims)
    mb_up, mb_down, nb_up, nb_down = single_mode_ladders(b, nbar, dims)
    cj = np.conj
    raising = (
        c.r_plus * ma_up + c.s_plus * mb_up,
        c.r_minus * ma_up + c.s_minus * mb_up,
        cj(c.r_plus) * na_up + cj(c.s_plus) * nb_up,
        cj(c.r_minus) * na_up + cj(c.s_minus) * nb_up,
    )
    lowering = (
        c.u_plus * ma_down + c.v_plus * mb_down,
        c.u_minus * ma_down + c.v_minus * mb_down,
        cj(c.u_plus) * na_down + cj(c.v_plus) * nb_down,
        cj(c.u_minus) * na_down + cj(c.v_minus) * nb_down,
    )
    shifts = (c.lam_plus, c.lam_minus, np.conj(c.lam_plus), np.conj(c.lam_minus))
    return LadderSet(raising, lowering, tuple(complex(s) for s in shifts), "bosonic",
                     ("M", "N", "P", "Q"))
