"""Liouvillian eigenstates, expansion coefficients and completeness checks.

Eigenstates are indexed by ``(m, n)`` (single mode), ``(p, q)`` with
``p, q in {0, 1}`` (two-level) or ``(m, n, p, q)`` (two modes).  They carry
the normalisation fixed by ``raise R^k = sqrt(k+1) R^(k+1)`` and
``tr R^0 = 1``; coefficients are the traces of normalised lowering products
applied to the initial state, so that ``rho0 = sum C R``.

For two modes the index range is ``m + n <= M`` and ``p + q <= M``: the
Fock support of ``R^{m,n,p,q}`` in each mode is bounded by those sums.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DivergenceError
from .models import (SINGLE_THERMAL, SINGLE_ZERO_T, TWO_LEVEL, TWO_MODE_THERMAL,
                     TWO_MODE_ZERO_T, ladder_set, single_mode_ladders,
                     two_mode_coefficients)
from .operators import (FockOperator, annihilation, embed, tensor, thermal_density,
                        two_level_thermal)
from .superalgebra import apply, operator_interior

#: divergence bound on partial sums, in units of ||rho0||_F
DIVERGENCE_BOUND = 1e3
#: number of trailing shells whose terms must not all be non-decreasing
CONVERGENCE_WINDOW = 8
#: shell terms below this fraction of ||rho0||_F count as converged
CONVERGENCE_FLOOR = 1e-12
#: largest acceptable final-shell term (relative) for infinite thermal-basis series
TAIL_TOLERANCE = 1e-6


def worker_count():
    """Thread cap from ``LINDBLAD_MODES_THREADS`` (0 or unset = automatic)."""
    raw = os.environ.get("LINDBLAD_MODES_THREADS", "0").strip() or "0"
    n = int(raw)
    return n if n > 0 else (os.cpu_count() or 1)


# --------------------------------------------------------------------------
# factorials and polynomials


@lru_cache(maxsize=4096)
def log_factorial(n):
    """``log(n!)``; exact table up to 20, ``lgamma`` above."""
    if n < 0:
        raise ValueError("factorial of a negative number")
    if n <= 20:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1)


def polynomial_P(k, l, m, x):
    """``sum_{j=max(0,l)}^{k} (-1)^(j-l) (j+m)! / ((j-l)! (k-j)!) x^j / j!``."""
    if k < 0 or m < 0:
        raise ValueError("polynomial_P needs k >= 0 and m >= 0")
    total = 0.0
    for j in range(max(0, l), k + 1):
        logc = log_factorial(j + m) - log_factorial(j - l) - log_factorial(k - j) - log_factorial(j)
        total += (-1) ** (j - l) * math.exp(logc) * x**j
    return total


def binomial_mix(k, m, n, x_plus, y_plus, x_minus, y_minus):
    """Coefficient of ``A^k B^(m+n-k)`` in ``(x+ A + y+ B)^m (x- A + y- B)^n``."""
    if not 0 <= k <= m + n:
        raise ValueError(f"k={k} outside [0, {m + n}]")
    total = 0j
    for j in range(max(0, k - n), min(m, k) + 1):
        total += (math.comb(m, j) * math.comb(n, k - j)
                  * x_plus**j * y_plus ** (m - j) * x_minus ** (k - j) * y_minus ** (n - k + j))
    return complex(total)


def mixing_coefficient_D(k, m, n, coeffs):
    """Weight of ``R_a^{k,.} R_b^{m+n-k,.}`` in the two-mode eigenstate ``R^{m,n,.,.}``."""
    pref = math.exp(0.5 * (log_factorial(k) + log_factorial(m + n - k)
                           - log_factorial(m) - log_factorial(n)))
    return pref * binomial_mix(k, m, n, coeffs.r_plus, coeffs.s_plus, coeffs.r_minus, coeffs.s_minus)


# --------------------------------------------------------------------------
# single-mode closed forms


def zero_T_eigenstate(m, n, dim):
    """``sum_k (-1)^k / k! sqrt(m! n! / ((m-k)! (n-k)!)) |m-k><n-k|``.

    Indices at or beyond ``dim`` give the projection onto the truncated space.
    """
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(max(m, n) - dim + 1 if max(m, n) >= dim else 0, min(m, n) + 1):
        logc = 0.5 * (log_factorial(m) + log_factorial(n) - log_factorial(m - k)
                      - log_factorial(n - k)) - log_factorial(k)
        out[m - k, n - k] = (-1) ** k * math.exp(logc)
    return out


def thermal_eigenstate(m, n, nbar, dim):
    """Thermal-bath eigenstate ``R^{m,n}(nbar)`` truncated to ``dim`` (no renormalisation)."""
    if nbar == 0:
        return zero_T_eigenstate(m, n, dim)
    if m < n:
        return thermal_eigenstate(n, m, nbar, dim).conj().T
    x = nbar / (nbar + 1.0)
    shift = m - n
    out = np.zeros((dim, dim), dtype=complex)
    base = -(m + 1) * math.log1p(nbar)
    for k in range(dim - shift):
        pref = 0.5 * (log_factorial(n) + log_factorial(k) - log_factorial(m)
                      - log_factorial(k + shift))
        out[k + shift, k] = math.exp(pref + base) * polynomial_P(k, k - n, m, x)
    return out


def two_level_eigenstate(p, q, N):
    if p not in (0, 1) or q not in (0, 1):
        raise IndexError(f"two-level eigen index ({p}, {q}) outside {{0, 1}}^2")
    # basis order: |g> = 0, |e> = 1
    table = {
        (0, 0): np.diag([1.0 - N, N]),
        (1, 0): np.array([[0, 0], [1, 0]]),
        (0, 1): np.array([[0, 1], [0, 0]]),
        (1, 1): np.diag([-1.0, 1.0]),
    }
    return table[(p, q)].astype(complex)


def _single_mode_eigenstate(model, m, n, dim):
    nbar = model.nbar if model.tag in (SINGLE_THERMAL, TWO_MODE_THERMAL) else 0.0
    return thermal_eigenstate(m, n, nbar, dim)


# --------------------------------------------------------------------------
# indices


@dataclass(frozen=True)
class EigenIndex:
    indices: tuple
    eigenvalue: complex

    @property
    def total(self):
        return sum(self.indices)


def index_shell(model, idx):
    """Shell used by the convergence diagnostic: largest index (or index-pair sum)."""
    if model.is_two_mode:
        m, n, p, q = idx
        return max(m + n, p + q)
    return max(idx)


def _sort_key(idx):
    return (sum(idx), idx)


def enumerate_indices(model, M):
    """All eigen indices up to ``M`` in canonical order (total, then lexicographic)."""
    if model.tag == TWO_LEVEL:
        out = [(p, q) for p in (0, 1) for q in (0, 1)]
    elif model.is_two_mode:
        out = [(m, n, p, q)
               for m in range(M + 1) for n in range(M + 1 - m)
               for p in range(M + 1) for q in range(M + 1 - p)]
    else:
        out = [(m, n) for m in range(M + 1) for n in range(M + 1)]
    return sorted(out, key=_sort_key)


def eigenvalue(model, idx, shifts=None):
    if shifts is None:
        shifts = ladder_shifts(model)
    return complex(sum(i * s for i, s in zip(idx, shifts)))


def ladder_shifts(model):
    if model.tag == TWO_LEVEL:
        G = model.Gamma
        return (-1j * model.omega - G / 2, 1j * model.omega - G / 2)
    if model.is_two_mode:
        c = two_mode_coefficients(model)
        return (c.lam_plus, c.lam_minus, np.conj(c.lam_plus), np.conj(c.lam_minus))
    return (-1j * model.omega - model.gamma / 2, 1j * model.omega - model.gamma / 2)


def default_max_index(model):
    """Zero-temperature bases: ``dim - 1`` (finite, exact expansion of any truncated state).
    Thermal bases: three shells fewer.  Two-mode shells run to ``2 (dim - 1)``."""
    if model.tag == TWO_LEVEL:
        return 1
    top = _index_cap(model)
    if model.tag in (SINGLE_ZERO_T, TWO_MODE_ZERO_T):
        return top
    return max(top - 3, 0)


def _index_cap(model):
    """Largest shell a truncated state can reach: ``dim - 1`` per mode, summed for two modes."""
    return 2 * (model.dim - 1) if model.is_two_mode else model.dim - 1


def _check_max_index(model, M):
    if model.tag == TWO_LEVEL:
        return 1
    if M is None:
        return default_max_index(model)
    if M < 0:
        raise ValueError("max index must be non-negative")
    top = _index_cap(model)
    if M > top:
        warnings.warn(f"max index {M} exceeds the truncation cap {top}; clamped", stacklevel=3)
        return top
    return int(M)


def _validate_index(model, idx):
    idx = tuple(int(i) for i in idx)
    if model.tag == TWO_LEVEL:
        if len(idx) != 2 or any(i not in (0, 1) for i in idx):
            raise IndexError(f"two-level eigen index {idx} outside {{0, 1}}^2")
    elif model.is_two_mode:
        if len(idx) != 4 or min(idx) < 0:
            raise IndexError(f"two-mode eigen index must be 4 non-negative integers, got {idx}")
        m, n, p, q = idx
        if max(m + n, p + q) > _index_cap(model):
            raise IndexError(f"eigen index {idx} exceeds truncation dim {model.dim}")
    else:
        if len(idx) != 2 or min(idx) < 0:
            raise IndexError(f"single-mode eigen index must be 2 non-negative integers, got {idx}")
        if max(idx) > model.dim - 1:
            raise IndexError(f"eigen index {idx} exceeds truncation dim {model.dim}")
    return idx


# --------------------------------------------------------------------------
# expansion engines: sum_idx w_idx R_idx for arbitrary weights


class _StackExpansion:
    """Dense stack of eigenstates (single mode and two-level)."""

    def __init__(self, model, indices):
        self.model = model
        self.indices = list(indices)
        self._stack = None

    def _build(self):
        if self._stack is None:
            model, dim = self.model, self.model.dims[0]
            if model.tag == TWO_LEVEL:
                mats = [two_level_eigenstate(p, q, model.fermionic_occupation)
                        for p, q in self.indices]
            else:
                mats = [_single_mode_eigenstate(model, m, n, dim) for m, n in self.indices]
            self._stack = np.array(mats).reshape(len(mats), dim, dim) if mats else \
                np.zeros((0, dim, dim), dtype=complex)
        return self._stack

    def evaluate(self, weights):
        stack = self._build()
        return np.tensordot(np.asarray(weights, dtype=complex), stack, axes=(0, 0))


class _TwoModeExpansion:
    """Factorised evaluation through products of single-mode eigenstates.

    ``R^{m,n,p,q} = sum_{k,l} D_k^{m,n} conj(D_l^{p,q}) R_a^{k,l} (x) R_b^{m+n-k,p+q-l}``.
    """

    def __init__(self, model, indices, branch=1):
        self.model = model
        self.indices = list(indices)
        self.coeffs = two_mode_coefficients(model, branch)
        self.smax = max((max(m + n, p + q) for m, n, p, q in self.indices), default=0)
        self._singles = None
        self._dmats = {}

    def _single(self):
        if self._singles is None:
            d, s = self.model.dim, self.smax
            mats = np.zeros(((s + 1) ** 2, d, d), dtype=complex)
            for k in range(s + 1):
                for l in range(s + 1):
                    mats[k * (s + 1) + l] = _single_mode_eigenstate(self.model, k, l, d)
            self._singles = mats
        return self._singles

    def dmatrix(self, s):
        """``D^{(s)}[m, k] = D_k^{m, s-m}``."""
        if s not in self._dmats:
            self._dmats[s] = np.array([[mixing_coefficient_D(k, m, s - m, self.coeffs)
                                        for k in range(s + 1)] for m in range(s + 1)])
        return self._dmats[s]

    def product_weights(self, weights):
        s1 = self.smax + 1
        W = np.zeros((s1, s1, s1, s1), dtype=complex)
        for w, (m, n, p, q) in zip(weights, self.indices):
            W[m, n, p, q] += w
        out = np.zeros((s1 * s1, s1 * s1), dtype=complex)
        for s in range(s1):
            ms = np.arange(s + 1)
            for t in range(s1):
                ps = np.arange(t + 1)
                block = W[ms[:, None], s - ms[:, None], ps[None, :], t - ps[None, :]]
                if not block.any():
                    continue
                G = self.dmatrix(s).T @ block @ self.dmatrix(t).conj()
                k, l = np.meshgrid(np.arange(s + 1), np.arange(t + 1), indexing="ij")
                out[k * s1 + l, (s - k) * s1 + (t - l)] += G
        return out

    def evaluate(self, weights):
        wab = self.product_weights(weights)
        singles = self._single()
        rows = np.flatnonzero(np.abs(wab).sum(axis=1))
        d = self.model.dim
        if rows.size == 0:
            return np.zeros((d * d, d * d), dtype=complex)
        T = np.tensordot(wab[rows], singles, axes=(1, 0))
        rho = np.einsum("aik,ajl->ijkl", singles[rows], T)
        return rho.reshape(d * d, d * d)


def _engine(model, indices, branch=1):
    if model.is_two_mode:
        return _TwoModeExpansion(model, indices, branch)
    return _StackExpansion(model, indices)


# --------------------------------------------------------------------------
# eigenstates


def eigenstate_explicit(model, idx, branch=1):
    """Closed-form eigenstate ``R_idx`` on the model's truncated space."""
    idx = _validate_index(model, idx)
    if model.tag == TWO_LEVEL:
        return FockOperator((2,), two_level_eigenstate(*idx, model.fermionic_occupation))
    if model.is_two_mode:
        eng = _TwoModeExpansion(model, [idx], branch)
        return FockOperator(model.dims, eng.evaluate([1.0]))
    return FockOperator(model.dims, _single_mode_eigenstate(model, *idx, model.dim))


def _raw_steady_state(model):
    if model.tag == TWO_LEVEL:
        return two_level_thermal(model.fermionic_occupation)
    d = model.dim
    single = FockOperator((d,), _single_mode_eigenstate(model, 0, 0, d))
    return tensor(single, single) if model.is_two_mode else single


def steady_state(model):
    """Unit-trace state annihilated by every lowering superoperator."""
    if model.tag == TWO_LEVEL:
        return two_level_thermal(model.fermionic_occupation)
    nbar = model.nbar if model.is_thermal else 0.0
    single = thermal_density(nbar, model.dim)
    if model.is_two_mode:
        out = tensor(single, single)
        return FockOperator(out.dims, out.entries, {"tail_weight": 2 * single.meta["tail_weight"]})
    return single


def eigenstate_ladder(model, idx, branch=1, ladders=None):
    """Eigenstate obtained by stepping the steady state up with the raising superoperators."""
    idx = _validate_index(model, idx)
    ladders = ladder_set(model, branch) if ladders is None else ladders
    rho = _raw_steady_state(model)
    for up, k in zip(ladders.raising, idx):
        for _ in range(k):
            rho = apply(up, rho)
        if ladders.statistics == "bosonic":
            rho = rho / math.sqrt(math.factorial(k))
    return rho


# --------------------------------------------------------------------------
# expansion coefficients


def _factorial_norm(idx):
    return math.exp(-0.5 * sum(log_factorial(i) for i in idx))


def _padded_duals(nbar, dim, M):
    """``Y[i, k]`` with ``tr(M-^i N-^k X) = tr(Y[i, k] X)`` for single-mode X on ``dim`` levels.

    Unnormalised (no factorials).  Computed on ``dim + 2M`` levels so the
    retained block is unaffected by the truncation of the ladder matrices.
    """
    big = dim + 2 * M
    _, m_down, _, n_down = single_mode_ladders(annihilation(big), nbar, (big,))
    out = np.zeros((M + 1, M + 1, dim, dim), dtype=complex)
    col = np.eye(big, dtype=complex)
    for k in range(M + 1):
        y = col
        for i in range(M + 1):
            out[i, k] = y[:dim, :dim]
            if i < M:
                y = m_down.apply_dual(y)
        if k < M:
            col = n_down.apply_dual(col)
    return out


def _coefficients_single_zero_T(model, rho, indices, M):
    d = model.dim
    a = annihilation(d)
    powers = [np.eye(d, dtype=complex)]
    for m in range(1, M + 1):
        powers.append(a @ powers[-1] / math.sqrt(m))
    A = np.array(powers)
    B = np.einsum("mij,jk->mik", A, rho.entries)
    C = B.reshape(M + 1, -1) @ A.reshape(M + 1, -1).conj().T
    return [C[m, n] for m, n in indices]


def _coefficients_single_thermal(model, rho, indices, M):
    Y = _padded_duals(model.nbar, model.dim, M)
    # tr(Y X) = sum_ij Y_ij X_ji
    C = np.einsum("mnij,ji->mn", Y, rho.entries)
    return [C[m, n] * _factorial_norm((m, n)) for m, n in indices]


def _chi_powers(model, coeffs, M):
    """``chi_-^n chi_+^m / sqrt(m! n!)`` for ``m + n <= M``, ``chi_pm = u_pm a + v_pm b``."""
    a, b = (embed(annihilation(model.dim), i, model.dims) for i in (0, 1))
    chi_p = coeffs.u_plus * a + coeffs.v_plus * b
    chi_m = coeffs.u_minus * a + coeffs.v_minus * b
    out = {}
    row = np.eye(a.shape[0], dtype=complex)
    for m in range(M + 1):
        cur = row
        for n in range(M + 1 - m):
            out[(m, n)] = cur
            cur = chi_m @ cur / math.sqrt(n + 1)
        row = chi_p @ row / math.sqrt(m + 1)
    return out


def _coefficients_two_mode_zero_T(model, rho, indices, M, branch):
    coeffs = two_mode_coefficients(model, branch)
    powers = _chi_powers(model, coeffs, M)
    keys = list(powers)
    A = np.array([powers[k] for k in keys])
    B = np.einsum("xij,jk->xik", A, rho.entries)
    C = B.reshape(len(keys), -1) @ A.reshape(len(keys), -1).conj().T
    pos = {k: i for i, k in enumerate(keys)}
    return [C[pos[(m, n)], pos[(p, q)]] for m, n, p, q in indices]


def _coefficients_two_mode_thermal(model, rho, indices, M, branch):
    coeffs = two_mode_coefficients(model, branch)
    d = model.dim
    Y = _padded_duals(model.nbar, d, M).reshape((M + 1) ** 2, d, d)
    rho4 = rho.entries.reshape(d, d, d, d)
    # E[A, B] = tr((Y_A (x) Y_B) rho), A = (i_a, k_a), B = (i_b, k_b)
    T = np.einsum("axz,zwxy->ayw", Y, rho4)
    E = np.einsum("byw,ayw->ab", Y, T).reshape(M + 1, M + 1, M + 1, M + 1)
    u = (coeffs.u_plus, coeffs.v_plus, coeffs.u_minus, coeffs.v_minus)
    # mix[s][m, i]: weight of Y_a^i Y_b^(s-i) in the (m, s-m) lowering product
    mix = [np.array([[binomial_mix(i, m, s - m, *u) for i in range(s + 1)]
                     for m in range(s + 1)]) for s in range(M + 1)]
    blocks = {}
    out = []
    for m, n, p, q in indices:
        s, t = m + n, p + q
        if (s, t) not in blocks:
            i = np.arange(s + 1)[:, None]
            k = np.arange(t + 1)[None, :]
            blocks[(s, t)] = mix[s] @ E[i, k, s - i, t - k] @ mix[t].conj().T
        out.append(blocks[(s, t)][m, p] * _factorial_norm((m, n, p, q)))
    return out


def _coefficients_two_level(model, rho, indices):
    lad = ladder_set(model)
    (p_down, q_down) = lad.lowering
    out = []
    for p, q in indices:
        x = rho
        for _ in range(p):
            x = apply(p_down, x)
        for _ in range(q):
            x = apply(q_down, x)
        out.append(x.trace())
    return out


def coefficients_by_superoperators(model, rho0, indices, branch=1):
    """Reference route: trace of normalised lowering products applied to ``rho0``.

    Runs on a padded space so that truncated ladder matrices do not touch the
    state's support.
    """
    indices = [tuple(i) for i in indices]
    if model.tag == TWO_LEVEL:
        return _coefficients_two_level(model, rho0, indices)
    pad = max(sum(i) for i in indices)
    big = model.with_dim(model.dim + pad)
    lad = ladder_set(big, branch)
    d, D = model.dim, big.dim
    if model.is_two_mode:
        mat = np.zeros((D, D, D, D), dtype=complex)
        mat[:d, :d, :d, :d] = rho0.entries.reshape(d, d, d, d)
        mat = mat.reshape(D * D, D * D)
    else:
        mat = np.zeros((D, D), dtype=complex)
        mat[:d, :d] = rho0.entries
    out = []
    for idx in indices:
        x = mat
        for down, k in zip(lad.lowering, idx):
            for _ in range(k):
                x = down.apply_matrix(x)
        out.append(np.trace(x) * _factorial_norm(idx))
    return out


# --------------------------------------------------------------------------
# tables


@dataclass
class ConvergenceReport:
    status: str
    divergent_elements: list
    nonconverged_elements: list
    max_partial_sum: float
    final_term: float
    rho_norm: float
    shells: list
    partial_sums_00: list = field(default_factory=list)
    worst_element: tuple = (0, 0)

    @property
    def converged(self):
        return self.status == "CONVERGED"

    def summary(self):
        text = (f"{self.status} max_partial_sum={self.max_partial_sum:.6e} "
                f"final_term={self.final_term:.6e} shells={len(self.shells)}")
        flagged = self.divergent_elements or self.nonconverged_elements
        if flagged:
            text += f" flagged={len(flagged)} first_flagged={tuple(flagged[0])}"
        return text


@dataclass
class EigenTable:
    """Coefficients and eigen data of one initial state in one model's eigenbasis."""

    model: object
    max_index: int
    indices: list
    eigenvalues: np.ndarray
    coefficients: dict
    rho0: FockOperator
    branch: int = 1
    warnings: list = field(default_factory=list)
    _engine: object = None
    _cache: dict = field(default_factory=dict)

    def entries(self):
        """``EigenIndex`` objects in canonical summation order."""
        return [EigenIndex(i, complex(l)) for i, l in zip(self.indices, self.eigenvalues)]

    @property
    def coefficient_array(self):
        return np.array([self.coefficients[i] for i in self.indices], dtype=complex)

    @property
    def nonzero(self):
        return [i for i in self.indices if self.coefficients[i] != 0]

    def engine(self):
        if self._engine is None:
            active = self.nonzero
            self._engine = _engine(self.model, active, self.branch)
            self._active = active
            lookup = {i: k for k, i in enumerate(self.indices)}
            sel = [lookup[i] for i in active]
            self._active_C = self.coefficient_array[sel]
            self._active_lam = self.eigenvalues[sel]
        return self._engine

    def eigenstate(self, idx):
        idx = tuple(idx)
        if idx not in self._cache:
            self._cache[idx] = eigenstate_explicit(self.model, idx, self.branch)
        return self._cache[idx]

    @property
    def eigenstates(self):
        """Eigenstates with non-zero coefficient, keyed by index tuple."""
        return {i: self.eigenstate(i) for i in self.nonzero}

    def weighted_sum(self, t=0.0, mask=None):
        """``sum C R exp(lambda t)`` over stored indices (optionally a boolean subset)."""
        eng = self.engine()
        w = self._active_C * np.exp(self._active_lam * t)
        if mask is not None:
            w = np.where(mask, w, 0)
        return eng.evaluate(w)

    def to_lines(self):
        """Export lines ``idx... re(lambda) im(lambda) re(C) im(C)``."""
        lines = []
        for idx, lam in zip(self.indices, self.eigenvalues):
            c, lam = complex(self.coefficients[idx]), complex(lam)
            lines.append(" ".join(str(i) for i in idx)
                         + f" {lam.real!r} {lam.imag!r} {c.real!r} {c.imag!r}")
        return lines


def expansion_coefficients(model, rho0, M=None, branch=1):
    """Expansion of ``rho0`` over the model's eigenstates up to max index ``M``."""
    if rho0.dims != model.dims:
        raise ValueError(f"state dims {rho0.dims} do not match model dims {model.dims}")
    notes = []
    if abs(rho0.trace() - 1) > 1e-8:
        msg = f"initial state has trace {rho0.trace():.6g}, not 1"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    M = _check_max_index(model, M)
    indices = enumerate_indices(model, M)
    shifts = ladder_shifts(model) if not model.is_two_mode else None
    if model.is_two_mode:
        c = two_mode_coefficients(model, branch)
        shifts = (c.lam_plus, c.lam_minus, np.conj(c.lam_plus), np.conj(c.lam_minus))
    lam = np.array([eigenvalue(model, i, shifts) for i in indices])
    if model.tag == SINGLE_ZERO_T:
        vals = _coefficients_single_zero_T(model, rho0, indices, M)
    elif model.tag == SINGLE_THERMAL:
        vals = _coefficients_single_thermal(model, rho0, indices, M)
    elif model.tag == TWO_MODE_ZERO_T:
        vals = _coefficients_two_mode_zero_T(model, rho0, indices, M, branch)
    elif model.tag == TWO_MODE_THERMAL:
        vals = _coefficients_two_mode_thermal(model, rho0, indices, M, branch)
    else:
        vals = _coefficients_two_level(model, rho0, indices)
    coeffs = {i: complex(v) for i, v in zip(indices, vals)}
    return EigenTable(model, M, indices, lam, coeffs, rho0, branch, notes)


def coherent_coefficients(model, amplitudes, rho0, M=None, branch=1):
    """Exact coefficients of an (untruncated) coherent input in a zero-temperature basis.

    Single mode: ``C^{m,n} = alpha^m conj(alpha)^n / sqrt(m! n!)``.  Two modes:
    the same with the normal-mode amplitudes ``alpha_pm = u_pm alpha + v_pm beta``.
    ``rho0`` is the truncated state, kept for diagnostics.
    """
    if model.tag not in (SINGLE_ZERO_T, TWO_MODE_ZERO_T):
        raise ValueError("exact coherent coefficients exist only for zero-temperature bases")
    amplitudes = tuple(complex(a) for a in amplitudes)
    M = _check_max_index(model, M)
    indices = enumerate_indices(model, M)
    if model.is_two_mode:
        c = two_mode_coefficients(model, branch)
        alpha, beta = amplitudes
        normal = (c.u_plus * alpha + c.v_plus * beta, c.u_minus * alpha + c.v_minus * beta)
        shifts = (c.lam_plus, c.lam_minus, np.conj(c.lam_plus), np.conj(c.lam_minus))
        powers = normal + tuple(np.conj(normal))
    else:
        (alpha,) = amplitudes
        shifts = None
        powers = (alpha, np.conj(alpha))
    lam = np.array([eigenvalue(model, i, shifts) for i in indices])
    coeffs = {}
    for idx in indices:
        val = complex(np.prod([z**k for z, k in zip(powers, idx)]))
        coeffs[idx] = val * _factorial_norm(idx)
    return EigenTable(model, M, indices, lam, coeffs, rho0, branch, [])


def convergence_diagnostic(table, rho0=None, bound=DIVERGENCE_BOUND,
                           window=CONVERGENCE_WINDOW, floor=CONVERGENCE_FLOOR,
                           tail_tol=TAIL_TOLERANCE):
    """Per-matrix-element partial sums of the expansion over increasing shells.

    DIVERGENT: some partial sum exceeds ``bound * ||rho0||_F``.
    NOT_CONVERGED: for some element the last ``window`` shell terms never
    decrease while staying above ``floor * ||rho0||_F``; or, for the
    infinite thermal-basis series, the last shell term still exceeds
    ``tail_tol * ||rho0||_F`` (max index too small).
    """
    rho0 = table.rho0 if rho0 is None else rho0
    norm = float(np.linalg.norm(rho0.entries)) or 1.0
    table.engine()
    active = table._active
    shell_of = np.array([index_shell(table.model, i) for i in active], dtype=int)
    nshell = int(shell_of.max()) + 1 if active else 1
    side = rho0.side
    partial = np.zeros((side, side), dtype=complex)
    terms = np.zeros((nshell, side, side))
    max_partial = np.zeros((side, side))
    history00 = []
    for s in range(nshell):
        mask = shell_of == s
        term = table.weighted_sum(0.0, mask) if mask.any() else np.zeros((side, side))
        partial = partial + term
        terms[s] = np.abs(term)
        max_partial = np.maximum(max_partial, np.abs(partial))
        history00.append(complex(partial[0, 0]))
    divergent = np.argwhere(max_partial > bound * norm)
    nonconv = np.zeros((side, side), dtype=bool)
    complete = (table.model.tag in (SINGLE_ZERO_T, TWO_MODE_ZERO_T)
                and table.max_index >= _index_cap(table.model))
    if nshell > window and not complete:
        # a zero-temperature table at the cap is a finite, exact sum
        tail = terms[-window:]
        rising = np.all(np.diff(tail, axis=0) >= 0, axis=0)
        nonconv = rising & (tail[-1] > floor * norm)
    if table.model.tag in (SINGLE_THERMAL, TWO_MODE_THERMAL) and table.model.nbar > 0:
        nonconv = nonconv | (terms[-1] > tail_tol * norm)
    nonconv_idx = np.argwhere(nonconv)
    if len(divergent):
        status = "DIVERGENT"
        worst = tuple(int(v) for v in np.unravel_index(np.argmax(max_partial), max_partial.shape))
    elif len(nonconv_idx):
        status = "NOT_CONVERGED"
        worst = tuple(int(v) for v in nonconv_idx[0])
    else:
        status = "CONVERGED"
        worst = tuple(int(v) for v in np.unravel_index(np.argmax(terms[-1]), terms[-1].shape))
    return ConvergenceReport(
        status=status,
        divergent_elements=[tuple(int(v) for v in e) for e in divergent],
        nonconverged_elements=[tuple(int(v) for v in e) for e in nonconv_idx],
        max_partial_sum=float(max_partial.max()),
        final_term=float(terms[-1].max()),
        rho_norm=norm,
        shells=list(range(nshell)),
        partial_sums_00=history00,
        worst_element=worst,
    )


def reconstruct(table, check=True):
    """``sum C R`` in canonical order; raises :class:`DivergenceError` on a divergent expansion."""
    if check:
        report = convergence_diagnostic(table)
        if report.status == "DIVERGENT":
            raise DivergenceError(
                f"expansion diverges (partial sums reach {report.max_partial_sum:.3e})", report)
    return FockOperator(table.model.dims, table.weighted_sum(0.0))


def populate_parallel(fn, items):
    """Map ``fn`` over ``items`` with the configured thread cap; order preserved."""
    workers = worker_count()
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def interior(op, model, margin=2):
    """Interior block of an operator (whole operator for the two-level system)."""
    if model.tag == TWO_LEVEL:
        return op.entries
    return operator_interior(op.entries, model.dims, margin)
