"""Truncated operator space: Fock-basis matrices, state constructors and norms.

All operators are dense complex matrices on a product of truncated Fock
spaces (or on the two-level space, which uses the same machinery with
dimension 2 and the ordering ``|g> = 0``, ``|e> = 1``).  Multi-mode
operators use the Kronecker convention with mode ``a`` as the major index.

Units: hbar = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import gammainc

from .errors import DimensionMismatchError, TruncationError, UnsupportedInitialStateError

#: default tolerance for entrywise comparisons on closed-form quantities
ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on a truncated Fock (or two-level) space.

    ``meta`` carries bookkeeping from constructors (e.g. the discarded tail
    weight of a truncated state); it takes no part in arithmetic.
    """

    dims: tuple
    entries: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        entries = np.asarray(self.entries, dtype=complex)
        side = math.prod(dims)
        if entries.shape != (side, side):
            raise DimensionMismatchError(
                f"entries of shape {entries.shape} do not match dims {dims}"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "entries", entries)

    @property
    def side(self):
        return self.entries.shape[0]

    def _check(self, other):
        if not isinstance(other, FockOperator):
            return NotImplemented
        if other.dims != self.dims:
            raise DimensionMismatchError(f"dims {self.dims} != {other.dims}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FockOperator(self.dims, self.entries + other.entries)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FockOperator(self.dims, self.entries - other.entries)

    def __neg__(self):
        return FockOperator(self.dims, -self.entries)

    def __mul__(self, scalar):
        if isinstance(scalar, FockOperator):
            return NotImplemented
        return FockOperator(self.dims, complex(scalar) * self.entries)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FockOperator(self.dims, self.entries / complex(scalar))

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FockOperator(self.dims, self.entries @ other.entries)

    def dag(self):
        return FockOperator(self.dims, self.entries.conj().T)

    def trace(self):
        return complex(np.trace(self.entries))

    def is_hermitian(self, tol=ATOL):
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol)

    def allclose(self, other, atol=ATOL):
        self._check(other)
        return bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))

    def __repr__(self):
        return f"FockOperator(dims={self.dims})"


# --------------------------------------------------------------------------
# basic matrices


@lru_cache(maxsize=None)
def _annihilation(dim):
    mat = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    mat.setflags(write=False)
    return mat


def annihilation(dim):
    """Truncated annihilation matrix ``a`` with ``a|k> = sqrt(k)|k-1>``."""
    return _annihilation(int(dim)).copy()


def creation(dim):
    return annihilation(dim).T.copy()


def number(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def sigma_minus():
    """``|g><e|`` with the ordering ``|g> = 0``, ``|e> = 1``."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_plus():
    return sigma_minus().T.copy()


def sigma_z():
    return np.diag([-1.0, 1.0]).astype(complex)


def embed(op, mode, dims):
    """Lift a single-mode matrix to act on ``mode`` of the product space ``dims``."""
    out = np.ones((1, 1), dtype=complex)
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == mode else np.eye(d))
    return out


def identity(dims):
    dims = tuple(dims) if np.iterable(dims) else (int(dims),)
    return FockOperator(dims, np.eye(math.prod(dims)))


def fock_ket_bra(k, l, dim):
    """Basis element ``|k><l|`` on a single truncated mode."""
    if not (0 <= k < dim and 0 <= l < dim):
        raise IndexError(f"|{k}><{l}| out of range for dimension {dim}")
    mat = np.zeros((dim, dim), dtype=complex)
    mat[k, l] = 1.0
    return FockOperator((dim,), mat)


def fock_density(n, dim):
    if n < 0 or int(n) != n:
        raise ValueError(f"Fock number must be a non-negative integer, got {n}")
    if n >= dim:
        raise TruncationError(f"Fock state |{n}> does not fit in dimension {dim}")
    return fock_ket_bra(int(n), int(n), dim)


def coherent_amplitudes(alpha, dim):
    """Unnormalised Fock amplitudes ``exp(-|a|^2/2) a^k / sqrt(k!)``."""
    alpha = complex(alpha)
    amps = np.empty(dim, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2)
    for k in range(1, dim):
        amps[k] = amps[k - 1] * alpha / math.sqrt(k)
    return amps


def coherent_density(alpha, dim, tol=1e-10, strict=False):
    """Projector on the coherent state ``|alpha>``, truncated and renormalised.

    The discarded Poisson tail is stored in ``meta["tail_weight"]``.  A tail
    above ``tol`` warns, or raises :class:`TruncationError` when ``strict``.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    tail = float(gammainc(dim, abs(alpha) ** 2)) if alpha != 0 else 0.0
    if tail > tol:
        msg = f"coherent state alpha={alpha} loses tail weight {tail:.3e} at dimension {dim}"
        if strict:
            raise TruncationError(msg)
        warnings.warn(msg, stacklevel=2)
    amps = coherent_amplitudes(alpha, dim)
    rho = np.outer(amps, amps.conj())
    rho /= np.trace(rho).real
    return FockOperator((dim,), rho, {"tail_weight": tail})


def thermal_populations(nbar, dim):
    """Bose-Einstein populations ``nbar^k / (nbar+1)^(k+1)``, not renormalised."""
    k = np.arange(dim)
    if nbar == 0:
        return (k == 0).astype(float)
    x = nbar / (nbar + 1.0)
    return x**k / (nbar + 1.0)


def thermal_density(nbar, dim):
    if nbar < 0:
        raise ValueError(f"mean occupation must be non-negative, got {nbar}")
    if dim < 1:
        raise ValueError("dimension must be positive")
    pops = thermal_populations(nbar, dim)
    tail = 1.0 - pops.sum()
    return FockOperator((dim,), np.diag(pops / pops.sum()), {"tail_weight": max(tail, 0.0)})


def two_level_thermal(nbar_f):
    """``N|e><e| + (1-N)|g><g|`` for a fermionic occupation ``N`` in [0, 1]."""
    if not 0.0 <= nbar_f <= 1.0:
        raise ValueError(f"two-level occupation must lie in [0, 1], got {nbar_f}")
    return FockOperator((2,), np.diag([1.0 - nbar_f, nbar_f]))


# --------------------------------------------------------------------------
# algebra and norms


def tensor(A, B):
    """Kronecker product with ``A`` as the major (mode ``a``) factor."""
    return FockOperator(A.dims + B.dims, np.kron(A.entries, B.entries))


def trace(A):
    return A.trace()


def adjoint(A):
    return A.dag()


def frobenius_norm(A):
    return float(np.linalg.norm(A.entries))


def trace_distance(A, B):
    if A.dims != B.dims:
        raise DimensionMismatchError(f"dims {A.dims} != {B.dims}")
    return 0.5 * float(np.sum(np.linalg.svd(A.entries - B.entries, compute_uv=False)))


def min_eigenvalue_hermitian(A, tol=1e-8):
    if not A.is_hermitian(tol):
        raise ValueError("min_eigenvalue_hermitian requires a Hermitian operator")
    herm = 0.5 * (A.entries + A.entries.conj().T)
    return float(np.linalg.eigvalsh(herm)[0])


def partial_trace(A, keep):
    """Reduced operator on mode ``keep`` (0 or 1) of a two-mode operator."""
    if len(A.dims) != 2:
        raise DimensionMismatchError("partial_trace expects a two-mode operator")
    da, db = A.dims
    t = A.entries.reshape(da, db, da, db)
    if keep == 0:
        return FockOperator((da,), np.einsum("ijkj->ik", t))
    return FockOperator((db,), np.einsum("ijil->jl", t))


def purity(A):
    return float(np.real(np.vdot(A.entries.conj().T, A.entries)))


def _psd_sqrt(mat):
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(A, B):
    """Uhlmann fidelity ``(tr sqrt(sqrt(A) B sqrt(A)))^2``."""
    if A.dims != B.dims:
        raise DimensionMismatchError(f"dims {A.dims} != {B.dims}")
    s = _psd_sqrt(A.entries)
    w = np.linalg.eigvalsh(0.5 * (s @ B.entries @ s + (s @ B.entries @ s).conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def top_level_leakage(A, levels=2):
    """Weight of ``A`` on the top ``levels`` Fock levels of any mode."""
    diag = np.real(np.diag(A.entries)).reshape(A.dims)
    mask = np.zeros(A.dims, dtype=bool)
    for axis, d in enumerate(A.dims):
        if d <= levels:
            continue
        index = [slice(None)] * len(A.dims)
        index[axis] = slice(d - levels, d)
        mask[tuple(index)] = True
    return float(np.abs(diag[mask]).sum())


# --------------------------------------------------------------------------
# initial-state descriptions


@dataclass(frozen=True)
class StateSpec:
    """Description of an initial state.

    kind: ``fock`` (n), ``coherent`` (alpha), ``thermal`` (nbar0),
    ``two-level-thermal`` (nbar0, the fermionic occupation), ``product``
    (parts: two StateSpecs) or ``explicit`` (path to a matrix file).
    """

    kind: str
    n: int = 0
    alpha: complex = 0j
    nbar0: float = 0.0
    parts: tuple = ()
    path: str = ""

    KINDS = ("fock", "coherent", "thermal", "two-level-thermal", "product", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise UnsupportedInitialStateError(f"unknown initial-state kind {self.kind!r}")
        if self.kind == "fock" and (self.n < 0 or int(self.n) != self.n):
            raise UnsupportedInitialStateError("fock N must be a non-negative integer")
        if self.kind == "thermal" and self.nbar0 < 0:
            raise UnsupportedInitialStateError("thermal nbar0 must be non-negative")
        if self.kind == "two-level-thermal" and not 0 <= self.nbar0 <= 1:
            raise UnsupportedInitialStateError("two-level occupation must lie in [0, 1]")
        if self.kind == "product" and len(self.parts) != 2:
            raise UnsupportedInitialStateError("product state needs exactly two parts")


def build_state(spec, dims, strict=False, tol=1e-10):
    """Materialise a :class:`StateSpec` on the space ``dims``."""
    dims = tuple(dims)
    if spec.kind == "product":
        if len(dims) != 2:
            raise UnsupportedInitialStateError("product states need a two-mode space")
        a = build_state(spec.parts[0], dims[:1], strict, tol)
        b = build_state(spec.parts[1], dims[1:], strict, tol)
        out = tensor(a, b)
        return FockOperator(out.dims, out.entries, {
            "tail_weight": a.meta.get("tail_weight", 0.0) + b.meta.get("tail_weight", 0.0)})
    if spec.kind == "explicit":
        rho = read_matrix_file(spec.path)
        if rho.dims != dims:
            raise DimensionMismatchError(f"matrix file dims {rho.dims} != model dims {dims}")
        return rho
    if len(dims) != 1:
        raise UnsupportedInitialStateError(f"{spec.kind} state needs a single-mode space")
    (dim,) = dims
    if spec.kind == "fock":
        return fock_density(spec.n, dim)
    if spec.kind == "coherent":
        return coherent_density(spec.alpha, dim, tol=tol, strict=strict)
    if spec.kind == "thermal":
        rho = thermal_density(spec.nbar0, dim)
        if strict and rho.meta["tail_weight"] > tol:
            raise TruncationError(
                f"thermal state nbar0={spec.nbar0} loses {rho.meta['tail_weight']:.3e} at dimension {dim}")
        return rho
    if dim != 2:
        raise UnsupportedInitialStateError("two-level state needs dimension 2")
    return two_level_thermal(spec.nbar0)


# --------------------------------------------------------------------------
# explicit matrix files: header "dims d1 [d2]", then "i j re im" lines


def read_matrix_file(path, tol=1e-8):
    """Read an explicit density matrix and check it is a valid state."""
    dims = None
    rows = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "dims":
            dims = tuple(int(x) for x in fields[1:])
            if not 1 <= len(dims) <= 2 or min(dims) < 1:
                raise ValueError(f"{path}:{lineno}: bad dims line")
            continue
        if dims is None:
            raise ValueError(f"{path}:{lineno}: entry before dims header")
        if len(fields) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'i j re im'")
        rows.append((int(fields[0]), int(fields[1]), float(fields[2]), float(fields[3])))
    if dims is None:
        raise ValueError(f"{path}: missing dims header")
    side = math.prod(dims)
    mat = np.zeros((side, side), dtype=complex)
    for i, j, re, im in rows:
        if not (0 <= i < side and 0 <= j < side):
            raise ValueError(f"{path}: index ({i}, {j}) out of range")
        mat[i, j] = complex(re, im)
    rho = FockOperator(dims, mat)
    if not rho.is_hermitian(tol):
        raise ValueError(f"{path}: matrix is not Hermitian")
    if abs(rho.trace() - 1.0) > tol:
        raise ValueError(f"{path}: trace {rho.trace().real:.6g} is not 1")
    if min_eigenvalue_hermitian(rho, tol) < -tol:
        raise ValueError(f"{path}: matrix is not positive semidefinite")
    return rho


def write_matrix_file(path, rho, threshold=0.0):
    lines = ["dims " + " ".join(str(d) for d in rho.dims)]
    for i, j in zip(*np.nonzero(np.abs(rho.entries) > threshold)):
        z = complex(rho.entries[i, j])
        lines.append(f"{i} {j} {z.real!r} {z.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def random_density(rng, dims, support=None):
    """Random full-rank density matrix living on Fock levels ``< support`` of each mode."""
    dims = tuple(dims)
    support = dims if support is None else tuple(
        min(s, d) for s, d in zip(np.broadcast_to(support, len(dims)), dims))
    n = math.prod(support)
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    small = g @ g.conj().T
    small /= np.trace(small).real
    grids = np.meshgrid(*[np.arange(s) for s in support], indexing="ij")
    flat = np.ravel_multi_index([x.ravel() for x in grids], dims)
    mat = np.zeros((math.prod(dims),) * 2, dtype=complex)
    mat[np.ix_(flat, flat)] = small
    return FockOperator(dims, mat)
