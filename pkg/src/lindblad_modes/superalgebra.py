"""Superoperators as formal sums of left/right multiplications.

A term ``(c, L, R)`` acts as ``rho -> c * L @ rho @ R``.  Composition
follows ``(S1 S2) rho = S1(S2(rho))``, so a composed term has left factor
``L1 @ L2`` and right factor ``R2 @ R1``.

Vectorisation stacks columns: ``vec(L rho R) = (R^T kron L) vec(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError
from .operators import FockOperator

MERGE_TOL = 1e-14


@lru_cache(maxsize=None)
def _eye(side):
    eye = np.eye(side, dtype=complex)
    eye.setflags(write=False)
    return eye


def _as_matrix(op):
    if isinstance(op, FockOperator):
        return op.entries
    return np.asarray(op, dtype=complex)


def _is_eye(mat):
    return mat is _eye(mat.shape[0])


def _mul(x, y):
    # keep the shared identity object alive through products so apply() can skip it
    if _is_eye(x):
        return y
    if _is_eye(y):
        return x
    return x @ y


class Superoperator:
    """Linear map on operators, stored as a list of ``(coef, left, right)`` terms."""

    __slots__ = ("dims", "terms")

    def __init__(self, dims, terms=()):
        self.dims = tuple(int(d) for d in dims)
        side = math.prod(self.dims)
        clean = []
        for coef, left, right in terms:
            left, right = _as_matrix(left), _as_matrix(right)
            if left.shape != (side, side) or right.shape != (side, side):
                raise DimensionMismatchError(
                    f"term of shape {left.shape}/{right.shape} does not match dims {self.dims}")
            if _is_identity_matrix(left):
                left = _eye(side)
            if _is_identity_matrix(right):
                right = _eye(side)
            clean.append((complex(coef), left, right))
        self.terms = tuple(clean)

    @property
    def side(self):
        return math.prod(self.dims)

    # -- construction helpers

    @classmethod
    def zero(cls, dims):
        return cls(dims, ())

    @classmethod
    def identity(cls, dims):
        side = math.prod(dims)
        return cls(dims, [(1.0, _eye(side), _eye(side))])

    @classmethod
    def left(cls, A, dims=None):
        """``A.``: multiply the target from the left."""
        mat = _as_matrix(A)
        dims = A.dims if dims is None else dims
        return cls(dims, [(1.0, mat, _eye(mat.shape[0]))])

    @classmethod
    def right(cls, A, dims=None):
        """``.A``: multiply the target from the right."""
        mat = _as_matrix(A)
        dims = A.dims if dims is None else dims
        return cls(dims, [(1.0, _eye(mat.shape[0]), mat)])

    @classmethod
    def sandwich(cls, A, B, dims=None):
        """``A..B``: ``rho -> A rho B``."""
        left = _as_matrix(A)
        dims = A.dims if dims is None else dims
        return cls(dims, [(1.0, left, _as_matrix(B))])

    # -- arithmetic

    def _check(self, other):
        if not isinstance(other, Superoperator):
            raise TypeError(f"expected Superoperator, got {type(other).__name__}")
        if other.dims != self.dims:
            raise DimensionMismatchError(f"dims {self.dims} != {other.dims}")

    def __add__(self, other):
        self._check(other)
        return Superoperator(self.dims, self.terms + other.terms).simplified()

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        if isinstance(scalar, Superoperator):
            return NotImplemented
        c = complex(scalar)
        if c == 0:
            return Superoperator.zero(self.dims)
        return Superoperator(self.dims, [(c * k, l, r) for k, l, r in self.terms])

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose(self, other)

    def __pow__(self, n):
        out = Superoperator.identity(self.dims)
        for _ in range(int(n)):
            out = compose(out, self)
        return out

    def simplified(self):
        """Merge terms sharing a right (then left) factor and drop negligible ones."""
        terms = _merge(self.terms, key=2)
        terms = _merge(terms, key=1)
        return Superoperator(self.dims, terms)

    def is_zero(self):
        return len(self.simplified().terms) == 0

    # -- action

    def apply(self, rho):
        return apply(self, rho)

    def apply_matrix(self, mat):
        out = np.zeros_like(mat, dtype=complex)
        for coef, left, right in self.terms:
            out += coef * _mul(_mul(left, mat), right)
        return out

    def apply_dual(self, mat):
        """Trace-dual action ``Y -> sum c R Y L``, so that tr(Y S(rho)) = tr(S^dual(Y) rho)."""
        out = np.zeros_like(mat, dtype=complex)
        for coef, left, right in self.terms:
            out += coef * _mul(_mul(right, mat), left)
        return out

    def to_matrix(self, sparse=False):
        return to_matrix(self, sparse=sparse)

    def __repr__(self):
        return f"Superoperator(dims={self.dims}, terms={len(self.terms)})"


def _is_identity_matrix(mat):
    n = mat.shape[0]
    if _is_eye(mat):
        return True
    return bool(np.count_nonzero(mat) == n and np.array_equal(mat, np.eye(n)))


def _merge(terms, key):
    """Combine terms whose factor at position ``key`` (1=left, 2=right) agrees within tolerance."""
    groups = []
    for coef, left, right in terms:
        shared = right if key == 2 else left
        other = left if key == 2 else right
        for group in groups:
            if group[0].shape == shared.shape and np.allclose(
                    group[0], shared, rtol=0.0, atol=MERGE_TOL):
                group[1].append((coef, other))
                break
        else:
            groups.append((shared, [(coef, other)]))
    merged = []
    for shared, parts in groups:
        if len(parts) == 1:
            coef, other = parts[0]
        else:
            coef, other = 1.0, sum(c * o for c, o in parts)
        if abs(coef) * np.max(np.abs(other), initial=0.0) * np.max(
                np.abs(shared), initial=0.0) < MERGE_TOL:
            continue
        merged.append((coef, other, shared) if key == 2 else (coef, shared, other))
    return merged


def apply(S, rho):
    """Apply a superoperator to a :class:`FockOperator`."""
    if rho.dims != S.dims:
        raise DimensionMismatchError(f"superoperator dims {S.dims} != operator dims {rho.dims}")
    return FockOperator(rho.dims, S.apply_matrix(rho.entries))


def compose(S1, S2):
    """``S1 S2``: apply ``S2`` first."""
    S1._check(S2)
    terms = [(c1 * c2, _mul(l1, l2), _mul(r2, r1))
             for c1, l1, r1 in S1.terms for c2, l2, r2 in S2.terms]
    return Superoperator(S1.dims, terms).simplified()


def add(S1, S2):
    return S1 + S2


def scale(c, S):
    return complex(c) * S


def commutator(S1, S2):
    return (compose(S1, S2) - compose(S2, S1)).simplified()


def anticommutator(S1, S2):
    return (compose(S1, S2) + compose(S2, S1)).simplified()


def to_matrix(S, sparse=False):
    """Column-stacking matrix of ``S``: ``vec(S(rho)) = M @ vec(rho)``."""
    side = S.side
    if sparse:
        out = sp.csr_matrix((side * side, side * side), dtype=complex)
        for coef, left, right in S.terms:
            out = out + coef * sp.kron(sp.csr_matrix(right.T), sp.csr_matrix(left), format="csr")
        return out
    out = np.zeros((side * side, side * side), dtype=complex)
    for coef, left, right in S.terms:
        out += coef * np.kron(right.T, left)
    return out


def vec(mat):
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v, side=None):
    side = int(round(math.sqrt(v.size))) if side is None else side
    return np.asarray(v).reshape(side, side, order="F")


def interior_mask(dims, margin):
    """Boolean mask over the flattened basis: every mode index below ``dim - margin``."""
    grids = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
    ok = np.ones(grids[0].shape, dtype=bool)
    for g, d in zip(grids, dims):
        ok &= g < d - margin
    return ok.ravel()


def interior_residual(S, margin=2):
    """Frobenius norm of ``S`` restricted to inputs ``|k><l|`` on the interior subspace.

    Truncated ladder matrices break the algebra only at the top Fock levels;
    restricting the domain to the interior isolates genuine algebra errors.
    """
    inner = interior_mask(S.dims, margin)
    side = S.side
    cols = np.flatnonzero(np.outer(inner, inner).ravel(order="F"))
    if cols.size == 0:
        return 0.0
    sq = 0.0
    chunk = max(1, 2_000_000 // (side * side))
    for start in range(0, cols.size, chunk):
        part = cols[start:start + chunk]
        k_idx, l_idx = part % side, part // side
        total = np.zeros((side, side, part.size), dtype=complex)
        for coef, left, right in S.terms:
            # column (k, l) of the term is coef * outer(L[:, k], R[l, :])
            total += coef * np.einsum("ic,cj->ijc", left[:, k_idx], right[l_idx, :])
        sq += float(np.vdot(total, total).real)
    return math.sqrt(sq)


def operator_interior(mat, dims, margin=2):
    """Restrict an operator's entries to the interior block."""
    inner = interior_mask(dims, margin)
    return np.asarray(mat)[np.ix_(inner, inner)]


@dataclass(frozen=True)
class LadderSet:
    """Raising/lowering superoperator pairs with the eigenvalue shift of each pair.

    ``raising[i]`` raises the ``i``-th eigen index by one and shifts the
    Liouvillian eigenvalue by ``shifts[i]``.
    """

    raising: tuple
    lowering: tuple
    shifts: tuple
    statistics: str = "bosonic"
    names: tuple = ()

    def __post_init__(self):
        if not (len(self.raising) == len(self.lowering) == len(self.shifts)):
            raise ValueError("raising, lowering and shifts must have equal length")
        if self.statistics not in ("bosonic", "fermionic"):
            raise ValueError(f"unknown statistics {self.statistics!r}")

    def __len__(self):
        return len(self.shifts)

    @property
    def dims(self):
        return self.raising[0].dims

    def factorized(self):
        """``sum_i shift_i raise_i lower_i``, which must reproduce the Liouvillian."""
        out = Superoperator.zero(self.dims)
        for lam, up, down in zip(self.shifts, self.raising, self.lowering):
            out = out + lam * compose(up, down)
        return out

    def algebra_residuals(self, margin=2):
        """Interior residual of every (anti)commutation relation, keyed by a label."""
        names = self.names or tuple(str(i) for i in range(len(self)))
        eye = Superoperator.identity(self.dims)
        zero = Superoperator.zero(self.dims)
        out = {}
        for i, (up, down) in enumerate(zip(self.raising, self.lowering)):
            if self.statistics == "bosonic":
                out[f"[{names[i]}-,{names[i]}+]=1"] = interior_residual(commutator(down, up) - eye, margin)
            else:
                out[f"{{{names[i]}-,{names[i]}+}}=1"] = interior_residual(anticommutator(down, up) - eye, margin)
                out[f"{{{names[i]}+,{names[i]}+}}=0"] = interior_residual(anticommutator(up, up) - zero, margin)
                out[f"{{{names[i]}-,{names[i]}-}}=0"] = interior_residual(anticommutator(down, down) - zero, margin)
            for j in range(i + 1, len(self)):
                for a, sa in ((self.raising[i], "+"), (self.lowering[i], "-")):
                    for b, sb in ((self.raising[j], "+"), (self.lowering[j], "-")):
                        out[f"[{names[i]}{sa},{names[j]}{sb}]=0"] = interior_residual(commutator(a, b), margin)
        return out
