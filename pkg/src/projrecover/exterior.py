"""Graded exterior algebra over complex scalars.

Basis of the grade-k part of the exterior algebra of C^D: sorted k-subsets of
{0, ..., D-1} in lexicographic order.  All signs derive from the parity of
the permutation that sorts a concatenation of index tuples.  Subspaces of
projective space are represented by extensors: a projective k-plane is a
decomposable element of grade k + 1.

Duality uses the bilinear pairing sum(x_i * y_i) throughout (no complex
conjugation), so the Hodge dual of an extensor represents the annihilator of
its subspace under that pairing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np

from . import kernels

DEFAULT_TOL = 1e-8
_TINY = 1e-300


class ExteriorError(ValueError):
    """Invalid grades, dimensions or degenerate inputs."""


def _perm_sign(seq) -> int:
    inv = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inv += 1
    return -1 if inv % 2 else 1


@lru_cache(maxsize=None)
def _subsets(dim: int, grade: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(dim), grade))


@lru_cache(maxsize=None)
def _index(dim: int, grade: int) -> dict[tuple[int, ...], int]:
    return {s: i for i, s in enumerate(_subsets(dim, grade))}


@lru_cache(maxsize=None)
def subset_array(dim: int, grade: int) -> np.ndarray:
    """Index tuples of the grade basis as an int array of shape (C(D,k), k)."""
    arr = np.array(_subsets(dim, grade), dtype=np.int_).reshape(comb(dim, grade), grade)
    arr.flags.writeable = False
    return arr


@lru_cache(maxsize=None)
def _wedge_table(dim: int, k: int, l: int):
    out_index = _index(dim, k + l)
    ia, ib, out, sign = [], [], [], []
    for i, s in enumerate(_subsets(dim, k)):
        sset = set(s)
        for j, t in enumerate(_subsets(dim, l)):
            if sset.isdisjoint(t):
                inv = sum(1 for x in s for y in t if x > y)
                ia.append(i)
                ib.append(j)
                out.append(out_index[tuple(sorted(s + t))])
                sign.append(-1.0 if inv % 2 else 1.0)
    return (
        np.array(ia, dtype=np.int_),
        np.array(ib, dtype=np.int_),
        np.array(out, dtype=np.int_),
        np.array(sign, dtype=float),
        comb(dim, k + l),
    )


@lru_cache(maxsize=None)
def _hodge_table(dim: int, grade: int):
    target = _index(dim, dim - grade)
    perm = np.empty(comb(dim, grade), dtype=np.int_)
    sign = np.empty(comb(dim, grade))
    for i, s in enumerate(_subsets(dim, grade)):
        comp = tuple(x for x in range(dim) if x not in s)
        perm[i] = target[comp]
        sign[i] = _perm_sign(s + comp)
    return perm, sign


@lru_cache(maxsize=None)
def _interior_table(dim: int, grade: int):
    target = _index(dim, grade - 1)
    src, var, out, sign = [], [], [], []
    for i, s in enumerate(_subsets(dim, grade)):
        for pos, x in enumerate(s):
            src.append(i)
            var.append(x)
            out.append(target[s[:pos] + s[pos + 1:]])
            sign.append(-1.0 if pos % 2 else 1.0)
    return (np.array(src, dtype=np.int_), np.array(var, dtype=np.int_),
            np.array(out, dtype=np.int_), np.array(sign))


@dataclass(frozen=True)
class GradeBasis:
    """Basis of the grade-``grade`` part of the exterior algebra of C^dim."""

    dim: int
    grade: int

    def __post_init__(self):
        if self.dim < 0 or not 0 <= self.grade <= self.dim:
            raise ExteriorError(f"invalid grade {self.grade} for dimension {self.dim}")

    @property
    def size(self) -> int:
        return comb(self.dim, self.grade)

    @property
    def subsets(self) -> tuple[tuple[int, ...], ...]:
        return _subsets(self.dim, self.grade)

    def index_of(self, subset) -> int:
        key = tuple(subset)
        try:
            return _index(self.dim, self.grade)[key]
        except KeyError:
            raise ExteriorError(f"{subset!r} is not a sorted {self.grade}-subset "
                                f"of range({self.dim})") from None

    def subset_of(self, index: int) -> tuple[int, ...]:
        return _subsets(self.dim, self.grade)[index]


@dataclass(frozen=True, eq=False)
class MultiVector:
    """Homogeneous element of grade ``grade`` in the exterior algebra of C^dim."""

    dim: int
    grade: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        basis = GradeBasis(self.dim, self.grade)
        if c.shape[0] != basis.size:
            raise ExteriorError(f"expected {basis.size} coefficients, got {c.shape[0]}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def vector(cls, v) -> MultiVector:
        v = np.asarray(v, dtype=complex).reshape(-1)
        return cls(v.shape[0], 1, v)

    @classmethod
    def scalar(cls, dim: int, value=1.0) -> MultiVector:
        return cls(dim, 0, [value])

    @classmethod
    def basis_element(cls, dim: int, subset) -> MultiVector:
        b = GradeBasis(dim, len(subset))
        c = np.zeros(b.size, dtype=complex)
        c[b.index_of(tuple(subset))] = 1.0
        return cls(dim, len(subset), c)

    @property
    def basis(self) -> GradeBasis:
        return GradeBasis(self.dim, self.grade)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def is_zero(self, tol: float = DEFAULT_TOL) -> bool:
        return self.norm() <= tol

    def normalized(self) -> MultiVector:
        n = self.norm()
        if n < _TINY:
            raise ExteriorError("cannot normalize the zero multivector")
        return MultiVector(self.dim, self.grade, self.coeffs / n)

    def _same(self, other: MultiVector):
        if (self.dim, self.grade) != (other.dim, other.grade):
            raise ExteriorError("multivectors live in different graded pieces")

    def __add__(self, other: MultiVector) -> MultiVector:
        self._same(other)
        return MultiVector(self.dim, self.grade, self.coeffs + other.coeffs)

    def __sub__(self, other: MultiVector) -> MultiVector:
        self._same(other)
        return MultiVector(self.dim, self.grade, self.coeffs - other.coeffs)

    def __neg__(self) -> MultiVector:
        return MultiVector(self.dim, self.grade, -self.coeffs)

    def __mul__(self, scalar) -> MultiVector:
        return MultiVector(self.dim, self.grade, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __xor__(self, other: MultiVector) -> MultiVector:
        return join(self, other)

    def __repr__(self):
        nz = {self.basis.subset_of(i): complex(c) for i, c in enumerate(self.coeffs)
              if abs(c) > 1e-14}
        return f"MultiVector(dim={self.dim}, grade={self.grade}, {nz})"


@dataclass(frozen=True, eq=False)
class GradedLinearMap:
    """Linear map between two graded pieces, stored as a dense matrix."""

    src: GradeBasis
    dst: GradeBasis
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (self.dst.size, self.src.size):
            raise ExteriorError(f"entries have shape {e.shape}, expected "
                                f"{(self.dst.size, self.src.size)}")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __call__(self, a: MultiVector) -> MultiVector:
        if a.basis != self.src:
            raise ExteriorError(f"map expects grade {self.src.grade} in dimension "
                                f"{self.src.dim}, got {a.grade} in {a.dim}")
        return MultiVector(self.dst.dim, self.dst.grade, self.entries @ a.coeffs)

    def rank(self, tol: float = DEFAULT_TOL) -> int:
        return numeric_rank(self.entries, tol)


def numeric_rank(a: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    s = np.linalg.svd(np.atleast_2d(a), compute_uv=False)
    if s.size == 0 or s[0] < _TINY:
        return 0
    return int(np.sum(s > tol * s[0]))


def join(a: MultiVector, b: MultiVector) -> MultiVector:
    """Exterior product a ^ b."""
    if a.dim != b.dim:
        raise ExteriorError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.grade + b.grade > a.dim:
        raise ExteriorError(f"grade overflow: {a.grade} + {b.grade} > {a.dim}")
    ia, ib, out, sign, nout = _wedge_table(a.dim, a.grade, b.grade)
    return MultiVector(a.dim, a.grade + b.grade,
                       kernels.wedge(a.coeffs, b.coeffs, ia, ib, out, sign, nout))


def wedge_matrix(a: MultiVector, grade: int, side: str = "left") -> np.ndarray:
    """Matrix of x -> a ^ x (side='left') or x -> x ^ a (side='right') on grade ``grade``."""
    if a.grade + grade > a.dim:
        raise ExteriorError("grade overflow")
    ia, ib, out, sign, nout = _wedge_table(a.dim, a.grade, grade)
    mat = kernels.wedge_left_matrix(a.coeffs, ia, ib, out, sign, nout, comb(a.dim, grade))
    if side == "right" and (a.grade * grade) % 2:
        mat = -mat
    return mat


def hodge(a: MultiVector) -> MultiVector:
    """Hodge star: e_S -> sign(S, S^c) e_{S^c}."""
    perm, sign = _hodge_table(a.dim, a.grade)
    c = np.zeros(comb(a.dim, a.dim - a.grade), dtype=complex)
    c[perm] = sign * a.coeffs
    return MultiVector(a.dim, a.dim - a.grade, c)


def hodge_matrix(dim: int, grade: int) -> np.ndarray:
    perm, sign = _hodge_table(dim, grade)
    mat = np.zeros((comb(dim, dim - grade), comb(dim, grade)))
    mat[perm, np.arange(perm.size)] = sign
    return mat


def meet(a: MultiVector, b: MultiVector) -> MultiVector:
    """Meet, defined so that hodge(x ^ y) == meet(hodge(x), hodge(y)) exactly."""
    if a.dim != b.dim:
        raise ExteriorError(f"dimension mismatch: {a.dim} vs {b.dim}")
    d = a.dim
    if a.grade + b.grade < d:
        raise ExteriorError(f"grade underflow: {a.grade} + {b.grade} < {d}")
    s = (a.grade * (d - a.grade) + b.grade * (d - b.grade)) % 2
    res = hodge(join(hodge(a), hodge(b)))
    return -res if s else res


def interior(x, a: MultiVector) -> MultiVector:
    """Contraction of ``a`` by the covector ``x``; adjoint of x ^ (.) under the bilinear pairing."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    if x.shape[0] != a.dim:
        raise ExteriorError(f"covector has length {x.shape[0]}, expected {a.dim}")
    if a.grade < 1:
        raise ExteriorError("cannot contract a scalar")
    src, var, out, sign = _interior_table(a.dim, a.grade)
    c = np.zeros(comb(a.dim, a.grade - 1), dtype=complex)
    np.add.at(c, out, sign * x[var] * a.coeffs[src])
    return MultiVector(a.dim, a.grade - 1, c)


def pairing(a: MultiVector, b: MultiVector) -> complex:
    """Bilinear pairing of two elements of the same grade in the standard basis."""
    a._same(b)
    return complex(np.sum(a.coeffs * b.coeffs))


def is_decomposable(a: MultiVector, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``a`` is a nonzero extensor (kernel of v -> v ^ a has dimension grade)."""
    if a.norm() < _TINY:
        return False
    if a.grade in (0, 1, a.dim):
        return True
    s = np.linalg.svd(wedge_matrix(a, 1, side="right"), compute_uv=False)
    nullity = a.dim - int(np.sum(s > tol * s[0]))
    return nullity == a.grade


def span_to_extensor(points, tol: float = DEFAULT_TOL) -> MultiVector:
    """Wedge of the given vectors (rows of ``points`` or a list of vectors)."""
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    k, dim = pts.shape
    if k:
        s = np.linalg.svd(pts, compute_uv=False)
        if s[0] < _TINY or s[-1] <= tol * s[0]:
            raise ExteriorError("points are linearly dependent")
    out = MultiVector.scalar(dim)
    for p in pts:
        out = join(out, MultiVector.vector(p))
    return out


def extensor_to_span(a: MultiVector, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (columns, shape dim x grade) of the subspace represented by ``a``."""
    if a.norm() < _TINY:
        raise ExteriorError("zero multivector has no span")
    if a.grade == 0:
        return np.zeros((a.dim, 0), dtype=complex)
    if a.grade == a.dim:
        return np.eye(a.dim, dtype=complex)
    w = wedge_matrix(a, 1, side="right")
    _, s, vh = np.linalg.svd(w)
    nullity = a.dim - int(np.sum(s > tol * s[0]))
    if nullity != a.grade:
        raise ExteriorError("multivector is not decomposable")
    return vh[-a.grade:].conj().T


def _orth(m: np.ndarray, tol: float) -> np.ndarray:
    if m.shape[1] == 0:
        return m
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] < _TINY:
        return m[:, :0]
    return u[:, : int(np.sum(s > tol * s[0]))]


def _basis_extensor(u: np.ndarray, dim: int) -> MultiVector:
    out = MultiVector.scalar(dim)
    for col in u.T:
        out = join(out, MultiVector.vector(col))
    return out


def gen_join(a: MultiVector, b: MultiVector, tol: float = DEFAULT_TOL) -> MultiVector:
    """Extensor of the sum A + B, valid even when a ^ b vanishes."""
    if a.dim != b.dim:
        raise ExteriorError("dimension mismatch")
    u = _orth(np.hstack([extensor_to_span(a, tol), extensor_to_span(b, tol)]), tol)
    return _basis_extensor(u, a.dim)


def gen_meet(a: MultiVector, b: MultiVector, tol: float = DEFAULT_TOL) -> MultiVector:
    """Extensor of the intersection A cap B, valid even when the meet degenerates."""
    if a.dim != b.dim:
        raise ExteriorError("dimension mismatch")
    ua, ub = extensor_to_span(a, tol), extensor_to_span(b, tol)
    if ua.shape[1] == 0 or ub.shape[1] == 0:
        return MultiVector.scalar(a.dim)
    stacked = np.hstack([ua, -ub])
    _, s, vh = np.linalg.svd(stacked)
    rank = int(np.sum(s > tol * s[0]))
    null = vh[rank:].conj().T
    u = _orth(ua @ null[: ua.shape[1]], tol)
    return _basis_extensor(u, a.dim)


def _flat(x) -> np.ndarray:
    if isinstance(x, MultiVector):
        return x.coeffs
    if isinstance(x, GradedLinearMap):
        return x.entries.reshape(-1)
    return np.asarray(x, dtype=complex).reshape(-1)


def proj_distance(a, b) -> float:
    """Distance between unit representatives after optimal phase alignment.

    Accepts multivectors, graded maps or arrays (flattened).
    """
    x, y = _flat(a), _flat(b)
    if x.shape != y.shape:
        raise ExteriorError("shape mismatch")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx < _TINY or ny < _TINY:
        raise ExteriorError("projective comparison of a zero element")
    x, y = x / nx, y / ny
    ip = np.vdot(y, x)
    phase = ip / abs(ip) if abs(ip) > 0 else 1.0
    return float(np.linalg.norm(x - phase * y))


def proj_equal(a, b, tol: float = DEFAULT_TOL) -> bool:
    return proj_distance(a, b) < tol


def subspace_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Sine of the largest principal angle between column spaces (1.0 if dimensions differ)."""
    qu, qv = _orth(np.asarray(u, dtype=complex), 1e-12), _orth(np.asarray(v, dtype=complex), 1e-12)
    if qu.shape[1] != qv.shape[1]:
        return 1.0
    if qu.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(qu - qv @ (qv.conj().T @ qu), 2))


def null_space(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the (right) null space, relative threshold ``tol``."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    _, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > _TINY else 0
    return vh[rank:].conj().T
