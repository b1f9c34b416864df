"""Epipoles and the family of fundamental matrices F_k between two projections."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, comb

import numpy as np

from .exterior import (
    DEFAULT_TOL,
    ExteriorError,
    GradeBasis,
    GradedLinearMap,
    MultiVector,
    _orth,
    gen_join,
    gen_meet,
    hodge_matrix,
    join,
    null_space,
    numeric_rank,
    proj_distance,
    span_to_extensor,
    wedge_matrix,
)
from .projection import ProjectionOperator, center, hat_k, tilde_k

MAX_RETRIES = 8


class EpipolarError(ValueError):
    """Degenerate epipolar configuration (coincident centers, epipolar input, ...)."""


@dataclass(frozen=True)
class EpipolePair:
    e1: np.ndarray
    e2: np.ndarray


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """F_k: step-(m-k) extensors of the first image to step-(m-k+1) extensors of the second."""

    m: int
    k: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 2 <= self.k <= self.m - 1:
            raise EpipolarError(f"order k={self.k} outside 2..{self.m - 1}")
        e = np.array(self.entries, dtype=complex)
        shape = (comb(self.m, self.m - self.k + 1), comb(self.m, self.m - self.k))
        if e.shape != shape:
            raise EpipolarError(f"F_{self.k} must have shape {shape}, got {e.shape}")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def src_grade(self) -> int:
        return self.m - self.k

    @property
    def dst_grade(self) -> int:
        return self.m - self.k + 1

    def as_map(self) -> GradedLinearMap:
        return GradedLinearMap(GradeBasis(self.m, self.src_grade),
                               GradeBasis(self.m, self.dst_grade), self.entries)

    def __call__(self, w: MultiVector) -> MultiVector:
        return self.as_map()(w)

    def normalized(self) -> FundamentalMatrix:
        return FundamentalMatrix(self.m, self.k, self.entries / np.linalg.norm(self.entries))

    def __repr__(self):
        return f"FundamentalMatrix(m={self.m}, k={self.k})"


def _check_pair(p1: ProjectionOperator, p2: ProjectionOperator):
    if p1.m != p2.m:
        raise EpipolarError("projections act on different ambient spaces")
    if proj_distance(center(p1), center(p2)) < 1e-8:
        raise EpipolarError("centers of projection coincide")


def epipoles(p1: ProjectionOperator, p2: ProjectionOperator) -> EpipolePair:
    _check_pair(p1, p2)
    e1 = p1.matrix @ center(p2)
    e2 = p2.matrix @ center(p1)
    return EpipolePair(e1 / np.linalg.norm(e1), e2 / np.linalg.norm(e2))


def fundamental(p1: ProjectionOperator, p2: ProjectionOperator, k: int) -> FundamentalMatrix:
    """F_k = tilde_k(P2) . hat_k(P1)."""
    _check_pair(p1, p2)
    m = p1.m
    if not 2 <= k <= m - 1:
        raise EpipolarError(f"order k={k} outside 2..{m - 1}")
    return FundamentalMatrix(m, k, tilde_k(p2, k).entries @ hat_k(p1, k).entries)


def reduced_fundamental(p1: ProjectionOperator, p2: ProjectionOperator) -> FundamentalMatrix:
    """Closed form [e2]_^ M2bar M1bar^-1 of F_{m-1}.

    Only the leading block of the first operator has to be invertible; otherwise
    the composed form is returned.
    """
    _check_pair(p1, p2)
    m = p1.m
    a1, m1 = p1.matrix[:, :m], p1.matrix[:, m]
    a2, m2 = p2.matrix[:, :m], p2.matrix[:, m]
    s = np.linalg.svd(a1, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        return fundamental(p1, p2, m - 1)
    h = a2 @ np.linalg.inv(a1)
    e2 = m2 - h @ m1
    return FundamentalMatrix(m, m - 1, wedge_matrix(MultiVector.vector(e2), 1) @ h)


def classical_form(f: FundamentalMatrix) -> np.ndarray:
    """For m=3, the usual 3x3 matrix sending points to dual line coordinates."""
    if f.m != 3:
        raise EpipolarError("classical form exists only for m=3")
    return hodge_matrix(3, 2) @ f.entries


def skew(t) -> np.ndarray:
    t = np.asarray(t, dtype=complex)
    return np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])


def e1_wedge_matrix(e1, m: int) -> GradedLinearMap:
    """[e1]: step m-3 to step m-2 over C^m, w -> e1 ^ w."""
    e1 = np.asarray(e1, dtype=complex).reshape(-1)
    if e1.shape[0] != m:
        raise EpipolarError(f"epipole has length {e1.shape[0]}, expected {m}")
    if np.linalg.norm(e1) == 0:
        raise EpipolarError("zero epipole")
    return GradedLinearMap(GradeBasis(m, m - 3), GradeBasis(m, m - 2),
                           wedge_matrix(MultiVector.vector(e1), m - 3))


def _common_vector(cols: np.ndarray, dim: int, grade: int, tol: float) -> np.ndarray:
    # unique x with x ^ c = 0 for every column c
    blocks = [wedge_matrix(MultiVector(dim, grade, c), 1, side="right") for c in cols.T]
    ns = null_space(np.vstack(blocks), tol)
    if ns.shape[1] != 1:
        raise EpipolarError(f"epipole is not unique (kernel dimension {ns.shape[1]})")
    v = ns[:, 0]
    return v / np.linalg.norm(v)


def epipoles_from_fundamental(f: FundamentalMatrix, tol: float = 1e-6) -> EpipolePair:
    """Recover (e1, e2) from F_k alone: e2 lies in every output, e1 in every kernel element."""
    m, k = f.m, f.k
    u, s, vh = np.linalg.svd(f.entries)
    r = comb(m - 1, m - k)
    img = u[:, :r]
    ker = vh[r:].conj().T
    e2 = _common_vector(img, m, m - k + 1, tol)
    e1 = _common_vector(ker, m, m - k, tol)
    return EpipolePair(e1, e2)


def annihilation_residual(f: FundamentalMatrix, e2) -> float:
    """max over basis extensors of |e2 ^ F w| for unit e2 and unit-norm F."""
    e2 = np.asarray(e2, dtype=complex)
    e2 = e2 / np.linalg.norm(e2)
    ent = f.entries / np.linalg.norm(f.entries)
    w = wedge_matrix(MultiVector.vector(e2), f.dst_grade) @ ent
    return float(np.max(np.abs(w)))


def correspondence_residual(f: FundamentalMatrix, w1: MultiVector, w2: MultiVector, e2,
                            tol: float = 1e-10) -> float:
    """Projective distance between F_k w1 and e2 ^ w2."""
    if w1.grade != f.src_grade or w2.grade != f.src_grade:
        raise EpipolarError(f"correspondence extensors must have step {f.src_grade}")
    lhs = f(w1)
    if lhs.norm() <= tol * np.linalg.norm(f.entries) * w1.norm():
        raise EpipolarError("w1 lies in the epipolar pencil: F w1 vanishes")
    rhs = join(MultiVector.vector(e2), w2)
    if rhs.norm() <= tol * w2.norm() * np.linalg.norm(e2):
        raise EpipolarError("w2 contains the second epipole")
    return proj_distance(lhs, rhs)


def incidence_residual(f: FundamentalMatrix, y1, y2) -> float:
    """|y2 ^ F_{m-1} y1| for unit inputs: the point-correspondence constraint."""
    if f.k != f.m - 1:
        raise EpipolarError("incidence residual is defined for the reduced order m-1")
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    line = f.entries @ (y1 / np.linalg.norm(y1))
    line = line / np.linalg.norm(f.entries)
    out = join(MultiVector.vector(y2 / np.linalg.norm(y2)), MultiVector(f.m, 2, line))
    return out.norm()


@dataclass(frozen=True)
class RankProfile:
    observed: int
    expected: int
    singular_values: np.ndarray = field(repr=False)

    @property
    def ok(self) -> bool:
        return self.observed == self.expected


def rank_profile(f: FundamentalMatrix, tol: float = DEFAULT_TOL) -> RankProfile:
    s = np.linalg.svd(f.entries, compute_uv=False)
    return RankProfile(numeric_rank(f.entries, tol), comb(f.m - 1, f.m - f.k), s)


def space_dimension(m: int, k: int) -> int:
    """N_k, the dimension of the projective space containing all F_k."""
    if not 2 <= k <= m - 1:
        raise EpipolarError(f"order k={k} outside 2..{m - 1}")
    a, b = comb(m, m - k + 1), comb(m, m - k)
    r = comb(m - 1, m - k)
    return a * b - (a - r) * (b - r) - 1


def _random_vectors(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def _image_by_intersection(f: FundamentalMatrix, basis: np.ndarray, l: int,
                           rng: np.random.Generator) -> MultiVector:
    # W (columns of basis, dim m-l) as the intersection of supersets of dim m-k
    m, k = f.m, f.k
    extra = l - k
    count = ceil((l - 1) / max(k - 1, 1)) + 1
    acc = None
    for _ in range(count):
        add = _random_vectors(rng, m, extra)
        u = span_to_extensor(np.vstack([basis.T, add]))
        img = f(u)
        acc = img if acc is None else gen_meet(acc, img)
    return acc


def _image_by_sum(f: FundamentalMatrix, basis: np.ndarray, l: int,
                  rng: np.random.Generator) -> MultiVector:
    # W (dim m-l) as the sum of random subspaces of dim m-k
    m, k = f.m, f.k
    count = ceil((m - l) / (m - k)) + 1
    acc = None
    for _ in range(count):
        coef = rng.standard_normal((m - l, m - k)) + 1j * rng.standard_normal((m - l, m - k))
        v = span_to_extensor((basis @ coef).T)
        img = f(v)
        acc = img if acc is None else gen_join(acc, img)
    return acc


def convert(f: FundamentalMatrix, l: int, rng: np.random.Generator | None = None,
            tol: float = 1e-6) -> FundamentalMatrix:
    """phi_{kl}: compute F_l from F_k.

    Correspondences (w, F_l w) are synthesized through generalized meets (l > k) or
    joins (l < k) of F_k images, then F_l is the one-dimensional solution of the
    linear incidence system F_l w in span(F_l w).
    """
    m, k = f.m, f.k
    if not 2 <= l <= m - 1:
        raise EpipolarError(f"target order l={l} outside 2..{m - 1}")
    if l == k:
        return f
    if rng is None:
        rng = np.random.default_rng(0)
    src, dst = m - l, m - l + 1
    rows, cols = comb(m, dst), comb(m, src)
    n_samples = 2 * ceil(rows * cols / max(rows - 1, 1)) + 4
    image = _image_by_intersection if l > k else _image_by_sum
    for _ in range(MAX_RETRIES):
        eqs = []
        try:
            for _ in range(n_samples):
                basis = _orth(_random_vectors(rng, m, src).T, 1e-12)
                w = span_to_extensor(basis.T)
                y = image(f, basis, l, rng)
                if y.grade != dst:
                    raise ExteriorError("degenerate decomposition")
                yn = y.coeffs / np.linalg.norm(y.coeffs)
                comp = null_space(yn[None, :].conj(), 1e-12)
                # (w^T kron B^H) vec(F) = 0 with row-major vec(F)
                eqs.append(np.kron(comp.conj().T, w.coeffs[None, :]))
        except ExteriorError:
            continue
        a = np.vstack(eqs)
        _, s, vh = np.linalg.svd(a)
        if s[-2] < tol * s[0]:
            continue
        sol = vh[-1].conj().reshape(rows, cols)
        return FundamentalMatrix(m, l, sol / np.linalg.norm(sol))
    raise EpipolarError(f"conversion F_{k} -> F_{l} failed after {MAX_RETRIES} retries")
