"""Projections P^m -> P^(m-1) and their lifted exterior-power matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exterior import (
    ExteriorError,
    GradeBasis,
    GradedLinearMap,
    MultiVector,
    hodge,
    interior,
    join,
    meet,
    subset_array,
    wedge_matrix,
)


class SingularProjection(ValueError):
    """A point was projected from the center, or the operator lost rank."""


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Full-rank m x (m+1) complex matrix; rows are the hyperplanes Gamma_i through the center."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.matrix, dtype=complex)
        if a.ndim != 2 or a.shape[1] != a.shape[0] + 1:
            raise ValueError(f"projection matrix must be m x (m+1), got {a.shape}")
        if a.shape[0] < 3:
            raise ValueError("ambient dimension m must be at least 3")
        s = np.linalg.svd(a, compute_uv=False)
        if s[0] == 0 or s[-1] / s[0] <= 1e-10:
            raise SingularProjection("projection matrix is rank deficient")
        a.flags.writeable = False
        object.__setattr__(self, "matrix", a)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> ProjectionOperator:
        return cls(rng.standard_normal((m, m + 1)) + 1j * rng.standard_normal((m, m + 1)))

    def __repr__(self):
        return f"ProjectionOperator(m={self.m})"


def center(p: ProjectionOperator) -> np.ndarray:
    """Unit-norm kernel vector of the projection matrix."""
    _, s, vh = np.linalg.svd(p.matrix)
    o = vh[-1].conj()
    if np.linalg.norm(p.matrix @ o) > 1e-8 * s[0]:
        raise SingularProjection("kernel is not one-dimensional")
    return o


def canonical_hyperplane(p: ProjectionOperator) -> np.ndarray:
    """Dual coordinates of the image hyperplane: kernel of pinv(M)^T (Moore-Penrose).

    For real matrices this equals the center; for complex ones it is its conjugate.
    """
    x = np.linalg.pinv(p.matrix)
    _, _, vh = np.linalg.svd(x.T)
    return vh[-1].conj()


def apply(p: ProjectionOperator, x, tol: float = 1e-12) -> np.ndarray:
    """Image M x of a point of P^m; raises at the center."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    y = p.matrix @ x
    if np.linalg.norm(y) <= tol * np.linalg.norm(p.matrix, 2) * np.linalg.norm(x):
        raise SingularProjection("point coincides with the center of projection")
    return y


def pseudo_lift(p: ProjectionOperator, y) -> np.ndarray:
    """Moore-Penrose pre-image of a point of the projection space."""
    return np.linalg.pinv(p.matrix) @ np.asarray(y, dtype=complex)


def hat_last(p: ProjectionOperator) -> GradedLinearMap:
    """Matrix sending a point of the image space to its line through the center.

    Column i is (-1)^i times the meet of all row hyperplanes except the i-th.
    """
    m = p.m
    d = m + 1
    planes = [hodge(MultiVector.vector(g)) for g in p.matrix]
    cols = []
    for i in range(m):
        rest = [h for j, h in enumerate(planes) if j != i]
        acc = rest[0]
        for h in rest[1:]:
            acc = meet(acc, h)
        cols.append((-1) ** i * acc.coeffs)
    return GradedLinearMap(GradeBasis(m, 1), GradeBasis(d, 2), np.array(cols).T)


def _point_lifts(p: ProjectionOperator, o: np.ndarray) -> np.ndarray:
    # contract each hat_last column by conj(center) to get a point on its line
    lines = hat_last(p).entries
    gamma = o.conj() / np.vdot(o, o)
    pts = [-interior(gamma, MultiVector(p.m + 1, 2, col)).coeffs for col in lines.T]
    return np.array(pts).T


def hat_k(p: ProjectionOperator, k: int) -> GradedLinearMap:
    """Lift of (m-1-k)-planes of the image space to (m-k)-planes through the center.

    Maps grade m-k over C^m to grade m-k+1 over C^(m+1).
    """
    m = p.m
    if not 1 <= k <= m - 1:
        raise ExteriorError(f"order k={k} outside 1..{m - 1}")
    r = m - k
    o = center(p)
    lifts = _point_lifts(p, o)
    comp = kernels.compound(lifts, subset_array(m + 1, r), subset_array(m, r))
    wedge_o = wedge_matrix(MultiVector.vector(o), r, side="right")
    return GradedLinearMap(GradeBasis(m, r), GradeBasis(m + 1, r + 1), wedge_o @ comp)


def tilde_k(p: ProjectionOperator, k: int) -> GradedLinearMap:
    """Projection of (m-k)-planes of P^m: the (m-k+1)-th compound of M."""
    m = p.m
    if not 2 <= k <= m:
        raise ExteriorError(f"order k={k} outside 2..{m}")
    r = m - k + 1
    comp = kernels.compound(p.matrix, subset_array(m, r), subset_array(m + 1, r))
    return GradedLinearMap(GradeBasis(m + 1, r), GradeBasis(m, r), comp)


def project_extensor(p: ProjectionOperator, w: MultiVector) -> MultiVector:
    """Image of a subspace of P^m (zero if it contains the center)."""
    return tilde_k(p, p.m - w.grade + 1)(w)


def point_lift_line(p: ProjectionOperator, y) -> MultiVector:
    """Line through the center and a pre-image of ``y`` (oracle for hat_last)."""
    return join(MultiVector.vector(pseudo_lift(p, y)), MultiVector.vector(center(p)))
