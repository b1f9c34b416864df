"""Projective-group action on projection pairs, canonical pairs, and the linear lifting solve."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .epipolar import (
    EpipolarError,
    FundamentalMatrix,
    epipoles_from_fundamental,
    reduced_fundamental,
)
from .exterior import MultiVector, hodge, meet, null_space, proj_distance
from .projection import ProjectionOperator, center


class RecoveryError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionPair:
    first: ProjectionOperator
    second: ProjectionOperator

    def __post_init__(self):
        if self.first.m != self.second.m:
            raise RecoveryError("projections act on different ambient spaces")
        if proj_distance(center(self.first), center(self.second)) < 1e-8:
            raise RecoveryError("centers of projection coincide")

    @property
    def m(self) -> int:
        return self.first.m


@dataclass(frozen=True)
class CanonicalPair:
    """([I|0], [H|e2]) with H the meet of every F-line with the hyperplane dual to e2."""

    pair: ProjectionPair
    H: np.ndarray = field(repr=False)
    e2: np.ndarray = field(repr=False)
    lam: complex | None = None
    v: np.ndarray | None = field(default=None, repr=False)


def pgl_act(a, pair: ProjectionPair) -> ProjectionPair:
    """(M1 A^-1, M2 A^-1)."""
    a = np.asarray(a, dtype=complex)
    m = pair.m
    if a.shape != (m + 1, m + 1):
        raise RecoveryError(f"group element must be {(m + 1, m + 1)}")
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise RecoveryError("group element is singular")
    ainv = np.linalg.inv(a)
    return ProjectionPair(ProjectionOperator(pair.first.matrix @ ainv),
                          ProjectionOperator(pair.second.matrix @ ainv))


def _hyperplane_meet(e2: np.ndarray, f: FundamentalMatrix) -> np.ndarray:
    m = f.m
    plane = hodge(MultiVector.vector(e2))
    cols = [meet(plane, MultiVector(m, 2, c)).coeffs for c in f.entries.T]
    return np.array(cols).T


def canonical_pair(f: FundamentalMatrix, tol: float = 1e-6) -> CanonicalPair:
    """Canonical representative of the orbit with reduced fundamental matrix f."""
    m = f.m
    if f.k != m - 1:
        raise RecoveryError("canonical pair needs the reduced fundamental matrix (order m-1)")
    s = np.linalg.svd(f.entries, compute_uv=False)
    rank = int(np.sum(s > tol * s[0]))
    if rank != m - 1:
        raise RecoveryError(f"rank pattern violated: rank {rank}, expected {m - 1}")
    try:
        e2 = epipoles_from_fundamental(f, tol).e2
    except EpipolarError as exc:
        raise RecoveryError(str(exc)) from exc
    # fix the phase too, so the canonical form is a function of [F] alone
    big = e2[np.argmax(np.abs(e2))]
    e2 = e2 * (abs(big) / big)
    h = _hyperplane_meet(e2, f)
    h = h / h.flat[np.argmax(np.abs(h))]
    first = np.hstack([np.eye(m), np.zeros((m, 1))])
    second = np.hstack([h, e2[:, None]])
    return CanonicalPair(ProjectionPair(ProjectionOperator(first), ProjectionOperator(second)),
                         h, e2)


@dataclass(frozen=True)
class Alignment:
    """A with M1 = [I|0] A^-1 and M2 = [H|e2] A^-1, plus the scalars of the canonical form."""

    A: np.ndarray = field(repr=False)
    canonical: CanonicalPair
    lam: complex
    v: np.ndarray = field(repr=False)
    eq1_residual: float
    eq2_residual: float


def align_pair(pair: ProjectionPair) -> Alignment:
    m = pair.m
    m1bar, m1 = pair.first.matrix[:, :m], pair.first.matrix[:, m]
    m2bar, m2 = pair.second.matrix[:, :m], pair.second.matrix[:, m]
    s = np.linalg.svd(m1bar, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise RecoveryError("leading block of the first operator is singular")
    f = reduced_fundamental(pair.first, pair.second)
    # exact epipole M2 O1 with O1 = (-M1bar^-1 m1, 1), so canonical inputs are fixed points
    e2 = m2 - m2bar @ np.linalg.solve(m1bar, m1)
    ee = e2 @ e2
    if abs(ee) < 1e-10:
        raise RecoveryError("second epipole is isotropic (e2^T e2 = 0); resample the scene")
    proj = np.eye(m) - np.outer(e2, e2) / ee
    # fix the free scale of H so that H M1bar = Pi M2bar
    target = proj @ m2bar
    h0 = _hyperplane_meet(e2, f)
    hm = h0 @ m1bar
    h = h0 * (np.vdot(hm.ravel(), target.ravel()) / np.vdot(hm.ravel(), hm.ravel()))
    lam = complex(e2 @ m2 - e2 @ h @ m1) / ee
    v = e2 @ (m2bar - h @ m1bar) / ee
    b = np.block([[m1bar, m1[:, None]], [v[None, :], np.array([[lam]])]])
    a = np.linalg.inv(b)
    eq1 = np.linalg.norm(m2bar - h @ m1bar - np.outer(e2, v)) / np.linalg.norm(m2bar)
    eq2 = np.linalg.norm(m2 - h @ m1 - lam * e2) / max(np.linalg.norm(m2), np.linalg.norm(h @ m1))
    first = np.hstack([np.eye(m), np.zeros((m, 1))])
    second = np.hstack([h, e2[:, None]])
    canonical = CanonicalPair(ProjectionPair(ProjectionOperator(first), ProjectionOperator(second)),
                              h, e2, lam, v)
    return Alignment(a, canonical, lam, v, float(eq1), float(eq2))


def pairs_equivalent(a: ProjectionPair, b: ProjectionPair, tol: float = 1e-8) -> bool:
    fa = reduced_fundamental(a.first, a.second)
    fb = reduced_fundamental(b.first, b.second)
    return proj_distance(fa.entries, fb.entries) < tol


@dataclass(frozen=True)
class LiftResult:
    operator: ProjectionOperator
    lam: complex
    linear_residual: float
    probe_residual: float


def lift_projection(theta, gamma, center_line, probe_point, probe_variety,
                    max_residual: float = 1e-2) -> LiftResult:
    """Solve Theta P = Gamma with P O = 0, then fix the remaining scale by P Q in Y.

    ``center_line`` holds two points (rows) spanning the kernel line of Gamma; its
    first point is taken as the center O. ``probe_variety`` is an implicit variety
    in the image space of P.
    """
    theta = np.asarray(theta, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex)
    m = theta.shape[1]
    if theta.shape != (m - 1, m) or gamma.shape != (m - 1, m + 1):
        raise RecoveryError("Theta must be (m-1) x m and Gamma (m-1) x (m+1)")
    if np.linalg.matrix_rank(theta) != m - 1 or np.linalg.matrix_rank(gamma) != m - 1:
        raise RecoveryError("Theta and Gamma must have full rank m-1")
    line = np.atleast_2d(np.asarray(center_line, dtype=complex))
    o = line[0] / np.linalg.norm(line[0])
    if np.linalg.norm(gamma @ o) > max_residual * np.linalg.norm(gamma, 2):
        raise RecoveryError("center does not lie on the kernel line of Gamma")
    q = np.asarray(probe_point, dtype=complex)
    q = q / np.linalg.norm(q)

    # rows act on vec(P) in row-major order
    eq_theta = np.kron(theta, np.eye(m + 1))
    eq_center = np.kron(np.eye(m), o[None, :])
    sys_a = np.vstack([eq_theta, eq_center])
    sys_b = np.concatenate([gamma.ravel(), np.zeros(m)])
    sol, *_ = np.linalg.lstsq(sys_a, sys_b, rcond=None)
    p0 = sol.reshape(m, m + 1)
    lin_res = float(np.linalg.norm(sys_a @ sol - sys_b) / np.linalg.norm(gamma))
    if lin_res > max_residual:
        raise RecoveryError(f"inconsistent linear system (residual {lin_res:.3g})")

    n = null_space(theta)[:, 0]
    # direction beta with beta.O = 0 and beta.Q = 1 moves P Q along n
    cons = np.vstack([o, q])
    beta = np.linalg.lstsq(cons, np.array([0, 1], dtype=complex), rcond=None)[0]
    y0 = p0 @ q
    lam, res = _probe_root(y0, n, probe_variety)
    if res > max_residual:
        raise RecoveryError("probe point is not on the cone over the variety")
    p = p0 + lam * np.outer(n, beta)
    return LiftResult(ProjectionOperator(p), complex(lam), lin_res, float(res))


def _probe_root(y0: np.ndarray, n: np.ndarray, variety) -> tuple[complex, float]:
    d = variety.degree
    nodes = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1))
    vals = np.array([variety.evaluate(y0 + t * n, normalize=False) for t in nodes])
    vand = np.vander(nodes, d + 1)
    coeffs = np.linalg.solve(vand, vals)
    candidates = []
    for c in coeffs.T:
        c = np.trim_zeros(c, "f") if np.any(np.abs(c) > 0) else c
        if c.size > 1:
            candidates.extend(np.roots(c))
    if not candidates:
        raise RecoveryError("probe line is contained in the variety")
    scored = [(float(np.linalg.norm(variety.evaluate(y0 + t * n))), t) for t in candidates]
    res, lam = min(scored, key=lambda x: x[0])
    return lam, res
