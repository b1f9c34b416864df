"""Cone intersection, triangulation and per-fiber true/ghost counting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .epipolar import epipoles, incidence_residual, reduced_fundamental
from .exterior import (
    MultiVector,
    extensor_to_span,
    hodge,
    join,
    span_to_extensor,
    subspace_distance,
)
from .projection import ProjectionOperator, SingularProjection, apply, center, project_extensor
from .recovery import ProjectionPair
from .varieties import (
    ImplicitVariety,
    ParametricVariety,
    curve_section_roots,
    fit_variety,
    implicit_fit,
    project_variety,
)


class ReconstructionError(ValueError):
    pass


class BranchFiber(ReconstructionError):
    """The epipolar plane is (nearly) tangent to a projected curve."""


@dataclass(frozen=True)
class Thresholds:
    true_tol: float = 1e-6
    ghost_tol: float = 1e-3
    collision_tol: float = 1e-6
    epipolar_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class SceneCones:
    pair: ProjectionPair
    X_param: ParametricVariety
    X_implicit: ImplicitVariety
    Y1: ImplicitVariety
    Y2: ImplicitVariety
    Y1_param: ParametricVariety = field(repr=False)
    Y2_param: ParametricVariety = field(repr=False)

    @property
    def degree(self) -> int:
        return self.X_param.d


def build_cones(pair: ProjectionPair, x: ParametricVariety, seed: int = 0) -> SceneCones:
    rng = np.random.default_rng(seed)
    y1p = project_variety(pair.first, x, rng)
    y2p = project_variety(pair.second, x, rng)
    return SceneCones(pair, x, fit_variety(x, rng=rng), fit_variety(y1p, rng=rng),
                      fit_variety(y2p, rng=rng), y1p, y2p)


def cone_membership(p: ProjectionOperator, y: ImplicitVariety, q, tol: float = 1e-8) -> bool:
    """Q lies on the cone over Y with vertex the center of p."""
    return y.residual(apply(p, q)) < tol


@dataclass(frozen=True)
class JoinSetup:
    W: MultiVector | None
    Z: MultiVector
    Z1: MultiVector
    Z2: MultiVector
    chart_points: np.ndarray = field(repr=False)

    def plane(self, t) -> MultiVector:
        """The (m-n)-plane through Z with pencil parameter t in P^n."""
        c = np.asarray(t, dtype=complex) @ self.chart_points
        return join(self.Z, MultiVector.vector(c))


def geometric_join_setup(pair: ProjectionPair, n: int, seed: int = 0,
                         x: ParametricVariety | None = None, retries: int = 8) -> JoinSetup:
    """Z = W + baseline, Z_i = W_i + e_i, and a chart of the planes through Z."""
    m = pair.m
    if not 1 <= n <= m - 2:
        raise ReconstructionError(f"need 1 <= n <= m-2, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    o1, o2 = center(pair.first), center(pair.second)
    ep = epipoles(pair.first, pair.second)
    baseline = span_to_extensor(np.vstack([o1, o2]))
    for _ in range(retries):
        k = m - n - 2
        if k == 0:
            w = None
            z = baseline
            z1, z2 = MultiVector.vector(ep.e1), MultiVector.vector(ep.e2)
        else:
            pts = rng.standard_normal((k, m + 1)) + 1j * rng.standard_normal((k, m + 1))
            w = span_to_extensor(pts)
            z = join(w, baseline)
            z1 = join(project_extensor(pair.first, w), MultiVector.vector(ep.e1))
            z2 = join(project_extensor(pair.second, w), MultiVector.vector(ep.e2))
        if z.norm() < 1e-10 or z1.norm() < 1e-10 or z2.norm() < 1e-10:
            continue
        if x is not None and _meets(z, x, rng):
            continue
        chart = rng.standard_normal((n + 1, m + 1)) + 1j * rng.standard_normal((n + 1, m + 1))
        if join(z, span_to_extensor(chart)).norm() < 1e-10:
            continue
        return JoinSetup(w, z, z1, z2, chart)
    raise ReconstructionError("genericity violation: could not place the geometric join")


def _meets(z: MultiVector, x: ParametricVariety, rng, probes: int = 64) -> bool:
    basis = extensor_to_span(z)
    for t in rng.standard_normal((probes, x.n + 1)) + 1j * rng.standard_normal((probes, x.n + 1)):
        p = x.evaluate(t)
        p = p / np.linalg.norm(p)
        if np.linalg.norm(p - basis @ (basis.conj().T @ p)) < 1e-8:
            return True
    return False


@dataclass(frozen=True)
class Triangulation:
    point: np.ndarray
    reprojection: float


def triangulate(pair: ProjectionPair, y1, y2, epipolar_tol: float = 1e-6) -> Triangulation:
    """Q with M1 Q ~ y1 and M2 Q ~ y2 (smallest singular vector of the stacked system)."""
    m = pair.m
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    y1 = y1 / np.linalg.norm(y1)
    y2 = y2 / np.linalg.norm(y2)
    f = reduced_fundamental(pair.first, pair.second)
    if incidence_residual(f, y1, y2) > epipolar_tol:
        raise ReconstructionError("image points violate the epipolar constraint")
    m1 = pair.first.matrix / np.linalg.norm(pair.first.matrix)
    m2 = pair.second.matrix / np.linalg.norm(pair.second.matrix)
    a = np.zeros((2 * m, m + 3), dtype=complex)
    a[:m, :m + 1] = m1
    a[:m, m + 1] = -y1
    a[m:, :m + 1] = m2
    a[m:, m + 2] = -y2
    _, s, vh = np.linalg.svd(a)
    if s[-2] < 1e-8 * s[0]:
        raise ReconstructionError("degenerate triangulation (points on the baseline)")
    q = vh[-1].conj()[:m + 1]
    q = q / np.linalg.norm(q)
    try:
        r1 = _proj_gap(apply(pair.first, q), y1)
        r2 = _proj_gap(apply(pair.second, q), y2)
    except SingularProjection as exc:
        raise ReconstructionError("triangulated point is a center of projection") from exc
    return Triangulation(q, max(r1, r2))


def _proj_gap(a: np.ndarray, b: np.ndarray) -> float:
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    ip = np.vdot(b, a)
    ph = ip / abs(ip) if abs(ip) > 0 else 1.0
    return float(np.linalg.norm(a - ph * b))


@dataclass(frozen=True)
class Candidate:
    point: np.ndarray = field(repr=False)
    label: str
    x_residual: float
    reprojection: float


@dataclass(frozen=True)
class FiberRecord:
    t: np.ndarray
    candidates: tuple[Candidate, ...]
    status: str

    @property
    def counts(self) -> tuple[int, int]:
        labels = [c.label for c in self.candidates]
        return labels.count("true"), labels.count("ghost")

    @property
    def clean(self) -> bool:
        return self.status == "clean"


def _image_points(y: ParametricVariety, h: np.ndarray, tol: float) -> list[np.ndarray]:
    finite, at_inf = curve_section_roots(y, h)
    if at_inf > 1:
        raise BranchFiber("repeated root at infinity")
    roots = np.sort_complex(finite)
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) <= tol * max(1.0, abs(roots[i])):
                raise BranchFiber("root collision")
    params = [np.array([r, 1.0]) for r in roots]
    if at_inf:
        params.append(np.array([1.0, 0.0]))
    pts = [y.evaluate(p) for p in params]
    return [p / np.linalg.norm(p) for p in pts]


def _dual_in_image(p: ProjectionOperator, plane: MultiVector) -> np.ndarray:
    # hyperplane of P^m through the center -> hyperplane of the image: M^T h = pi
    pi = hodge(plane).coeffs
    h, *_ = np.linalg.lstsq(p.matrix.T, pi, rcond=None)
    return h


def epipolar_fiber(scene: SceneCones, setup: JoinSetup, t,
                   thresholds: Thresholds = Thresholds()) -> FiberRecord:
    """All d^2 triangulated candidates over one epipolar plane, labelled true/ghost."""
    x = scene.X_param
    m = scene.pair.m
    if x.n != 1 or x.n != m - 2:
        raise ReconstructionError("fiber root-finding is implemented for curves in P^3")
    t = np.asarray(t, dtype=complex)
    plane = setup.plane(t)
    try:
        h1 = _dual_in_image(scene.pair.first, plane)
        h2 = _dual_in_image(scene.pair.second, plane)
        pts1 = _image_points(scene.Y1_param, h1, thresholds.collision_tol)
        pts2 = _image_points(scene.Y2_param, h2, thresholds.collision_tol)
    except BranchFiber:
        return FiberRecord(t, (), "branch")
    cands = []
    status = "clean"
    for y1 in pts1:
        for y2 in pts2:
            try:
                tri = triangulate(scene.pair, y1, y2, thresholds.epipolar_tol)
            except ReconstructionError:
                return FiberRecord(t, tuple(cands), "degenerate")
            res = scene.X_implicit.residual(tri.point)
            if res < thresholds.true_tol:
                label = "true"
            elif res > thresholds.ghost_tol:
                label = "ghost"
            else:
                label = "ambiguous"
                status = "ambiguous"
            cands.append(Candidate(tri.point, label, res, tri.reprojection))
    return FiberRecord(t, tuple(cands), status)


@dataclass(frozen=True)
class CensusSummary:
    degree: int
    fibers: int
    clean: int
    discarded: int
    expected: tuple[int, int]
    matching: int
    modal: tuple[int, int] | None
    refit_distance: float | None
    note: str

    @property
    def clean_fraction(self) -> float:
        return self.clean / self.fibers if self.fibers else 0.0

    @property
    def match_fraction(self) -> float:
        return self.matching / self.clean if self.clean else 0.0


def _form_distance(a: ImplicitVariety, b: ImplicitVariety) -> float:
    return subspace_distance(a.polys.T, b.polys.T)


def component_census(scene: SceneCones, num_fibers: int, seed: int = 0,
                     thresholds: Thresholds = Thresholds(),
                     min_clean_fraction: float = 0.5) -> tuple[CensusSummary, list[FiberRecord]]:
    d = scene.degree
    setup = geometric_join_setup(scene.pair, scene.X_param.n, seed, scene.X_param)
    rng = np.random.default_rng(seed + 1)
    ts = np.column_stack([np.ones(num_fibers),
                          rng.standard_normal(num_fibers) + 1j * rng.standard_normal(num_fibers)])
    records = [epipolar_fiber(scene, setup, t, thresholds) for t in ts]
    clean = [r for r in records if r.clean]
    expected = (d, d * (d - 1))
    counts = Counter(r.counts for r in clean)
    modal = counts.most_common(1)[0][0] if counts else None
    matching = counts.get(expected, 0)
    if len(clean) < min_clean_fraction * num_fibers:
        raise ReconstructionError("fewer than half of the fibers are clean; re-seed the scene")
    truths = [c.point for r in clean for c in r.candidates if c.label == "true"]
    refit = None
    if len(truths) >= 2 * _basis_size(scene):
        fit = implicit_fit(np.array(truths), d, scene.pair.m)
        refit = _form_distance(fit, scene.X_implicit)
    note = ("degree 2: the ghost component is itself a conic, so both components are "
            "admissible reconstructions" if d == 2 else "")
    summary = CensusSummary(d, num_fibers, len(clean), num_fibers - len(clean), expected,
                            matching, modal, refit, note)
    return summary, records


def _basis_size(scene: SceneCones) -> int:
    return comb(scene.pair.m + scene.degree, scene.degree)
