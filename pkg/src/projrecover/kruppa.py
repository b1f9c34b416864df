"""Generalized Kruppa equations: coefficient residuals, solver and dimension diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.stats import qmc

from .epipolar import FundamentalMatrix, e1_wedge_matrix, space_dimension
from .exterior import (
    MultiVector,
    hodge,
    hodge_matrix,
    interior,
    join,
    null_space,
    span_to_extensor,
    subspace_distance,
    wedge_matrix,
)
from .varieties import (
    ParametricVariety,
    Quadric,
    dual_quadric,
    eval_monomials,
    projected_quadric_gram,
    quadric_form_coeffs,
)

SLICE_MARGIN = 1e-6
COND_LIMIT = 1e10


class KruppaError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DualPolynomial:
    """Degree-c form in m dual variables (graded lex monomials)."""

    dim: int
    degree: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).reshape(-1)
        if c.shape[0] != comb(self.dim + self.degree, self.degree):
            raise KruppaError("dual polynomial has the wrong number of coefficients")
        if not np.any(c):
            raise KruppaError("dual polynomial is zero")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=complex)
        return eval_monomials(h.reshape(-1, self.dim + 1), self.degree) @ self.coeffs

    @classmethod
    def from_quadric(cls, q: Quadric) -> DualPolynomial:
        return cls(q.dim, 2, quadric_form_coeffs(dual_quadric(q)))


# the two maps of the equation


def gamma_map(e1, w: MultiVector) -> MultiVector:
    """e1 ^ w: the hyperplane spanned by w and the first epipole."""
    return join(MultiVector.vector(e1), w)


def xi_map(f: FundamentalMatrix, w: MultiVector) -> MultiVector:
    return f(w)


def slice_parametrization(h_basis, x) -> MultiVector:
    """w(x) = interior(x~, h1 ^ ... ^ h_{m-1}), x~ the covector with x~(h_i) = x_i."""
    hb = np.asarray(h_basis, dtype=complex)
    m = hb.shape[0]
    if hb.shape != (m, m - 1):
        raise KruppaError("slice basis must be m x (m-1)")
    s = np.linalg.svd(hb, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise KruppaError("slice basis is dependent")
    blade = span_to_extensor(hb.T)
    dual = np.linalg.pinv(hb)
    return interior(np.asarray(x, dtype=complex) @ dual, blade)


def _slice_matrix(hb: np.ndarray) -> np.ndarray:
    # columns: w(e_j) for the standard basis of C^{m-1}
    m = hb.shape[0]
    return np.array([slice_parametrization(hb, np.eye(m - 1)[j]).coeffs
                     for j in range(m - 1)]).T


def halton_lattice(nvars: int, count: int, seed: int) -> np.ndarray:
    """Seeded low-discrepancy complex points in the unit box."""
    u = qmc.Halton(d=2 * nvars, scramble=True, seed=seed).random(count)
    return (2 * u[:, :nvars] - 1) + 1j * (2 * u[:, nvars:] - 1)


def interpolation_lattice(nvars: int, degree: int, seed: int,
                          oversample: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Lattice points and the pseudo-inverse of their monomial design matrix."""
    count = oversample * comb(nvars - 1 + degree, degree)
    for attempt in range(16):
        pts = halton_lattice(nvars, count, seed + attempt)
        design = eval_monomials(pts, degree)
        if np.linalg.cond(design) < COND_LIMIT:
            return pts, np.linalg.pinv(design)
    raise KruppaError("could not draw a well-conditioned interpolation lattice")


def interpolate_form(values: np.ndarray, pinv_design: np.ndarray) -> np.ndarray:
    """Monomial coefficients from values on the lattice."""
    return pinv_design @ values


@dataclass(frozen=True, eq=False)
class KruppaComponent:
    phi1: DualPolynomial
    phi2: DualPolynomial

    @property
    def degree(self) -> int:
        return self.phi1.degree


@dataclass(frozen=True, eq=False)
class KruppaSystem:
    """Scene duals plus the slice hyperplane of the first image and its sample lattice."""

    m: int
    components: tuple[KruppaComponent, ...]
    h_basis: np.ndarray = field(repr=False)
    slice_matrix: np.ndarray = field(repr=False)
    lattices: dict = field(repr=False)

    @property
    def c_total(self) -> int:
        return sum(c.degree for c in self.components)

    def coefficient_count(self, degree: int) -> int:
        return comb(self.m - 2 + degree, degree)


def build_system(m: int, components, e1, seed: int = 0) -> KruppaSystem:
    """Draw a slice hyperplane H of the first image with e1 off H, and the lattices."""
    comps = tuple(components)
    if not comps:
        raise KruppaError("a Kruppa system needs at least one component")
    for c in comps:
        if c.phi1.degree != c.phi2.degree:
            raise KruppaError("both dual polynomials of a component need the same class")
        if c.phi1.dim != m - 1 or c.phi2.dim != m - 1:
            raise KruppaError("dual polynomials must live on the dual projection space")
    rng = np.random.default_rng(seed)
    e1 = np.asarray(e1, dtype=complex)
    e1 = e1 / np.linalg.norm(e1)
    for _ in range(64):
        eta = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        eta /= np.linalg.norm(eta)
        if abs(eta @ e1) > SLICE_MARGIN:
            break
    else:
        raise KruppaError("could not draw a slice avoiding the first epipole")
    # slice H = {x : eta . x = 0}
    hb = null_space(eta[None, :], 1e-12)
    lattices = {}
    for deg in sorted({c.degree for c in comps}):
        lattices[deg] = interpolation_lattice(m - 1, deg, seed + 7919 * deg)
    return KruppaSystem(m, comps, hb, _slice_matrix(hb), lattices)


def _hyperplanes(system: KruppaSystem, grade_m1: np.ndarray) -> np.ndarray:
    # grade m-1 extensors (columns) -> dual coordinates (columns)
    return hodge_matrix(system.m, system.m - 1) @ grade_m1


def _slice_points(system: KruppaSystem, degree: int) -> np.ndarray:
    pts, _ = system.lattices[degree]
    return system.slice_matrix @ pts.T


def kruppa_coefficients(f: FundamentalMatrix | np.ndarray, e1, comp: KruppaComponent,
                        system: KruppaSystem) -> tuple[np.ndarray, np.ndarray]:
    """(a, b): coefficients of x -> phi2(F w(x)) and x -> phi1(e1 ^ w(x))."""
    m = system.m
    fe = f.entries if isinstance(f, FundamentalMatrix) else np.asarray(f, dtype=complex)
    if fe.shape != (comb(m, m - 1), comb(m, m - 2)):
        raise KruppaError("expected F of order 2")
    deg = comp.degree
    _, pinv = system.lattices[deg]
    w = _slice_points(system, deg)
    img2 = _hyperplanes(system, fe @ w)
    e1w = wedge_matrix(MultiVector.vector(e1), m - 2) @ w
    img1 = _hyperplanes(system, e1w)
    a = interpolate_form(comp.phi2(img2.T), pinv)
    b = interpolate_form(comp.phi1(img1.T), pinv)
    return a, b


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(a.shape[0], k=1)
    return a[i] * b[j] - a[j] * b[i]


def proportionality_residual(a: np.ndarray, b: np.ndarray) -> float:
    """sqrt(sum_{i<j} |a_i b_j - a_j b_i|^2) / (|a| |b|): zero iff a ~ b."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise KruppaError("zero coefficient vector")
    return float(np.linalg.norm(_cross(a, b)) / (na * nb))


def kruppa_residual(f, e1, system: KruppaSystem) -> float:
    """Sum over components of the lambda-eliminated coefficient mismatch."""
    return sum(proportionality_residual(*kruppa_coefficients(f, e1, c, system))
               for c in system.components)


def classical_kruppa_residual(f, e2, c1_dual, c2_dual) -> float:
    """min_lambda |[e2]x C2* [e2]x^T - lambda F C1* F^T| / |[e2]x C2* [e2]x^T| (m = 3)."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (3, 3):
        raise KruppaError("classical Kruppa equation needs a 3x3 F")
    ex = _skew(np.asarray(e2, dtype=complex))
    lhs = ex @ np.asarray(c2_dual) @ ex.T
    rhs = f @ np.asarray(c1_dual) @ f.T
    nl, nr = np.linalg.norm(lhs), np.linalg.norm(rhs)
    if nl == 0 or nr == 0:
        raise KruppaError("zero matrix in the classical Kruppa equation")
    lam = np.vdot(rhs, lhs) / np.vdot(rhs, rhs)
    return float(np.linalg.norm(lhs - lam * rhs) / nl)


def _skew(t):
    return np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])


@dataclass(frozen=True)
class DimensionReport:
    m: int
    c_total: int
    N: int
    coefficient_count: int
    lower_bound: int
    class_threshold: int
    threshold_met: bool


def dimension_report(m: int, c_total: int) -> DimensionReport:
    if m < 3 or c_total < 1:
        raise KruppaError("dimension report needs m >= 3 and c >= 1")
    n = space_dimension(m, 2)
    count = comb(m - 2 + c_total, c_total)
    threshold = (m + 2) * (m + 1) // 2
    return DimensionReport(m, c_total, n, count, n - count + 1, threshold, c_total >= threshold)


# scenes with exact dual polynomials


@dataclass(frozen=True, eq=False)
class KruppaTruth:
    e1: np.ndarray
    F: np.ndarray
    e2: np.ndarray


def components_from_scene(pair, varieties: list[ParametricVariety]) -> list[KruppaComponent]:
    """Exact dual quadrics of the projections of conics / (m-2)-quadrics."""
    comps = []
    for v in varieties:
        g1 = projected_quadric_gram(pair.first, v)
        g2 = projected_quadric_gram(pair.second, v)
        comps.append(KruppaComponent(DualPolynomial.from_quadric(g1),
                                     DualPolynomial.from_quadric(g2)))
    return comps


# stacked residual system shared by the solver and the isolation test


def _split(z: np.ndarray, m: int):
    nf = comb(m, m - 1) * comb(m, m - 2)
    e1 = z[:m]
    f = z[m:m + nf].reshape(comb(m, m - 1), comb(m, m - 2))
    e2 = z[m + nf:]
    return e1, f, e2


def _join(e1, f, e2) -> np.ndarray:
    return np.concatenate([np.asarray(e1).ravel(), np.asarray(f).ravel(), np.asarray(e2).ravel()])


def _blocks(m: int) -> list[slice]:
    nf = comb(m, m - 1) * comb(m, m - 2)
    return [slice(0, m), slice(m, m + nf), slice(m + nf, 2 * m + nf)]


def _constraint_residuals(z: np.ndarray, m: int) -> np.ndarray:
    e1, f, e2 = _split(z, m)
    r1 = f @ wedge_matrix(MultiVector.vector(e1), m - 3)
    r2 = wedge_matrix(MultiVector.vector(e2), m - 1) @ f
    return np.concatenate([r1.ravel(), r2.ravel()])


def _kruppa_raw(z: np.ndarray, system: KruppaSystem, scales=None) -> np.ndarray:
    e1, f, _ = _split(z, system.m)
    out = []
    for k, comp in enumerate(system.components):
        a, b = kruppa_coefficients(f, e1, comp, system)
        s = 1.0 if scales is None else scales[k]
        out.append(_cross(a, b) / s)
    return np.concatenate(out)


def _coef_scales(z: np.ndarray, system: KruppaSystem) -> list[float]:
    e1, f, _ = _split(z, system.m)
    out = []
    for comp in system.components:
        a, b = kruppa_coefficients(f, e1, comp, system)
        out.append(max(np.linalg.norm(a) * np.linalg.norm(b), 1e-300))
    return out


def _holomorphic_jacobian(fun, z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    # central differences; exact up to rounding for the low-degree residuals here
    r0 = fun(z)
    jac = np.empty((r0.shape[0], z.shape[0]), dtype=complex)
    for k in range(z.shape[0]):
        dz = np.zeros_like(z)
        dz[k] = h
        jac[:, k] = (fun(z + dz) - fun(z - dz)) / (2 * h)
    return jac


def _normalize_blocks(z: np.ndarray, m: int, ref: np.ndarray | None = None) -> np.ndarray:
    z = z.copy()
    for sl in _blocks(m):
        blk = z[sl] / np.linalg.norm(z[sl])
        anchor = ref[sl] if ref is not None else blk
        ip = np.vdot(anchor, blk)
        if abs(ip) > 0:
            blk = blk * (abs(ip) / ip)
        z[sl] = blk
    return z


def _gauge_rows(z: np.ndarray, m: int) -> np.ndarray:
    rows = np.zeros((3, z.shape[0]), dtype=complex)
    for i, sl in enumerate(_blocks(m)):
        rows[i, sl] = z[sl].conj()
    return rows


def stacked_residual(z: np.ndarray, system: KruppaSystem, scales=None) -> np.ndarray:
    if scales is None:
        scales = _coef_scales(z, system)
    return np.concatenate([_kruppa_raw(z, system, scales), _constraint_residuals(z, system.m)])


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    damping: float = 1e-3
    tolerance: float = 1e-12
    patience: int = 8
    validity_tol: float = 1e-6

    @classmethod
    def from_dict(cls, d: dict | None) -> SolverOptions:
        d = dict(d or {})
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise KruppaError(f"unknown solver options: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ConvergenceRecord:
    status: str
    iterations: int
    residuals: tuple[float, ...]
    valid: bool

    @property
    def converged(self) -> bool:
        return self.status == "converged" and self.valid


def _residual_norm(z, system) -> float:
    return float(np.linalg.norm(stacked_residual(z, system)))


def solution_valid(f: np.ndarray, e1: np.ndarray, m: int, tol: float = 1e-6) -> bool:
    """rank(F) = m-1 and ker(F) = im([e1]) (the kernel characterization)."""
    s = np.linalg.svd(f, compute_uv=False)
    if int(np.sum(s > tol * s[0])) != m - 1:
        return False
    ker = null_space(f, tol)
    img = e1_wedge_matrix(e1, m).entries
    return subspace_distance(ker, img) < tol


def kruppa_solve(initial: KruppaTruth, system: KruppaSystem,
                 options: SolverOptions | None = None) -> tuple[KruppaTruth, ConvergenceRecord]:
    """Damped Gauss-Newton (Levenberg-Marquardt) on the stacked residuals, gauge-fixed per block."""
    opts = options or SolverOptions()
    m = system.m
    z = _normalize_blocks(_join(initial.e1, initial.F, initial.e2), m)
    norm = _residual_norm(z, system)
    history = [norm]
    mu = opts.damping
    best = norm
    stall = 0
    status = "max-iterations"
    it = 0
    while True:
        if norm < opts.tolerance:
            status = "converged"
            break
        if it >= opts.max_iterations:
            break
        it += 1
        scales = _coef_scales(z, system)
        fun = lambda v: stacked_residual(v, system, scales)  # noqa: E731
        r = fun(z)
        jac = np.vstack([_holomorphic_jacobian(fun, z), _gauge_rows(z, m)])
        rr = np.concatenate([r, np.zeros(3)])
        jh = jac.conj().T
        jtj = jh @ jac
        g = jh @ rr
        accepted = False
        for _ in range(12):
            step = np.linalg.solve(jtj + mu * np.diag(np.diag(jtj).real + 1e-12), -g)
            cand = _normalize_blocks(z + step, m, ref=z)
            cn = _residual_norm(cand, system)
            if cn < norm:
                z, norm = cand, cn
                mu = max(mu / 3, 1e-12)
                accepted = True
                break
            mu *= 4
        history.append(norm)
        if not accepted:
            status = "stalled"
            break
        if norm < best * (1 - 1e-3):
            best = norm
            stall = 0
        else:
            stall += 1
            if stall >= opts.patience:
                status = "diverged"
                break
    e1, f, e2 = _split(z, m)
    valid = solution_valid(f, e1, m, opts.validity_tol)
    return KruppaTruth(e1, f, e2), ConvergenceRecord(status, it, tuple(history), valid)


@dataclass(frozen=True)
class IsolationReport:
    smallest: float
    largest: float
    ratio: float
    rank: int
    tangent_dim: int
    isolated: bool


def isolation_test(truth: KruppaTruth, system: KruppaSystem, ratio_tol: float = 1e-6,
                   consistency_tol: float = 1e-8) -> IsolationReport:
    """Kruppa Jacobian restricted to the tangent space of the constraint set at the truth."""
    m = system.m
    z = _normalize_blocks(_join(truth.e1, truth.F, truth.e2), m)
    if kruppa_residual(_split(z, m)[1], _split(z, m)[0], system) > consistency_tol:
        raise KruppaError("ground truth does not satisfy the Kruppa equations")
    scales = _coef_scales(z, system)
    j_k = _holomorphic_jacobian(lambda v: _kruppa_raw(v, system, scales), z)
    j_g = _holomorphic_jacobian(lambda v: _constraint_residuals(v, m), z)
    tangent = null_space(np.vstack([j_g, _gauge_rows(z, m)]), 1e-9)
    dim = tangent.shape[1]
    restricted = j_k @ tangent
    s = np.linalg.svd(restricted, compute_uv=False)
    if s.shape[0] < dim:
        s = np.concatenate([s, np.zeros(dim - s.shape[0])])
    largest = float(s[0]) if s.size else 0.0
    smallest = float(s[-1]) if s.size else 0.0
    ratio = smallest / largest if largest > 0 else 0.0
    rank = int(np.sum(s > ratio_tol * largest)) if largest > 0 else 0
    return IsolationReport(smallest, largest, ratio, rank, dim, ratio > ratio_tol)


def perturb(truth: KruppaTruth, rng: np.random.Generator, scale: float) -> KruppaTruth:
    """Relative complex Gaussian perturbation of every block."""
    def jitter(x):
        x = np.asarray(x, dtype=complex)
        noise = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        return x + scale * np.linalg.norm(x) * noise / np.linalg.norm(noise)
    return KruppaTruth(jitter(truth.e1), jitter(truth.F), jitter(truth.e2))


def scrambled(truth: KruppaTruth, rng: np.random.Generator) -> KruppaTruth:
    """Negative control: G F for random invertible G keeps rank and kernel but breaks Kruppa."""
    f = np.asarray(truth.F, dtype=complex)
    g = rng.standard_normal((f.shape[0],) * 2) + 1j * rng.standard_normal((f.shape[0],) * 2)
    gf = g @ f
    return KruppaTruth(truth.e1, gf / np.linalg.norm(gf), truth.e2)


def truth_from_pair(pair) -> KruppaTruth:
    from .epipolar import epipoles, fundamental

    ep = epipoles(pair.first, pair.second)
    f = fundamental(pair.first, pair.second, 2).entries
    return KruppaTruth(ep.e1, f / np.linalg.norm(f), ep.e2)


def hyperplane_of(w: MultiVector) -> np.ndarray:
    """Dual coordinates of a step-(m-1) extensor."""
    return hodge(w).coeffs

