"""Parametric scene varieties, implicit fits, dual quadrics and tangency counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .exterior import MultiVector, span_to_extensor
from .projection import ProjectionOperator

NULL_TOL = 1e-8


class VarietyError(ValueError):
    pass


@lru_cache(maxsize=None)
def monomials(nvars: int, degree: int) -> np.ndarray:
    """Exponent vectors of all degree-d monomials, graded lexicographic (x0^d first)."""
    rows = []
    for combo in combinations_with_replacement(range(nvars), degree):
        e = np.zeros(nvars, dtype=int)
        for i in combo:
            e[i] += 1
        rows.append(e)
    out = np.array(rows, dtype=int).reshape(-1, nvars)
    out.flags.writeable = False
    return out


def eval_monomials(points, degree: int) -> np.ndarray:
    """Rows: points (N x nvars); columns: monomial values."""
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    exps = monomials(pts.shape[1], degree)
    return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)


def _monomial_partials(points, degree: int) -> np.ndarray:
    # shape (N, nvars, n_mono): d/dx_i of each monomial
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    exps = monomials(pts.shape[1], degree)
    nv = pts.shape[1]
    out = np.zeros((pts.shape[0], nv, exps.shape[0]), dtype=complex)
    for i in range(nv):
        e = exps.copy()
        coef = e[:, i].astype(float)
        e[:, i] = np.maximum(e[:, i] - 1, 0)
        out[:, i, :] = coef * np.prod(pts[:, None, :] ** e[None, :, :], axis=2)
    return out


@dataclass(frozen=True, eq=False)
class ParametricVariety:
    """Homogeneous degree-d map P^n -> P^m; ``coeffs`` has shape (m+1, #monomials)."""

    n: int
    m: int
    d: int
    coeffs: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        shape = (self.m + 1, comb(self.n + self.d, self.d))
        if c.shape != shape:
            raise VarietyError(f"coefficients must have shape {shape}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def evaluate(self, t) -> np.ndarray:
        """Raw (unnormalized) values; t may be a single point or an N x (n+1) array."""
        t = np.asarray(t, dtype=complex)
        vals = eval_monomials(t.reshape(-1, self.n + 1), self.d) @ self.coeffs.T
        return vals[0] if t.ndim == 1 else vals

    def jacobian(self, t) -> np.ndarray:
        """(m+1) x (n+1) matrix of partial derivatives at t."""
        parts = _monomial_partials(np.asarray(t, dtype=complex).reshape(1, -1), self.d)[0]
        return self.coeffs @ parts.T


def sample(v: ParametricVariety, t, tol: float = 1e-12) -> np.ndarray:
    """Unit-normalized point V(t)."""
    t = np.asarray(t, dtype=complex)
    x = v.evaluate(t)
    scale = np.linalg.norm(v.coeffs) * np.linalg.norm(t) ** v.d
    if np.linalg.norm(x) <= tol * scale:
        raise VarietyError("parameter is a base point of the map")
    return x / np.linalg.norm(x)


def random_parameters(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    return rng.standard_normal((count, n + 1)) + 1j * rng.standard_normal((count, n + 1))


def sample_points(v: ParametricVariety, rng: np.random.Generator, count: int) -> np.ndarray:
    ts = random_parameters(rng, v.n, count)
    return np.array([sample(v, t) for t in ts])


def project_variety(p: ProjectionOperator, v: ParametricVariety,
                    rng: np.random.Generator | None = None, probes: int = 32) -> ParametricVariety:
    """M o V; raises if sampled points land on the center."""
    if p.m != v.m:
        raise VarietyError(f"projection acts on P^{p.m}, variety lives in P^{v.m}")
    rng = np.random.default_rng(0) if rng is None else rng
    out = ParametricVariety(v.n, v.m - 1, v.d, p.matrix @ v.coeffs, kind=v.kind)
    for t in random_parameters(rng, v.n, probes):
        x = sample(v, t)
        y = p.matrix @ x
        if np.linalg.norm(y) <= 1e-9 * np.linalg.norm(p.matrix, 2):
            raise VarietyError("center of projection lies on the variety")
    return out


@dataclass(frozen=True, eq=False)
class ImplicitVariety:
    """Homogeneous forms of one degree, each a unit coefficient vector in the monomial basis."""

    dim: int
    degree: int
    polys: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.atleast_2d(np.array(self.polys, dtype=complex))
        if p.shape[1] != comb(self.dim + self.degree, self.degree):
            raise VarietyError("form length does not match the monomial basis")
        p = p / np.linalg.norm(p, axis=1, keepdims=True)
        p.flags.writeable = False
        object.__setattr__(self, "polys", p)

    @property
    def count(self) -> int:
        return self.polys.shape[0]

    def evaluate(self, x, normalize: bool = True) -> np.ndarray:
        """Values of every form at x (unit-normalized first unless ``normalize`` is False)."""
        x = np.asarray(x, dtype=complex).reshape(-1)
        if normalize:
            x = x / np.linalg.norm(x)
        return self.polys @ eval_monomials(x[None, :], self.degree)[0]

    def residual(self, x) -> float:
        return float(np.max(np.abs(self.evaluate(x))))


def implicit_fit(samples, degree: int, dim: int, tol: float = NULL_TOL) -> ImplicitVariety:
    """All independent degree-d forms vanishing on the samples (thresholded null space)."""
    pts = np.atleast_2d(np.asarray(samples, dtype=complex))
    if pts.shape[1] != dim + 1:
        raise VarietyError(f"samples must have {dim + 1} coordinates")
    need = 2 * comb(dim + degree, degree)
    if pts.shape[0] < need:
        raise VarietyError(f"need at least {need} samples, got {pts.shape[0]}")
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    design = eval_monomials(pts, degree)
    _, s, vh = np.linalg.svd(design)
    rank = int(np.sum(s > tol * s[0]))
    if rank == design.shape[1]:
        raise VarietyError("no form of this degree vanishes on the samples")
    return ImplicitVariety(dim, degree, vh[rank:].conj())


def fit_variety(v: ParametricVariety, degree: int | None = None,
                rng: np.random.Generator | None = None, oversample: int = 3) -> ImplicitVariety:
    degree = v.d if degree is None else degree
    rng = np.random.default_rng(0) if rng is None else rng
    count = oversample * comb(v.m + degree, degree)
    return implicit_fit(sample_points(v, rng, count), degree, v.m)


@dataclass(frozen=True, eq=False)
class Quadric:
    dim: int
    Q: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = np.array(self.Q, dtype=complex)
        if q.shape != (self.dim + 1, self.dim + 1):
            raise VarietyError(f"quadric matrix must be {(self.dim + 1, self.dim + 1)}")
        q = (q + q.T) / 2
        q.flags.writeable = False
        object.__setattr__(self, "Q", q)

    def is_smooth(self, tol: float = 1e-10) -> bool:
        s = np.linalg.svd(self.Q, compute_uv=False)
        return s[-1] > tol * s[0]

    def value(self, x) -> complex:
        x = np.asarray(x, dtype=complex)
        return complex(x @ self.Q @ x)


def adjugate(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    cof = np.empty_like(a)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(a, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T


def dual_quadric(c: Quadric) -> Quadric:
    """Adjugate; h is tangent to {x^T C x = 0} iff h^T C* h = 0."""
    return Quadric(c.dim, adjugate(c.Q))


def quadric_from_form(y: ImplicitVariety) -> Quadric:
    """Symmetric Gram matrix of a single quadratic form."""
    if y.degree != 2 or y.count != 1:
        raise VarietyError("expected exactly one quadratic form")
    exps = monomials(y.dim + 1, 2)
    q = np.zeros((y.dim + 1, y.dim + 1), dtype=complex)
    for c, e in zip(y.polys[0], exps):
        idx = np.flatnonzero(e)
        if idx.size == 1:
            q[idx[0], idx[0]] = c
        else:
            q[idx[0], idx[1]] = q[idx[1], idx[0]] = c / 2
    return Quadric(y.dim, q)


def quadric_form_coeffs(q: Quadric) -> np.ndarray:
    """Monomial coefficients of x^T Q x."""
    exps = monomials(q.dim + 1, 2)
    out = np.empty(exps.shape[0], dtype=complex)
    for k, e in enumerate(exps):
        idx = np.flatnonzero(e)
        out[k] = q.Q[idx[0], idx[0]] if idx.size == 1 else 2 * q.Q[idx[0], idx[1]]
    return out


def tangent_extensor(v: ParametricVariety, t, tol: float = 1e-8) -> MultiVector:
    """Step-(n+1) extensor of the projective tangent space at V(t)."""
    jac = v.jacobian(t)
    s = np.linalg.svd(jac, compute_uv=False)
    if s[-1] <= tol * s[0]:
        raise VarietyError("singular Jacobian at the parameter point")
    return span_to_extensor(jac.T)


def _binary_roots(coeffs, tol: float = 1e-12):
    """Roots in P^1 of a binary form given by coefficients of t^k s^(k-i), i=0..k.

    Returns the finite roots t/s and the multiplicity of the root at infinity.
    """
    c = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        raise VarietyError("binary form vanishes identically")
    lead = 0
    while abs(c[lead]) <= tol * scale:
        lead += 1
    return np.roots(c[lead:]), lead


def _multiplicities(roots: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    out: list[list] = []
    for r in roots:
        for item in out:
            if abs(item[0] - r) <= tol * max(1.0, abs(r)):
                item[1] += 1
                break
        else:
            out.append([complex(r), 1])
    return [(r, k) for r, k in out]


def pencil_tangencies(c: Quadric, h0, h1, tol: float = 1e-6) -> list[tuple[complex, int]]:
    """Tangent members t0 H0 + t1 H1 as (t0/t1, multiplicity); infinity is t1 = 0."""
    dual = dual_quadric(c).Q
    h0 = np.asarray(h0, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    a = h0 @ dual @ h0
    b = h0 @ dual @ h1
    cc = h1 @ dual @ h1
    if max(abs(a), abs(b), abs(cc)) <= 1e-14 * np.linalg.norm(dual):
        raise VarietyError("degenerate pencil: every member is tangent")
    finite, at_inf = _binary_roots([a, 2 * b, cc])
    out = _multiplicities(finite, tol)
    if at_inf:
        out.append((complex(np.inf), at_inf))
    return out


def class_count_quadric(c: Quadric, h0, h1) -> int:
    """Number of tangent hyperplanes in a pencil, with multiplicity (the class)."""
    if not c.is_smooth():
        raise VarietyError("class count needs a smooth quadric")
    return sum(k for _, k in pencil_tangencies(c, h0, h1))


def curve_section_roots(v: ParametricVariety, h) -> tuple[np.ndarray, int]:
    """Parameters (t/s) where the curve meets the hyperplane h, plus the multiplicity at s=0."""
    if v.n != 1:
        raise VarietyError("hyperplane sections by root finding need a curve")
    form = np.asarray(h, dtype=complex) @ v.coeffs
    if np.max(np.abs(form)) <= 1e-12 * np.linalg.norm(v.coeffs) * np.linalg.norm(h):
        raise VarietyError("hyperplane contains the curve")
    return _binary_roots(form)


def degree_check(v: ParametricVariety, h) -> int:
    finite, at_inf = curve_section_roots(v, h)
    return len(finite) + at_inf


# scene constructors

VERONESE_CONIC = np.array([[0, 0, 0.5], [0, -1, 0], [0.5, 0, 0]], dtype=complex)


def _random_complex(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def veronese_conic() -> ParametricVariety:
    return ParametricVariety(1, 2, 2, np.eye(3), kind="conic")


def conic3d(rng: np.random.Generator, m: int = 3) -> ParametricVariety:
    """Random plane conic in P^m: a random embedding of the Veronese conic."""
    return ParametricVariety(1, m, 2, _random_complex(rng, (m + 1, 3)), kind="conic3d")


def rational_normal_curve(d: int, m: int | None = None,
                          rng: np.random.Generator | None = None) -> ParametricVariety:
    """Degree-d rational normal curve; embedded randomly into P^m when m > d or rng is given."""
    m = d if m is None else m
    if m < d:
        raise VarietyError("rational normal curve of degree d needs m >= d")
    if rng is None and m == d:
        emb = np.eye(d + 1)
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        emb = _random_complex(rng, (m + 1, d + 1))
    return ParametricVariety(1, m, d, emb, kind="rational_normal_curve")


def twisted_cubic(rng: np.random.Generator | None = None) -> ParametricVariety:
    return rational_normal_curve(3, 3, rng)


def _quadric_chart(n: int) -> np.ndarray:
    # (u_0..u_{n-1}, w) -> (u_i w, w^2, sum u_i^2), a smooth quadric in P^{n+1}
    exps = monomials(n + 1, 2)
    index = {tuple(e): k for k, e in enumerate(exps)}

    def col(*idx):
        e = [0] * (n + 1)
        for i in idx:
            e[i] += 1
        return index[tuple(e)]

    c = np.zeros((n + 2, exps.shape[0]))
    for i in range(n):
        c[i, col(i, n)] = 1
    c[n, col(n, n)] = 1
    for i in range(n):
        c[n + 1, col(i, i)] = 1
    return c


def standard_quadric_gram(n: int) -> np.ndarray:
    """Gram matrix of sum x_i^2 - x_n x_{n+1} on P^{n+1}."""
    q = np.zeros((n + 2, n + 2), dtype=complex)
    q[:n, :n] = np.eye(n)
    q[n, n + 1] = q[n + 1, n] = -0.5
    return q


def quadric_variety(n: int, m: int, rng: np.random.Generator) -> ParametricVariety:
    """Smooth n-dimensional quadric spanning a P^{n+1} inside P^m (needs 2 <= n <= m-2)."""
    if not 2 <= n <= m - 2:
        raise VarietyError(f"quadric of dimension {n} needs 2 <= n <= m-2 = {m - 2}")
    emb = _random_complex(rng, (m + 1, n + 2))
    return ParametricVariety(n, m, 2, emb @ _quadric_chart(n), kind="quadric")


def projected_quadric_gram(p: ProjectionOperator, v: ParametricVariety) -> Quadric:
    """Exact Gram matrix of the projection of a conic/quadric filling the image space.

    Valid when the image of the span of V under P is the whole projection space
    (plane conics with m = 3, quadrics of dimension m-2).
    """
    m = p.m
    if v.kind == "conic3d":
        emb, base = v.coeffs, VERONESE_CONIC
    elif v.kind == "quadric":
        n = v.n
        chart = _quadric_chart(n)
        emb = np.linalg.lstsq(chart.T, v.coeffs.T, rcond=None)[0].T
        base = standard_quadric_gram(n)
    else:
        raise VarietyError(f"no exact Gram matrix for kind {v.kind!r}")
    a = p.matrix @ emb
    if a.shape != (m, m):
        raise VarietyError("projected span does not fill the image space")
    ainv = np.linalg.inv(a)
    g = ainv.T @ base @ ainv
    return Quadric(m - 1, g / np.linalg.norm(g))
