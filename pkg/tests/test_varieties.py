from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projrecover.exterior import MultiVector, hodge, null_space, proj_distance, proj_equal
from projrecover.projection import ProjectionOperator
from projrecover.varieties import (
    VERONESE_CONIC,
    ParametricVariety,
    Quadric,
    VarietyError,
    _quadric_chart,
    adjugate,
    class_count_quadric,
    conic3d,
    curve_section_roots,
    degree_check,
    dual_quadric,
    eval_monomials,
    fit_variety,
    implicit_fit,
    monomials,
    pencil_tangencies,
    project_variety,
    projected_quadric_gram,
    quadric_form_coeffs,
    quadric_from_form,
    quadric_variety,
    rational_normal_curve,
    sample,
    sample_points,
    standard_quadric_gram,
    tangent_extensor,
    twisted_cubic,
    veronese_conic,
)

from conftest import cvec


def test_monomials_graded_lex():
    assert monomials(2, 2).tolist() == [[2, 0], [1, 1], [0, 2]]
    for nv in range(1, 5):
        for d in range(0, 4):
            assert monomials(nv, d).shape == (comb(nv + d - 1, d), nv)
            assert (monomials(nv, d).sum(axis=1) == d).all()


def test_sample_examples():
    assert proj_equal(sample(twisted_cubic(), [1, 0]), [1, 0, 0, 0])
    assert proj_equal(sample(veronese_conic(), [1, 1]), [1, 1, 1])


def test_sample_base_point():
    v = ParametricVariety(1, 2, 2, np.array([[1, 0, 0], [1, 0, 0], [1, 0, 0]]))
    with pytest.raises(VarietyError):
        sample(v, [0, 1])


def test_coefficient_shape_checked():
    with pytest.raises(VarietyError):
        ParametricVariety(1, 3, 2, np.zeros((4, 4)))


def test_round_trip_fit(rng):
    x = conic3d(rng)
    y = fit_variety(x, rng=rng)
    for t in cvec(rng, 10, 2):
        assert y.residual(sample(x, t)) < 1e-8


def test_projection_drops_coordinate():
    p = ProjectionOperator(np.hstack([np.eye(3), np.zeros((3, 1))]))
    y = project_variety(p, twisted_cubic())
    assert np.allclose(y.coeffs, np.eye(4)[:3])


@pytest.mark.parametrize("d,m", [(2, 3), (3, 3), (3, 4), (4, 5)])
def test_projection_preserves_degree(rng, d, m):
    x = rational_normal_curve(d, m, rng)
    y = project_variety(ProjectionOperator.random(m, rng), x, rng)
    lower = [deg for deg in range(1, d) if _has_forms(y, deg, rng)]
    # a plane curve of degree d has no form of lower degree and exactly one of degree d
    if m == 3:
        assert not lower
        assert fit_variety(y, rng=rng).count == 1


def _has_forms(y, deg, rng):
    try:
        fit_variety(y, degree=deg, rng=rng)
        return True
    except VarietyError:
        return False


def test_projected_conic_is_smooth(rng):
    x = conic3d(rng)
    y = fit_variety(project_variety(ProjectionOperator.random(3, rng), x, rng), rng=rng)
    q = quadric_from_form(y)
    assert q.is_smooth()
    assert np.linalg.matrix_rank(q.Q) == 3


def test_projection_collapsing_to_center_rejected(rng):
    p = ProjectionOperator.random(3, rng)
    o = null_space(p.matrix)[:, 0]
    # every sample of this map is the center itself
    x = ParametricVariety(1, 3, 2, np.outer(o, cvec(rng, 3)))
    with pytest.raises(VarietyError):
        project_variety(p, x, rng)


def test_fit_plane_conic_gram(rng):
    v = veronese_conic()
    pts = sample_points(v, rng, 12)
    y = implicit_fit(pts, 2, 2)
    assert y.count == 1
    assert proj_distance(quadric_from_form(y).Q, VERONESE_CONIC) < 1e-8


def test_fit_line():
    rng = np.random.default_rng(1)
    coords = np.array([1.0, -2.0, 3.0])
    a, b = np.linalg.svd(coords[None, :])[2][1:]
    pts = np.outer(rng.standard_normal(8), a) + np.outer(rng.standard_normal(8), b)
    y = implicit_fit(pts, 1, 2)
    assert y.count == 1 and proj_equal(y.polys[0], coords)


def test_fit_twisted_cubic_quadrics(rng):
    x = twisted_cubic(rng)
    y = fit_variety(x, degree=2, rng=rng)
    assert y.count == 3
    for pt in sample_points(x, rng, 20):
        assert np.abs(y.evaluate(pt)).max() < 1e-8


def test_fit_needs_samples():
    with pytest.raises(VarietyError):
        implicit_fit(np.ones((3, 3)), 2, 2)


def test_quadric_form_round_trip(rng):
    a = cvec(rng, 4, 4)
    q = Quadric(3, a + a.T)
    x = cvec(rng, 4)
    assert np.isclose(eval_monomials(x[None, :], 2)[0] @ quadric_form_coeffs(q), q.value(x))


def test_dual_examples(rng):
    assert np.allclose(dual_quadric(Quadric(2, np.eye(3))).Q, np.eye(3))
    assert proj_distance(dual_quadric(Quadric(2, np.diag([1, 2, 3]))).Q, np.diag([6, 3, 2])) < 1e-12
    a = cvec(rng, 4, 4)
    assert np.allclose(adjugate(a) @ a, np.linalg.det(a) * np.eye(4))


def test_tangent_lines_on_dual(rng):
    x = veronese_conic()
    cs = dual_quadric(Quadric(2, VERONESE_CONIC)).Q
    for t in cvec(rng, 5, 2):
        h = hodge(tangent_extensor(x, t)).coeffs
        h = h / np.linalg.norm(h)
        assert abs(h @ cs @ h) < 1e-10


def test_tangent_extensor_examples(rng):
    line = tangent_extensor(veronese_conic(), [1, 0])
    e1 = MultiVector.vector([1, 0, 0])
    e2 = MultiVector.vector([0, 1, 0])
    assert proj_equal(line, e1 ^ e2)
    surf = ParametricVariety(2, 3, 2, _quadric_chart(2), kind="quadric")
    q = standard_quadric_gram(2)
    for t in cvec(rng, 4, 3):
        plane = tangent_extensor(surf, t)
        pt = surf.evaluate(t)
        assert proj_equal(hodge(plane).coeffs, q @ pt, 1e-8)
    flat = ParametricVariety(1, 3, 1, cvec(rng, 4, 2))
    g0 = tangent_extensor(flat, [1, 0])
    for t in cvec(rng, 4, 2):
        assert proj_equal(tangent_extensor(flat, t), g0)


def test_class_counts(rng):
    conic = Quadric(2, VERONESE_CONIC)
    assert class_count_quadric(conic, cvec(rng, 3), cvec(rng, 3)) == 2
    a = cvec(rng, 4, 4)
    assert class_count_quadric(Quadric(3, a + a.T), cvec(rng, 4), cvec(rng, 4)) == 2


def test_tangent_pencil_double_root(rng):
    conic = Quadric(2, VERONESE_CONIC)
    h_tan = hodge(tangent_extensor(veronese_conic(), [1, 2])).coeffs
    # every line of the pencil passes through the contact point, so the
    # tangent member is a double root
    pt = sample(veronese_conic(), [1, 2])
    other = np.cross(pt, cvec(rng, 3))
    roots = pencil_tangencies(conic, h_tan, other)
    assert any(k == 2 for _, k in roots)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_degree_check(rng, d):
    x = rational_normal_curve(d, d, rng)
    assert degree_check(x, cvec(rng, d + 1)) == d


def test_degree_check_recovers_incident_root(rng):
    x = twisted_cubic(rng)
    t0 = np.array([0.3 - 0.2j, 1.0])
    pt = x.evaluate(t0)
    h = null_space(pt[None, :]) @ cvec(rng, 3)
    finite, at_inf = curve_section_roots(x, h)
    assert len(finite) + at_inf == 3
    assert np.min(np.abs(finite - t0[0])) < 1e-8


def test_root_at_infinity():
    # x_3 = s^3 vanishes only at s = 0, to order three
    finite, at_inf = curve_section_roots(twisted_cubic(), [0, 0, 0, 1])
    assert at_inf == 3 and len(finite) == 0


def test_quadric_needs_codimension_two(rng):
    with pytest.raises(VarietyError):
        quadric_variety(2, 3, rng)
    v = quadric_variety(2, 4, rng)
    y = fit_variety(project_variety(ProjectionOperator.random(4, rng), v, rng), rng=rng)
    assert y.count == 1


@pytest.mark.parametrize("kind", ["conic3d", "quadric"])
def test_projected_gram_is_exact(rng, kind):
    m = 3 if kind == "conic3d" else 4
    x = conic3d(rng) if kind == "conic3d" else quadric_variety(2, 4, rng)
    p = ProjectionOperator.random(m, rng)
    g = projected_quadric_gram(p, x)
    fitted = quadric_from_form(fit_variety(project_variety(p, x, rng), rng=rng))
    assert proj_distance(g.Q, fitted.Q) < 1e-8
    for pt in sample_points(x, rng, 5):
        y = p.matrix @ pt
        assert abs(g.value(y / np.linalg.norm(y))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_property_fitted_forms_vanish(seed, d):
    rng = np.random.default_rng(seed)
    x = rational_normal_curve(d, max(d, 3), rng)
    y = fit_variety(x, rng=rng)
    assert y.residual(sample_points(x, rng, 1)[0]) < 1e-7
