import numpy as np
import pytest

from projrecover.epipolar import fundamental, reduced_fundamental, skew
from projrecover.exterior import null_space, proj_distance
from projrecover.projection import ProjectionOperator, center
from projrecover.recovery import (
    ProjectionPair,
    RecoveryError,
    align_pair,
    canonical_pair,
    lift_projection,
    pairs_equivalent,
    pgl_act,
)
from projrecover.varieties import conic3d, fit_variety, project_variety, sample_points

from conftest import cvec, random_pair


def same_pair(a, b, tol=1e-8):
    return (proj_distance(a.first.matrix, b.first.matrix) < tol
            and proj_distance(a.second.matrix, b.second.matrix) < tol)


def test_pgl_identity_and_action_law(rng):
    pair = random_pair(rng, 4)
    assert same_pair(pgl_act(np.eye(5), pair), pair)
    a, b = cvec(rng, 5, 5), cvec(rng, 5, 5)
    assert same_pair(pgl_act(a, pgl_act(b, pair)), pgl_act(a @ b, pair))


def test_pgl_rejects_singular(rng):
    pair = random_pair(rng, 3)
    with pytest.raises(RecoveryError):
        pgl_act(np.zeros((4, 4)), pair)
    with pytest.raises(RecoveryError):
        pgl_act(np.eye(3), pair)


def test_pair_validation(rng):
    p = ProjectionOperator.random(3, rng)
    with pytest.raises(RecoveryError):
        ProjectionPair(p, ProjectionOperator(2 * p.matrix))
    with pytest.raises(RecoveryError):
        ProjectionPair(p, ProjectionOperator.random(4, rng))


@pytest.mark.parametrize("m", [3, 4, 5])
def test_fundamental_invariant_on_orbit(rng, m):
    pair = random_pair(rng, m)
    acted = pgl_act(cvec(rng, m + 1, m + 1), pair)
    for k in {2, m - 1}:
        assert proj_distance(fundamental(pair.first, pair.second, k).entries,
                             fundamental(acted.first, acted.second, k).entries) < 1e-8


def test_canonical_from_standard_pair(rng):
    a, t = cvec(rng, 3, 3), cvec(rng, 3)
    p1 = ProjectionOperator(np.hstack([np.eye(3), np.zeros((3, 1))]))
    p2 = ProjectionOperator(np.column_stack([a, t]))
    can = canonical_pair(reduced_fundamental(p1, p2))
    back = reduced_fundamental(can.pair.first, can.pair.second)
    from projrecover.epipolar import classical_form

    assert proj_distance(classical_form(back), skew(t) @ a) < 1e-10


@pytest.mark.parametrize("m", [3, 4, 5])
def test_canonical_round_trip(rng, m):
    pair = random_pair(rng, m)
    f = reduced_fundamental(pair.first, pair.second)
    can = canonical_pair(f)
    back = reduced_fundamental(can.pair.first, can.pair.second)
    assert proj_distance(back.entries, f.entries) < 1e-8
    again = canonical_pair(back)
    assert same_pair(again.pair, can.pair)
    assert pairs_equivalent(pair, can.pair)


@pytest.mark.parametrize("m", [3, 4, 5])
def test_canonical_h_rank(rng, m):
    # projectively the image of H is a P^{m-2}; as a matrix H has rank m-1
    can = canonical_pair(reduced_fundamental(*_ops(random_pair(rng, m))))
    assert np.linalg.matrix_rank(can.H, tol=1e-8 * np.abs(can.H).max()) == m - 1
    assert np.linalg.norm(can.e2 @ can.H) < 1e-10


def _ops(pair):
    return pair.first, pair.second


def test_canonical_rejects_wrong_order_and_rank(rng):
    pair = random_pair(rng, 4)
    with pytest.raises(RecoveryError):
        canonical_pair(fundamental(pair.first, pair.second, 2))
    from projrecover.epipolar import FundamentalMatrix

    with pytest.raises(RecoveryError):
        canonical_pair(FundamentalMatrix(3, 2, cvec(rng, 3, 3)))


def test_align_fixed_point(rng):
    can = canonical_pair(reduced_fundamental(*_ops(random_pair(rng, 4))))
    al = align_pair(can.pair)
    assert np.allclose(al.A, np.eye(5), atol=1e-10)
    assert abs(al.lam - 1) < 1e-10
    assert np.linalg.norm(al.v) < 1e-10


@pytest.mark.parametrize("m", [3, 4, 5])
def test_align_random_pairs(rng, m):
    for _ in range(5):
        pair = random_pair(rng, m)
        al = align_pair(pair)
        assert al.eq1_residual < 1e-9 and al.eq2_residual < 1e-9
        # the canonical pair acted on by A^-1 gives back the input exactly
        rebuilt = pgl_act(al.A, al.canonical.pair)
        assert np.allclose(rebuilt.first.matrix, pair.first.matrix, atol=1e-9)
        assert np.allclose(rebuilt.second.matrix, pair.second.matrix, atol=1e-9)


def test_align_orbit(rng):
    pair = random_pair(rng, 4)
    acted = pgl_act(cvec(rng, 5, 5), pair)
    a, b = align_pair(pair).canonical, align_pair(acted).canonical
    # canonical forms agree blockwise; the relative scale of H and e2 is a gauge
    assert proj_distance(a.H, b.H) < 1e-8
    assert proj_distance(a.e2, b.e2) < 1e-8
    assert pairs_equivalent(a.pair, b.pair)


def test_pairs_equivalent(rng):
    pair = random_pair(rng, 4)
    assert pairs_equivalent(pair, pgl_act(cvec(rng, 5, 5), pair))
    assert not pairs_equivalent(pair, random_pair(rng, 4))


def lift_problem(rng, m=3):
    p_star = ProjectionOperator.random(m, rng)
    theta = cvec(rng, m - 1, m)
    gamma = theta @ p_star.matrix
    o = center(p_star)
    line = np.vstack([o, cvec(rng, m + 1)])
    x = conic3d(rng, m)
    q = sample_points(x, rng, 1)[0]
    y = fit_variety(project_variety(p_star, x, rng), rng=rng)
    return p_star, theta, gamma, line, q, y


def test_lift_projection_exact(rng):
    p_star, theta, gamma, line, q, y = lift_problem(rng)
    res = lift_projection(theta, gamma, line, q, y)
    p = res.operator.matrix
    assert np.linalg.norm(theta @ p - gamma) / np.linalg.norm(gamma) < 1e-10
    assert np.linalg.norm(p @ line[0]) < 1e-10
    assert y.residual(p @ q) < 1e-8
    # the rest is the ambiguity allowed by Theta: P - P* = n g^T with Theta n = 0
    diff = p - p_star.matrix
    n = null_space(theta)[:, 0]
    assert np.linalg.matrix_rank(diff, tol=1e-8) <= 1
    assert np.linalg.norm(diff - np.outer(n, n.conj() @ diff)) < 1e-8


def test_lift_projection_square_case(rng):
    p_star = ProjectionOperator.random(3, rng)
    theta = np.hstack([np.eye(2), np.zeros((2, 1))])
    _, _, _, _, q, _ = lift_problem(rng)
    x = conic3d(rng, 3)
    q = sample_points(x, rng, 1)[0]
    y = fit_variety(project_variety(p_star, x, rng), rng=rng)
    res = lift_projection(theta, theta @ p_star.matrix, [center(p_star)], q, y)
    assert res.linear_residual < 1e-12
    assert np.allclose(res.operator.matrix[:2], p_star.matrix[:2])


def test_lift_projection_perturbed(rng):
    p_star, theta, gamma, line, q, y = lift_problem(rng)
    noisy = gamma + 1e-3 * np.linalg.norm(gamma) * cvec(rng, *gamma.shape) / 4
    res = lift_projection(theta, noisy, line, q, y)
    assert res.linear_residual > 0


def test_lift_projection_validation(rng):
    p_star, theta, gamma, line, q, y = lift_problem(rng)
    with pytest.raises(RecoveryError):
        lift_projection(theta[:, :2], gamma, line, q, y)
    with pytest.raises(RecoveryError):
        lift_projection(theta, gamma, [cvec(rng, 4)], q, y)
