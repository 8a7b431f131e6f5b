import math

import numpy as np
import pytest

from mobiuskit import cones
from mobiuskit.liegroup import ParabolicElement
from mobiuskit.sphere import basepoint, chart, hausdorff, round_distance, sup_distance_to

CONE = cones.Cone(np.array([1.0, 0.3]), 0.5, 1.0)
SHORT = tuple(2 ** j for j in range(9))


def test_cone_rejects_degenerate_alpha():
    with pytest.raises(ValueError):
        cones.Cone(np.array([1.0, 0.0]), 1e-7, 1.0)
    with pytest.raises(ValueError):
        cones.Cone(np.array([0.0, 0.0]), 0.3, 1.0)


def test_sample_points_belong_and_include_vertex():
    X = cones.sample_cone(CONE, 0.02)
    assert np.all(CONE.contains(X.points))
    assert np.min(round_distance(X.points, basepoint(2))) == 0.0


def test_cone_membership_by_chart_geometry(rng):
    pts = rng.normal(size=(500, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    x = chart(pts)
    r = np.linalg.norm(x, axis=1)
    c = CONE.center
    ang = np.arccos(np.clip((x @ c) / r, -1, 1))
    expected = (r >= 1.0) & (ang <= 0.5)
    assert np.array_equal(CONE.contains(pts), expected)


def test_identity_action_reproduces_sample():
    X = cones.sample_cone(CONE, 0.02)
    Y = cones.act_on_cone(ParabolicElement(1.0, n=2), CONE, 0.02)
    assert hausdorff(X, Y) < 1e-12


def test_rotation_about_center_preserves_cone():
    c = np.array([0.0, 0.0, 1.0])
    cone = cones.Cone(c, 0.4, 1.0)
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    Y = cones.act_on_cone(ParabolicElement(1.0, R, np.zeros(3)), cone, 0.05)
    assert hausdorff(cones.sample_cone(cone, 0.05), Y) <= 2 * 0.05


def test_boost_moves_inner_rim():
    Y = cones.act_on_cone(ParabolicElement(4.0, n=2), CONE, 0.02)
    pts = Y.points[np.abs(Y.points[:, -1] - 1.0) > 1e-12]
    r = np.linalg.norm(chart(pts), axis=1)
    assert math.isclose(r.min(), 4.0 / CONE.lam, rel_tol=1e-9)


def test_sampled_sup_matches_exact_sup():
    p = ParabolicElement(3.0, v=np.array([-2.0, 1.0]))
    img = cones.act_on_cone(p, CONE, 0.005)
    exact = cones.predicted_sup_distance(p, CONE)
    assert exact - 0.01 <= sup_distance_to(img, basepoint(2)) <= exact + 1e-9


def test_homothety_up_shrinks_to_vertex():
    seq = cones.homothety_sequence(2, 1.0)
    v = cones.classify_sequence(seq, CONE)
    assert v.case_tag is cones.CaseTag.SHRINK_TO_VERTEX
    assert v.subball.alpha == CONE.alpha and np.allclose(v.subball.center, CONE.center)
    rep = cones.verify_verdict(seq, CONE, v, resolution=0.01)
    assert rep.passed and rep.final_residual < 0.05
    assert all(b <= a + 0.02 for a, b in zip(rep.residuals, rep.residuals[1:]))


def test_homothety_down_renormalizes():
    seq = cones.homothety_sequence(2, -1.0)
    v = cones.classify_sequence(seq, CONE)
    assert v.case_tag is cones.CaseTag.RENORMALIZABLE
    assert np.allclose(v.renorm.eps, [1.0 / k for k in seq.schedule])
    assert all(np.allclose(t, 0.0) for t in v.renorm.translations)
    assert v.renorm.limit.lam == 1.0
    rep = cones.verify_verdict(seq, CONE, v, resolution=0.01)
    assert rep.passed and rep.final_residual < 0.05


def test_translation_subball_avoids_repelling_direction():
    seq = cones.translation_sequence(np.array([1.0, 0.0]))
    cone = cones.Cone(np.array([-1.0, 0.2]), 0.6, 1.0)
    v = cones.classify_sequence(seq, cone)
    assert v.case_tag is cones.CaseTag.SHRINK_TO_VERTEX
    sub = v.subball
    # the limit direction of the translations is e1; the subball stays a margin away from -e1
    assert round_distance(sub.center, np.array([-1.0, 0.0])) - sub.alpha >= cones.DEFAULT_MARGIN - 1e-9
    rep = cones.verify_verdict(seq, cone, v, resolution=0.01)
    assert rep.passed and rep.final_residual < 0.05


def test_divergence_is_required():
    seq = cones.ParabolicSequence(lambda k: ParabolicElement(1.0, n=2), schedule=SHORT)
    with pytest.raises(cones.NonDivergentError):
        cones.classify_sequence(seq, CONE)


def test_schedule_limits_are_estimated():
    lim = cones.estimate_limits(cones.homothety_sequence(2, -1.0))
    assert lim.lam == 0.0 and lim.mu == 0.0


def test_halfline_examples():
    ks = np.array([2.0 ** j for j in range(4, 14)])
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    xs = ks[:, None] * e1
    v = cones.halfline_limit(xs, [e2] * len(ks))
    assert v.verdict == "ConvergesToVertex" and v.sup_distance < 0.01
    assert cones.halfline_limit(xs, [e1] * len(ks)).verdict == "Inconclusive"
    v = cones.halfline_limit(xs, [-e1] * len(ks))
    assert v.verdict == "ConvergesToVertex" and v.sup_distance < 0.01


def test_sampling_budget_is_enforced():
    with pytest.raises(cones.SamplingBudgetError):
        cones.sample_cone(cones.Cone(np.array([1.0, 0.0, 0.0]), 1.2, 1.0), 1e-4, max_points=1000)
