import math

import numpy as np
import pytest

from mobiuskit import kleinian as kl
from mobiuskit.liegroup import GroupElement, boost, random_group_element
from mobiuskit.sphere import SampledSet, act, basepoint, hausdorff, round_distance, sphere_grid


def test_word_ball_sizes():
    G = kl.schottky_group(2.5, 2)
    assert len(kl.word_ball(G, 0)) == 1
    assert len(kl.word_ball(G, 3)) == 1 + 4 + 12 + 36
    assert len(kl.word_ball(kl.GroupPresentation((boost(1.0, 2),)), 5)) == 11


def test_words_are_reduced_and_evaluate(rng):
    G = kl.schottky_group(2.5, 2)
    letters = [g for _, g in G.letters()]
    for w in kl.enumerate_words(G, 3):
        assert all(a ^ 1 != b for a, b in zip(w.letters, w.letters[1:]))
        m = np.eye(4)
        for i in w.letters:
            m = m @ letters[i].mat
        assert np.allclose(m, w.element.mat, rtol=1e-9, atol=1e-9)


def test_budget_is_enforced():
    with pytest.raises(kl.BudgetExceeded):
        kl.enumerate_words(kl.schottky_group(2.5, 2), 8, max_elements=100)


def test_schottky_generators_preserve_hemisphere():
    G = kl.schottky_group(2.5, 2)
    assert all(kl.preserves_hemisphere(g) for g in G.generators)
    r = kl.schottky_disk_radius(2.5)
    assert math.isclose(math.cos(r), math.tanh(1.25))
    assert math.isclose(kl.schottky_separation(2.5), math.pi / 2 - 2 * r)


def test_trivial_group_has_empty_limit_set():
    assert kl.limit_set(kl.GroupPresentation.trivial(2), 4).empty


def test_cyclic_loxodromic_limit_set_is_two_fixed_points():
    g = boost(2.0, 2)
    G = kl.GroupPresentation((g,))
    for method in ("LoxodromicFixedPoints", "OrbitAccumulation"):
        L = kl.limit_set(G, 8, method)
        o = basepoint(2)
        d = np.minimum(round_distance(L.points, o), round_distance(L.points, -o))
        assert np.max(d) < 1e-3
        assert np.min(round_distance(L.points, o)) < 1e-3 and np.min(round_distance(L.points, -o)) < 1e-3


def test_attracting_fixed_point_from_eigenvector(rng):
    g = random_group_element(2, rng, 3.0)
    p = kl.attracting_fixed_point(g)
    assert p is not None
    assert round_distance(act(g, p), p) < 1e-8
    # iterating any generic point converges to it
    x = np.array([0.3, -0.5, 0.81])
    x /= np.linalg.norm(x)
    # translation length is the log of the top eigenvalue, not the KAK parameter
    ell = math.log(np.max(np.abs(np.linalg.eigvals(g.mat))))
    for _ in range(int(20 / ell) + 1):
        x = act(g, x)
    assert round_distance(x, p) < 1e-6


def test_schottky_limit_set_inside_disks():
    t = 2.5
    L = kl.limit_set(kl.schottky_group(t, 2), 8)
    centers, radius = kl.schottky_disks(t, 2)
    d = np.min(np.stack([round_distance(L.points, c) for c in centers]), axis=0)
    assert np.max(d) <= radius + 1e-6


def test_methods_agree_within_covering_radius():
    G = kl.schottky_group(2.5, 2)
    a, b = kl.limit_set(G, 6, "OrbitAccumulation"), kl.limit_set(G, 6, "LoxodromicFixedPoints")
    assert hausdorff(a.sampled(), b.sampled()) < 3 * max(a.covering_radius(), b.covering_radius())


def test_density_of_full_grid():
    eps = 0.1
    grid = kl.boundary_grid(2, eps)
    L = kl.LimitSetApprox(grid, "OrbitAccumulation", 0)
    assert kl.density_report(L, eps).dense


def test_two_points_not_dense():
    pts = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    rep = kl.density_report(kl.LimitSetApprox(pts, "OrbitAccumulation", 0), 0.5)
    assert not rep.dense
    assert rep.gap > math.pi - 0.2


def test_schottky_gap_exceeds_separation():
    L = kl.limit_set(kl.schottky_group(2.5, 2), 8)
    rep = kl.density_report(L, 0.05)
    assert not rep.dense and rep.gap >= kl.schottky_separation(2.5)


def test_maximality_examples():
    tr = kl.maximality_verdict(kl.translation_group(2), kl.OmegaFixture("sphere-minus-point", 2))
    assert tr.verdict == "Maximal"
    sch = kl.maximality_verdict(kl.schottky_group(2.5, 2), kl.OmegaFixture("hemisphere", 2))
    assert sch.verdict == "NotMaximal" and sch.gap >= kl.schottky_separation(2.5)
    triv = kl.maximality_verdict(kl.GroupPresentation.trivial(2), kl.OmegaFixture("hemisphere", 2))
    assert triv.verdict == "NotMaximal"
    rot = kl.GroupPresentation((kl.plane_rotation(3, 2, 3, 2 * math.pi / 5),))
    circ = kl.maximality_verdict(rot, kl.OmegaFixture("sphere-minus-sphere", 3, 2))
    assert circ.verdict == "Maximal"


def test_simple_divergence_examples():
    n = 2
    pure = kl.simple_divergence([boost(j, n) for j in range(1, 12)])
    assert pure.simple
    assert np.allclose(pure.l1, np.eye(n + 2), atol=1e-8) and np.allclose(pure.l2, np.eye(n + 2), atol=1e-8)
    o = basepoint(n)
    assert np.allclose(pure.p_plus, o) and np.allclose(pure.p_minus, -o)
    r = kl.plane_rotation(n, 0, 2, 0.9)
    rot = kl.simple_divergence([r @ boost(j, n) for j in range(1, 12)])
    assert rot.simple and np.allclose(rot.l1, r.mat, atol=1e-8)
    assert np.allclose(rot.p_plus, act(r, o), atol=1e-8)
    alt = kl.simple_divergence([(r if j % 2 else GroupElement.identity(n)) @ boost(j, n) for j in range(1, 12)])
    assert not alt.simple


def test_bounded_sequence_rejected():
    with pytest.raises(ValueError):
        kl.simple_divergence([boost(1.0, 2)] * 6)


def test_sigma_hyperplane_tangency_and_sign(rng):
    th = rng.uniform(0, 2 * math.pi, 20)
    boundary = np.column_stack([np.zeros_like(th), np.cos(th), np.sin(th)])
    inner = rng.normal(size=(50, 3))
    inner /= np.linalg.norm(inner, axis=1, keepdims=True)
    inner[:, 0] = np.abs(inner[:, 0]) + 1e-3
    inner /= np.linalg.norm(inner, axis=1, keepdims=True)
    for xi in boundary:
        x = kl.hemisphere_to_projective(xi)
        assert abs(kl.q1n(x.w, x.w)) < 1e-12
        H = kl.sigma_hyperplane(x)
        assert abs(H.functional(x.w)) < 1e-12
        for eta in inner:
            assert H.functional(kl.hemisphere_to_projective(eta).w) < 0
    with pytest.raises(ValueError):
        kl.sigma_hyperplane(kl.hemisphere_to_projective(inner[0]))


def test_properness_examples():
    sample = SampledSet(sphere_grid(2, 0.8))
    tr = kl.properness_probe(kl.translation_group(2), SampledSet(np.vstack([sample.points, basepoint(2)])), 3)
    assert not tr.free
    assert kl.properness_probe(kl.GroupPresentation.trivial(2), sample, 3).passed
    dod = sample.points[sample.points[:, 0] > 0.3]
    assert kl.properness_probe(kl.schottky_group(2.5, 2), SampledSet(dod), 4).free
