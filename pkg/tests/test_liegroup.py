import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from mobiuskit import liegroup as lg
from mobiuskit.sphere import act, chart, chart_inv


def _J(n):
    J = np.eye(n + 2)
    J[0, 0] = -1.0
    return J


# -- Lorentz form -------------------------------------------------------------------------

def test_identity_is_lorentz_with_zero_residual():
    ok, res = lg.lorentz_check(np.eye(4))
    assert ok and res == 0.0


def test_hand_built_boost_is_lorentz():
    c, s = math.cosh(1.0), math.sinh(1.0)
    m = np.eye(4)
    m[0, 0] = m[1, 1] = c
    m[0, 1] = m[1, 0] = s
    assert lg.lorentz_check(m)[0]


def test_perturbed_identity_rejected():
    m = np.eye(4)
    m[1, 2] += 1e-3
    assert not lg.lorentz_check(m, tol=1e-10)[0]
    with pytest.raises(lg.LorentzError):
        lg.GroupElement(m + 0.5)


def test_random_elements_preserve_form(rng):
    for _ in range(50):
        g = lg.random_group_element(3, rng)
        J = _J(3)
        # independent check: g^T J g = J, relative to |g|^2
        err = np.max(np.abs(g.mat.T @ J @ g.mat - J)) / np.linalg.norm(g.mat, 2) ** 2
        assert err < 1e-12


def test_group_product_and_inverse(rng):
    g = lg.random_group_element(2, rng)
    assert np.allclose((g @ g.inv()).mat, np.eye(4), atol=1e-9)


# -- parabolic subgroup -------------------------------------------------------------------

def test_parabolic_identity():
    assert np.allclose(lg.parabolic_to_matrix(lg.ParabolicElement(1.0, n=3)).mat, np.eye(5))


def test_parabolic_homothety_doubles_chart(rng):
    g = lg.parabolic_to_matrix(lg.ParabolicElement(2.0, n=3))
    x = rng.normal(size=(100, 3))
    assert np.allclose(chart(act(g, chart_inv(x))), 2.0 * x, rtol=1e-10, atol=1e-10)


def test_parabolic_translation_in_chart(rng):
    e1 = np.array([1.0, 0.0, 0.0])
    g = lg.parabolic_to_matrix(lg.ParabolicElement(1.0, v=e1))
    x = rng.normal(size=(100, 3))
    assert np.allclose(chart(act(g, chart_inv(x))), x + e1, atol=1e-10)


def test_parabolic_composition_matches_matrices(rng):
    for _ in range(20):
        a = lg.ParabolicElement(rng.uniform(0.5, 2), lg.random_orthogonal(2, rng), rng.normal(size=2))
        b = lg.ParabolicElement(rng.uniform(0.5, 2), lg.random_orthogonal(2, rng), rng.normal(size=2))
        lhs = lg.parabolic_to_matrix(a @ b).mat
        rhs = (lg.parabolic_to_matrix(a) @ lg.parabolic_to_matrix(b)).mat
        assert np.allclose(lhs, rhs, atol=1e-10)
        back = lg.parabolic_from_matrix(lg.parabolic_to_matrix(a))
        assert math.isclose(back.lam, a.lam, rel_tol=1e-10)
        assert np.allclose(back.v, a.v, atol=1e-10)


# -- algebra ------------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_basis_is_orthonormal_and_in_algebra(n):
    B = lg.algebra_basis(n)
    assert B.shape[0] == lg.algebra_dim(n) == (n + 1) * (n + 2) // 2
    G = np.einsum("kij,lij->kl", B, B)
    assert np.allclose(G, np.eye(B.shape[0]))
    J = _J(n)
    for X in B:
        assert np.allclose(X.T @ J + J @ X, 0.0)


def test_exp_of_zero_is_identity():
    assert np.allclose(lg.exp_algebra(np.zeros((4, 4))).mat, np.eye(4))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_nilpotent_exponential(vals):
    n = 3
    X = lg.assemble(plus=np.array(vals), n=n)
    scale = max(1.0, float(np.max(np.abs(X))))
    assert np.max(np.abs(X @ X @ X)) <= 4 * np.finfo(float).eps * scale ** 3
    E = lg.exp_algebra(X).mat
    assert np.max(np.abs(E - (np.eye(n + 2) + X + X @ X / 2))) < 1e-12 * max(1.0, np.max(np.abs(X)) ** 2)


def test_scal_exponential_is_boost_scaling_chart(rng):
    t = 0.8
    g = lg.exp_algebra(lg.assemble(scal=t, n=2))
    x = rng.normal(size=(20, 2))
    img = chart(act(g, chart_inv(x)))
    ratio = np.linalg.norm(img, axis=1) / np.linalg.norm(x, axis=1)
    assert np.allclose(ratio, ratio[0]) and math.isclose(abs(math.log(ratio[0])), t, rel_tol=1e-10)


def test_exp_matches_scipy(rng):
    for _ in range(10):
        X = lg.from_coords(rng.normal(size=lg.algebra_dim(3)), 3)
        assert np.allclose(lg.exp_algebra(X).mat, scipy.linalg.expm(X), rtol=1e-10, atol=1e-10)


def test_decompose_assemble_round_trip(rng):
    plus, scal = rng.normal(size=3), 0.4
    rot = lg.random_orthogonal(3, rng)
    rot = rot - rot.T
    minus = rng.normal(size=3)
    X = lg.assemble(plus, scal, rot, minus, n=3)
    p2, s2, r2, m2 = lg.decompose(X)
    assert np.allclose(p2, plus) and math.isclose(s2, scal) and np.allclose(r2, rot) and np.allclose(m2, minus)


# -- adjoint ------------------------------------------------------------------------------

def test_adjoint_of_identity():
    assert np.allclose(lg.adjoint(lg.GroupElement.identity(2)), np.eye(lg.algebra_dim(2)))


def test_adjoint_boost_weights():
    n, t = 2, 1.0
    Ad = lg.adjoint(lg.boost(t, n))
    labels = lg.basis_labels(n)
    for i, lab in enumerate(labels):
        e = np.zeros(len(labels))
        e[i] = 1.0
        img = Ad @ e
        if lab.startswith("plus"):
            assert np.allclose(img, math.exp(-t) * e)
        elif lab.startswith("minus"):
            assert np.allclose(img, math.exp(t) * e)


def test_adjoint_is_conjugation_and_homomorphism(rng):
    n = 3
    g, h = lg.random_group_element(n, rng, 2.0), lg.random_group_element(n, rng, 2.0)
    X = rng.normal(size=lg.algebra_dim(n))
    direct = lg.coords(g.mat @ lg.from_coords(X, n) @ g.inv().mat, n)
    assert np.allclose(lg.adjoint(g) @ X, direct, rtol=1e-9, atol=1e-9)
    assert np.allclose(lg.adjoint(g @ h), lg.adjoint(g) @ lg.adjoint(h), rtol=1e-9, atol=1e-8)


# -- KAK ----------------------------------------------------------------------------------

def test_kak_identity_is_degenerate():
    dec = lg.kak(lg.GroupElement.identity(2))
    assert dec.t == 0.0 and dec.degenerate
    assert np.allclose(dec.k1.mat, np.eye(4)) and np.allclose(dec.k2.mat, np.eye(4))


def test_kak_of_boost():
    dec = lg.kak(lg.boost(2.0, 3))
    assert math.isclose(dec.t, 2.0, rel_tol=1e-12)
    assert np.allclose(dec.k1.mat, np.eye(5)) and np.allclose(dec.k2.mat, np.eye(5))


def test_kak_factors_are_compact_and_reconstruct(rng):
    for n in (1, 2, 3):
        for _ in range(30):
            g = lg.random_group_element(n, rng)
            dec = lg.kak(g)
            assert lg.kak_residual(g, dec) < 1e-9
            for k in (dec.k1, dec.k2):
                assert abs(k.mat[0, 0] - 1.0) < 1e-12
                assert np.allclose(k.mat[1:, 1:] @ k.mat[1:, 1:].T, np.eye(n + 1), atol=1e-12)
            # translation length from the orbit of the hyperboloid point e0
            assert math.isclose(dec.t, math.acosh(abs(g.mat[0, 0])), rel_tol=1e-9, abs_tol=1e-9)


def test_log_group_inverts_exp_and_guards(rng):
    X = lg.from_coords(0.1 * rng.normal(size=lg.algebra_dim(2)), 2)
    assert np.allclose(lg.log_group(lg.exp_algebra(X)), X, atol=1e-12)
    with pytest.raises(ValueError):
        lg.log_group(lg.boost(5.0, 2))
