import numpy as np
import pytest

from netdiff.core import (AbstractState, ConjugateError, conjugate,
                          conjugate_gradient, dilate, gamma_fn, graph_instance,
                          homogeneous_norm, homogeneous_weights, lyapunov,
                          pi_fn, potential, potential_gradient, scalar_instance,
                          sign_selection, signed_power)
from netdiff.gains import GainSet
from netdiff.graph import ring


def rand_zero_mean(inst, rng, scale=1.0):
    return scale * inst.project(rng.standard_normal(inst.n))


def test_signed_power():
    x = np.array([-4.0, -1.0, 0.0, 0.25, 9.0])
    np.testing.assert_allclose(signed_power(x, 0.5), [-2.0, -1.0, 0.0, 0.5, 3.0])
    np.testing.assert_allclose(signed_power(x, 0.0), [-1.0, -1.0, 0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        signed_power(x, -1.0)


def test_homogeneous_weights_and_norm():
    r = homogeneous_weights(3)
    np.testing.assert_array_equal(r, [2, 2, 2, 1, 1, 1])
    x = np.array([4.0, 0.0, -9.0, 2.0, 0.0, -3.0])
    # sum |x_i|^(1/r_i): sqrt on the first block, plain on the second
    assert homogeneous_norm(x, r) == pytest.approx(2 + 3 + 2 + 3)
    with pytest.raises(ValueError):
        homogeneous_norm(x[:4], r)
    x0, x1 = dilate([1.0, -1.0], [2.0], 3.0)
    np.testing.assert_allclose(x0, [9.0, -9.0])
    np.testing.assert_allclose(x1, [6.0])


def test_potential_oracles():
    g = ring(5)
    assert potential(g, np.zeros(5)) == 0.0
    e0 = np.array([1.0, -1.0, 0.0, 0.0, 0.0])
    # edge differences on the 5-cycle: {2, 1, 0, -1, 0, ...} up to orientation
    want = (2.0 / 3.0) * (2.0 ** 1.5 + 1.0 + 1.0)
    assert potential(g, e0) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        potential(g, np.ones(5))      # not zero mean


def test_scalar_prototype_oracles():
    inst = scalar_instance()
    assert inst.potential(np.array([1.0])) == pytest.approx(2.0 / 3.0)
    np.testing.assert_allclose(inst.potential_gradient(np.array([1.0])), [1.0])
    np.testing.assert_allclose(inst.potential_gradient(np.array([-4.0])), [-2.0])
    # U*(y) = |y|^3 / 3
    for y in (0.5, -0.5, 1.0, -1.0, 2.0, -2.0):
        assert inst.conjugate(np.array([y])) == pytest.approx(abs(y) ** 3 / 3.0,
                                                              rel=1e-4)
    assert inst.conjugate(np.array([0.0])) == 0.0
    # grad U*(y) = sign(y) y^2
    np.testing.assert_allclose(inst.conjugate_gradient(np.array([3.0])), [9.0],
                               rtol=1e-6)


def test_gradient_matches_finite_differences():
    g = ring(5)
    inst = graph_instance(g)
    rng = np.random.default_rng(1)
    h = 1e-7
    checked = 0
    while checked < 20:
        e0 = rand_zero_mean(inst, rng)
        if np.min(np.abs(inst.D.T @ e0)) < 1e-3:
            continue                      # keep away from gradient kinks
        grad = inst.potential_gradient(e0)
        for k in range(5):
            d = np.zeros(5)
            d[k] = h
            d = inst.project(d)
            fd = (inst.potential(e0 + d) - inst.potential(e0 - d)) / 2.0
            assert fd == pytest.approx(float(grad @ d), rel=1e-5, abs=1e-12)
        checked += 1


def test_fenchel_young_property():
    g = ring(5)
    inst = graph_instance(g)
    rng = np.random.default_rng(2)
    for _ in range(100):
        x0 = rand_zero_mean(inst, rng, scale=float(rng.uniform(0.1, 5.0)))
        x1 = rand_zero_mean(inst, rng, scale=float(rng.uniform(0.1, 5.0)))
        gap = inst.potential(x0) + inst.conjugate(x1) - float(x0 @ x1)
        assert gap >= -1e-8
    # equality at x1 = grad U(x0)
    for _ in range(20):
        x0 = rand_zero_mean(inst, rng)
        x1 = inst.potential_gradient(x0)
        gap = inst.potential(x0) + inst.conjugate(x1) - float(x0 @ x1)
        assert abs(gap) <= 1e-6 * max(1.0, inst.potential(x0))


def test_conjugate_inverts_gradient():
    g = ring(5)
    inst = graph_instance(g)
    rng = np.random.default_rng(3)
    for _ in range(20):
        # across seven orders of magnitude: the solver rescales internally
        x0 = rand_zero_mean(inst, rng, scale=10.0 ** rng.uniform(-4, 3))
        back = inst.conjugate_gradient(inst.potential_gradient(x0))
        assert np.linalg.norm(back - x0) <= 1e-6 * max(1e-8, np.linalg.norm(x0))


def test_homogeneity_degrees():
    g = ring(5)
    inst = graph_instance(g)
    rng = np.random.default_rng(4)
    for lam in (0.5, 2.0):
        for _ in range(10):
            x0 = rand_zero_mean(inst, rng)
            x1 = rand_zero_mean(inst, rng)
            y0, y1 = dilate(x0, x1, lam)
            assert inst.potential(y0) == pytest.approx(lam ** 3 * inst.potential(x0),
                                                       rel=1e-10)
            assert inst.conjugate(y1) == pytest.approx(lam ** 3 * inst.conjugate(x1),
                                                       rel=1e-4)
            assert inst.lyapunov(y0, y1, 7.0) == pytest.approx(
                lam ** 3 * inst.lyapunov(x0, x1, 7.0), rel=1e-4)
            assert inst.gamma_fn(y0, y1) == pytest.approx(
                lam ** 2 * inst.gamma_fn(x0, x1), rel=1e-10)


def test_euler_identity():
    # <grad U(e0), e0> = (3/2) U(e0) for the degree-3/2 potential
    inst = graph_instance(ring(5))
    rng = np.random.default_rng(5)
    for _ in range(20):
        e0 = rand_zero_mean(inst, rng)
        assert float(inst.potential_gradient(e0) @ e0) == pytest.approx(
            1.5 * inst.potential(e0), rel=1e-10)


def test_sign_selection_and_coercivity():
    g = ring(5)
    inst = graph_instance(g)
    assert np.linalg.norm(sign_selection(g, np.zeros(5))) == 0.0
    rng = np.random.default_rng(6)
    for _ in range(200):
        e0 = rand_zero_mean(inst, rng, scale=float(rng.uniform(0.01, 10.0)))
        lhs = float(e0 @ inst.sign_selection(e0))
        assert lhs >= inst.c_s * np.linalg.norm(e0) - 1e-9


def test_lyapunov_positive_definite_and_beta_floor():
    g = ring(5)
    inst = graph_instance(g)
    rng = np.random.default_rng(8)
    for _ in range(50):
        x0 = rand_zero_mean(inst, rng)
        x1 = rand_zero_mean(inst, rng)
        v = inst.lyapunov(x0, x1, 7.0)
        assert v > 0
        # beta inequality: U + (1+beta) U* - 2 <x0, x1> >= 0 at beta = 7
        assert v - float(x0 @ x1) >= -1e-8
    with pytest.raises(ValueError):
        inst.lyapunov(np.zeros(5), np.zeros(5), 6.9)


def test_gamma_and_pi_functions():
    g = ring(5)
    inst = graph_instance(g)
    rng = np.random.default_rng(9)
    gains = GainSet(4.0, 13.0, 1.0, 4.0)
    x0 = rand_zero_mean(inst, rng)
    x1 = rand_zero_mean(inst, rng)
    diff = inst.potential_gradient(x0) - x1
    assert gamma_fn(g, AbstractState(x0, x1)) == pytest.approx(float(diff @ diff))
    # Gamma vanishes exactly on the invariant manifold x1 = grad U(x0)
    assert inst.gamma_fn(x0, inst.potential_gradient(x0)) == pytest.approx(0.0, abs=1e-20)
    # closed form of Pi against its definition
    kt1 = gains.kt1
    w = (1.0 + gains.beta) * inst.conjugate_gradient(x1) - x0
    want = -kt1 * float(w @ inst.sign_selection(x0)) + (kt1 / gains.k1) * np.linalg.norm(w)
    assert pi_fn(g, AbstractState(x0, x1), gains) == pytest.approx(want, rel=1e-6)


def test_module_wrappers_and_caching():
    g = ring(5)
    assert graph_instance(g) is graph_instance(ring(5))
    rng = np.random.default_rng(10)
    inst = graph_instance(g)
    x1 = rand_zero_mean(inst, rng)
    assert conjugate(g, x1) == pytest.approx(inst.conjugate(x1), rel=1e-8)
    np.testing.assert_allclose(conjugate_gradient(g, x1), inst.conjugate_gradient(x1),
                               rtol=1e-6, atol=1e-9)
    x0 = rand_zero_mean(inst, rng)
    assert lyapunov(g, AbstractState(x0, x1), 7.0) == pytest.approx(
        inst.lyapunov(x0, x1, 7.0), rel=1e-6)
    np.testing.assert_allclose(potential_gradient(g, x0), inst.potential_gradient(x0))


def test_conjugate_error_carries_diagnostics():
    err = ConjugateError("no convergence", best_value=1.5, grad_norm=0.2)
    assert err.best_value == 1.5
    assert err.grad_norm == 0.2
