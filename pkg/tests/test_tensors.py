import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from conftest import randers_const, randers_varying, rel_err, samples

import anisotropic as A
from anisotropic import oracles


def sq(x, v):
    return jnp.sum(v**2)


def x_only(x, v):
    return jnp.sin(x[0]) * x[1] ** 2


# --- domains and samples


def test_chart_membership_and_openness():
    chart = A.ChartDomain(2, (-1.0, -1.0), (1.0, 1.0))
    assert chart.contains(np.zeros(2))
    assert not chart.contains(np.array([1.0, 0.0]))
    assert chart.is_open_at(np.array([0.999, 0.0]), eps=1e-4)


def test_conic_domain_rejects_zero_and_is_conic():
    dom = A.whole_chart(2)
    assert not dom.contains(np.zeros(2), np.zeros(2))
    assert dom.is_conic_at(np.zeros(2), np.array([0.3, -1.0]))
    assert dom.direction_at(np.array([0.5, 0.5])) is not None


def test_tiny_direction_rejected():
    with pytest.raises(A.DomainError):
        A.TangentSample([0.0, 0.0], [1e-13, 0.0])


def test_random_samples_are_seeded():
    dom = A.whole_chart(2, (-1.0, -1.0), (1.0, 1.0))
    a = A.random_samples(dom, np.random.default_rng(3), 5)
    b = A.random_samples(dom, np.random.default_rng(3), 5)
    assert all(np.array_equal(s.x, t.x) and np.array_equal(s.v, t.v) for s, t in zip(a, b))


def test_tensor_value_shape_checked():
    with pytest.raises(ValueError):
        A.TensorValue((1, 1), np.zeros((2, 3)))


# --- fiber and base derivatives


def test_fiber_derivative_quadratic():
    s = A.TangentSample([0.1, 0.2], [1.0, -2.0])
    z = np.array([0.5, 3.0])
    assert A.fiber_derivative(sq, s, [z]) == pytest.approx(2 * s.v @ z, rel=1e-14)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_fiber_derivative_of_v_independent_field(order):
    s = A.TangentSample([0.3, 0.7], [1.0, 1.0])
    assert A.fiber_derivative(x_only, s, np.eye(2)[[0] * order]) == 0.0


def test_fiber_derivative_order_mismatch():
    with pytest.raises(ValueError):
        A.fiber_derivative(sq, A.TangentSample([0, 0], [1, 0]), [[1.0, 0.0]], order=2)


def test_fiber_derivative_randers_vs_fd():
    # [DERIVED] central FD, step 1e-4 with one Richardson step
    m = randers_const()
    s = A.TangentSample([0.0, 0.0], [1.0, 0.0])
    z = np.array([0.0, 1.0])
    ad = A.fiber_derivative(m.L, s, [z, z])
    fd = oracles.fiber_fd(lambda x, v: A.evaluate_L(m, x, v), s.x, s.v, [z, z])
    assert ad == pytest.approx(fd, rel=1e-6)
    # closed form: 2 g_22 = 2 * F / |v| = 3
    assert ad == pytest.approx(3.0, rel=1e-13)


def test_fiber_derivative_outside_domain():
    m = A.euclidean(2, A.whole_chart(2, (-1.0, -1.0), (1.0, 1.0)))
    with pytest.raises(A.DomainError):
        A.fiber_derivative(m.L, A.TangentSample([2.0, 0.0], [1.0, 0.0]), [[1.0, 0.0]], domain=m.domain)


def test_fiber_derivative_nonfinite():
    with pytest.raises(A.EvaluationError):
        A.fiber_derivative(lambda x, v: jnp.sqrt(v[0]), A.TangentSample([0, 0], [-1.0, 1.0]), [[1.0, 0.0]])


def test_base_derivative_trivial():
    s = A.TangentSample([0.4, -0.2], [1.0, 2.0])
    assert A.base_derivative(lambda x, v: x[0], s, [1.0, 0.0]) == 1.0
    assert A.base_derivative(sq, s, [0.3, 0.4]) == 0.0


def test_base_derivative_riemannian():
    a = A.Polynomial.from_table([{"coeff": np.eye(2), "powers": [0, 0]}, {"coeff": np.eye(2), "powers": [1, 0]}], 2)
    m = A.riemannian(a, 2)
    s = A.TangentSample([0.0, 0.0], [1.0, 0.0])
    ad = A.base_derivative(m.L, s, [1.0, 0.0])
    assert ad == pytest.approx(1.0, rel=1e-14)
    fd = oracles.fd_directional(lambda x: A.evaluate_L(m, x, s.v), s.x, [[1.0, 0.0]])
    assert ad == pytest.approx(fd, rel=1e-6)


def test_ad_matches_fd_for_registry(registry_metric):
    L = lambda x, v: A.evaluate_L(registry_metric, x, v)  # noqa: E731
    rng = np.random.default_rng(1)
    for s in samples(registry_metric, 6, seed=2):
        z1, z2 = rng.normal(size=(2, 2))
        h = 1e-4 * max(1.0, np.linalg.norm(s.v))
        for dirs in ([z1], [z1, z2]):
            ad = A.fiber_derivative(registry_metric.L, s, dirs)
            fd = oracles.fiber_fd(L, s.x, s.v, dirs, h=h)
            assert abs(ad - fd) <= 1e-6 * max(1.0, abs(fd))
        ad = A.base_derivative(registry_metric.L, s, z1)
        fd = oracles.fd_directional(lambda x: L(x, s.v), s.x, [z1])
        assert abs(ad - fd) <= 1e-6 * max(1.0, abs(fd))


@given(st.integers(0, 10_000))
def test_mixed_partials_symmetric(seed):
    m = randers_varying()
    rng = np.random.default_rng(seed)
    s = samples(m, 1, seed=seed)[0]
    z1, z2 = rng.normal(size=(2, 2))
    a = A.fiber_derivative(m.L, s, [z1, z2])
    b = A.fiber_derivative(m.L, s, [z2, z1])
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


# --- vertical derivation


def test_vertical_derivation_of_lift_is_zero():
    T = A.lift_tensor(lambda x: jnp.outer(x, x), (0, 2), 2)
    val = A.vertical_derivation(T).evaluate(A.TangentSample([0.2, 0.3], [1.0, -1.0]))
    assert val.valence == (0, 3)
    assert np.all(val.components == 0.0)


def test_vertical_derivation_of_L_and_g(randers):
    s = samples(randers, 1, seed=5)[0]
    dL = A.vertical_derivation(A.lagrangian_field(randers)).evaluate(s)
    g = A.fundamental_tensor(randers, s)
    assert dL.valence == (0, 1)
    np.testing.assert_allclose(dL.components, 2 * g @ s.v, atol=1e-12)
    dg = A.vertical_derivation(A.fundamental_field(randers)).evaluate(s)
    np.testing.assert_allclose(dg.components, 2 * A.cartan_tensor(randers, s), atol=1e-12)


def test_vertical_slot_position():
    # (1, 1) field T^i_j = v^i w_j: the new index lands at axis 1 (first covariant slot)
    w = jnp.array([1.0, 2.0])
    T = A.AnisotropicTensorField(lambda x, v: jnp.outer(v, w), (1, 1), 2)
    dT = A.vertical_derivation(T).evaluate(A.TangentSample([0, 0], [3.0, 4.0])).components
    expected = np.einsum("ik,j->ikj", np.eye(2), np.asarray(w))
    np.testing.assert_array_equal(dT, expected)


# --- products and contractions


def test_tensor_product_unit_and_forms():
    one = A.constant_tensor(1.0, (0, 0))
    g = A.fundamental_field(randers_const())
    s = A.TangentSample([0, 0], [1.0, 0.3])
    np.testing.assert_array_equal(A.tensor_product(one, g).evaluate(s).components, g.evaluate(s).components)
    theta, omega = A.constant_tensor([1.0, 0.0], (0, 1)), A.constant_tensor([0.0, 1.0], (0, 1))
    M = A.tensor_product(theta, omega).evaluate(s).components
    np.testing.assert_array_equal(M, [[0.0, 1.0], [0.0, 0.0]])


def test_product_contraction_gives_trace_times_g(randers):
    # [DERIVED] direct component arithmetic: g^{-1} (x) g (x) g contracted twice over
    # (0, 0) is delta^j_j g_cd = n g_cd
    s = samples(randers, 1, seed=3)[0]
    ginv = A.AnisotropicTensorField(lambda x, v, m: jnp.linalg.inv(A.finsler.fundamental(m, x, v)), (2, 0), 2, randers)
    g = A.fundamental_field(randers)
    T = A.tensor_product(A.tensor_product(ginv, g), g)
    val = A.contract(A.contract(T, 0, 0), 0, 0).evaluate(s).components
    gm, gi = A.fundamental_tensor(randers, s), A.inverse_fundamental_tensor(randers, s)
    direct = np.einsum("ij,ib,cd->jbcd", gi, gm, gm)
    np.testing.assert_allclose(val, np.einsum("jjcd->cd", direct), atol=1e-12)
    np.testing.assert_allclose(val, 2.0 * gm, atol=1e-12)


def test_contract_identity_and_pairing():
    s = A.TangentSample([0, 0], [1.0, 2.0])
    assert A.contract(A.identity_tensor(3)).evaluate(A.TangentSample([0, 0, 0], [1, 0, 0])).components == 3.0
    X = A.lift_vector_field(A.constant_field([2.0, -1.0]), 2)
    theta = A.constant_tensor([3.0, 5.0], (0, 1))
    assert A.contract(A.tensor_product(X, theta)).evaluate(s).components == pytest.approx(1.0)


def test_contract_ginv_g_is_identity(randers):
    # [DERIVED] matrix inverse oracle
    s = samples(randers, 1, seed=4)[0]
    gi = np.linalg.inv(A.fundamental_tensor(randers, s))
    ginv = A.constant_tensor(gi, (2, 0))
    T = A.contract(A.tensor_product(ginv, A.fundamental_field(randers)), 1, 0)
    np.testing.assert_allclose(T.evaluate(s).components, np.eye(2), atol=1e-10)


def test_contract_bad_slots():
    with pytest.raises(ValueError):
        A.contract(A.constant_tensor([1.0, 0.0], (0, 1)))
    with pytest.raises(ValueError):
        A.contract(A.identity_tensor(2), 1, 0)


def test_vertical_derivation_is_a_derivation(randers):
    s = samples(randers, 1, seed=8)[0]
    g, C = A.fundamental_field(randers), A.cartan_field(randers)
    lhs = A.vertical_derivation(A.tensor_product(g, C)).evaluate(s).components  # axes: new k first
    dg = A.vertical_derivation(g).evaluate(s).components
    dC = A.vertical_derivation(C).evaluate(s).components
    gv, Cv = g.evaluate(s).components, C.evaluate(s).components
    rhs = np.einsum("kab,cde->kabcde", dg, Cv) + np.einsum("ab,kcde->kabcde", gv, dC)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8


def test_contract_commutes_with_vertical(randers):
    s = samples(randers, 1, seed=9)[0]
    ginv = A.AnisotropicTensorField(lambda x, v, m: jnp.linalg.inv(A.finsler.fundamental(m, x, v)), (2, 0), 2, randers)
    T = A.tensor_product(ginv, A.cartan_field(randers))  # (2, 3)
    a = A.vertical_derivation(A.contract(T, 1, 2)).evaluate(s).components
    # the vertical slot sits at axis r, so covariant slot j of T is slot j + 1 afterwards
    b = A.contract(A.vertical_derivation(T), 1, 3).evaluate(s).components
    assert rel_err(a, b) <= 1e-8


def test_evaluation_is_deterministic(randers):
    s = samples(randers, 1, seed=1)[0]
    C = A.cartan_field(randers)
    assert np.array_equal(C.evaluate(s).components, C.evaluate(s).components)
