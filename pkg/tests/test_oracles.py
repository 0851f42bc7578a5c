import numpy as np
import pytest

from anisotropic import oracles


def sphere_a(x):
    return 4.0 / (1.0 + x @ x) ** 2 * np.eye(len(x))


def test_fd_jacobian_of_polynomial():
    f = lambda p: np.array([p[0] ** 2 * p[1], np.sin(p[1])])  # noqa: E731
    x = np.array([0.3, 0.7])
    exact = np.array([[2 * x[0] * x[1], x[0] ** 2], [0.0, np.cos(x[1])]])
    np.testing.assert_allclose(oracles.fd_jacobian(f, x), exact, atol=1e-9)


def test_fiber_fd_second_derivative():
    L = lambda x, v: (v @ v) ** 2  # noqa: E731
    v = np.array([1.0, 2.0])
    # d^2/dv^2 of |v|^4 along (e1, e1) = 4|v|^2 + 8 v1^2
    assert oracles.fiber_fd(L, np.zeros(2), v, [[1.0, 0.0], [1.0, 0.0]]) == pytest.approx(28.0, rel=1e-7)


def test_levi_civita_sphere_closed_form():
    x = np.array([0.3, -0.4])
    dphi = -2 * x / (1 + x @ x)
    e = np.eye(2)
    exact = np.einsum("ij,k->ijk", e, dphi) + np.einsum("ik,j->ijk", e, dphi) - np.einsum("jk,i->ijk", e, dphi)
    np.testing.assert_allclose(oracles.levi_civita(sphere_a, x), exact, atol=1e-8)


def test_riemann_sphere_constant_curvature():
    x = np.array([0.2, 0.1])
    R = oracles.riemann(sphere_a, x)
    u, w = np.eye(2)
    ref = oracles.constant_curvature(sphere_a, x, u, w, u)
    np.testing.assert_allclose(np.einsum("kabc,a,b,c->k", R, u, w, u), ref, rtol=1e-6, atol=1e-7)


def test_classical_lie_of_euclidean_under_rotation():
    X = lambda p: np.array([-p[1], p[0]])  # noqa: E731
    out = oracles.classical_lie_02(lambda p: np.eye(2), X, np.array([0.5, 0.2]))
    np.testing.assert_allclose(out, 0.0, atol=1e-9)


def test_geodesic_variation_flat():
    G = lambda x, v: np.zeros(2)  # noqa: E731
    ts = np.linspace(0, 1, 5)
    J = oracles.geodesic_variation(G, [0, 0], [1, 0], [0.0, 1.0], [0.5, 0.0], ts)
    np.testing.assert_allclose(J, np.stack([0.5 * ts, np.ones_like(ts)], axis=1), atol=1e-8)
