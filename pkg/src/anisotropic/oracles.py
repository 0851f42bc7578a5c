"""Independent reference computations used to verify the AD-based routines.

Everything here differentiates by central finite differences with Richardson
extrapolation and only *evaluates* user data (metric coefficients, L, G), so
its errors are unrelated to those of the forward-mode kernels.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

FD_STEP = 1e-4
FD_STEP_THIRD = 1e-2


def _central(f, p, directions, h):
    if not directions:
        return np.asarray(f(p), dtype=float)
    z, rest = np.asarray(directions[0], dtype=float), directions[1:]
    return (_central(f, p + h * z, rest, h) - _central(f, p - h * z, rest, h)) / (2.0 * h)


def fd_directional(f: Callable, point, directions: Sequence, h=None):
    """Mixed directional derivative of ``f`` at ``point`` (one Richardson step).

    The default step is 1e-4 * max(1, |point|) for orders 1 and 2 and 1e-2 for
    order 3, where roundoff would otherwise dominate.
    """
    p = np.asarray(point, dtype=float)
    if h is None:
        h = (FD_STEP if len(directions) < 3 else FD_STEP_THIRD) * max(1.0, float(np.linalg.norm(p)))
    coarse = _central(f, p, list(directions), h)
    fine = _central(f, p, list(directions), 0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def fd_jacobian(f: Callable, point, h=None):
    """Array J[..., k] = d f / d p^k by Richardson central differences."""
    p = np.asarray(point, dtype=float)
    eye = np.eye(p.shape[0])
    cols = [fd_directional(f, p, [eye[k]], h) for k in range(p.shape[0])]
    return np.stack(cols, axis=-1)


def fiber_fd(L: Callable, x, v, directions, h=None):
    """Fiber derivative of a scalar L(x, v) along the given directions."""
    x = np.asarray(x, dtype=float)
    return fd_directional(lambda w: L(x, w), v, directions, h)


def fundamental_fd(L: Callable, x, v, h=None):
    n = len(v)
    eye = np.eye(n)
    return np.array([[0.5 * fiber_fd(L, x, v, [eye[i], eye[j]], h) for j in range(n)] for i in range(n)])


def cartan_fd(L: Callable, x, v, h=None):
    n = len(v)
    eye = np.eye(n)
    return np.array(
        [[[0.25 * fiber_fd(L, x, v, [eye[i], eye[j], eye[k]], h) for k in range(n)] for j in range(n)] for i in range(n)]
    )


# ---------------------------------------------------------------------------
# Riemannian references


def levi_civita(a: Callable, x, h=None):
    """gamma[i, j, k] = 1/2 a^il (d_j a_lk + d_k a_lj - d_l a_jk) with FD derivatives of a."""
    x = np.asarray(x, dtype=float)
    da = fd_jacobian(lambda p: np.asarray(a(p), dtype=float), x, h)  # da[l, k, j] = d_j a_lk
    lowered = 0.5 * (np.einsum("lkj->ljk", da) + np.einsum("ljk->ljk", da) - np.einsum("jkl->ljk", da))
    return np.linalg.solve(np.asarray(a(x), dtype=float), lowered.reshape(len(x), -1)).reshape(lowered.shape)


def riemann(a: Callable, x, h_outer=1e-3, h_inner=None):
    """R[k, a, b, c] with R(d_a, d_b)d_c = d_a gamma^k_bc - d_b gamma^k_ac + gamma^k_al gamma^l_bc - gamma^k_bl gamma^l_ac."""
    x = np.asarray(x, dtype=float)
    gam = levi_civita(a, x, h_inner)
    dgam = fd_jacobian(lambda p: levi_civita(a, p, h_inner), x, h_outer)  # [k, b, c, a]
    return (
        np.einsum("kbca->kabc", dgam)
        - np.einsum("kacb->kabc", dgam)
        + np.einsum("kal,lbc->kabc", gam, gam)
        - np.einsum("kbl,lac->kabc", gam, gam)
    )


def constant_curvature(a: Callable, x, u, w, z, K=1.0):
    """K (g(w, z) u - g(u, z) w) for a space form of curvature K."""
    g = np.asarray(a(np.asarray(x, dtype=float)), dtype=float)
    u, w, z = (np.asarray(t, dtype=float) for t in (u, w, z))
    return K * ((w @ g @ z) * u - (u @ g @ z) * w)


def classical_lie_02(h: Callable, X: Callable, x, step=None):
    """(L_X h)_ab = X^c d_c h_ab + h_cb d_a X^c + h_ac d_b X^c for a classical (0, 2) field."""
    x = np.asarray(x, dtype=float)
    dh = fd_jacobian(lambda p: np.asarray(h(p), dtype=float), x, step)
    dX = fd_jacobian(lambda p: np.asarray(X(p), dtype=float), x, step)  # dX[c, a]
    hx = np.asarray(h(x), dtype=float)
    return np.einsum("abc,c->ab", dh, np.asarray(X(x), dtype=float)) + dX.T @ hx + hx @ dX


# ---------------------------------------------------------------------------
# spray references


def nonlinear_fd(G: Callable, x, v, h=None):
    """N[i, j] = 1/2 dG^i/dy^j by finite differences of the spray coefficients."""
    x = np.asarray(x, dtype=float)
    return 0.5 * fd_jacobian(lambda w: np.asarray(G(x, w), dtype=float), v, h)


def vertical_projection_fd(G: Callable, curve_x: Callable, field: Callable, t, h=1e-4):
    """Vertical part of the TM-velocity of t -> (x(t), X(t)) from FD in t and FD of G."""
    xdot = fd_directional(lambda s: np.asarray(curve_x(s[0]), dtype=float), [t], [[1.0]], h)
    Xdot = fd_directional(lambda s: np.asarray(field(s[0]), dtype=float), [t], [[1.0]], h)
    return Xdot + nonlinear_fd(G, curve_x(t), field(t)) @ xdot


def geodesic_variation(G: Callable, x0, v0, J0, J0dot, ts, s=1e-4, tol=1e-12):
    """Jacobi field as d/ds of geodesics with data (x0 + s J0, v0 + s J0dot), central in s."""
    x0, v0, J0, J0dot = (np.asarray(a, dtype=float) for a in (x0, v0, J0, J0dot))
    n = x0.shape[0]
    ts = np.asarray(ts, dtype=float)

    def rhs(t, y):
        return np.concatenate([y[n:], -np.asarray(G(y[:n], y[n:]), dtype=float)])

    def solve(sign):
        y0 = np.concatenate([x0 + sign * s * J0, v0 + sign * s * J0dot])
        sol = solve_ivp(rhs, (ts[0], ts[-1]), y0, method="DOP853", t_eval=ts, rtol=tol, atol=tol)
        if not sol.success:
            raise RuntimeError(sol.message)
        return sol.y[:n].T

    return (solve(1.0) - solve(-1.0)) / (2.0 * s)


__all__ = [
    "cartan_fd",
    "classical_lie_02",
    "constant_curvature",
    "fd_directional",
    "fd_jacobian",
    "fiber_fd",
    "fundamental_fd",
    "geodesic_variation",
    "levi_civita",
    "nonlinear_fd",
    "riemann",
    "vertical_projection_fd",
]
