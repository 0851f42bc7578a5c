"""Vertical derivative P, curvature R_v, Berwald/Landsberg tensors and Jacobi fields.

Array conventions::

    P[l, i, j, k] = d Gamma^l_ij / dy^k        P_v(u, w, z) = P[l, i, j, k] u^i w^j z^k
    R[k, a, b, c]                               R_v(u, w)z  = R[k, a, b, c] u^a w^b z^c
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import jax
import jax.numpy as jnp
import numpy as np

from . import _ode
from .connections import AnisotropicConnection, _chern_symbols, _conn_sample, berwald_connection, chern_connection
from .derivation import extension_from_field
from .errors import PreconditionError
from .finsler import MetricSpec, fundamental
from .spray import CurveSamples, SpraySpec, _domain_predicate, spray_from_metric
from .tensors import TangentSample, TensorValue, VectorField, _checked, as_sample

VERTPROP_TOL = 1e-7
GEODESIC_TOL = 1e-5


# ---------------------------------------------------------------------------
# kernels


def vertical_raw(conn, x, v):
    return jax.jacfwd(lambda w: conn.symbols(x, w))(v)


def curvature_raw(conn, x, v):
    """R[k, a, b, c] from one Jacobian of the symbols over (x, v)."""
    gam, dx, dy = _symbol_jet(conn, x, v)
    Nc = jnp.einsum("mal,l->ma", gam, v)
    # delta_a Gamma^k_bc = d_a Gamma^k_bc - Nc^m_a d Gamma^k_bc / dy^m, stored as [k, b, c, a]
    hd = dx - jnp.einsum("kbcm,ma->kbca", dy, Nc)
    return (
        jnp.einsum("kbca->kabc", hd)
        - jnp.einsum("kacb->kabc", hd)
        + jnp.einsum("kal,lbc->kabc", gam, gam)
        - jnp.einsum("kbl,lac->kabc", gam, gam)
    )


def _symbol_jet(conn, x, v):
    """Gamma and its x- and y-derivatives, dx[k, i, j, a] = d Gamma^k_ij / dx^a."""
    n = x.shape[0]
    gam = conn.symbols(x, v)
    dgam = jax.jacfwd(lambda z: conn.symbols(z[:n], z[n:]))(jnp.concatenate([x, v]))
    return gam, dgam[..., :n], dgam[..., n:]


def extension_raw(conn, x, V, u, w, z):
    """(R^V(u, w)z, R^V(u, w)z - P_V(w, z, nabla_u V) + P_V(u, z, nabla_w V)).

    u, w, z are extended with constant coefficients, so [u, w] = 0 and
    nabla^V_u nabla^V_w z = d_u(Gamma(p, V(p))(w, z)) + Gamma(u, Gamma(w, z)).
    """
    v = V(x)
    gam, dx, dy = _symbol_jet(conn, x, v)
    _, dVu = jax.jvp(V, (x,), (u,))
    _, dVw = jax.jvp(V, (x,), (w,))

    def along(a, dVa, b):
        # derivative of p -> Gamma(p, V(p))(b, z) in direction a, plus Gamma(a, Gamma(b, z))
        d = jnp.einsum("kija,a->kij", dx, a) + jnp.einsum("kijm,m->kij", dy, dVa)
        inner = jnp.einsum("kij,i,j->k", gam, b, z)
        return jnp.einsum("kij,i,j->k", d, b, z) + jnp.einsum("kij,i,j->k", gam, a, inner)

    affine = along(u, dVu, w) - along(w, dVw, u)
    nab_u = dVu + jnp.einsum("kij,i,j->k", gam, u, v)
    nab_w = dVw + jnp.einsum("kij,i,j->k", gam, w, v)
    corrected = (
        affine
        - jnp.einsum("lijk,i,j,k->l", dy, w, z, nab_u)
        + jnp.einsum("lijk,i,j,k->l", dy, u, z, nab_w)
    )
    return affine, corrected


def _symbol_difference(x, v, params):
    first, second = params
    return first.symbols(x, v) - second.symbols(x, v)


_vertical_jit = jax.jit(vertical_raw)
_curvature_jit = jax.jit(curvature_raw)
_extension_jit = jax.jit(extension_raw)


@jax.jit
def _landsberg_arrays(metric, x, v):
    """g-lowered Berwald tensor pairing and the Chern - Berwald difference tensor."""
    g = fundamental(metric, x, v)
    berwald = berwald_connection(spray_from_metric(metric))
    B = vertical_raw(berwald, x, v)
    diff = _chern_symbols(x, v, metric) - berwald.symbols(x, v)
    return g, B, diff


# ---------------------------------------------------------------------------
# public operations


def _vec(a, n, what):
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{what} must have shape ({n},)")
    return a


def vertical_derivative_connection(conn: AnisotropicConnection, sample, v=None) -> TensorValue:
    """P^l_ijk = d Gamma^l_ij / dy^k as a (1, 3) value (slots: u, w, vertical z)."""
    sample = _conn_sample(conn, sample, v)
    return TensorValue((1, 3), _checked(_vertical_jit(conn, sample.x, sample.v), "vertical derivative", sample))


def curvature_components(conn: AnisotropicConnection, sample, v=None) -> TensorValue:
    """Full R_v as a (1, 3) value, assembled from base and fiber derivatives of the symbols."""
    sample = _conn_sample(conn, sample, v)
    return TensorValue((1, 3), _checked(_curvature_jit(conn, sample.x, sample.v), "curvature", sample))


def affine_curvature(conn: AnisotropicConnection, V: VectorField, sample, u, w, z) -> np.ndarray:
    """R^V(u, w)z at x0 for constant-coefficient u, w, z; depends on the extension V."""
    sample = _conn_sample(conn, sample)
    extension_from_field(V, sample)
    n = sample.dim
    out, _ = _extension_jit(conn, sample.x, V, _vec(u, n, "u"), _vec(w, n, "w"), _vec(z, n, "z"))
    return _checked(out, "affine curvature", sample)


def curvature_tensor(conn: AnisotropicConnection, sample, u, w, z, extension: Optional[VectorField] = None):
    """R_v(u, w)z.

    Without ``extension`` the symbol-level assembly is used. With an extension ``V``
    the value is R^V(u, w)z - P_V(w, z, nabla^V_u V) + P_V(u, z, nabla^V_w V), which
    does not depend on the choice of ``V``.
    """
    sample = _conn_sample(conn, sample)
    n = sample.dim
    u, w, z = _vec(u, n, "u"), _vec(w, n, "w"), _vec(z, n, "z")
    if extension is None:
        R = np.asarray(curvature_components(conn, sample))
        return np.einsum("kabc,a,b,c->k", R, u, w, z)
    extension_from_field(extension, sample)
    _, out = _extension_jit(conn, sample.x, extension, u, w, z)
    return _checked(out, "curvature", sample)


def berwald_tensor(spray: SpraySpec, sample, v=None) -> TensorValue:
    """B = vertical derivative of the Berwald connection of the spray."""
    return vertical_derivative_connection(berwald_connection(spray), sample, v)


def _metric_sample(metric, sample):
    return _conn_sample(chern_connection(metric), sample)


def landsberg_components(metric: MetricSpec, sample) -> np.ndarray:
    """Array Lb[i, j, k] = g_v(B_v(e_i, e_j, e_k), v)."""
    sample = _metric_sample(metric, sample)
    g, B, _ = _landsberg_arrays(metric, sample.x, sample.v)
    return _checked(np.einsum("lijk,lm,m->ijk", np.asarray(B), np.asarray(g), sample.v), "Landsberg tensor", sample)


def landsberg_tensor(metric: MetricSpec, sample, u, w, z) -> float:
    """Landsberg curvature g_v(B_v(u, w, z), v)."""
    sample = _metric_sample(metric, sample)
    n = sample.dim
    comps = landsberg_components(metric, sample)
    return float(np.einsum("ijk,i,j,k->", comps, _vec(u, n, "u"), _vec(w, n, "w"), _vec(z, n, "z")))


def landsberg_via_difference(metric: MetricSpec, sample, u, w, z) -> float:
    """g_v(Ld_v(u, w), z) with Ld = Chern - Berwald symbols."""
    sample = _metric_sample(metric, sample)
    n = sample.dim
    g, _, diff = _landsberg_arrays(metric, sample.x, sample.v)
    diff = _checked(diff, "difference tensor", sample)
    Ld = np.einsum("kij,i,j->k", diff, _vec(u, n, "u"), _vec(w, n, "w"))
    return float(Ld @ np.asarray(g) @ _vec(z, n, "z"))


def difference_vertical_derivative(first: AnisotropicConnection, second: AnisotropicConnection, sample) -> TensorValue:
    """Vertical derivative of the difference tensor first - second, slots (u, w, vertical z)."""
    diff = AnisotropicConnection(_symbol_difference, first.dim, False, "difference", first.domain, params=(first, second))
    sample = _conn_sample(first, sample)
    _conn_sample(second, sample)
    return TensorValue((1, 3), _checked(_vertical_jit(diff, sample.x, sample.v), "vertical derivative", sample))


def vertprop_residual(conn: AnisotropicConnection, sample) -> float:
    """max_k |P_v(v, v, e_k)| divided by max(1, |v|)."""
    sample = as_sample(sample)
    P = np.asarray(vertical_derivative_connection(conn, sample))
    res = np.einsum("lijk,i,j->lk", P, sample.v, sample.v)
    return float(np.max(np.abs(res)) / max(1.0, np.linalg.norm(sample.v)))


def _require_vertprop(conn, sample, tol):
    res = vertprop_residual(conn, sample)
    if not res <= tol:
        raise PreconditionError(f"P_v(v, v, .) = 0 fails at {sample!r}: residual {res:.3e} > {tol:.1e}", residual=res)
    return res


def curvature_operator(conn: AnisotropicConnection, geodesic, t, u, tol=VERTPROP_TOL) -> np.ndarray:
    """R_gamma(u) = R_{gamma'}(gamma', u)gamma' at time t, after checking P_v(v, v, .) = 0."""
    xt = geodesic.position(t)
    vt = geodesic.velocity(t)
    sample = TangentSample(xt, vt)
    _require_vertprop(conn, sample, tol)
    return curvature_tensor(conn, sample, vt, u, vt)


# ---------------------------------------------------------------------------
# Jacobi fields


@jax.jit
def _jacobi_rhs(conn, state):
    n = state.shape[0] // 4
    x, y, J, W = state[:n], state[n : 2 * n], state[2 * n : 3 * n], state[3 * n :]
    gam = conn.symbols(x, y)
    R = curvature_raw(conn, x, y)
    return jnp.concatenate(
        [
            y,
            -jnp.einsum("kij,i,j->k", gam, y, y),
            W - jnp.einsum("kij,i,j->k", gam, y, J),
            jnp.einsum("kabc,a,b,c->k", R, y, J, y) - jnp.einsum("kij,i,j->k", gam, y, W),
        ]
    )


@dataclass(frozen=True, eq=False)
class JacobiField:
    """Jacobi field along a geodesic, carried with the geodesic itself.

    ``J`` holds coordinate components on the step grid and ``DJ`` the covariant
    derivative along the curve (direction gamma').
    """

    t: np.ndarray
    J: np.ndarray
    DJ: np.ndarray
    geodesic: CurveSamples
    trajectory: _ode.Trajectory
    connection: AnisotropicConnection

    @property
    def dim(self):
        return self.J.shape[1]

    def _state(self, t):
        return self.trajectory(t)

    def at(self, t):
        return self._state(t)[2 * self.dim : 3 * self.dim]

    def covariant_rate(self, t):
        return self._state(t)[3 * self.dim :]

    def rate(self, t):
        """Coordinate derivative dJ/dt."""
        n = self.dim
        s = self._state(t)
        gam = np.asarray(_gamma_jit(self.connection, s[:n], s[n : 2 * n]))
        return s[3 * n :] - np.einsum("kij,i,j->k", gam, s[n : 2 * n], s[2 * n : 3 * n])

    def norm(self, metric: MetricSpec, t):
        """g_{gamma'}(J, J)^(1/2) (absolute value under the root for indefinite g)."""
        n = self.dim
        s = self._state(t)
        g = np.asarray(fundamental(metric, jnp.asarray(s[:n]), jnp.asarray(s[n : 2 * n])))
        return float(np.sqrt(abs(s[2 * n : 3 * n] @ g @ s[2 * n : 3 * n])))

    def residual(self, t):
        """|D(DJ) - R_{gamma'}(gamma', J)gamma'| from the interpolant derivative."""
        n = self.dim
        s = self._state(t)
        ds = self.trajectory.derivative(t)
        x, y, J, W = s[:n], s[n : 2 * n], s[2 * n : 3 * n], s[3 * n :]
        gam = np.asarray(_gamma_jit(self.connection, x, y))
        R = np.asarray(_curvature_jit(self.connection, jnp.asarray(x), jnp.asarray(y)))
        DW = ds[3 * n :] + np.einsum("kij,i,j->k", gam, y, W)
        return float(np.max(np.abs(DW - np.einsum("kabc,a,b,c->k", R, y, J, y))))


_gamma_jit = jax.jit(lambda conn, x, v: conn.symbols(x, v))


def integrate_jacobi(
    conn: AnisotropicConnection, geodesic, J0, J0dot, t_span=None, tol=1e-9, vertprop_tol=VERTPROP_TOL
) -> JacobiField:
    """Solve (D_gamma)^2 J = R_{gamma'}(gamma', J)gamma' along a geodesic of ``conn``.

    ``J0dot`` is the coordinate derivative dJ/dt at the start. The geodesic supplies
    the initial point and velocity; it is re-integrated jointly with J so the field
    and the curve share one step grid.
    """
    if t_span is None:
        t_span = geodesic.t_span
    t0, t1 = float(t_span[0]), float(t_span[1])
    x0, v0 = geodesic.position(t0), geodesic.velocity(t0)
    sample = _conn_sample(conn, TangentSample(x0, v0))
    n = sample.dim
    gam0 = np.asarray(christoffel_at(conn, sample))
    accel = geodesic.acceleration(t0)
    geo_res = np.max(np.abs(accel + np.einsum("kij,i,j->k", gam0, v0, v0)))
    if geo_res > GEODESIC_TOL * max(1.0, float(np.dot(v0, v0))):
        raise PreconditionError(f"curve is not a geodesic of the connection (residual {geo_res:.3e})", residual=geo_res)
    _require_vertprop(conn, sample, vertprop_tol)
    J0 = _vec(J0, n, "J0")
    W0 = _vec(J0dot, n, "J0dot") + np.einsum("kij,i,j->k", gam0, v0, J0)
    y0 = np.concatenate([x0, v0, J0, W0])

    def rhs(t, y):
        return np.asarray(_jacobi_rhs(conn, y))

    traj = _ode.integrate(rhs, t0, y0, t1, tol, _domain_predicate(conn.domain, n))
    for k in range(1, len(traj.t)):
        _require_vertprop(conn, TangentSample(traj.y[k, :n], traj.y[k, n : 2 * n]), vertprop_tol)
    curve = CurveSamples.from_trajectory(traj, n)
    return JacobiField(traj.t, traj.y[:, 2 * n : 3 * n], traj.y[:, 3 * n :], curve, traj, conn)


def christoffel_at(conn, sample):
    return _checked(_gamma_jit(conn, sample.x, sample.v), "Christoffel symbols", sample)


def jacobi_operators_difference(first: AnisotropicConnection, second: AnisotropicConnection, sample, u) -> float:
    """max |R1_v(v, u)v - R2_v(v, u)v| at one sample."""
    sample = as_sample(sample)
    a = curvature_tensor(first, sample, sample.v, u, sample.v)
    b = curvature_tensor(second, sample, sample.v, u, sample.v)
    return float(np.max(np.abs(a - b)))


__all__ = [
    "JacobiField",
    "affine_curvature",
    "berwald_tensor",
    "curvature_components",
    "curvature_operator",
    "curvature_tensor",
    "difference_vertical_derivative",
    "integrate_jacobi",
    "jacobi_operators_difference",
    "landsberg_components",
    "landsberg_tensor",
    "landsberg_via_difference",
    "vertical_derivative_connection",
    "vertprop_residual",
]
