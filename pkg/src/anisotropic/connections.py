"""Anisotropic linear connections: Berwald, Chern and user-defined.

Christoffel arrays use ``gamma[i, j, k] = Gamma^i_jk`` with
``nabla^v_{d_j} d_k = Gamma^i_jk(v) d_i``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from . import _ode
from .derivation import AnisotropicDerivation, derive_tensor, extension_from_field
from .finsler import MetricSpec, cartan, check_nondegenerate, fundamental, fundamental_with_derivatives
from .spray import CurveSamples, FieldAlongCurve, SpraySpec, _domain_predicate, nonlinear_raw, spray_from_metric
from .tensors import (
    AnisotropicTensorField,
    ConicDomain,
    TangentSample,
    TensorValue,
    VectorField,
    _call,
    _checked,
    as_field,
    as_sample,
)

TORSION_TOL = 1e-10


@functools.partial(
    jax.tree_util.register_dataclass,
    data_fields=["params"],
    meta_fields=["fn", "dim", "torsion_free", "name", "domain"],
)
@dataclass(frozen=True, eq=False)
class AnisotropicConnection:
    """Christoffel-symbol function ``fn(x, v[, params]) -> Gamma[i, j, k]``.

    ``torsion_free`` is a claim, checked by :func:`check_torsion_free`.
    """

    fn: Callable
    dim: int
    torsion_free: bool = False
    name: str = "user"
    domain: Optional[ConicDomain] = None
    params: object = None

    def symbols(self, x, v):
        return _call(self.fn, self.params, x, v)


def _berwald_symbols(x, v, spray):
    # Gamma^k_ij = d N^k_i / d y^j = 1/2 d^2 G^k / dy^i dy^j
    return jax.jacfwd(lambda w: nonlinear_raw(spray, x, w))(v)


def berwald_connection(spray: SpraySpec) -> AnisotropicConnection:
    return AnisotropicConnection(_berwald_symbols, spray.dim, True, "berwald", spray.domain, params=spray)


def _chern_symbols(x, v, metric):
    n = x.shape[0]
    g, dgx, dgy = fundamental_with_derivatives(metric, x, v)
    N = nonlinear_raw(spray_from_metric(metric), x, v)
    # horizontal derivative: hd[a, b, k] = delta_k g_ab = d_k g_ab - N^m_k d g_ab / dy^m
    hd = dgx - jnp.einsum("abm,mk->abk", dgy, N)
    lowered = 0.5 * (hd - jnp.einsum("jks->sjk", hd) + jnp.einsum("ksj->sjk", hd))
    # symmetric in (j, k) up to rounding; symmetrising makes the symbols exactly torsion-free
    lowered = 0.5 * (lowered + jnp.einsum("sjk->skj", lowered))
    return jnp.linalg.solve(g, lowered.reshape(n, n * n)).reshape(n, n, n)


def chern_connection(metric: MetricSpec) -> AnisotropicConnection:
    """Torsion-free, g-compatible connection of a pseudo-Finsler metric.

    Symbols: Gamma^i_jk = 1/2 g^is (delta_k g_sj - delta_s g_jk + delta_j g_ks) with
    delta_j = d/dx^j - N^m_j d/dy^m and N the nonlinear connection of the metric spray.
    """
    return AnisotropicConnection(_chern_symbols, metric.dim, True, "chern", metric.domain, params=metric)


def _perturbed_symbols(x, v, params):
    base, tensor, scale = params
    return base.symbols(x, v) + scale * tensor(x, v)


def perturbed_connection(base: AnisotropicConnection, perturbation: AnisotropicTensorField, scale, symmetric=False):
    """Connection with symbols Gamma_base + scale * perturbation (a (1, 2) field).

    Pass ``symmetric=True`` when the perturbation is symmetric in its covariant slots;
    the result then keeps the base connection's torsion-free claim.
    """
    if perturbation.valence != (1, 2):
        raise ValueError("the perturbation must be a (1, 2) field")
    return AnisotropicConnection(
        _perturbed_symbols, base.dim, base.torsion_free and symmetric, f"{base.name}+perturbation", base.domain,
        params=(base, perturbation, jnp.asarray(float(scale))),
    )


# ---------------------------------------------------------------------------
# kernels


def christoffel_raw(conn, x, v):
    return conn.symbols(x, v)


def covariant_vector_raw(conn, x, v, X, Y):
    Xx = X(x)
    _, dY = jax.jvp(Y, (x,), (Xx,))
    return dY + jnp.einsum("ijk,j,k->i", conn.symbols(x, v), Xx, Y(x))


def _covariant_delta(x, v, Y, params):
    conn, X = params
    return covariant_vector_raw(conn, x, v, X, Y)


def compatibility_raw(conn, metric, x, v, V):
    """(nabla_{e_a} g)(e_b, e_c) by the four-term display with extension V."""
    gam = conn.symbols(x, v)
    g = fundamental(metric, x, v)
    C = cartan(metric, x, v)
    jac = jax.jacfwd(lambda p: fundamental(metric, p, V(p)))(x)  # [b, c, a]
    dV = jax.jacfwd(V)(x)  # [i, a]
    nabla_V = dV + jnp.einsum("ial,l->ia", gam, v)  # (nabla_{e_a} V)^i
    return (
        jnp.einsum("bca->abc", jac)
        - jnp.einsum("iab,ic->abc", gam, g)
        - jnp.einsum("iac,bi->abc", gam, g)
        - 2.0 * jnp.einsum("ibc,ia->abc", C, nabla_V)
    )


def covariant_L_raw(conn, metric, x, v, X, V):
    """nabla_X L = X(L(V)) - 2 g_V(V, nabla^V_X V)."""
    Xx = X(x)
    _, dL = jax.jvp(lambda p: metric.L(p, V(p)), (x,), (Xx,))
    nabla_V = covariant_vector_raw(conn, x, v, X, V)
    return dL - 2.0 * v @ fundamental(metric, x, v) @ nabla_V


@jax.jit
def _connection_rhs(conn, y):
    n = y.shape[0] // 2
    v = y[n:]
    return jnp.concatenate([v, -jnp.einsum("kij,i,j->k", conn.symbols(y[:n], v), v, v)])


def _connection_spray(x, v, conn):
    return jnp.einsum("kij,i,j->k", conn.symbols(x, v), v, v)


_christoffel_jit = jax.jit(christoffel_raw)
_covariant_vector_jit = jax.jit(covariant_vector_raw)
_compatibility_jit = jax.jit(compatibility_raw)
_covariant_L_jit = jax.jit(covariant_L_raw)


# ---------------------------------------------------------------------------
# public operations


def _conn_sample(conn, sample, v=None):
    sample = as_sample(sample, v)
    if sample.dim != conn.dim:
        raise ValueError("sample dimension does not match the connection")
    if conn.domain is not None:
        conn.domain.check(sample)
    source = conn.params
    while source is not None:
        if isinstance(source, MetricSpec):
            check_nondegenerate(source, sample)
            break
        source = getattr(source, "params", None)
    return sample


def christoffel(conn: AnisotropicConnection, sample, v=None) -> np.ndarray:
    """Array Gamma[i, j, k] at the sample."""
    sample = _conn_sample(conn, sample, v)
    return _checked(_christoffel_jit(conn, sample.x, sample.v), "Christoffel symbols", sample)


def torsion_residual(conn: AnisotropicConnection, sample) -> float:
    gam = christoffel(conn, sample)
    return float(np.max(np.abs(gam - gam.transpose(0, 2, 1))))


def check_torsion_free(conn: AnisotropicConnection, samples, tol=TORSION_TOL) -> bool:
    return all(torsion_residual(conn, s) <= tol for s in samples)


def spray_of_connection(conn: AnisotropicConnection) -> SpraySpec:
    """Spray G^i(v) = Gamma^i_jk(v) v^j v^k of the connection's geodesics."""
    return SpraySpec(_connection_spray, conn.dim, conn.domain, params=conn)


def covariant_derivative_vector(conn, sample, X: VectorField, Y: VectorField) -> np.ndarray:
    """(nabla^v_X Y)^i = X^j dY^i/dx^j + Gamma^i_jk(v) X^j Y^k at the sample's base point."""
    sample = _conn_sample(conn, sample)
    return _checked(_covariant_vector_jit(conn, sample.x, sample.v, X, Y), "covariant derivative", sample)


def covariant_derivation(conn: AnisotropicConnection, X: VectorField) -> AnisotropicDerivation:
    """The anisotropic derivation delta^v Y = nabla^v_X Y, with associated field X."""
    return AnisotropicDerivation(X, _covariant_delta, params=(conn, X))


def covariant_derivative_tensor(conn, X: VectorField, T, sample, V: VectorField) -> TensorValue:
    """nabla^v_X T via the tensor-derivation engine (extension ``V`` of ``v``)."""
    sample = _conn_sample(conn, sample)
    return derive_tensor(covariant_derivation(conn, X), as_field(T, dim=sample.dim), sample, V)


def metric_compatibility_residual(conn, metric: MetricSpec, sample, V: VectorField) -> np.ndarray:
    """Array r[a, b, c] = (nabla^v_{e_a} g)(e_b, e_c) from the explicit four-term formula."""
    sample = _conn_sample(conn, sample)
    extension_from_field(V, sample)
    return _checked(_compatibility_jit(conn, metric, sample.x, sample.v, V), "compatibility residual", sample)


def covariant_derivative_L(conn, metric: MetricSpec, X: VectorField, sample, V: VectorField) -> float:
    """nabla^v_X L = X(L(V)) - 2 g_V(V, nabla^V_X V)."""
    sample = _conn_sample(conn, sample)
    extension_from_field(V, sample)
    return float(_checked(_covariant_L_jit(conn, metric, sample.x, sample.v, X, V), "nabla L", sample))


def covariant_derivative_along_curve(conn, curve, X: FieldAlongCurve, t, v=None) -> np.ndarray:
    """D^v_gamma X = dX^k/dt + X^i gamma'^j Gamma^k_ji(v).

    ``v`` defaults to the curve velocity at ``t``; a :class:`TangentSample` must sit
    over the curve point.
    """
    xt = curve.position(t)
    if v is None:
        v = curve.velocity(t)
    elif isinstance(v, TangentSample):
        if np.max(np.abs(v.x - xt)) > 1e-8 * max(1.0, np.linalg.norm(xt)):
            raise ValueError("the direction v does not sit over the curve point")
        v = v.v
    gam = christoffel(conn, TangentSample(xt, v))
    return X.rate(t) + np.einsum("kji,i,j->k", gam, X.at(t), curve.velocity(t))


def connection_geodesic(conn, x0, v0, t_span=(0.0, 1.0), tol=1e-9) -> CurveSamples:
    """Solve gamma''^k + Gamma^k_ij(gamma') gamma'^i gamma'^j = 0."""
    sample = _conn_sample(conn, x0, v0)
    n = sample.dim
    y0 = np.concatenate([sample.x, sample.v])

    def rhs(t, y):
        return np.asarray(_connection_rhs(conn, y))

    traj = _ode.integrate(rhs, float(t_span[0]), y0, float(t_span[1]), tol, _domain_predicate(conn.domain, n))
    return CurveSamples.from_trajectory(traj, n)


def difference_tensor(conn1, conn2, sample) -> np.ndarray:
    """(1, 2) tensor Gamma1 - Gamma2 at the sample (no derivative terms)."""
    if conn1.dim != conn2.dim:
        raise ValueError("connections live on different charts")
    return christoffel(conn1, sample) - christoffel(conn2, sample)


__all__ = [
    "AnisotropicConnection",
    "berwald_connection",
    "check_torsion_free",
    "chern_connection",
    "christoffel",
    "connection_geodesic",
    "covariant_derivation",
    "covariant_derivative_L",
    "covariant_derivative_along_curve",
    "covariant_derivative_tensor",
    "covariant_derivative_vector",
    "difference_tensor",
    "metric_compatibility_residual",
    "perturbed_connection",
    "spray_of_connection",
    "torsion_residual",
]
