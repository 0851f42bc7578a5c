"""Sprays, their nonlinear connection, spray geodesics and the nonlinear covariant derivative."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from . import _ode
from .errors import DomainError
from .finsler import MetricSpec, check_nondegenerate, fundamental
from .tensors import ConicDomain, TangentSample, VectorField, _call, _checked, as_sample


@functools.partial(
    jax.tree_util.register_dataclass, data_fields=["params"], meta_fields=["fn", "dim", "domain"]
)
@dataclass(frozen=True, eq=False)
class SpraySpec:
    """Spray with coefficients G^i(x, v); geodesics solve x'' = -G(x, x').

    ``fn`` is called as ``fn(x, v)`` or ``fn(x, v, params)`` and must be positively
    homogeneous of degree two in ``v``.
    """

    fn: Callable
    dim: int
    domain: Optional[ConicDomain] = None
    params: object = None

    def G(self, x, v):
        return _call(self.fn, self.params, x, v)


def _metric_spray(x, v, metric):
    n = x.shape[0]
    g = fundamental(metric, x, v)
    dg = jax.jacfwd(lambda p: fundamental(metric, p, v))(x)  # dg[s, j, k] = d g_sj / dx^k
    # 1/2 y^j y^k (d_k g_sj - d_s g_jk + d_j g_ks)
    lowered = 0.5 * (
        jnp.einsum("sjk,j,k->s", dg, v, v)
        - jnp.einsum("jks,j,k->s", dg, v, v)
        + jnp.einsum("ksj,j,k->s", dg, v, v)
    )
    return jnp.linalg.solve(g, lowered.reshape(n))


def spray_from_metric(metric: MetricSpec) -> SpraySpec:
    """Geodesic spray of a pseudo-Finsler metric."""
    return SpraySpec(_metric_spray, metric.dim, metric.domain, params=metric)


def spray_coefficients_raw(spray, x, v):
    return spray.G(x, v)


def nonlinear_raw(spray, x, v):
    """N^i_j = 1/2 dG^i/dy^j."""
    return 0.5 * jax.jacfwd(spray.G, 1)(x, v)


_G_jit = jax.jit(spray_coefficients_raw)
_N_jit = jax.jit(nonlinear_raw)


@jax.jit
def _geodesic_rhs(spray, y):
    n = y.shape[0] // 2
    return jnp.concatenate([y[n:], -spray.G(y[:n], y[n:])])


def _spray_sample(spray, sample, v=None):
    sample = as_sample(sample, v)
    if spray.domain is not None:
        spray.domain.check(sample)
    if isinstance(spray.params, MetricSpec):
        check_nondegenerate(spray.params, sample)
    return sample


def spray_coefficients(spray: SpraySpec, sample, v=None) -> np.ndarray:
    sample = _spray_sample(spray, sample, v)
    return _checked(_G_jit(spray, sample.x, sample.v), "spray coefficients", sample)


def nonlinear_coefficients(spray: SpraySpec, sample, v=None) -> np.ndarray:
    """Matrix N[i, j] = N^i_j(x, v)."""
    sample = _spray_sample(spray, sample, v)
    return _checked(_N_jit(spray, sample.x, sample.v), "nonlinear coefficients", sample)


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True, eq=False)
class CurveSamples:
    """Integrated curve: step grid, positions, velocities and dense output of the state (x, x')."""

    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    trajectory: _ode.Trajectory
    exited: bool = False
    exit_time: Optional[float] = None

    @classmethod
    def from_trajectory(cls, traj: _ode.Trajectory, dim):
        return cls(traj.t, traj.y[:, :dim], traj.y[:, dim : 2 * dim], traj, traj.exited, traj.exit_time)

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def t_span(self):
        return float(self.t[0]), float(self.t[-1])

    def position(self, t):
        return self.trajectory(t)[: self.dim]

    def velocity(self, t):
        return self.trajectory(t)[self.dim : 2 * self.dim]

    def acceleration(self, t):
        """Derivative of the interpolated velocity."""
        return self.trajectory.derivative(t)[self.dim : 2 * self.dim]

    def sample(self, ts):
        ts = np.asarray(ts, dtype=float)
        return np.array([self.position(t) for t in ts]), np.array([self.velocity(t) for t in ts])


@dataclass(frozen=True, eq=False)
class AnalyticCurve:
    """Curve given by a jax-traceable map t -> x(t)."""

    fn: Callable

    def position(self, t):
        return np.asarray(self.fn(jnp.asarray(float(t))), dtype=float)

    def velocity(self, t):
        return np.asarray(jax.jvp(self.fn, (jnp.asarray(float(t)),), (jnp.asarray(1.0),))[1], dtype=float)

    def acceleration(self, t):
        def vel(s):
            return jax.jvp(self.fn, (s,), (jnp.ones_like(s),))[1]

        return np.asarray(jax.jvp(vel, (jnp.asarray(float(t)),), (jnp.asarray(1.0),))[1], dtype=float)


@dataclass(frozen=True, eq=False)
class FieldAlongCurve:
    """Vector field X(t) along a curve with its coordinate derivative dX/dt.

    When ``derivative`` is omitted, ``value`` must be jax-traceable.
    """

    value: Callable
    derivative: Optional[Callable] = None

    def at(self, t):
        return np.asarray(self.value(float(t)), dtype=float)

    def rate(self, t):
        if self.derivative is not None:
            return np.asarray(self.derivative(float(t)), dtype=float)
        t = jnp.asarray(float(t))
        return np.asarray(jax.jvp(self.value, (t,), (jnp.ones_like(t),))[1], dtype=float)

    @classmethod
    def velocity_of(cls, curve):
        return cls(curve.velocity, curve.acceleration)

    @classmethod
    def restrict(cls, X: VectorField, curve):
        """X evaluated along the curve, X(alpha(t))."""

        def value(t):
            return np.asarray(X(jnp.asarray(curve.position(t))), dtype=float)

        def derivative(t):
            p = jnp.asarray(curve.position(t))
            return np.asarray(jax.jvp(X, (p,), (jnp.asarray(curve.velocity(t)),))[1], dtype=float)

        return cls(value, derivative)


def _domain_predicate(domain, dim):
    if domain is None:
        return None

    def inside(t, y):
        return domain.contains(y[:dim], y[dim : 2 * dim])

    return inside


def integrate_geodesic(spray: SpraySpec, x0, v0, t_span=(0.0, 1.0), tol=1e-9) -> CurveSamples:
    """Solve x'' = -G(x, x') with adaptive DOP853; truncates (and flags) on domain exit."""
    sample = as_sample(x0, v0)
    if spray.domain is not None:
        spray.domain.check(sample)
    n = sample.dim
    y0 = np.concatenate([sample.x, sample.v])

    def rhs(t, y):
        return np.asarray(_geodesic_rhs(spray, y))

    traj = _ode.integrate(rhs, float(t_span[0]), y0, float(t_span[1]), tol, _domain_predicate(spray.domain, n))
    return CurveSamples.from_trajectory(traj, n)


def nonlinear_covariant_derivative(spray: SpraySpec, curve, X: FieldAlongCurve, t) -> np.ndarray:
    """Vertical part of the TM-velocity of t -> X(t): dX^j/dt + N^j_i(X(t)) alpha'^i."""
    xt = curve.position(t)
    Xt = X.at(t)
    sample = TangentSample(xt, Xt) if np.linalg.norm(Xt) > 0 else None
    if sample is None or (spray.domain is not None and not spray.domain.contains(xt, Xt)):
        raise DomainError(f"field along the curve is not A-admissible at t={t}")
    N = nonlinear_coefficients(spray, sample)
    return X.rate(t) + N @ curve.velocity(t)


__all__ = [
    "AnalyticCurve",
    "CurveSamples",
    "FieldAlongCurve",
    "SpraySpec",
    "integrate_geodesic",
    "nonlinear_coefficients",
    "nonlinear_covariant_derivative",
    "spray_coefficients",
    "spray_from_metric",
]
