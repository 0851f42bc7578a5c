"""Pseudo-Finsler metrics on a chart: the Lagrangian L, fundamental tensor g, Cartan tensor C.

Registry metrics are closed-form in the fiber variable; their base-point dependence
comes from coefficient functions (polynomial tables, a few named closed forms, or
user callables written with ``jax.numpy``).
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DegeneracyError
from .tensors import (
    AnisotropicTensorField,
    ChartDomain,
    ConicDomain,
    TangentSample,
    _checked,
    as_sample,
    whole_chart,
)

DET_THRESHOLD = 1e-10
COND_WARNING = 1e12


# ---------------------------------------------------------------------------
# coefficient functions a(x), b(x), q(x)


@functools.partial(jax.tree_util.register_dataclass, data_fields=["coeffs"], meta_fields=["powers"])
@dataclass(frozen=True, eq=False)
class Polynomial:
    """Array-valued polynomial sum_t coeffs[t] * prod_i x_i**powers[t][i]."""

    coeffs: object
    powers: tuple

    def __call__(self, x):
        out = 0.0
        for t, pw in enumerate(self.powers):
            mono = 1.0
            for i, p in enumerate(pw):
                if p:
                    mono = mono * x[i] ** p
            out = out + self.coeffs[t] * mono
        return out

    @classmethod
    def from_table(cls, terms, dim):
        """Build from ``[{"coeff": array, "powers": [p_1..p_n]}, ...]``."""
        if not terms:
            raise ValueError("polynomial table is empty")
        coeffs, powers = [], []
        for term in terms:
            pw = tuple(int(p) for p in term.get("powers", [0] * dim))
            if len(pw) != dim or any(p < 0 for p in pw):
                raise ValueError(f"bad monomial powers {pw} for dimension {dim}")
            coeffs.append(np.asarray(term["coeff"], dtype=float))
            powers.append(pw)
        shapes = {c.shape for c in coeffs}
        if len(shapes) != 1:
            raise ValueError("all polynomial coefficients must have the same shape")
        return cls(jnp.asarray(np.stack(coeffs)), tuple(powers))

    @classmethod
    def constant(cls, value, dim):
        return cls(jnp.asarray(np.asarray(value, dtype=float)[None]), ((0,) * dim,))


@functools.partial(jax.tree_util.register_dataclass, data_fields=["scale"], meta_fields=["dim"])
@dataclass(frozen=True, eq=False)
class SphereConformal:
    """Round-sphere metric in stereographic coordinates, a = 4 R^2 / (1 + |x|^2)^2 * I.

    ``scale`` is R^2; R = 1 gives sectional curvature 1.
    """

    dim: int
    scale: object = 1.0

    def __call__(self, x):
        return 4.0 * self.scale / (1.0 + x @ x) ** 2 * jnp.eye(self.dim)


@functools.partial(jax.tree_util.register_dataclass, data_fields=[], meta_fields=["fn"])
@dataclass(frozen=True, eq=False)
class CallableCoefficient:
    """Wraps a user function (written with jax.numpy); compiled per function object."""

    fn: Callable

    def __call__(self, *args):
        return self.fn(*args)


NAMED_CLOSED_FORMS = {"sphere_conformal": SphereConformal}


def _as_coefficient(obj, dim, shape):
    if isinstance(obj, (Polynomial, SphereConformal, CallableCoefficient)):
        return obj
    if callable(obj):
        return CallableCoefficient(obj)
    arr = np.asarray(obj, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"constant coefficient has shape {arr.shape}, expected {shape}")
    return Polynomial.constant(arr, dim)


# ---------------------------------------------------------------------------
# metric specification


@functools.partial(
    jax.tree_util.register_dataclass,
    data_fields=["coefficients"],
    meta_fields=["kind", "dim", "lagrangian", "domain"],
)
@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A pseudo-Finsler metric L(x, v) together with its conic domain.

    Build instances with :func:`euclidean`, :func:`riemannian`, :func:`randers`,
    :func:`quartic` or :func:`custom` rather than directly.
    """

    kind: str
    dim: int
    lagrangian: Callable
    coefficients: tuple
    domain: ConicDomain

    def L(self, x, v):
        return self.lagrangian(x, v, self.coefficients)

    def __repr__(self):
        return f"MetricSpec(kind={self.kind!r}, dim={self.dim})"


def _euclidean_L(x, v, coefficients):
    return v @ v


def _riemannian_L(x, v, coefficients):
    (a,) = coefficients
    return v @ a(x) @ v


def _randers_L(x, v, coefficients):
    a, b = coefficients
    return (jnp.sqrt(v @ a(x) @ v) + b(x) @ v) ** 2


def _quartic_L(x, v, coefficients):
    (q,) = coefficients
    return jnp.sqrt(jnp.einsum("ijkl,i,j,k,l->", q(x), v, v, v, v))


def _custom_L(x, v, coefficients):
    (fn,) = coefficients
    return fn(x, v)


def euclidean(dim, domain: Optional[ConicDomain] = None) -> MetricSpec:
    """L = sum_i (v^i)^2."""
    return MetricSpec("euclidean", int(dim), _euclidean_L, (), domain or whole_chart(dim))


def riemannian(a, dim, domain: Optional[ConicDomain] = None) -> MetricSpec:
    """L = a_ij(x) v^i v^j for a symmetric nondegenerate matrix field ``a``."""
    coeff = _as_coefficient(a, dim, (dim, dim))
    return MetricSpec("riemannian", int(dim), _riemannian_L, (coeff,), domain or whole_chart(dim))


def sphere_chart(dim=2, radius=1.0) -> MetricSpec:
    """Round sphere of the given radius in stereographic coordinates."""
    return riemannian(SphereConformal(int(dim), float(radius) ** 2), dim)


def randers(a, b, dim, domain: Optional[ConicDomain] = None, probes=None) -> MetricSpec:
    """L = (sqrt(a_x(v, v)) + b_x(v))^2 with |b|_a < 1 on the chart.

    The norm condition is checked at ``probes`` (base points), defaulting to the chart
    center, box corners and a few seeded random points.
    """
    a_c = _as_coefficient(a, dim, (dim, dim))
    b_c = _as_coefficient(b, dim, (dim,))
    domain = domain or whole_chart(dim)
    for x in _probe_points(domain.chart) if probes is None else probes:
        x = jnp.asarray(x, dtype=float)
        am, bv = np.asarray(a_c(x)), np.asarray(b_c(x))
        if np.any(np.linalg.eigvalsh(0.5 * (am + am.T)) <= 0):
            raise ValueError(f"Randers a(x) is not positive definite at x={np.asarray(x).tolist()}")
        if bv @ np.linalg.solve(am, bv) >= 1.0:
            raise ValueError(f"Randers condition |b|_a < 1 fails at x={np.asarray(x).tolist()}")
    return MetricSpec("randers", int(dim), _randers_L, (a_c, b_c), domain)


@dataclass(frozen=True, eq=False)
class _QuarticFiber:
    """Fiber membership for quartic metrics: Q_x(v) > 0 and optionally |v^i| >= margin |v|."""

    q: object
    axis_margin: float

    def __call__(self, x, v):
        Q = float(np.einsum("ijkl,i,j,k,l->", np.asarray(self.q(jnp.asarray(x))), v, v, v, v))
        if not Q > 0.0:
            return False
        if self.axis_margin > 0.0:
            return bool(np.min(np.abs(v)) >= self.axis_margin * np.linalg.norm(v))
        return True


def quartic(q, dim, axis_margin=0.0, chart: Optional[ChartDomain] = None) -> MetricSpec:
    """L = sqrt(q_ijkl(x) v^i v^j v^k v^l).

    ``q`` is symmetrised over its four indices. ``axis_margin > 0`` removes the cones
    around the coordinate hyperplanes ``v^i = 0`` where e.g. ``(v^1)^4 + (v^2)^4``
    degenerates.
    """
    q_c = _as_coefficient(q, dim, (dim,) * 4)
    if isinstance(q_c, Polynomial):
        q_c = Polynomial(_symmetrize4(q_c.coeffs), q_c.powers)
    chart = chart or ChartDomain(int(dim))
    domain = ConicDomain(chart, _QuarticFiber(q_c, float(axis_margin)))
    return MetricSpec("quartic", int(dim), _quartic_L, (q_c,), domain)


def _symmetrize4(coeffs):
    import itertools

    perms = list(itertools.permutations(range(4)))
    c = jnp.asarray(coeffs)
    return sum(jnp.transpose(c, (0,) + tuple(1 + p for p in perm)) for perm in perms) / len(perms)


def perturbed_quartic(dim, kappa=0.2, slope=0.1) -> MetricSpec:
    """Near-Euclidean quartic, Q = |v|^4 + (kappa + slope x^1) sum_i (v^i)^4."""
    base = np.zeros((dim,) * 4)
    diag = np.zeros((dim,) * 4)
    for i in range(dim):
        diag[i, i, i, i] = 1.0
        for j in range(dim):
            base[i, i, j, j] += 1.0
    powers = [(0,) * dim, (1,) + (0,) * (dim - 1)]
    terms = [{"coeff": base + kappa * diag, "powers": powers[0]}, {"coeff": slope * diag, "powers": powers[1]}]
    return quartic(Polynomial.from_table(terms, dim), dim)


def custom(L, dim, domain: Optional[ConicDomain] = None, smoothness_order=3) -> MetricSpec:
    """User metric ``L(x, v)`` written with jax.numpy (must be C^3 or better)."""
    if smoothness_order < 3:
        raise ValueError("custom metrics must declare smoothness_order >= 3")
    return MetricSpec("custom", int(dim), _custom_L, (CallableCoefficient(L),), domain or whole_chart(dim))


def _probe_points(chart: ChartDomain, count=8, seed=0):
    n = chart.dim
    rng = np.random.default_rng(seed)
    if chart.bounded:
        lo, hi = np.asarray(chart.lower), np.asarray(chart.upper)
        center = 0.5 * (lo + hi)
        pts = [center] + [lo + (hi - lo) * (0.02 + 0.96 * rng.random(n)) for _ in range(count)]
        corners = np.array(np.meshgrid(*[[0.02, 0.98]] * n)).reshape(n, -1).T
        pts += [lo + (hi - lo) * c for c in corners[: 2**min(n, 4)]]
    else:
        pts = [np.zeros(n)] + list(rng.normal(size=(count, n)))
    return [p for p in pts if chart.contains(p)]


# ---------------------------------------------------------------------------
# kernels (traceable)


def lagrangian(metric, x, v):
    return metric.L(x, v)


def fundamental(metric, x, v):
    """g_ij = 1/2 d^2 L / dy^i dy^j (forward over forward)."""
    return 0.5 * jax.jacfwd(jax.jacfwd(metric.L, 1), 1)(x, v)


def cartan(metric, x, v):
    """C_ijk = 1/4 d^3 L / dy^i dy^j dy^k."""
    return 0.25 * jax.jacfwd(jax.jacfwd(jax.jacfwd(metric.L, 1), 1), 1)(x, v)


def fundamental_with_derivatives(metric, x, v):
    """Return g, dg/dx (index appended) and dg/dy (index appended) from one Jacobian."""
    n = x.shape[0]

    def gz(z):
        return fundamental(metric, z[:n], z[n:])

    z = jnp.concatenate([x, v])
    jac = jax.jacfwd(gz)(z)
    return fundamental(metric, x, v), jac[..., :n], jac[..., n:]


_L_jit = jax.jit(lagrangian)
_g_jit = jax.jit(fundamental)
_C_jit = jax.jit(cartan)


@jax.jit
def _g_report(metric, x, v):
    g = fundamental(metric, x, v)
    return g, jnp.linalg.det(g), jnp.linalg.cond(g)


# ---------------------------------------------------------------------------
# public operations


def _sample_in(metric, sample, v=None):
    sample = as_sample(sample, v)
    if sample.dim != metric.dim:
        raise ValueError(f"sample dimension {sample.dim} does not match metric dimension {metric.dim}")
    metric.domain.check(sample)
    return sample


def evaluate_L(metric: MetricSpec, sample, v=None) -> float:
    """L(x, v); raises DomainError outside the conic domain."""
    sample = _sample_in(metric, sample, v)
    return float(_checked(_L_jit(metric, sample.x, sample.v), "L", sample))


def check_nondegenerate(metric: MetricSpec, sample: TangentSample):
    """Raise DegeneracyError when |det g| <= 1e-10; warn on condition number > 1e12."""
    g, det, cond = (np.asarray(a) for a in _g_report(metric, sample.x, sample.v))
    _checked(g, "fundamental tensor", sample)
    if not abs(float(det)) > DET_THRESHOLD:
        raise DegeneracyError(f"degenerate fundamental tensor (det={float(det):.3e}) at {sample!r}")
    if float(cond) > COND_WARNING:
        warnings.warn(f"fundamental tensor is ill-conditioned (cond={float(cond):.2e}) at {sample!r}", RuntimeWarning)
    return g


def fundamental_tensor(metric: MetricSpec, sample, v=None) -> np.ndarray:
    """g_v as an n x n matrix; raises DegeneracyError when |det g| <= 1e-10."""
    sample = _sample_in(metric, sample, v)
    return check_nondegenerate(metric, sample)


def cartan_tensor(metric: MetricSpec, sample, v=None) -> np.ndarray:
    """C_v as an n x n x n array (totally symmetric, C_v(v, ., .) = 0)."""
    sample = _sample_in(metric, sample, v)
    check_nondegenerate(metric, sample)
    return _checked(_C_jit(metric, sample.x, sample.v), "Cartan tensor", sample)


def inverse_fundamental_tensor(metric: MetricSpec, sample, v=None) -> np.ndarray:
    g = fundamental_tensor(metric, sample, v)
    return np.linalg.inv(g)


def _L_field_fn(x, v, metric):
    return metric.L(x, v)


def _g_field_fn(x, v, metric):
    return fundamental(metric, x, v)


def _C_field_fn(x, v, metric):
    return cartan(metric, x, v)


def lagrangian_field(metric: MetricSpec) -> AnisotropicTensorField:
    return AnisotropicTensorField(_L_field_fn, (0, 0), metric.dim, params=metric, domain=metric.domain)


def fundamental_field(metric: MetricSpec) -> AnisotropicTensorField:
    return AnisotropicTensorField(_g_field_fn, (0, 2), metric.dim, params=metric, domain=metric.domain)


def cartan_field(metric: MetricSpec) -> AnisotropicTensorField:
    return AnisotropicTensorField(_C_field_fn, (0, 3), metric.dim, params=metric, domain=metric.domain)


def validate_metric(metric: MetricSpec, samples, rtol=1e-9, scales=(0.5, 2.0, 10.0)):
    """Check positivity, 2-homogeneity and nondegeneracy at the given samples."""
    for s in samples:
        s = _sample_in(metric, s)
        L0 = evaluate_L(metric, s)
        if not L0 > 0:
            raise ValueError(f"L is not positive at {s!r}")
        for lam in scales:
            Ll = evaluate_L(metric, s.scaled(lam))
            if abs(Ll - lam**2 * L0) > rtol * lam**2 * abs(L0):
                raise ValueError(f"L is not 2-homogeneous at {s!r} (lambda={lam})")
        check_nondegenerate(metric, s)


__all__ = [
    "CallableCoefficient",
    "MetricSpec",
    "NAMED_CLOSED_FORMS",
    "Polynomial",
    "SphereConformal",
    "cartan_field",
    "cartan_tensor",
    "check_nondegenerate",
    "custom",
    "euclidean",
    "evaluate_L",
    "fundamental_field",
    "fundamental_tensor",
    "inverse_fundamental_tensor",
    "lagrangian_field",
    "perturbed_quartic",
    "quartic",
    "randers",
    "riemannian",
    "sphere_chart",
    "validate_metric",
]
