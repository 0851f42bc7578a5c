"""Anisotropic tensor fields on a single coordinate chart.

An anisotropic ``(r, s)`` tensor field is a function of a base point ``x`` and
a direction ``v`` returning a dense component array of shape ``(n,) * (r + s)``
with the contravariant indices first. All fields, vector fields and metrics are
registered as JAX pytrees so that compiled kernels are reused across instances
that only differ in numerical parameters.

Derivatives are exact nested forward-mode (``jax.jvp`` / ``jax.jacfwd``).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DomainError, EvaluationError

MIN_DIRECTION_NORM = 1e-12


# ---------------------------------------------------------------------------
# domains and samples


@dataclass(frozen=True)
class ChartDomain:
    """Open subset of R^n: an (optionally unbounded) open box intersected with a predicate.

    ``lower``/``upper`` are tuples (``None`` means unbounded); ``predicate`` maps a
    point to ``bool``.
    """

    dim: int
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    predicate: Optional[Callable] = None

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("chart dimension must be >= 1")
        for bound in (self.lower, self.upper):
            if bound is not None and len(bound) != self.dim:
                raise ValueError("box bounds must have one entry per coordinate")
        if self.lower is not None and self.upper is not None:
            if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("empty chart box")

    @property
    def bounded(self):
        return self.lower is not None and self.upper is not None

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.lower is not None and np.any(x <= np.asarray(self.lower)):
            return False
        if self.upper is not None and np.any(x >= np.asarray(self.upper)):
            return False
        if self.predicate is not None and not bool(self.predicate(x)):
            return False
        return True

    def is_open_at(self, x, eps=1e-6) -> bool:
        """Probe openness at a member point with +-eps coordinate perturbations."""
        if not self.contains(x):
            return False
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.dim)
        return all(self.contains(x + s * eps * e) for e in eye for s in (1.0, -1.0))


@dataclass(frozen=True)
class ConicDomain:
    """Conic open subset A of the slit tangent bundle over a chart."""

    chart: ChartDomain
    fiber_predicate: Optional[Callable] = None

    @property
    def dim(self):
        return self.chart.dim

    def contains(self, x, v) -> bool:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,) or not np.all(np.isfinite(v)):
            return False
        if np.linalg.norm(v) < MIN_DIRECTION_NORM:
            return False
        if not self.chart.contains(x):
            return False
        if self.fiber_predicate is not None:
            return bool(self.fiber_predicate(np.asarray(x, dtype=float), v))
        return True

    def check(self, sample: "TangentSample"):
        if not self.contains(sample.x, sample.v):
            raise DomainError(f"sample outside the conic domain: x={sample.x.tolist()}, v={sample.v.tolist()}")

    def is_conic_at(self, x, v, scales=(0.5, 2.0, 10.0)) -> bool:
        v = np.asarray(v, dtype=float)
        return all(self.contains(x, lam * v) for lam in scales)

    def direction_at(self, x, rng=None, tries=64):
        """Return some member direction over ``x`` (None if none was found)."""
        rng = np.random.default_rng(0) if rng is None else rng
        candidates = list(np.eye(self.dim)) + list(-np.eye(self.dim))
        candidates += list(rng.normal(size=(tries, self.dim)))
        for v in candidates:
            if self.contains(x, v):
                return np.asarray(v, dtype=float)
        return None


def whole_chart(dim, lower=None, upper=None) -> ConicDomain:
    """Slit tangent bundle over a box chart (the full R^n by default)."""
    lower = None if lower is None else tuple(float(a) for a in lower)
    upper = None if upper is None else tuple(float(a) for a in upper)
    return ConicDomain(ChartDomain(int(dim), lower, upper))


@dataclass(frozen=True, eq=False)
class TangentSample:
    """Evaluation site (x, v): chart coordinates and fiber coordinates."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise ValueError("x and v must have the same dimension")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DomainError("non-finite sample coordinates")
        if np.linalg.norm(v) < MIN_DIRECTION_NORM:
            raise DomainError(f"direction norm below {MIN_DIRECTION_NORM:g}: v={v.tolist()}")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def dim(self):
        return self.x.shape[0]

    def scaled(self, lam):
        return TangentSample(self.x, lam * self.v)

    def __repr__(self):
        return f"TangentSample(x={self.x.tolist()}, v={self.v.tolist()})"


def as_sample(sample, v=None) -> TangentSample:
    """Accept a TangentSample, an ``(x, v)`` pair, or ``x`` with ``v`` given separately."""
    if isinstance(sample, TangentSample):
        return sample
    if v is None and isinstance(sample, tuple) and len(sample) == 2 and np.ndim(sample[0]) == 1:
        return TangentSample(*sample)
    return TangentSample(sample, v)


def random_samples(domain: ConicDomain, rng, count, box=None, max_tries=10000):
    """Draw ``count`` samples from ``domain``.

    Base points are uniform in ``box`` (``(lower, upper)``), defaulting to the chart
    box or ``[-1, 1]^n`` when the chart is unbounded; directions are standard normal.
    """
    n = domain.dim
    if box is None:
        if domain.chart.bounded:
            lo, hi = np.asarray(domain.chart.lower), np.asarray(domain.chart.upper)
            # stay away from the boundary so that finite-difference probes fit
            pad = 0.05 * (hi - lo)
            box = (lo + pad, hi - pad)
        else:
            box = (-np.ones(n), np.ones(n))
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    out = []
    for _ in range(max_tries):
        x = rng.uniform(lo, hi)
        v = rng.normal(size=n)
        if domain.contains(x, v):
            out.append(TangentSample(x, v))
            if len(out) == count:
                return out
    raise DomainError("could not draw enough samples inside the conic domain")


# ---------------------------------------------------------------------------
# component arrays


@dataclass(frozen=True, eq=False)
class TensorValue:
    """Components of an ``(r, s)`` tensor at one sample, contravariant indices first."""

    valence: tuple
    components: np.ndarray

    def __post_init__(self):
        r, s = (int(a) for a in self.valence)
        comps = np.asarray(self.components, dtype=float)
        if comps.ndim != r + s or len(set(comps.shape)) > 1:
            raise ValueError(f"components of shape {comps.shape} do not fit valence {(r, s)}")
        object.__setattr__(self, "valence", (r, s))
        object.__setattr__(self, "components", comps)

    @property
    def dim(self):
        return self.components.shape[0] if self.components.ndim else None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


# ---------------------------------------------------------------------------
# vector fields on the chart


def _call(fn, params, *args):
    return fn(*args) if params is None else fn(*args, params)


@functools.partial(jax.tree_util.register_dataclass, data_fields=["params"], meta_fields=["fn"])
@dataclass(frozen=True, eq=False)
class VectorField:
    """Classical vector field X(x) on the chart.

    ``fn`` must be written with ``jax.numpy``; it is called as ``fn(x)`` or, when
    ``params`` is given, ``fn(x, params)``.
    """

    fn: Callable
    params: object = None

    def __call__(self, x):
        return _call(self.fn, self.params, x)

    def jacobian(self, x):
        """Matrix dX^i/dx^j."""
        return jax.jacfwd(self.__call__)(x)


def _constant_fn(x, c):
    return c + 0.0 * x


def _affine_fn(x, params):
    matrix, offset = params
    return offset + matrix @ x


def _poly2_fn(x, params):
    c, a, q = params
    return c + a @ x + jnp.einsum("ijk,j,k->i", q, x, x)


def _rotation_fn(x, params):
    return params @ x


def constant_field(c) -> VectorField:
    return VectorField(_constant_fn, jnp.asarray(c, dtype=float))


def linear_field(matrix, offset=None) -> VectorField:
    """X(x) = offset + matrix x."""
    matrix = jnp.asarray(matrix, dtype=float)
    offset = jnp.zeros(matrix.shape[0]) if offset is None else jnp.asarray(offset, dtype=float)
    return VectorField(_affine_fn, (matrix, offset))


def polynomial_field(c, a, q) -> VectorField:
    """Quadratic field X^i = c^i + a^i_j x^j + q^i_jk x^j x^k."""
    return VectorField(_poly2_fn, tuple(jnp.asarray(t, dtype=float) for t in (c, a, q)))


def random_polynomial_field(dim, rng, scale=0.5) -> VectorField:
    return polynomial_field(
        scale * rng.normal(size=dim),
        scale * rng.normal(size=(dim, dim)),
        0.5 * scale * rng.normal(size=(dim, dim, dim)),
    )


def rotation_field(dim, i=0, j=1) -> VectorField:
    """Infinitesimal rotation in the (x^i, x^j) plane: X = -x^j e_i + x^i e_j."""
    m = np.zeros((dim, dim))
    m[i, j], m[j, i] = -1.0, 1.0
    return VectorField(_rotation_fn, jnp.asarray(m))


def dilation_field(dim) -> VectorField:
    """X(x) = x."""
    return VectorField(_rotation_fn, jnp.eye(dim))


def lie_bracket(X: VectorField, Y: VectorField, x):
    """Classical bracket [X, Y](x) = DY X - DX Y."""
    _, dy = jax.jvp(Y, (x,), (X(x),))
    _, dx = jax.jvp(X, (x,), (Y(x),))
    return dy - dx


# ---------------------------------------------------------------------------
# anisotropic tensor fields


@functools.partial(
    jax.tree_util.register_dataclass,
    data_fields=["params"],
    meta_fields=["fn", "valence", "dim", "domain", "smoothness_order"],
)
@dataclass(frozen=True, eq=False)
class AnisotropicTensorField:
    """Valence-``(r, s)`` field ``(x, v) -> components``.

    ``fn`` is called as ``fn(x, v)`` or ``fn(x, v, params)``; it must be traceable
    by JAX. The optional ``domain`` is used for membership checks only.
    """

    fn: Callable
    valence: tuple
    dim: int
    params: object = None
    domain: Optional[ConicDomain] = None
    smoothness_order: int = 3

    def __post_init__(self):
        object.__setattr__(self, "valence", tuple(int(a) for a in self.valence))
        if self.smoothness_order < 3:
            raise ValueError("anisotropic fields must be at least C^3")

    @property
    def rank(self):
        return sum(self.valence)

    def __call__(self, x, v):
        return _call(self.fn, self.params, x, v)

    def evaluate(self, sample: TangentSample) -> TensorValue:
        sample = as_sample(sample)
        if self.domain is not None:
            self.domain.check(sample)
        comps = _checked(_eval_field(self, sample.x, sample.v), "field", sample)
        if comps.shape != (self.dim,) * self.rank:
            raise ValueError(f"field returned shape {comps.shape}, expected {(self.dim,) * self.rank}")
        return TensorValue(self.valence, comps)


@jax.jit
def _eval_field(T, x, v):
    return jnp.asarray(T(x, v), dtype=float)


def _checked(arr, what, sample=None):
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        where = "" if sample is None else f" at {sample!r}"
        raise EvaluationError(f"non-finite {what}{where}")
    return arr


def as_field(f, valence=(0, 0), dim=None) -> AnisotropicTensorField:
    if isinstance(f, AnisotropicTensorField):
        return f
    if not callable(f):
        raise TypeError("expected an AnisotropicTensorField or a callable f(x, v)")
    return AnisotropicTensorField(f, valence, dim)


def _lift_vector_fn(x, v, X):
    return X(x)


def lift_vector_field(X: VectorField, dim) -> AnisotropicTensorField:
    """Embed a classical vector field as the v-independent (1, 0) field X*(v) = X(pi(v))."""
    return AnisotropicTensorField(_lift_vector_fn, (1, 0), dim, params=X)


def _lift_classical_fn(x, v, params):
    return params(x)


def lift_tensor(fn, valence, dim, params=None) -> AnisotropicTensorField:
    """Lift a classical tensor field ``fn(x)`` (or ``fn(x, params)``)."""
    if params is None:
        return AnisotropicTensorField(_lift_classical_fn, valence, dim, params=_ClassicalTensor(fn))
    return AnisotropicTensorField(_lift_classical_fn, valence, dim, params=_ClassicalTensor(fn, params))


@functools.partial(jax.tree_util.register_dataclass, data_fields=["params"], meta_fields=["fn"])
@dataclass(frozen=True, eq=False)
class _ClassicalTensor:
    fn: Callable
    params: object = None

    def __call__(self, x):
        return _call(self.fn, self.params, x)


def _constant_tensor_fn(x, v, c):
    return c + 0.0 * jnp.sum(x)


def constant_tensor(components, valence) -> AnisotropicTensorField:
    comps = jnp.asarray(components, dtype=float)
    dim = comps.shape[0] if comps.ndim else None
    return AnisotropicTensorField(_constant_tensor_fn, valence, dim, params=comps)


def identity_tensor(dim) -> AnisotropicTensorField:
    """The (1, 1) identity (Kronecker delta)."""
    return constant_tensor(jnp.eye(dim), (1, 1))


# ---------------------------------------------------------------------------
# differentiation engine


def _nested_jvp(fun, point, directions):
    """d^k/dt_1..dt_k fun(point + sum t_i z_i) at t = 0 by nested forward mode."""
    if directions.shape[0] == 0:
        return fun(point)

    def inner(p):
        return _nested_jvp(fun, p, directions[1:])

    return jax.jvp(inner, (point,), (directions[0],))[1]


@jax.jit
def _fiber_directional(f, x, v, directions):
    return _nested_jvp(lambda w: f(x, w), v, directions)


@jax.jit
def _base_directional(f, x, v, direction):
    return jax.jvp(lambda p: f(p, v), (x,), (direction,))[1]


def _validate_directions(directions, dim, max_order=3):
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[1] != dim:
        raise ValueError(f"directions must have {dim} components")
    if not 1 <= dirs.shape[0] <= max_order:
        raise ValueError(f"between 1 and {max_order} directions are supported")
    if np.any(np.linalg.norm(dirs, axis=1) == 0.0):
        raise ValueError("directions must be nonzero")
    return dirs


def fiber_derivative(f, sample, directions, order=None, domain=None) -> float:
    """Directional derivative of a scalar field in the fiber variable.

    Returns ``d^k/dt_1...dt_k f(x, v + sum_i t_i z_i)`` at ``t = 0`` where the
    ``z_i`` are the rows of ``directions`` and ``k = len(directions) <= 3``.
    """
    sample = as_sample(sample)
    f = as_field(f, dim=sample.dim)
    dirs = _validate_directions(directions, sample.dim)
    if order is not None and order != dirs.shape[0]:
        raise ValueError("order must equal the number of directions")
    domain = domain if domain is not None else f.domain
    if domain is not None:
        domain.check(sample)
    out = _checked(_fiber_directional(f, sample.x, sample.v, dirs), "fiber derivative", sample)
    return float(out) if out.ndim == 0 else out


def base_derivative(f, sample, direction, domain=None) -> float:
    """First derivative in the base point along ``direction``, holding v fixed."""
    sample = as_sample(sample)
    f = as_field(f, dim=sample.dim)
    u = _validate_directions(direction, sample.dim, max_order=1)[0]
    domain = domain if domain is not None else f.domain
    if domain is not None:
        domain.check(sample)
    out = _checked(_base_directional(f, sample.x, sample.v, u), "base derivative", sample)
    return float(out) if out.ndim == 0 else out


def _vertical_fn(x, v, T):
    r = T.valence[0]
    jac = jax.jacfwd(lambda w: T(x, w))(v)
    return jnp.moveaxis(jac, -1, r)


def vertical_derivation(T: AnisotropicTensorField) -> AnisotropicTensorField:
    """Vertical derivation: differentiate components in the fiber variable.

    The new index is stored as the first covariant slot, so an ``(r, s)`` field
    becomes ``(r, s + 1)`` with components ``dT/dy^k`` at array axis ``r``.
    """
    r, s = T.valence
    return AnisotropicTensorField(_vertical_fn, (r, s + 1), T.dim, params=T, domain=T.domain)


def _product_fn(x, v, params):
    T1, T2 = params
    (r1, s1), (r2, s2) = T1.valence, T2.valence
    a = jnp.asarray(T1(x, v))
    b = jnp.asarray(T2(x, v))
    outer = jnp.tensordot(a, b, axes=0)
    # [r1, s1, r2, s2] -> [r1, r2, s1, s2]
    axes = list(range(r1)) + [r1 + s1 + i for i in range(r2)] + [r1 + i for i in range(s1)]
    axes += [r1 + s1 + r2 + i for i in range(s2)]
    return jnp.transpose(outer, axes)


def tensor_product(T1: AnisotropicTensorField, T2: AnisotropicTensorField) -> AnisotropicTensorField:
    (r1, s1), (r2, s2) = T1.valence, T2.valence
    dims = {d for d in (T1.dim, T2.dim) if d is not None}
    if len(dims) > 1:
        raise ValueError("tensor product of fields on different charts")
    dim = dims.pop() if dims else None
    domain = T1.domain if T1.domain is not None else T2.domain
    return AnisotropicTensorField(_product_fn, (r1 + r2, s1 + s2), dim, params=(T1, T2), domain=domain)


@functools.lru_cache(maxsize=None)
def _contract_fn(i, j):
    def fn(x, v, T):
        r = T.valence[0]
        return jnp.trace(jnp.asarray(T(x, v)), axis1=i, axis2=r + j)

    return fn


def contract(T: AnisotropicTensorField, i=0, j=0) -> AnisotropicTensorField:
    """Contract contravariant slot ``i`` with covariant slot ``j`` (both 0-based)."""
    r, s = T.valence
    if r < 1 or s < 1:
        raise ValueError("contraction needs at least one slot of each kind")
    if not (0 <= i < r and 0 <= j < s):
        raise ValueError(f"slots ({i}, {j}) out of range for valence {(r, s)}")
    return AnisotropicTensorField(_contract_fn(i, j), (r - 1, s - 1), T.dim, params=T, domain=T.domain)


def contract_components(comps, valence, i=0, j=0):
    """Same as :func:`contract` on a bare component array."""
    r, _ = valence
    return np.trace(np.asarray(comps), axis1=i, axis2=r + j)


def apply_tensor(comps, valence, covectors=(), vectors=()):
    """Full evaluation T(theta^1..theta^r, X_1..X_s) of a component array."""
    r, s = valence
    if len(covectors) != r or len(vectors) != s:
        raise ValueError("argument count does not match valence")
    out = np.asarray(comps, dtype=float)
    for arg in list(covectors) + list(vectors):
        out = np.tensordot(np.asarray(arg, dtype=float), out, axes=(0, 0))
    return float(out)


def field_sum(fields: Sequence[AnisotropicTensorField], weights=None) -> AnisotropicTensorField:
    """Linear combination of fields of equal valence."""
    fields = tuple(fields)
    weights = jnp.ones(len(fields)) if weights is None else jnp.asarray(weights, dtype=float)
    if len({f.valence for f in fields}) != 1:
        raise ValueError("fields must share a valence")
    return AnisotropicTensorField(_sum_fn, fields[0].valence, fields[0].dim, params=(fields, weights))


def _sum_fn(x, v, params):
    fields, weights = params
    return sum(w * jnp.asarray(f(x, v)) for f, w in zip(fields, weights))


__all__ = [
    "AnisotropicTensorField",
    "ChartDomain",
    "ConicDomain",
    "MIN_DIRECTION_NORM",
    "TangentSample",
    "TensorValue",
    "VectorField",
    "apply_tensor",
    "as_sample",
    "base_derivative",
    "constant_field",
    "constant_tensor",
    "contract",
    "contract_components",
    "dilation_field",
    "fiber_derivative",
    "field_sum",
    "identity_tensor",
    "lie_bracket",
    "lift_tensor",
    "lift_vector_field",
    "linear_field",
    "polynomial_field",
    "random_polynomial_field",
    "random_samples",
    "rotation_field",
    "tensor_product",
    "vertical_derivation",
    "whole_chart",
]
