"""Tensor derivations generated by anisotropic derivations (Z, delta).

Given an anisotropic derivation ``delta`` with associated vector field ``Z``, the
induced tensor derivation acts on a component function ``h`` of a field by::

    D(h)(v) = Z(h(V))(x) - d^v h(delta^v V)

for any extension ``V`` of ``v``, and on frame fields by ``D(d_j) = delta^v d_j``.
Extensions are always passed explicitly so that independence from ``V`` can be
tested directly.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .tensors import (
    AnisotropicTensorField,
    TensorValue,
    VectorField,
    _call,
    _checked,
    _constant_fn,
    as_field,
    as_sample,
)

EXTENSION_MATCH_TOL = 1e-12


@functools.partial(jax.tree_util.register_dataclass, data_fields=["Z", "params"], meta_fields=["delta_fn"])
@dataclass(frozen=True, eq=False)
class AnisotropicDerivation:
    """Associated vector field ``Z`` plus ``delta_fn(x, v, Y[, params]) -> delta^v Y``.

    ``Y`` is a :class:`VectorField`; ``delta_fn`` must be jax-traceable.
    """

    Z: VectorField
    delta_fn: Callable
    params: object = None

    def delta(self, x, v, Y):
        return _call(self.delta_fn, self.params, x, v, Y)


def _extension_fn(x, params):
    x0, v0, matrix = params
    return v0 + matrix @ (x - x0)


def is_extension(V) -> bool:
    return isinstance(V, VectorField) and V.fn is _extension_fn


def make_extension(sample, mode="constant", seed=None, matrix=None, scale=1.0) -> VectorField:
    """Vector field V with V(x0) = v0.

    ``mode="constant"`` gives V = v0; ``mode="linear"`` adds ``M (x - x0)`` with ``M``
    either given or drawn from a seeded normal distribution (times ``scale``).
    """
    sample = as_sample(sample)
    n = sample.dim
    if mode == "constant":
        m = np.zeros((n, n))
    elif mode == "linear":
        if matrix is not None:
            m = np.asarray(matrix, dtype=float)
        else:
            if seed is None:
                raise ValueError("linear extensions need a seed or an explicit matrix")
            m = scale * np.random.default_rng(seed).normal(size=(n, n))
        if m.shape != (n, n):
            raise ValueError(f"extension matrix must be {n}x{n}")
    else:
        raise ValueError(f"unknown extension mode {mode!r}")
    return VectorField(_extension_fn, (jnp.asarray(sample.x), jnp.asarray(sample.v), jnp.asarray(m)))


def extension_from_field(V: VectorField, sample) -> VectorField:
    """Validate that an arbitrary field passes through the sample direction."""
    sample = as_sample(sample)
    val = np.asarray(V(jnp.asarray(sample.x)))
    if np.max(np.abs(val - sample.v)) > EXTENSION_MATCH_TOL * max(1.0, np.linalg.norm(sample.v)):
        raise ValueError("extension does not pass through v at x")
    return V


# ---------------------------------------------------------------------------
# kernels


def frame_coefficients_raw(D, x, v):
    """Matrix c[k, j] with delta^v d_j = c[k, j] d_k."""
    n = x.shape[0]
    eye = jnp.eye(n)
    cols = [D.delta(x, v, VectorField(_constant_fn, eye[j])) for j in range(n)]
    return jnp.stack(cols, axis=1)


def _frame_corrections(T_val, coeffs, valence):
    r, s = valence
    out = jnp.zeros_like(T_val)
    for a in range(r):
        out = out + jnp.moveaxis(jnp.tensordot(coeffs, T_val, axes=(1, a)), 0, a)
    for b in range(s):
        axis = r + b
        out = out - jnp.moveaxis(jnp.tensordot(T_val, coeffs, axes=(axis, 0)), -1, axis)
    return out


def derive_components_raw(D, T, x, v, V):
    """Components of D(T)(v) computed with the extension V (extension-dependent terms cancel)."""
    Zx = D.Z(x)
    _, along_z = jax.jvp(lambda p: T(p, V(p)), (x,), (Zx,))
    dV = D.delta(x, v, V)
    _, vertical = jax.jvp(lambda w: T(x, w), (v,), (dV,))
    out = along_z - vertical
    if T.valence != (0, 0):
        out = out + _frame_corrections(jnp.asarray(T(x, v)), frame_coefficients_raw(D, x, v), T.valence)
    return out


def derive_scalar_coordinates_raw(D, h, x, v):
    """Extension-free coordinate form Z^i dh/dx^i - v^j c[k, j] dh/dy^k."""
    Zx = D.Z(x)
    _, dx = jax.jvp(lambda p: h(p, v), (x,), (Zx,))
    coeffs = frame_coefficients_raw(D, x, v)
    _, dy = jax.jvp(lambda w: h(x, w), (v,), (coeffs @ v,))
    return dx - dy


_derive_jit = jax.jit(derive_components_raw)
_frame_jit = jax.jit(frame_coefficients_raw)
_derive_coord_jit = jax.jit(derive_scalar_coordinates_raw)


def _prepare(T, sample, V):
    sample = as_sample(sample)
    if T.domain is not None:
        T.domain.check(sample)
    extension_from_field(V, sample)
    return sample


def frame_coefficients(D: AnisotropicDerivation, sample) -> np.ndarray:
    sample = as_sample(sample)
    return _checked(_frame_jit(D, sample.x, sample.v), "frame coefficients", sample)


def derive_scalar(D: AnisotropicDerivation, h, sample, V: VectorField) -> float:
    """D(h)(v) = Z(h(V))(x) - d^v h(delta^v V)."""
    sample = as_sample(sample)
    h = as_field(h, dim=sample.dim)
    if h.valence != (0, 0):
        raise ValueError("derive_scalar expects a (0, 0) field")
    sample = _prepare(h, sample, V)
    return float(_checked(_derive_jit(D, h, sample.x, sample.v, V), "derivation", sample))


def derive_scalar_coordinates(D: AnisotropicDerivation, h, sample) -> float:
    sample = as_sample(sample)
    h = as_field(h, dim=sample.dim)
    return float(_checked(_derive_coord_jit(D, h, sample.x, sample.v), "derivation", sample))


def derive_tensor(D: AnisotropicDerivation, T: AnisotropicTensorField, sample, V: VectorField) -> TensorValue:
    """Components of the tensor derivation D(T) at the sample (valence preserved)."""
    sample = as_sample(sample)
    T = as_field(T, dim=sample.dim)
    sample = _prepare(T, sample, V)
    comps = _checked(_derive_jit(D, T, sample.x, sample.v, V), "derivation", sample)
    return TensorValue(T.valence, comps)


__all__ = [
    "AnisotropicDerivation",
    "derive_scalar",
    "derive_scalar_coordinates",
    "derive_tensor",
    "extension_from_field",
    "frame_coefficients",
    "is_extension",
    "make_extension",
]
