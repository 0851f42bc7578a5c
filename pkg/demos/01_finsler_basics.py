"""
Finsler metrics, fundamental and Cartan tensors
===============================================

A Randers metric L = (sqrt(a(v, v)) + b(v))^2 is the simplest metric whose
inner product g_v depends on the direction v. This script evaluates g and C at
a few directions, checks the Euler identities, and shows that a Riemannian
metric has vanishing Cartan tensor.
"""

import os

os.environ.setdefault("XLA_FLAGS", "--xla_backend_optimization_level=0")

import numpy as np

import anisotropic as A

np.set_printoptions(precision=5, suppress=True)

# constant wind b = (0.5, 0) on the Euclidean plane
m = A.randers(np.eye(2), np.array([0.5, 0.0]), 2)

for v in ([1.0, 0.0], [0.0, 1.0], [0.6, 0.8]):
    s = A.TangentSample([0.0, 0.0], v)
    g = A.fundamental_tensor(m, s)
    print(f"v = {v}:  L = {A.evaluate_L(m, s):.5f}")
    print("  g_v =", g.ravel())
    # Euler: g_v(v, v) = L(v)
    print(f"  g_v(v, v) - L = {s.v @ g @ s.v - A.evaluate_L(m, s):.2e}")

# The Cartan tensor is symmetric and vanishes along v. Along the wind it is zero.
s = A.TangentSample([0.0, 0.0], [0.6, 0.8])
C = A.cartan_tensor(m, s)
print("\nC_v(v, ., .) =", np.einsum("ijk,i->jk", C, s.v).ravel())
print("|C| along the wind:", np.abs(A.cartan_tensor(m, ([0.0, 0.0], [1.0, 0.0]))).max())

# Direction-independence of g is exactly the Riemannian case.
sphere = A.sphere_chart(2)
print("\nsphere: max |C| =", np.abs(A.cartan_tensor(sphere, ([0.3, 0.1], [1.0, -2.0]))).max())

# Homogeneity: g is 0-homogeneous, C is (-1)-homogeneous.
lam = 3.0
print("g_{3v} - g_v:", np.abs(A.fundamental_tensor(m, s.scaled(lam)) - A.fundamental_tensor(m, s)).max())
print("3 C_{3v} - C_v:", np.abs(lam * A.cartan_tensor(m, s.scaled(lam)) - C).max())

# A quartic metric degenerates on the coordinate axes; the library refuses to go there.
q = np.zeros((2, 2, 2, 2))
q[0, 0, 0, 0] = q[1, 1, 1, 1] = 1.0
try:
    A.fundamental_tensor(A.quartic(q, 2), [0.0, 0.0], [1.0, 0.0])
except A.DegeneracyError as exc:
    print("\nquartic on an axis:", exc)
