"""
Curvature, Landsberg tensor and Jacobi fields
=============================================

The anisotropic curvature R_v needs care: the naive curvature of the affine
connection nabla^V obtained by freezing the direction along an extension V
depends on V. Correcting it with the vertical derivative P of the symbols gives
a tensor that does not. We compare both, then look at Jacobi fields.
"""

import os

os.environ.setdefault("XLA_FLAGS", "--xla_backend_optimization_level=0")

import numpy as np

import anisotropic as A

np.set_printoptions(precision=6, suppress=True)

m = A.perturbed_quartic(2)
chern = A.chern_connection(m)
s = A.TangentSample([0.1, 0.2], [1.0, 0.4])
u, w, z = np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.5, 0.5])

print("extension        affine R^V(u, w)z        corrected R_v(u, w)z")
for label, V in [
    ("constant", A.make_extension(s)),
    ("linear seed 1", A.make_extension(s, "linear", seed=1)),
    ("linear seed 2", A.make_extension(s, "linear", seed=2)),
]:
    print(f"{label:15s}  {A.affine_curvature(chern, V, s, u, w, z)}   {A.curvature_tensor(chern, s, u, w, z, extension=V)}")
print("symbol-level     ", " " * 24, A.curvature_tensor(chern, s, u, w, z))

# The Landsberg tensor measures the gap between the Chern and Berwald connections.
# Pairing the Berwald tensor with v gives exactly twice the g-lowered difference tensor.
lb = A.landsberg_tensor(m, s, u, w, z)
ld = A.landsberg_via_difference(m, s, u, w, z)
print(f"\ng(B(u, w, z), v) = {lb:.6f}   g(Chern - Berwald)(u, w; z) = {ld:.6f}   ratio = {lb / ld:.6f}")

# Jacobi fields on the unit sphere: |J(t)| = sin t for J(0) = 0, |J'(0)| = 1.
sphere = A.sphere_chart(2)
geo = A.integrate_geodesic(A.spray_from_metric(sphere), [0.0, 0.0], [0.5, 0.0], (0.0, 3.0), tol=1e-11)
J = A.integrate_jacobi(A.chern_connection(sphere), geo, [0.0, 0.0], [0.0, 0.5], tol=1e-11)
print("\n  t     |J(t)|      sin t")
for t in (0.5, 1.0, np.pi / 2, 2.0, 3.0):
    print(f"{t:5.3f}  {J.norm(sphere, t):.8f}  {np.sin(t):.8f}")

# The Chern and Berwald connections have different curvature tensors but the same Jacobi operator.
berwald = A.berwald_connection(A.spray_from_metric(m))
R_c = A.curvature_components(chern, s).components
R_b = A.curvature_components(berwald, s).components
print("\nmax |R_chern - R_berwald|       =", np.abs(R_c - R_b).max())
print("max |R(v, u)v chern - berwald| =", A.jacobi_operators_difference(chern, berwald, s, u))
