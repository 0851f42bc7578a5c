"""
Sprays, connections and geodesics
=================================

The geodesic spray of a Finsler metric, the Berwald connection it induces and
the Chern connection all share the same geodesics, although their Christoffel
symbols differ. We integrate a geodesic of a Randers metric with a
position-dependent wind in the three ways and compare the curves.
"""

import os

os.environ.setdefault("XLA_FLAGS", "--xla_backend_optimization_level=0")

import numpy as np

import anisotropic as A

np.set_printoptions(precision=6, suppress=True)

a = A.Polynomial.from_table(
    [{"coeff": np.eye(2), "powers": [0, 0]}, {"coeff": [[0.2, 0.05], [0.05, 0.1]], "powers": [1, 0]}], 2
)
b = A.Polynomial.from_table(
    [{"coeff": [0.3, 0.1], "powers": [0, 0]}, {"coeff": [0.0, 0.15], "powers": [1, 0]}, {"coeff": [-0.1, 0.0], "powers": [0, 1]}],
    2,
)
m = A.randers(a, b, 2, A.whole_chart(2, (-1.0, -1.0), (1.0, 1.0)))
S = A.spray_from_metric(m)
chern = A.chern_connection(m)
berwald = A.berwald_connection(S)

s = A.TangentSample([0.1, -0.2], [0.7, 0.4])
print("G(x, v)       =", A.spray_coefficients(S, s))
print("Chern   Gamma(v, v) =", np.einsum("kij,i,j->k", A.christoffel(chern, s), s.v, s.v))
print("Berwald Gamma(v, v) =", np.einsum("kij,i,j->k", A.christoffel(berwald, s), s.v, s.v))
print("max |Chern - Berwald| =", np.abs(A.difference_tensor(chern, berwald, s)).max())

x0, v0 = np.zeros(2), np.array([0.8, 0.3])
curves = {
    "spray": A.integrate_geodesic(S, x0, v0, (0.0, 1.0), tol=1e-11),
    "chern": A.connection_geodesic(chern, x0, v0, (0.0, 1.0), tol=1e-11),
    "berwald": A.connection_geodesic(berwald, x0, v0, (0.0, 1.0), tol=1e-11),
}
print("\n  t    spray x(t)              |chern - spray|  |berwald - spray|")
for t in np.linspace(0.0, 1.0, 6):
    ref = curves["spray"].position(t)
    dc = np.linalg.norm(curves["chern"].position(t) - ref)
    db = np.linalg.norm(curves["berwald"].position(t) - ref)
    print(f"{t:4.1f}  {ref}   {dc:.1e}          {db:.1e}")

# Leaving the chart is reported rather than extrapolated.
fast = A.integrate_geodesic(S, x0, [4.0, 0.0], (0.0, 1.0))
print(f"\nfast geodesic exits the chart at t = {fast.exit_time:.4f}, x = {fast.position(fast.exit_time)}")

# On the round sphere in stereographic coordinates, geodesics through the pole are straight rays.
sphere = A.sphere_chart(2)
geo = A.integrate_geodesic(A.spray_from_metric(sphere), [0.0, 0.0], [0.3, 0.4], (0.0, 2.0), tol=1e-11)
print("sphere x(2) =", geo.position(2.0), " expected", np.tan(1.0) * np.array([0.6, 0.8]))
