"""Acceptance criteria, one test per criterion.

Every test records a single PASS/FAIL line with the measured residuals and the
wall time; the lines are printed together at the end of the pytest run (and by
``python tests/test_acceptance.py``). Tolerances and sample counts are the ones
the criteria state; nothing here is relaxed to make a criterion pass.
"""

import subprocess
import sys
import tempfile
import time
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np
from conftest import REGISTRY, rel_err, riemannian_poly, samples

import anisotropic as A
from anisotropic import oracles
from anisotropic.finsler import fundamental, fundamental_with_derivatives
from anisotropic.spray import nonlinear_raw, spray_coefficients_raw

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LINES = []
ELAPSED = []


class Criterion:
    """Collects named sub-checks and reports them on one line."""

    def __init__(self, number, title, budget=None):
        self.number, self.title, self.budget = number, title, budget
        self.parts = []
        self.start = time.perf_counter()

    def le(self, label, value, tol):
        self.parts.append((f"{label} {value:.2e} <= {tol:g}", bool(value <= tol)))

    def gt(self, label, value, bound):
        self.parts.append((f"{label} {value:.2e} > {bound:g}", bool(value > bound)))

    def eq(self, label, value, target):
        self.parts.append((f"{label} {value!r} == {target!r}", bool(value == target)))

    def finish(self):
        elapsed = time.perf_counter() - self.start
        ELAPSED.append(elapsed)
        if self.budget is not None:
            self.parts.append((f"time {elapsed:.1f}s < {self.budget:.0f}s", elapsed < self.budget))
        ok = all(p[1] for p in self.parts)
        failed = [p[0] for p in self.parts if not p[1]]
        detail = "; ".join(p[0] for p in self.parts)
        line = f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}  {self.title}  [{detail}]"
        LINES.append(line)
        print(line)
        assert ok, "failed: " + "; ".join(failed)


def finsler_pair():
    return {"randers": REGISTRY["randers"](), "quartic": REGISTRY["quartic"]()}


def both(metric):
    return A.chern_connection(metric), A.berwald_connection(A.spray_from_metric(metric))


def _a(metric):
    if metric.kind == "euclidean":
        return lambda x: np.eye(metric.dim)
    return lambda x: np.asarray(metric.coefficients[0](np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------


def test_criterion_01_riemannian_reduction():
    c = Criterion(1, "Riemannian reduction", budget=10)
    metrics = {"flat": A.euclidean(2), "sphere": A.sphere_chart(2), "polynomial": riemannian_poly()}
    cart = lc = bc = riem = 0.0
    for m in metrics.values():
        ch, bw = both(m)
        for s in samples(m, 4, seed=101):
            cart = max(cart, float(np.max(np.abs(A.cartan_tensor(m, s)))))
            gam = A.christoffel(ch, s)
            lc = max(lc, rel_err(gam, oracles.levi_civita(_a(m), s.x)))
            bc = max(bc, float(np.max(np.abs(A.christoffel(bw, s) - gam))))
            riem = max(riem, rel_err(A.curvature_components(ch, s).components, oracles.riemann(_a(m), s.x)))
    c.le("cartan", cart, 1e-10)
    c.le("chern-vs-LC rel", lc, 1e-6)
    c.le("berwald-vs-chern", bc, 1e-7)
    c.le("R-vs-riemann rel", riem, 1e-5)
    c.finish()


LAMBDAS = (0.5, 2.0, 7.0)


def _euler_raw(metric, x, v):
    spray = A.spray_from_metric(metric)
    g, _, dgy = fundamental_with_derivatives(metric, x, v)
    # Berwald symbols are the y-Jacobian of N; one trace yields both
    gamB, N = jax.jacfwd(lambda w: (nonlinear_raw(spray, x, w),) * 2, has_aux=True)(v)
    return {
        "L": metric.L(x, v),
        "g": g,
        "C": 0.5 * dgy,
        "G": spray_coefficients_raw(spray, x, v),
        "N": N,
        "gamB": gamB,
        "g_scaled": jax.vmap(lambda lam: fundamental(metric, x, lam * v))(jnp.asarray(LAMBDAS)),
    }


_euler_batch = jax.jit(jax.vmap(_euler_raw, in_axes=(None, 0, 0)))


def test_criterion_02_euler_homogeneity():
    c = Criterion(2, "Euler/homogeneity, 200 samples per registry metric", budget=10)
    worst = dict(euler_g=0.0, g_homog=0.0, cartan_v=0.0, N_euler=0.0, berwald_euler=0.0)
    for factory in REGISTRY.values():
        m = factory()
        ss = samples(m, 200, seed=202)
        X, V = np.array([s.x for s in ss]), np.array([s.v for s in ss])
        b = {k: np.asarray(a) for k, a in _euler_batch(m, jnp.asarray(X), jnp.asarray(V)).items()}
        assert np.all(np.isfinite(b["g"])) and np.min(np.abs(np.linalg.det(b["g"]))) > 1e-8
        scale_g = np.maximum(1.0, np.abs(b["g"]).max(axis=(1, 2)))
        scale_G = np.maximum(1.0, np.abs(b["G"]).max(axis=1))
        scale_C = np.maximum(1.0, np.abs(b["C"]).max(axis=(1, 2, 3)) * np.linalg.norm(V, axis=1))
        worst["euler_g"] = max(worst["euler_g"], np.max(np.abs(np.einsum("ni,nij,nj->n", V, b["g"], V) - b["L"]) / np.abs(b["L"])))
        worst["g_homog"] = max(worst["g_homog"], np.max(np.abs(b["g_scaled"] - b["g"][:, None]).max(axis=(1, 2, 3)) / scale_g))
        worst["cartan_v"] = max(worst["cartan_v"], np.max(np.abs(np.einsum("nijk,ni->njk", b["C"], V)).max(axis=(1, 2)) / scale_C))
        worst["N_euler"] = max(worst["N_euler"], np.max(np.abs(np.einsum("nij,nj->ni", b["N"], V) - b["G"]).max(axis=1) / scale_G))
        gvv = np.einsum("nkij,ni,nj->nk", b["gamB"], V, V)
        worst["berwald_euler"] = max(worst["berwald_euler"], np.max(np.abs(gvv - b["G"]).max(axis=1) / scale_G))
    for k, v in worst.items():
        c.le(k, float(v), 1e-8)
    c.finish()


def _project_fn(x, v, S):
    P = jnp.eye(v.shape[0]) - jnp.outer(v, v) / jnp.dot(v, v)
    return jnp.einsum("iab,aj,bk->ijk", S, P, P)


def test_criterion_03_chern_characterization():
    c = Criterion(3, "Chern is torsion-free and metric, 100 samples", budget=20)
    compat = asym = 0.0
    control = 0.0
    S = np.random.default_rng(303).normal(size=(2, 2, 2))
    pert_field = A.AnisotropicTensorField(_project_fn, (1, 2), 2, jnp.asarray(0.5 * (S + S.transpose(0, 2, 1))))
    for name, m in finsler_pair().items():
        ch = A.chern_connection(m)
        pert = A.perturbed_connection(ch, pert_field, 1e-2, symmetric=True)
        for k, s in enumerate(samples(m, 50, seed=303)):
            V = A.make_extension(s, "linear", seed=k)
            g = A.fundamental_tensor(m, s)
            r = A.metric_compatibility_residual(ch, m, s, V)
            compat = max(compat, float(np.max(np.abs(r)) / max(1.0, np.max(np.abs(g)))))
            gam = A.christoffel(ch, s)
            asym = max(asym, float(np.max(np.abs(gam - gam.transpose(0, 2, 1)))))
            rp = A.metric_compatibility_residual(pert, m, s, V)
            control = max(control, float(np.max(np.abs(rp))))
    c.le("nabla g", compat, 1e-7)
    c.eq("max|Gamma^i_jk - Gamma^i_kj|", asym, 0.0)
    c.gt("perturbed control", control, 1e-3)
    c.finish()


def test_criterion_04_curvature_well_defined():
    c = Criterion(4, "R_v extension-independent, 50 samples x 2 metrics", budget=20)
    e = np.eye(2)
    triples = [(e[a], e[b], e[d]) for a in range(2) for b in range(2) for d in range(2) if a != b]
    indep = 0.0
    affine = 0.0
    for m in finsler_pair().values():
        ch = A.chern_connection(m)
        for k, s in enumerate(samples(m, 50, seed=404)):
            exts = [A.make_extension(s), A.make_extension(s, "linear", seed=2 * k + 1), A.make_extension(s, "linear", seed=2 * k + 2)]
            scale = max(1.0, float(np.max(np.abs(A.curvature_components(ch, s).components))))
            for u, w, z in triples:
                vals = [A.curvature_tensor(ch, s, u, w, z, extension=V) for V in exts]
                indep = max(indep, max(float(np.max(np.abs(v - vals[0]))) for v in vals[1:]) / scale)
                aff = [A.affine_curvature(ch, V, s, u, w, z) for V in exts[1:]]
                affine = max(affine, float(np.max(np.abs(aff[0] - aff[1]))))
    c.le("R_v across extensions (/scale)", indep, 1e-7)
    c.gt("affine R^V across extensions", affine, 1e-4)
    c.finish()


def test_criterion_05_curvature_symmetries():
    c = Criterion(5, "antisymmetry and the Bianchi display, 100 samples")
    anti = display = cyclic = 0.0
    for m in finsler_pair().values():
        for conn in both(m):
            for s in samples(m, 25, seed=505):
                R = A.curvature_components(conn, s).components
                scale = max(1.0, float(np.max(np.abs(R))))
                anti = max(anti, float(np.max(np.abs(R + R.transpose(0, 2, 1, 3)))) / scale)
                # R(u, w)z + R(w, u)z + R(z, u)w with (u, w, z) = (e_a, e_b, e_c)
                disp = R + R.transpose(0, 2, 1, 3) + np.einsum("kcab->kabc", R)
                display = max(display, float(np.max(np.abs(disp))) / scale)
                cyc = R + np.einsum("kbca->kabc", R) + np.einsum("kcab->kabc", R)
                cyclic = max(cyclic, float(np.max(np.abs(cyc))) / scale)
    c.le("antisymmetry", anti, 1e-8)
    c.le("Bianchi display", display, 1e-7)
    c.parts.append((f"(cyclic Bianchi {cyclic:.2e}, not part of the criterion)", True))
    c.finish()


def test_criterion_06_berwald_landsberg_identities():
    c = Criterion(6, "B, P, Landsberg and difference-tensor identities")
    bnull = pnull = routes = eq34 = ratio = 0.0
    for m in finsler_pair().values():
        ch, bw = both(m)
        S = A.spray_from_metric(m)
        for s in samples(m, 25, seed=606):
            B = A.berwald_tensor(S, s).components
            P = A.vertical_derivative_connection(ch, s).components
            bnull = max(bnull, float(np.max(np.abs(np.einsum("lijk,i->ljk", B, s.v)))))
            pnull = max(pnull, float(np.max(np.abs(np.einsum("lijk,i->ljk", P, s.v)))))
            lb = A.landsberg_components(m, s)
            g = A.fundamental_tensor(m, s)
            Ld = A.difference_tensor(ch, bw, s)
            ld = np.einsum("lij,lk->ijk", Ld, g)
            scale = max(1.0, float(np.max(np.abs(lb))))
            routes = max(routes, float(np.max(np.abs(lb - ld))) / scale)
            ratio = max(ratio, float(np.max(np.abs(lb - 2.0 * ld))) / scale)
            dLd = A.difference_vertical_derivative(ch, bw, s).components
            eq34 = max(eq34, float(np.max(np.abs(np.einsum("lijk,i->ljk", dLd, s.v) + Ld.transpose(0, 2, 1)))))
    c.le("B_v(v,u,w)", bnull, 1e-7)
    c.le("P_v(v,u,w)", pnull, 1e-7)
    c.le("Landsberg routes", routes, 1e-6)
    c.le("vertical Ld(v,u,w) + Ld(w,u)", eq34, 1e-7)
    c.parts.append((f"(routes with factor 2: {ratio:.2e})", True))
    c.finish()


def test_criterion_07_jacobi():
    c = Criterion(7, "Jacobi fields", budget=30)
    sphere = A.sphere_chart(2)
    geo = A.integrate_geodesic(A.spray_from_metric(sphere), [0.0, 0.0], [0.5, 0.0], (0.0, 3.0), tol=1e-11)
    J = A.integrate_jacobi(A.chern_connection(sphere), geo, [0.0, 0.0], [0.0, 0.5], tol=1e-11)
    ts = np.linspace(0.0, 3.0, 61)[1:]
    c.le("sphere |J| vs sin t rel", max(abs(J.norm(sphere, t) / np.sin(t) - 1.0) for t in ts), 1e-4)

    m = REGISTRY["randers"]()
    S = A.spray_from_metric(m)
    ch, bw = both(m)
    x0, v0, J0, J0dot = np.array([0.0, 0.1]), np.array([0.5, 0.3]), np.array([0.1, -0.2]), np.array([0.3, 0.2])
    geo = A.connection_geodesic(ch, x0, v0, (0.0, 1.0), tol=1e-11)
    Jr = A.integrate_jacobi(ch, geo, J0, J0dot, tol=1e-11)
    ts = np.linspace(0.0, 1.0, 21)
    G = lambda x, v: A.spray_coefficients(S, (np.asarray(x), np.asarray(v)))  # noqa: E731
    ref = oracles.geodesic_variation(G, x0, v0, J0, J0dot, ts)
    got = np.array([Jr.at(t) for t in ts])
    c.le("randers variation sup rel", float(np.max(np.abs(got - ref)) / np.max(np.abs(ref))), 1e-3)

    ops = 0.0
    rng = np.random.default_rng(707)
    for mm in finsler_pair().values():
        chm, bwm = both(mm)
        for s in samples(mm, 25, seed=707):
            u = rng.normal(size=2)
            scale = max(1.0, float(np.max(np.abs(A.curvature_tensor(chm, s, s.v, u, s.v)))))
            ops = max(ops, A.jacobi_operators_difference(chm, bwm, s, u) / scale)
    c.le("Chern vs Berwald R_v(v,u)v", ops, 1e-6)
    c.finish()


def _one_form_fn(x, v, m):
    return 2.0 * fundamental(m, x, v) @ v


def test_criterion_08_lie_and_flow():
    c = Criterion(8, "Lie derivative and flows", budget=30)
    X = A.linear_field(np.array([[0.3, -0.5], [0.4, 0.1]]), np.array([0.2, -0.1]))
    worst = {}
    for m in finsler_pair().values():
        fields = {
            "(0,0)": A.lagrangian_field(m),
            "(0,1)": A.AnisotropicTensorField(_one_form_fn, (0, 1), 2, m),
            "(0,2)": A.fundamental_field(m),
        }
        for s in samples(m, 3, seed=808, box=0.4):
            for key, T in fields.items():
                flow = A.flow_pullback_derivative(X, T, s, chart=m.domain.chart).components
                eng = A.lie_derivative_tensor(X, T, s).components
                worst[key] = max(worst.get(key, 0.0), rel_err(flow, eng))
    for key, val in worst.items():
        c.le(f"flow vs engine {key}", val, 1e-5)
    euclid = A.euclidean(2)
    rot = A.killing_check(A.rotation_field(2), euclid, samples(euclid, 20, seed=809))
    c.le("rotation Killing residual", rot.max_residual, 1e-9)
    dil = A.killing_check(A.dilation_field(2), euclid, samples(euclid, 20, seed=810))
    f = dil.conformal_factor if dil.conformal_factor is not None else float("nan")
    c.le("dilation |f - 2|", abs(f - 2.0), 1e-6)
    c.finish()


def _mixed_fn(x, v, p):
    M, a = p
    return M + a * jnp.outer(v, x) + jnp.sin(x[0]) * jnp.outer(v, v) / jnp.dot(v, v)


def test_criterion_09_engine_extension_independence():
    c = Criterion(9, "derivation engine extension-independent, 50 instances per kind")
    rng = np.random.default_rng(909)
    metrics = list(finsler_pair().values())
    worst = {"covariant": 0.0, "lie": 0.0}
    for k in range(50):
        m = metrics[k % 2]
        s = samples(m, 1, seed=1000 + k)[0]
        Xf = A.random_polynomial_field(2, rng)
        T = A.AnisotropicTensorField(_mixed_fn, (1, 1), 2, (jnp.asarray(rng.normal(size=(2, 2))), rng.normal()))
        exts = [A.make_extension(s), A.make_extension(s, "linear", seed=3 * k + 1), A.make_extension(s, "linear", seed=3 * k + 2)]
        for kind, D in (("covariant", A.covariant_derivation(A.chern_connection(m), Xf)), ("lie", A.lie_derivation(Xf))):
            sc = [A.derive_scalar(D, m.L, s, V) for V in exts]
            tv = [A.derive_tensor(D, T, s, V).components for V in exts]
            res_s = max(abs(v - sc[0]) for v in sc[1:]) / max(1.0, abs(sc[0]))
            res_t = max(float(np.max(np.abs(v - tv[0]))) for v in tv[1:]) / max(1.0, float(np.max(np.abs(tv[0]))))
            worst[kind] = max(worst[kind], res_s, res_t)
    for kind, val in worst.items():
        c.le(f"{kind} (/scale)", val, 1e-7)
    c.finish()


def _check_all(outdir):
    codes = []
    for cfg in sorted(CONFIGS.glob("*.json")):
        out = Path(outdir) / f"{cfg.stem}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "anisotropic.cli", "check", "--config", str(cfg), "--output", str(out)],
            capture_output=True,
            text=True,
        )
        codes.append(proc.returncode)
    return codes


def test_criterion_10_cli_determinism():
    c = Criterion(10, "CLI check over the shipped configs")
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        t0 = time.perf_counter()
        codes = _check_all(first)
        elapsed = time.perf_counter() - t0
        replay = _check_all(second)
        names = sorted(p.name for p in Path(first).iterdir())
        same = all((Path(first) / n).read_bytes() == (Path(second) / n).read_bytes() for n in names)
    c.eq("exit codes", codes, [0] * len(codes))
    c.eq("replay exit codes", replay, [0] * len(replay))
    c.eq("byte-identical replay", same, True)
    c.le("check wall time (s)", elapsed, 180)
    c.le("acceptance criteria 1-10 wall time (s)", sum(ELAPSED) + time.perf_counter() - c.start, 180)
    c.finish()


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
