"""Invariant suite behind the ``check`` and ``eval`` commands.

All per-sample quantities come from one fused kernel (:func:`bundle`), so each
metric kind is compiled once. Properties marked ``info`` evaluate identities in
a form known not to hold in general; they are reported but never affect the
exit status.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from . import oracles
from .connections import berwald_connection, chern_connection
from .curvature import _symbol_jet
from .derivation import make_extension
from .finsler import check_nondegenerate, fundamental_with_derivatives
from .spray import nonlinear_raw, spray_from_metric

LAMBDAS = (0.5, 2.0)


def _curvature_from_jet(gam, dx, dy, v):
    Nc = jnp.einsum("mal,l->ma", gam, v)
    hd = dx - jnp.einsum("kbcm,ma->kbca", dy, Nc)
    return (
        jnp.einsum("kbca->kabc", hd)
        - jnp.einsum("kacb->kabc", hd)
        + jnp.einsum("kal,lbc->kabc", gam, gam)
        - jnp.einsum("kbl,lac->kabc", gam, gam)
    )


def _bundle_raw(metric, x, v, V):
    spray = spray_from_metric(metric)
    chern = chern_connection(metric)
    berwald = berwald_connection(spray)
    L = metric.L(x, v)
    g, dgx, dgy = fundamental_with_derivatives(metric, x, v)
    C = 0.5 * dgy
    G = spray.G(x, v)
    N = nonlinear_raw(spray, x, v)
    gamC, dxC, dyC = _symbol_jet(chern, x, v)
    gamB, dxB, dyB = _symbol_jet(berwald, x, v)
    RC = _curvature_from_jet(gamC, dxC, dyC, v)
    RB = _curvature_from_jet(gamB, dxB, dyB, v)
    # extension-dependent pieces, all coordinate slots at once
    DV = jax.jacfwd(V)(x)  # DV[m, a] = d_a V^m
    nab = DV + jnp.einsum("mal,l->ma", gamC, v)  # (nabla_{e_a} V)^m
    D = dxC + jnp.einsum("kijm,ma->kija", dyC, DV)  # d_a of p -> Gamma(p, V(p))
    RV = (
        jnp.einsum("kbca->kabc", D)
        - jnp.einsum("kacb->kabc", D)
        + jnp.einsum("kal,lbc->kabc", gamC, gamC)
        - jnp.einsum("kbl,lac->kabc", gamC, gamC)
    )
    Rext = RV - jnp.einsum("kbcm,ma->kabc", dyC, nab) + jnp.einsum("kacm,mb->kabc", dyC, nab)
    dg_along = dgx + jnp.einsum("bcm,ma->bca", dgy, DV)  # e_a(g_V(e_b, e_c)) as [b, c, a]
    compat = (
        jnp.einsum("bca->abc", dg_along)
        - jnp.einsum("iab,ic->abc", gamC, g)
        - jnp.einsum("iac,bi->abc", gamC, g)
        - 2.0 * jnp.einsum("ibc,ia->abc", C, nab)
    )
    nabla_L = jax.grad(lambda p: metric.L(p, V(p)))(x) - 2.0 * jnp.einsum("m,mn,na->a", v, g, nab)
    dL_dy = jax.grad(lambda w: metric.L(x, w))(v)
    return {
        "L": L, "g": g, "C": C, "G": G, "N": N,
        "gamma_berwald": gamB, "gamma_chern": gamC, "P": dyC, "B": dyB,
        "R": RC, "R_berwald": RB, "R_extension": Rext, "R_affine": RV,
        "compat": compat, "nabla_L": nabla_L, "dL_dy": dL_dy, "dgy": dgy,
    }  # fmt: skip


_bundle_jit = jax.jit(_bundle_raw)


def bundle(metric, sample, V=None) -> dict:
    """Every per-sample quantity used by ``eval`` and ``check`` as numpy arrays."""
    metric.domain.check(sample)
    check_nondegenerate(metric, sample)
    if V is None:
        V = make_extension(sample)
    out = _bundle_jit(metric, jnp.asarray(sample.x), jnp.asarray(sample.v), V)
    return {k: np.asarray(a) for k, a in out.items()}


# ---------------------------------------------------------------------------
# properties


def _rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _absmax(a, scale=1.0):
    return float(np.max(np.abs(a)) / max(1.0, scale))


@dataclass(frozen=True)
class Property:
    name: str
    tol: float
    fn: Callable
    info: bool = False
    description: str = ""


def _p(name, tol, info=False, description=""):
    def deco(fn):
        PROPERTIES[name] = Property(name, tol, fn, info, description)
        return fn

    return deco


PROPERTIES: dict = {}


@_p("L_homogeneity", 1e-9, description="L(x, lam v) = lam^2 L(x, v)")
def _(ctx):
    return max(abs(s["L"] - lam**2 * ctx.b["L"]) / abs(s["L"]) for lam, s in ctx.scaled.items())


@_p("euler_g", 1e-9, description="g_v(v, v) = L(v)")
def _(ctx):
    b = ctx.b
    return abs(ctx.v @ b["g"] @ ctx.v - b["L"]) / abs(b["L"])


@_p("g_symmetry", 1e-12, description="g symmetric")
def _(ctx):
    return _absmax(ctx.b["g"] - ctx.b["g"].T, np.max(np.abs(ctx.b["g"])))


@_p("g_homogeneity", 1e-8, description="g_{lam v} = g_v")
def _(ctx):
    return max(_rel(s["g"], ctx.b["g"]) for s in ctx.scaled.values())


@_p("cartan_symmetry", 1e-10, description="C totally symmetric")
def _(ctx):
    C = ctx.b["C"]
    perms = [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return max(_absmax(C - C.transpose(p), np.max(np.abs(C))) for p in perms)


@_p("cartan_v_null", 1e-8, description="C_v(v, ., .) = 0")
def _(ctx):
    C = ctx.b["C"]
    return _absmax(np.einsum("ijk,i->jk", C, ctx.v), np.max(np.abs(C)) * np.linalg.norm(ctx.v))


@_p("cartan_homogeneity", 1e-8, description="C_{lam v} = C_v / lam")
def _(ctx):
    return max(_rel(lam * s["C"], ctx.b["C"]) for lam, s in ctx.scaled.items())


@_p("vertical_L", 1e-8, description="vertical derivative of L is 2 g_v(v, .)")
def _(ctx):
    return _rel(ctx.b["dL_dy"], 2.0 * ctx.b["g"] @ ctx.v)


@_p("vertical_g", 1e-8, description="vertical derivative of g is 2 C")
def _(ctx):
    return _rel(np.einsum("ijk->kij", ctx.b["dgy"]), 2.0 * ctx.b["C"])


SUITE_FD_STEP = 3e-3


@_p("fundamental_fd", 1e-6, description="g matches finite differences of L")
def _(ctx):
    # larger step than the library default: the suite reports residuals near 1e-9, where 1e-4 is roundoff-bound
    ref = oracles.fundamental_fd(ctx.L_numpy, ctx.x, ctx.v, h=SUITE_FD_STEP * max(1.0, float(np.linalg.norm(ctx.v))))
    return _rel(ctx.b["g"], ref)


@_p("spray_homogeneity", 1e-9, description="G(x, lam v) = lam^2 G(x, v)")
def _(ctx):
    return max(_rel(s["G"], lam**2 * ctx.b["G"]) for lam, s in ctx.scaled.items())


@_p("nonlinear_euler", 1e-8, description="N v = G")
def _(ctx):
    return _rel(ctx.b["N"] @ ctx.v, ctx.b["G"])


@_p("berwald_euler", 1e-8, description="Gamma_B(v, v) = G")
def _(ctx):
    return _rel(np.einsum("kij,i,j->k", ctx.b["gamma_berwald"], ctx.v, ctx.v), ctx.b["G"])


@_p("chern_euler", 1e-8, description="Gamma_C(v, v) = G")
def _(ctx):
    return _rel(np.einsum("kij,i,j->k", ctx.b["gamma_chern"], ctx.v, ctx.v), ctx.b["G"])


@_p("berwald_symmetry", 1e-10, description="Berwald symbols symmetric")
def _(ctx):
    gam = ctx.b["gamma_berwald"]
    return _absmax(gam - gam.transpose(0, 2, 1), np.max(np.abs(gam)))


@_p("chern_torsion", 1e-10, description="Chern symbols symmetric")
def _(ctx):
    gam = ctx.b["gamma_chern"]
    return _absmax(gam - gam.transpose(0, 2, 1), np.max(np.abs(gam)))


@_p("chern_compatibility", 1e-7, description="nabla g = 0 for Chern (seeded extensions)")
def _(ctx):
    return max(_absmax(e["compat"], np.max(np.abs(ctx.b["g"]))) for e in ctx.extensions)


@_p("chern_nabla_L", 1e-7, description="nabla L = 0 for Chern (seeded extensions)")
def _(ctx):
    return max(_absmax(e["nabla_L"], abs(ctx.b["L"])) for e in ctx.extensions)


@_p("curvature_antisymmetry", 1e-8, description="R_v(u, w) = -R_v(w, u)")
def _(ctx):
    R = ctx.b["R"]
    return _absmax(R + R.transpose(0, 2, 1, 3), np.max(np.abs(R)))


@_p("bianchi_cyclic", 1e-7, description="R_v(u, w)z + R_v(w, z)u + R_v(z, u)w = 0")
def _(ctx):
    R = ctx.b["R"]
    s = R + np.einsum("kbca->kabc", R) + np.einsum("kcab->kabc", R)
    return _absmax(s, np.max(np.abs(R)))


@_p("bianchi_display", 1e-7, info=True, description="R_v(u, w)z + R_v(w, u)z + R_v(z, u)w = 0 as printed")
def _(ctx):
    R = ctx.b["R"]
    # R(u,w)z + R(w,u)z + R(z,u)w over basis triples (u, w, z) = (e_a, e_b, e_c)
    s = R + R.transpose(0, 2, 1, 3) + np.einsum("kcab->kabc", R)
    return _absmax(s, np.max(np.abs(R)))


@_p("curvature_extension_independence", 1e-7, description="R_v with P corrections is extension-independent")
def _(ctx):
    R = ctx.b["R"]
    return max(_absmax(e["R_extension"] - R, np.max(np.abs(R))) for e in ctx.extensions)


@_p("chern_P_symmetry", 1e-8, description="P_v(u, w, z) = P_v(w, u, z)")
def _(ctx):
    P = ctx.b["P"]
    return _absmax(P - P.transpose(0, 2, 1, 3), np.max(np.abs(P)))


@_p("vertprop_chern", 1e-7, description="P_v(v, v, u) = 0 for Chern")
def _(ctx):
    return _absmax(np.einsum("lijk,i,j->lk", ctx.b["P"], ctx.v, ctx.v), np.linalg.norm(ctx.v))


@_p("vertprop_berwald", 1e-7, description="B_v(v, v, u) = 0")
def _(ctx):
    return _absmax(np.einsum("lijk,i,j->lk", ctx.b["B"], ctx.v, ctx.v), np.linalg.norm(ctx.v))


@_p("berwald_B_v_null", 1e-7, description="B_v(v, u, w) = 0")
def _(ctx):
    return _absmax(np.einsum("lijk,i->ljk", ctx.b["B"], ctx.v), np.linalg.norm(ctx.v))


@_p("chern_P_v_null", 1e-7, info=True, description="P_v(v, u, w) = 0 for Chern as printed")
def _(ctx):
    return _absmax(np.einsum("lijk,i->ljk", ctx.b["P"], ctx.v), np.linalg.norm(ctx.v))


def _landsberg_pair(ctx):
    b = ctx.b
    lb = np.einsum("lijk,lm,m->ijk", b["B"], b["g"], ctx.v)
    diff = b["gamma_chern"] - b["gamma_berwald"]
    ld = np.einsum("kij,kc->ijc", diff, b["g"])
    return lb, ld


@_p("landsberg_routes", 1e-6, info=True, description="g_v(B(u, w, z), v) = g_v(Ld(u, w), z) as printed")
def _(ctx):
    lb, ld = _landsberg_pair(ctx)
    return _absmax(lb - ld, np.max(np.abs(lb)))


@_p("landsberg_factor_two", 1e-6, description="g_v(B(u, w, z), v) = 2 g_v(Ld(u, w), z)")
def _(ctx):
    lb, ld = _landsberg_pair(ctx)
    return _absmax(lb - 2.0 * ld, np.max(np.abs(lb)))


@_p("difference_vertical", 1e-7, description="vertical derivative of Ld at (v, u, w) is -Ld(w, u)")
def _(ctx):
    b = ctx.b
    diff = b["gamma_chern"] - b["gamma_berwald"]
    lhs = np.einsum("lijk,i->ljk", b["P"] - b["B"], ctx.v)  # [l, u, w]
    return _absmax(lhs + np.einsum("lwu->luw", diff), np.max(np.abs(diff)))


@_p("jacobi_operators", 1e-6, description="R_v(v, u)v equal for Chern and Berwald")
def _(ctx):
    b = ctx.b
    a = np.einsum("kabc,a,c->kb", b["R"], ctx.v, ctx.v)
    c = np.einsum("kabc,a,c->kb", b["R_berwald"], ctx.v, ctx.v)
    return _absmax(a - c, np.max(np.abs(a)))


@_p("affine_extension_dependence", 1e-4, info=True, description="max |R^V1 - R^V2| (extension dependence, zero when P = 0)")
def _(ctx):
    if len(ctx.extensions) < 2:
        return 0.0
    return float(np.max(np.abs(ctx.extensions[0]["R_affine"] - ctx.extensions[1]["R_affine"])))


# ---------------------------------------------------------------------------
# driver


@dataclass
class _Context:
    x: np.ndarray
    v: np.ndarray
    b: dict
    scaled: dict
    extensions: list
    L_numpy: Callable


@dataclass(frozen=True)
class CheckResult:
    name: str
    samples: int
    max_residual: float
    tolerance: float
    status: str
    description: str = ""


@jax.jit
def _L_kernel(metric, x, v):
    return metric.L(x, v)


def _context(metric, sample, seeds):
    base = bundle(metric, sample)
    scaled = {lam: bundle(metric, sample.scaled(lam)) for lam in LAMBDAS}
    extensions = [bundle(metric, sample, make_extension(sample, "linear", seed=s)) for s in seeds]

    def L_numpy(x, v):
        return float(_L_kernel(metric, jnp.asarray(x, dtype=float), jnp.asarray(v, dtype=float)))

    return _Context(sample.x, sample.v, base, scaled, extensions, L_numpy)


def run_suite(metric, samples, properties=None, extension_seeds=(1, 2), tolerance=None, jobs=1) -> list:
    """Evaluate the registered properties at every sample; results follow registry order."""
    names = list(PROPERTIES) if not properties else list(properties)
    unknown = [n for n in names if n not in PROPERTIES]
    if unknown:
        raise KeyError(f"unknown properties: {', '.join(unknown)}")

    def per_sample(sample):
        ctx = _context(metric, sample, extension_seeds)
        return [PROPERTIES[n].fn(ctx) for n in names]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(per_sample, samples))
    else:
        rows = [per_sample(s) for s in samples]
    residuals = np.array(rows, dtype=float).reshape(len(samples), len(names))
    out = []
    for k, n in enumerate(names):
        prop = PROPERTIES[n]
        tol = prop.tol if tolerance is None else float(tolerance)
        worst = float(np.max(residuals[:, k]))
        if prop.info:
            status = "info"
        else:
            status = "pass" if worst <= tol else "fail"
        out.append(CheckResult(n, len(samples), worst, tol, status, prop.description))
    return out


def suite_passed(results) -> bool:
    return all(r.status != "fail" for r in results)


__all__ = ["CheckResult", "PROPERTIES", "bundle", "run_suite", "suite_passed"]
