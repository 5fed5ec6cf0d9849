"""Fast deterministic invariant checks run by ``ymsurf --command selftest``."""
from __future__ import annotations

import math

import numpy as np

from . import fixtures
from .heatkernel import hk_density
from .mmcheck import EXACT_TOL, LoopFunctional, divergence_pair, gauge_invariance_check, mm_check
from .surfgraph import EdgeAddition, add_generic_edge, subdivide_edge
from .unitary import GroupSpec, casimir_contraction, haar_sample
from .ymmeasure import (
    ConjugacyConstraint,
    EdgeConfig,
    MeasureSpec,
    abelian_expectation,
    density_unnormalized,
    partition_function,
)


def _row(quantity, method, value, tol, err):
    return {"quantity": quantity, "method": method, "mean": complex(value), "stderr": 0.0,
            "n_eff": math.inf, "sigma_discrepancy": float(err), "pass": bool(err <= tol)}


def casimir_identity(rng):
    worst = 0.0
    for N in range(1, 5):
        for _ in range(25):
            C = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
            lhs = casimir_contraction(C)
            worst = max(worst, float(np.abs(lhs + np.trace(C) / N * np.eye(N)).max()))
    return _row("casimir_identity", "basis_sum", 0.0, 1e-12, worst)


def reorientation(rng):
    fx = fixtures.five_face((0.5, 1.0, 1.5, 0.7, 1.2))
    m = MeasureSpec(fx.graph, GroupSpec(2))
    cfg = {e: haar_sample(2, rng) for e in fx.graph.edges}
    base = density_unnormalized(m, EdgeConfig(cfg))
    worst = 0.0
    for e in fx.graph.edges:
        flipped = dict(cfg)
        flipped[e] = cfg[e].conj().T
        m2 = MeasureSpec(fx.graph.reorient(e), GroupSpec(2))
        worst = max(worst, abs(density_unnormalized(m2, EdgeConfig(flipped)) - base) / base)
    return _row("reorientation_invariance", "density", base, 1e-12, worst)


def gauge(rng):
    fx = fixtures.figure_eight()
    f = LoopFunctional.from_loops([fx.loops["L"]])
    gc = gauge_invariance_check(f, fx.crossings["v"], 200, rng, 2)
    return _row("extended_gauge_invariance", "random_trials", 0.0, 1e-10, gc.max_violation)


def abelian_mm():
    rows = []
    for name, fx in (("figure_eight", fixtures.figure_eight()),
                     ("figure_eight_nongeneric", fixtures.figure_eight_nongeneric())):
        m = MeasureSpec(fx.graph, GroupSpec(1))
        r = mm_check(m, fx.loops["L"], fx.crossings["v"], ("abelian_analytic", "abelian_exact"))
        rows.append(_row(f"mm_check[{name}]", "abelian_exact", r.lhs.mean - r.rhs.mean, EXACT_TOL, r.abs_diff))
    return rows


def partition_sphere():
    rows = []
    for name, fx in (("figure_eight", fixtures.figure_eight((0.5, 0.5, 0.5, 0.5))),
                     ("five_face", fixtures.five_face((0.3, 0.4, 0.5, 0.4, 0.4)))):
        m = MeasureSpec(fx.graph, GroupSpec(1))
        z = partition_function(m, "abelian_exact").mean
        ref = hk_density(fx.graph.total_area, np.eye(1))
        rows.append(_row(f"partition[{name}]", "abelian_exact", z, 1e-10, abs(z - ref)))
    return rows


def surgery_invariance():
    fx = fixtures.figure_eight()
    m = MeasureSpec(fx.graph, GroupSpec(1))
    L = fx.loops["L"]
    base, _ = abelian_expectation(m, [L])
    sub = subdivide_edge(fx.graph, "e1")
    v1, _ = abelian_expectation(m.with_graph(sub.graph), [sub.rewrite_loop(L)])
    g2 = add_generic_edge(fx.graph, None, EdgeAddition("F3", 0, 1, "g", "F3a", 0.6, "F3b", 0.9))
    v2, _ = abelian_expectation(m.with_graph(g2), [L])
    return [_row("subdivision_invariance", "abelian_exact", v1, 1e-10, abs(v1 - base)),
            _row("edge_addition_invariance", "abelian_exact", v2, 1e-10, abs(v2 - base))]


def constrained_reduction():
    s, t, phi = 0.8, 1.3, 1.1
    fx = fixtures.constrained_disk(s, t)
    m = MeasureSpec(fx.graph, GroupSpec(1), constraints=(ConjugacyConstraint(["z"], [phi]),))
    val, _ = abelian_expectation(m, [fx.loops["L"]])
    th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
    u = lambda a: np.exp(1j * a)[:, None, None]  # noqa: E731
    rs = hk_density(s, u(-th))
    rt = hk_density(t, u(phi + th))
    ref = np.mean(np.exp(-1j * th) * rs * rt) / np.mean(rs * rt)
    return _row("constrained_reduction", "abelian_exact", val, 1e-8, abs(val - ref))


def divergence(rng):
    fx = fixtures.figure_eight()
    f = LoopFunctional.from_loops([fx.loops["L"]])
    worst = 0.0
    for _ in range(5):
        cfg = {e: haar_sample(2, rng) for e in fx.graph.edges}
        a = divergence_pair(f, cfg, pair=("e1", "e2"))
        b = divergence_pair(f, cfg, pair=("e1", "e2"), method="numeric")
        worst = max(worst, abs(a - b))
    return _row("divergence_analytic_vs_numeric", "mixed_fd", 0.0, 1e-6, worst)


def heat_kernel_mass():
    th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    mass = np.mean(hk_density(0.7, np.exp(1j * th)[:, None, None]))
    return _row("heat_kernel_mass[N=1]", "quadrature", mass, 1e-10, abs(mass - 1))


def run_selftest(seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = [casimir_identity(rng), reorientation(rng), gauge(rng)]
    rows += abelian_mm()
    rows += partition_sphere()
    rows += surgery_invariance()
    rows += [constrained_reduction(), divergence(rng), heat_kernel_mass()]
    return rows

