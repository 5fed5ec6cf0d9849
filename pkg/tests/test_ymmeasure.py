import math

import numpy as np
import pytest

from ymsurf import fixtures
from ymsurf.heatkernel import HKParams, hk_density
from ymsurf.surfgraph import (
    EdgeAddition,
    GraphError,
    add_generic_edge,
    alternating_area_vector,
    holonomy_word,
    subdivide_edge,
)
from ymsurf.unitary import GroupSpec, dagger, haar_sample, unitarity_defect, word_eval
from ymsurf.ymmeasure import (
    ConjugacyConstraint,
    EdgeConfig,
    MeasureSpec,
    abelian_expectation,
    apply_constraints,
    class_representative,
    density_unnormalized,
    face_holonomies,
    haar_expectation,
    importance_plan,
    partition_function,
    random_config,
)


def _loop_oracle(s, t, M=12):
    num = sum(math.exp(-(m * m * s + (m + 1) ** 2 * t) / 2) for m in range(-M, M + 1))
    den = sum(math.exp(-m * m * (s + t) / 2) for m in range(-M, M + 1))
    return num / den


def test_single_loop_value():
    fx = fixtures.sphere_loop(1.0, 1.0)
    val, _ = abelian_expectation(MeasureSpec(fx.graph, GroupSpec(1)), [fx.loops["L"]])
    assert val == pytest.approx(_loop_oracle(1, 1), abs=1e-12)
    assert val.real == pytest.approx(0.77864, abs=1e-5)


def test_single_loop_large_t():
    fx = fixtures.sphere_loop(1.0, 200.0)
    val, _ = abelian_expectation(MeasureSpec(fx.graph, GroupSpec(1)), [fx.loops["L"]])
    assert abs(val - math.exp(-0.5)) < 1e-12


def test_zero_observable_is_one():
    fx = fixtures.five_face()
    val, d = abelian_expectation(MeasureSpec(fx.graph, GroupSpec(1)), [], {"F1": 1.0})
    assert abs(val - 1) < 1e-14 and abs(d) < 1e-14


def test_abelian_derivative_matches_fd():
    fx = fixtures.figure_eight()
    m = MeasureSpec(fx.graph, GroupSpec(1))
    L = [fx.loops["L"]]
    _, d = abelian_expectation(m, L, {"F2": 1.0})
    h = 1e-5
    up, _ = abelian_expectation(m.with_areas({"F2": 1.0 + h}), L)
    dn, _ = abelian_expectation(m.with_areas({"F2": 1.0 - h}), L)
    assert abs(d - (up - dn) / (2 * h)) < 1e-8


def test_five_face_density_product(rng):
    fx = fixtures.five_face((0.5, 1.0, 1.5, 0.7, 1.2))
    m = MeasureSpec(fx.graph, GroupSpec(2))
    x = {e: haar_sample(2, rng) for e in fx.graph.edges}
    inv = dagger
    t = [0.5, 1.0, 1.5, 0.7, 1.2]
    ref = (hk_density(t[0], inv(x["e2"]) @ x["e1"]) * hk_density(t[1], inv(x["e3"]) @ x["e6"] @ x["e2"])
           * hk_density(t[2], inv(x["e4"]) @ x["e3"]) * hk_density(t[3], inv(x["e1"]) @ inv(x["e5"]) @ x["e4"])
           * hk_density(t[4], inv(x["e6"]) @ x["e5"]))
    assert density_unnormalized(m, EdgeConfig(x)) == pytest.approx(ref, rel=1e-12)


def test_single_edge_density(rng):
    fx = fixtures.sphere_loop(0.4, 0.9)
    m = MeasureSpec(fx.graph, GroupSpec(2))
    x = haar_sample(2, rng)
    ref = hk_density(0.4, x) * hk_density(0.9, dagger(x))
    assert density_unnormalized(m, EdgeConfig({"x": x})) == pytest.approx(ref, rel=1e-12)


def test_large_area_density_is_one(rng):
    fx = fixtures.five_face((80.0,) * 5)
    m = MeasureSpec(fx.graph, GroupSpec(2))
    cfg = random_config(m, rng)
    assert abs(density_unnormalized(m, cfg) - 1) < 1e-9


def test_reorientation_invariance(rng):
    fx = fixtures.five_face((0.5, 1.0, 1.5, 0.7, 1.2))
    m = MeasureSpec(fx.graph, GroupSpec(3))
    x = {e: haar_sample(3, rng) for e in fx.graph.edges}
    base = density_unnormalized(m, EdgeConfig(x))
    for e in fx.graph.edges:
        y = dict(x)
        y[e] = dagger(x[e])
        other = density_unnormalized(MeasureSpec(fx.graph.reorient(e), GroupSpec(3)), EdgeConfig(y))
        assert abs(other - base) <= 1e-12 * base


def test_missing_assignment_raises(rng):
    fx = fixtures.figure_eight()
    m = MeasureSpec(fx.graph, GroupSpec(2))
    with pytest.raises(KeyError):
        density_unnormalized(m, EdgeConfig({"e1": np.eye(2)}))


def test_apply_constraints_exact(rng):
    fx = fixtures.constrained_figure_eight()
    c = ConjugacyConstraint(fx.graph.boundary_components[0], [0.7, 2.4])
    m = MeasureSpec(fx.graph, GroupSpec(2), constraints=(c,))
    for _ in range(5):
        cfg = random_config(m, rng)
        b = word_eval(holonomy_word(c.boundary_word), cfg.edges, 2)
        assert np.abs(b - cfg.classes[0]).max() < 1e-12
        assert np.allclose(np.sort(np.angle(np.linalg.eigvals(b)) % (2 * np.pi)), [0.7, 2.4])
        assert all(unitarity_defect(v) < 1e-12 for v in cfg.edges.values())


def test_identity_class_gives_identity_holonomy(rng):
    fx = fixtures.constrained_disk(0.8, 1.3)
    for N in (1, 2, 3):
        c = ConjugacyConstraint(fx.graph.boundary_components[0], [0.0] * N)
        m = MeasureSpec(fx.graph, GroupSpec(N), constraints=(c,))
        cfg = random_config(m, rng)
        b = word_eval(holonomy_word(c.boundary_word), cfg.edges, N)
        assert np.abs(b - np.eye(N)).max() < 1e-12


def test_u1_class_is_a_point(rng):
    c = ConjugacyConstraint([("z", 1)], [1.1])
    a = class_representative(c, rng)
    b = class_representative(c, rng)
    assert np.array_equal(a, b)
    assert a[0, 0] == pytest.approx(np.exp(1.1j))


def test_disk_reduction_integrand(rng):
    # after substitution, the integrand is rho_s(x^-1) rho_t(y^-1 c y x)
    s, t = 0.8, 1.3
    fx = fixtures.constrained_disk(s, t)
    c = ConjugacyConstraint(fx.graph.boundary_components[0], [0.5, 1.9])
    m = MeasureSpec(fx.graph, GroupSpec(2), constraints=(c,))
    cfg = random_config(m, rng)
    x, y, rep = cfg["x"], cfg["y"], cfg.classes[0]
    ref = hk_density(s, dagger(x)) * hk_density(t, dagger(y) @ rep @ y @ x)
    assert density_unnormalized(m, cfg) == pytest.approx(ref, rel=1e-10)


def test_constraint_validation():
    fx = fixtures.constrained_disk(0.8, 1.3)
    with pytest.raises(ValueError):
        ConjugacyConstraint([("z", 1)], [7.0])
    with pytest.raises(ValueError):
        MeasureSpec(fx.graph, GroupSpec(2), constraints=(ConjugacyConstraint([("z", 1)], [0.1]),))
    with pytest.raises(GraphError):
        MeasureSpec(fx.graph, GroupSpec(1), constraints=(ConjugacyConstraint([("x", 1)], [0.1]),))


def test_apply_constraints_count_mismatch():
    fx = fixtures.constrained_disk(0.8, 1.3)
    m = MeasureSpec(fx.graph, GroupSpec(1), constraints=(ConjugacyConstraint([("z", 1)], [0.1]),))
    with pytest.raises(ValueError):
        apply_constraints(m, EdgeConfig({"x": np.eye(1), "y": np.eye(1)}), [])


def test_constrained_reduction_quadrature():
    s, t, phi = 0.8, 1.3, 1.1
    fx = fixtures.constrained_disk(s, t)
    m = MeasureSpec(fx.graph, GroupSpec(1), constraints=(ConjugacyConstraint([("z", 1)], [phi]),))
    val, _ = abelian_expectation(m, [fx.loops["L"]])
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    u = lambda a: np.exp(1j * a)[:, None, None]  # noqa: E731
    w = hk_density(s, u(-th)) * hk_density(t, u(phi + th))
    ref = np.mean(np.exp(-1j * th) * w) / np.mean(w)
    assert abs(val - ref) < 1e-8


def test_partition_three_methods_agree():
    fx = fixtures.sphere_loop(0.7, 1.3)
    m = MeasureSpec(fx.graph, GroupSpec(1))
    ref = sum(math.exp(-n * n) for n in range(-12, 13))
    assert partition_function(m, "sphere_exact").mean == pytest.approx(ref, abs=1e-12)
    assert partition_function(m, "abelian_exact").mean == pytest.approx(ref, abs=1e-12)
    est = partition_function(m, "mc", 50_000, np.random.default_rng(1))
    assert abs(est.mean - ref) < 3 * est.stderr
    est = partition_function(m, "haar_mc", 50_000, np.random.default_rng(2))
    assert abs(est.mean - ref) < 3 * est.stderr


def test_partition_graph_independent_n1():
    a = partition_function(MeasureSpec(fixtures.figure_eight((0.5,) * 4).graph, GroupSpec(1)), "abelian_exact")
    b = partition_function(MeasureSpec(fixtures.five_face((0.4,) * 5).graph, GroupSpec(1)), "abelian_exact")
    assert abs(a.mean - b.mean) < 1e-10


def test_partition_method_errors():
    fx = fixtures.figure_eight()
    with pytest.raises(ValueError):
        partition_function(MeasureSpec(fx.graph, GroupSpec(2)), "abelian_exact")
    with pytest.raises(ValueError):
        partition_function(MeasureSpec(fx.graph, GroupSpec(2)), "bogus")
    disk = fixtures.constrained_disk(0.8, 1.3)
    with pytest.raises(ValueError):
        partition_function(MeasureSpec(disk.graph, GroupSpec(1)), "sphere_exact")


def test_alternating_derivative_of_z_vanishes():
    for fx in (fixtures.figure_eight(), fixtures.figure_eight_nongeneric()):
        m = MeasureSpec(fx.graph, GroupSpec(1), normalized=False)
        v = alternating_area_vector(fx.graph, fx.crossings["v"])
        _, d = abelian_expectation(m, [], v)
        assert abs(d) < 1e-12


def test_importance_plan_covers_edges():
    for fx in (fixtures.figure_eight(), fixtures.five_face(), fixtures.figure_eight_nongeneric()):
        tree, steps, haar, rest = importance_plan(fx.graph)
        assigned = set(tree) | {e for _, e in steps} | set(haar)
        assert assigned == set(fx.graph.edges)
        assert len(tree) == len(fx.graph.vertices) - 1
        assert len(steps) + len(rest) == len(fx.graph.faces)


def test_subdivision_invariance_exact():
    fx = fixtures.five_face((0.5, 1.0, 1.5, 0.7, 1.2))
    m = MeasureSpec(fx.graph, GroupSpec(1))
    L = fx.loops["L"]
    base, _ = abelian_expectation(m, [L])
    for e in fx.graph.edges:
        sub = subdivide_edge(fx.graph, e)
        val, _ = abelian_expectation(m.with_graph(sub.graph), [sub.rewrite_loop(L)])
        assert abs(val - base) < 1e-10


def test_edge_addition_invariance_exact():
    fx = fixtures.figure_eight()
    m = MeasureSpec(fx.graph, GroupSpec(1))
    base, _ = abelian_expectation(m, [fx.loops["L"]])
    g2 = add_generic_edge(fx.graph, None, EdgeAddition("F3", 0, 1, "g", "F3a", 0.6, "F3b", 0.9))
    val, _ = abelian_expectation(m.with_graph(g2), [fx.loops["L"]])
    assert abs(val - base) < 1e-10


def test_face_holonomies_match_words(rng):
    fx = fixtures.figure_eight()
    m = MeasureSpec(fx.graph, GroupSpec(2))
    cfg = random_config(m, rng)
    hol = face_holonomies(m, cfg)
    assert set(hol) == set(fx.graph.face_ids)
    assert np.abs(hol["F1"] - dagger(cfg["e2"]) @ cfg["e1"]).max() < 1e-14
    assert np.abs(hol["F4"] - dagger(cfg["e1"]) @ cfg["e4"]).max() < 1e-14


def test_haar_expectation_loop_n1(rng):
    fx = fixtures.sphere_loop(1.0, 1.0)
    m = MeasureSpec(fx.graph, GroupSpec(1))
    num, den = haar_expectation(m, lambda c: c["x"][..., 0, 0], 200_000, rng)
    assert abs(num / den - _loop_oracle(1, 1)) < 0.02


def test_hk_params_propagate():
    fx = fixtures.sphere_loop(1.0, 1.0)
    m = MeasureSpec(fx.graph, GroupSpec(1), HKParams(tolerance=1e-6))
    val, _ = abelian_expectation(m, [fx.loops["L"]])
    assert abs(val - _loop_oracle(1, 1)) < 1e-5
