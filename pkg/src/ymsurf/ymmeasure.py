"""Sengupta's Yang-Mills measure on an admissible graph.

The unnormalized density of the edge variables (positively oriented edges)
with respect to product normalized Haar measure is the product over faces
of ``rho_{|F|}(h_F)``.  A boundary component may be constrained to a
conjugacy class: its last edge variable is then not integrated but solved
for so that the boundary holonomy equals a class representative ``c``,
and ``c`` is averaged over the class with the Ad-invariant measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import abelian
from .heatkernel import HKParams, heat_kernel_table, hk_density
from .surfgraph import (
    GraphError,
    LoopWord,
    SurfaceGraph,
    Word,
    as_word,
    holonomy_word,
    require_valid,
)
from .unitary import GroupSpec, dagger, haar_sample, word_eval


@dataclass(frozen=True)
class ConjugacyConstraint:
    """Boundary holonomy constrained to the class with eigenvalue angles ``angles``."""

    boundary_word: Word
    angles: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundary_word", as_word(self.boundary_word))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        for a in self.angles:
            if not 0 <= a < 2 * math.pi:
                raise ValueError(f"class angle {a} outside [0, 2pi)")

    @property
    def designated(self) -> tuple[str, int]:
        """The signed edge whose variable is solved for (last letter of the word)."""
        return self.boundary_word[-1]

    def diagonal(self) -> np.ndarray:
        return np.diag(np.exp(1j * np.array(self.angles)))


@dataclass(frozen=True)
class MeasureSpec:
    graph: SurfaceGraph
    group: GroupSpec
    hk: HKParams = HKParams()
    constraints: tuple[ConjugacyConstraint, ...] = ()
    normalized: bool = True

    def __post_init__(self):
        require_valid(self.graph)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        comps = [tuple(b) for b in self.graph.boundary_components]
        seen = set()
        designated = set()
        for c in self.constraints:
            if len(c.angles) != self.group.N:
                raise ValueError(f"constraint needs {self.group.N} angles, got {len(c.angles)}")
            w = tuple(c.boundary_word)
            if w not in comps:
                raise GraphError(f"constraint word {w} is not a boundary component of the graph")
            if w in seen:
                raise GraphError("two constraints on the same boundary component")
            seen.add(w)
            e = c.designated[0]
            if sum(1 for x, _ in w if x == e) != 1:
                raise GraphError(f"designated edge {e!r} must occur once in its boundary word")
            if e in designated:
                raise GraphError(f"edge {e!r} designated by two constraints")
            designated.add(e)

    @property
    def N(self) -> int:
        return self.group.N

    @property
    def substituted_edges(self) -> tuple[str, ...]:
        return tuple(c.designated[0] for c in self.constraints)

    @property
    def free_edges(self) -> tuple[str, ...]:
        sub = set(self.substituted_edges)
        return tuple(e for e in self.graph.edges if e not in sub)

    def with_graph(self, graph: SurfaceGraph, constraints=None) -> "MeasureSpec":
        return MeasureSpec(graph, self.group, self.hk,
                           self.constraints if constraints is None else tuple(constraints), self.normalized)

    def with_areas(self, areas: Mapping[str, float]) -> "MeasureSpec":
        return self.with_graph(self.graph.with_areas(areas))


@dataclass
class EdgeConfig:
    """Edge variables (possibly batched ``(..., N, N)``) and class representatives."""

    edges: dict[str, np.ndarray]
    classes: list[np.ndarray] = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.edges[name]

    def copy(self) -> "EdgeConfig":
        return EdgeConfig({k: np.array(v) for k, v in self.edges.items()}, [np.array(c) for c in self.classes])


# -- densities --------------------------------------------------------------

def face_holonomies(m: MeasureSpec, cfg: EdgeConfig) -> dict[str, np.ndarray]:
    return {f.id: word_eval(holonomy_word(f.boundary), cfg.edges, m.N) for f in m.graph.faces}


def _require_assigned(m: MeasureSpec, cfg: EdgeConfig) -> None:
    missing = [e for e in m.graph.edges if e not in cfg.edges]
    if missing:
        raise KeyError(f"edge variables not assigned: {missing}")


def density_unnormalized(m: MeasureSpec, cfg: EdgeConfig) -> float | np.ndarray:
    """Product over faces of the heat kernel at the face holonomy."""
    _require_assigned(m, cfg)
    out = 1.0
    for f in m.graph.faces:
        h = word_eval(holonomy_word(f.boundary), cfg.edges, m.N)
        out = out * hk_density(f.area, h, m.hk)
    return out


def log_density_terms(m: MeasureSpec, cfg: EdgeConfig, with_dt: bool = False):
    """Per-face ``log rho`` (and ``d/dt log rho``) as dicts of (batched) arrays."""
    logs, scores = {}, {}
    for f in m.graph.faces:
        h = word_eval(holonomy_word(f.boundary), cfg.edges, m.N)
        tab = heat_kernel_table(m.N, float(f.area), m.hk)
        rho, drho = tab.density_and_dt(h)
        logs[f.id] = np.log(rho)
        scores[f.id] = drho / rho
    return (logs, scores) if with_dt else logs


# -- constraints ------------------------------------------------------------

def class_representative(c: ConjugacyConstraint, rng: np.random.Generator | None = None,
                         conjugator: np.ndarray | None = None) -> np.ndarray:
    """``V diag(e^{i angles}) V^-1`` with ``V`` Haar (or the given conjugator)."""
    D = c.diagonal()
    N = D.shape[0]
    if N == 1:
        return D
    if conjugator is None:
        conjugator = haar_sample(N, rng if rng is not None else np.random.default_rng())
    return conjugator @ D @ dagger(conjugator)


def apply_constraints(m: MeasureSpec, cfg: EdgeConfig, reps: Sequence[np.ndarray] | None = None) -> EdgeConfig:
    """Fill in each constrained boundary's designated edge.

    With boundary word ``w_1 ... w_k`` the holonomy is ``x_k ... x_1``; the
    designated letter ``w_k`` is set so this product equals the class
    representative ``c``: ``x_k = c (x_{k-1} ... x_1)^-1``.
    """
    reps = list(cfg.classes if reps is None else reps)
    if len(reps) != len(m.constraints):
        raise ValueError(f"need {len(m.constraints)} class representatives, got {len(reps)}")
    out = EdgeConfig(dict(cfg.edges), [np.asarray(r) for r in reps])
    for c, rep in zip(m.constraints, out.classes):
        e, s = c.designated
        for x, _ in c.boundary_word[:-1]:
            if x not in out.edges:
                raise KeyError(f"boundary edge {x!r} must be assigned before substitution")
        rest = word_eval(holonomy_word(c.boundary_word[:-1]), out.edges, m.N)
        val = rep @ dagger(rest)
        out.edges[e] = val if s > 0 else dagger(val)
    return out


def random_config(m: MeasureSpec, rng: np.random.Generator, size=None) -> EdgeConfig:
    """Haar-distributed free edges with class representatives filled in."""
    edges = {e: haar_sample(m.N, rng, size) for e in m.free_edges}
    reps = []
    for c in m.constraints:
        D = c.diagonal()
        V = haar_sample(m.N, rng, size)
        reps.append(V @ D @ dagger(V))
    return apply_constraints(m, EdgeConfig(edges), reps)


# -- abelian exact evaluator --------------------------------------------------

def _abelian_problem(m: MeasureSpec):
    if m.N != 1:
        raise ValueError("abelian evaluator requires N = 1")
    edges = list(m.graph.edges)
    index = {e: i for i, e in enumerate(edges)}
    rows, areas, phases = [], [], []
    for f in m.graph.faces:
        rows.append(abelian.exponent_vector([f.boundary], index))
        areas.append(f.area)
        phases.append(0.0)
    for c in m.constraints:
        rows.append(abelian.exponent_vector([c.boundary_word], index))
        areas.append(0.0)
        phases.append(c.angles[0])
    prob = abelian.LatticeProblem(np.array(rows, dtype=int), np.array(areas), np.array(phases))
    return prob, index


def abelian_expectation(m: MeasureSpec, observable: Sequence[LoopWord | Word] | Mapping[str, int] = (),
                        direction: Mapping[str, float] | None = None) -> tuple[complex, complex]:
    """Exact ``E[prod of loop holonomies]`` for U(1), with optional area derivative.

    ``observable`` is either a list of loop words (their holonomies are
    multiplied) or an integer exponent per edge.  ``direction`` maps face ids
    to coefficients; the returned derivative is along that direction.
    Normalized measures divide by the sum with zero observable.
    """
    prob, index = _abelian_problem(m)
    if isinstance(observable, Mapping):
        expo = np.zeros(len(index), dtype=int)
        for e, k in observable.items():
            expo[index[e]] += int(k)
    else:
        words = [w.word if isinstance(w, LoopWord) else as_word(w) for w in observable]
        expo = abelian.exponent_vector(words, index)
    dvec = None
    if direction is not None:
        ids = list(m.graph.face_ids)
        bad = set(direction) - set(ids)
        if bad:
            raise GraphError(f"unknown faces in direction: {sorted(bad)}")
        dvec = np.array([float(direction.get(fid, 0.0)) for fid in ids] + [0.0] * len(m.constraints))
    tol = m.hk.tolerance
    S, dS = abelian.lattice_sum(prob, expo, dvec, tol)
    if not m.normalized:
        return S, dS
    Z, dZ = abelian.lattice_sum(prob, np.zeros_like(expo), dvec, tol)
    if Z == 0:
        raise ArithmeticError("constrained partition function vanishes")
    return S / Z, (dS * Z - S * dZ) / (Z * Z)


# -- partition function ------------------------------------------------------

def _spanning_tree(g: SurfaceGraph) -> set[str]:
    parent = {v: v for v in g.vertices}

    def root(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    tree = set()
    for e, (u, w) in g.edges.items():
        ru, rw = root(u), root(w)
        if ru != rw:
            parent[ru] = rw
            tree.add(e)
    return tree


def importance_plan(g: SurfaceGraph) -> tuple[set[str], list[tuple[str, str]], list[str], list[str]]:
    """Order in which the gauge-fixed importance sampler assigns edges.

    Returns ``(tree, steps, haar, weight_faces)``: tree edges are set to the
    identity; each step ``(face, edge)`` draws the face holonomy from the heat
    kernel and solves for the edge; ``haar`` edges are drawn uniformly; the
    remaining faces enter the importance weight.
    """
    tree = _spanning_tree(g)
    assigned = set(tree)
    steps, haar, used = [], [], set()
    while len(assigned) < len(g.edges):
        pick = None
        for f in g.faces:
            if f.id in used:
                continue
            missing = [e for e, _ in f.boundary if e not in assigned]
            if len(missing) == 1:
                pick = (f.id, missing[0])
                break
        if pick is None:
            e = next(e for e in g.edges if e not in assigned)
            haar.append(e)
            assigned.add(e)
            continue
        steps.append(pick)
        used.add(pick[0])
        assigned.add(pick[1])
    return tree, steps, haar, [f.id for f in g.faces if f.id not in used]


def _importance_weights(m: MeasureSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    from .heatkernel import hk_sample

    g, N = m.graph, m.N
    tree, steps, haar, rest = importance_plan(g)
    eye = np.broadcast_to(np.eye(N, dtype=complex), (n, N, N))
    cfg = {e: eye for e in tree}
    for e in haar:
        cfg[e] = haar_sample(N, rng, n)
    for fid, e in steps:
        hol = holonomy_word(g.face(fid).boundary)
        k = next(i for i, (x, _) in enumerate(hol) if x == e)
        s = hol[k][1]
        P = word_eval(hol[:k], cfg, N)
        Q = word_eval(hol[k + 1:], cfg, N)
        h = hk_sample(g.face(fid).area, N, m.hk, rng, n)
        x = dagger(P) @ h @ dagger(Q)
        cfg[e] = x if s > 0 else dagger(x)
    w = np.ones(n)
    for fid in rest:
        f = g.face(fid)
        w = w * hk_density(f.area, word_eval(holonomy_word(f.boundary), cfg, N), m.hk)
    return w


def partition_function(m: MeasureSpec, method: str = "mc", samples: int = 100_000,
                       rng: np.random.Generator | None = None, block: int = 20_000):
    """Partition function by Monte Carlo, the sphere formula or the U(1) lattice sum.

    ``mc`` fixes the gauge on a spanning tree and draws face holonomies from
    the heat kernel one face at a time, weighting by the faces that close up
    (graphs with constraints fall back to ``haar_mc``).  ``haar_mc`` averages
    the density over Haar-distributed edges; it is unbiased but heavy tailed.
    """
    from .montecarlo import Estimate

    if method == "sphere_exact":
        if m.graph.euler_characteristic != 2 or m.graph.boundary_components or m.constraints:
            raise ValueError("sphere_exact needs a closed graph with Euler characteristic 2")
        val = hk_density(m.graph.total_area, np.eye(m.N), m.hk)
        return Estimate(complex(val), 0.0, math.inf, "sphere_exact")
    if method == "abelian_exact":
        if m.N != 1:
            raise ValueError("abelian_exact needs N = 1")
        prob, index = _abelian_problem(m)
        Z, _ = abelian.lattice_sum(prob, np.zeros(len(index), dtype=int), None, m.hk.tolerance)
        return Estimate(complex(Z), 0.0, math.inf, "abelian_exact")
    if method not in ("mc", "haar_mc"):
        raise ValueError(f"unknown partition function method {method!r}")
    if method == "mc" and m.constraints:
        method = "haar_mc"
    rng = np.random.default_rng() if rng is None else rng
    vals = []
    left = samples
    while left > 0:
        n = min(block, left)
        if method == "mc":
            vals.append(_importance_weights(m, n, rng))
        else:
            cfg = random_config(m, rng, n)
            vals.append(np.asarray(density_unnormalized(m, cfg), dtype=float))
        left -= n
    v = np.concatenate(vals)
    se = float(v.std(ddof=1) / math.sqrt(len(v)))
    return Estimate(complex(v.mean()), se, float(len(v)), method)


def haar_expectation(m: MeasureSpec, f: Callable[[EdgeConfig], np.ndarray], samples: int,
                     rng: np.random.Generator) -> tuple[complex, complex]:
    """Ratio estimate ``E_haar[f w] / E_haar[w]`` with ``w`` the unnormalized density."""
    cfg = random_config(m, rng, samples)
    w = np.asarray(density_unnormalized(m, cfg), dtype=float)
    fv = np.asarray(f(cfg))
    return complex(np.mean(fv * w)), complex(np.mean(w))
