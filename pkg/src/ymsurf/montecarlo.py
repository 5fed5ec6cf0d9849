"""Metropolis-within-Gibbs sampling of edge variables and error bars.

Chains are advanced together: the state is an array ``(chains, edges, N, N)``
and every update is vectorized over chains.  Each chain owns its own random
stream (spawned from the run seed by chain index), so the draws of chain ``c``
do not depend on how many other chains run alongside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .heatkernel import HKParams, heat_kernel_table
from .surfgraph import holonomy_word
from .unitary import algebra_gaussian, dagger, expm_skew, haar_sample, lie_basis, reunitarize

SCALE_MAX = 4.0
TUNE_WINDOW = 50
TARGET_ACCEPT = (0.25, 0.40)
DRAW_BLOCK = 64
_SCHEDULE_KEY = 2**31 - 1


@dataclass(frozen=True)
class ChainParams:
    steps: int = 4000
    burn_in: int = 500
    proposal_scale: float = 0.5
    seed: int = 0
    chains: int = 16

    def __post_init__(self):
        if self.steps < 1 or self.chains < 1:
            raise ValueError("steps and chains must be positive")
        if not 0 <= self.burn_in < self.steps:
            raise ValueError("need 0 <= burn_in < steps")
        if not 0 < self.proposal_scale <= 2:
            raise ValueError("proposal_scale must lie in (0, 2]")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def retained(self) -> int:
        return self.steps - self.burn_in


@dataclass(frozen=True)
class Estimate:
    mean: complex
    stderr: float
    n_eff: float
    method: str

    def __post_init__(self):
        object.__setattr__(self, "mean", complex(self.mean))
        if not (math.isfinite(self.stderr) and self.stderr >= 0):
            raise ValueError(f"invalid stderr {self.stderr}")

    def __sub__(self, other: "Estimate") -> complex:
        return self.mean - other.mean


# -- compiled face model ------------------------------------------------------

@dataclass
class FaceModel:
    """Faces as products of edge variables and fixed matrices.

    A factor ``(i, s)`` with ``i >= 0`` is edge ``i`` raised to ``s``; ``i < 0``
    refers to ``constants[-i - 1]``.  Factors are listed in product order.
    Substitutions ``(edge, sign, rest, constraint)`` solve ``edge`` so that
    ``rep @ inv(prod(rest)) = edge^sign``.
    """

    N: int
    edges: list[str]
    faces: list[tuple[str, float, tuple[tuple[int, int], ...]]]
    hk: HKParams = HKParams()
    constants: list[np.ndarray] = field(default_factory=list)
    substitutions: list[tuple[int, int, tuple[tuple[int, int], ...]]] = field(default_factory=list)
    class_angles: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        sub = {s[0] for s in self.substitutions}
        self.free = [i for i in range(len(self.edges)) if i not in sub]
        self.tables = [heat_kernel_table(self.N, float(a), self.hk) for _, a, _ in self.faces]
        self.face_edges = [{i for i, _ in fac if i >= 0} for _, _, fac in self.faces]
        # faces touched by moving free edge i, including through substitutions
        self.edge_faces = {}
        for i in self.free:
            moved = {i} | {d for d, _, rest in self.substitutions if any(j == i for j, _ in rest)}
            self.edge_faces[i] = [k for k, es in enumerate(self.face_edges) if es & moved]
        self.class_faces = [[k for k, es in enumerate(self.face_edges) if d in es]
                            for d, _, _ in self.substitutions]

    @classmethod
    def from_measure(cls, m) -> "FaceModel":
        edges = list(m.graph.edges)
        idx = {e: i for i, e in enumerate(edges)}
        faces = [(f.id, f.area, tuple((idx[e], s) for e, s in holonomy_word(f.boundary)))
                 for f in m.graph.faces]
        subs, angles = [], []
        for c in m.constraints:
            e, s = c.designated
            rest = tuple((idx[x], t) for x, t in holonomy_word(c.boundary_word[:-1]))
            subs.append((idx[e], s, rest))
            angles.append(np.array(c.angles))
        return cls(m.N, edges, faces, m.hk, [], subs, angles)

    @property
    def face_ids(self) -> list[str]:
        return [f[0] for f in self.faces]

    def product(self, X: np.ndarray, factors, override: Mapping[int, np.ndarray] | None = None) -> np.ndarray:
        """Batched ordered product; ``X`` has shape ``(C, edges, N, N)``."""
        out = None
        for i, s in factors:
            if i < 0:
                x = self.constants[-i - 1]
            else:
                x = override[i] if override is not None and i in override else X[:, i]
            if s < 0:
                x = dagger(x)
            out = x if out is None else out @ x
        if out is None:
            return np.broadcast_to(np.eye(self.N, dtype=complex), X.shape[:1] + (self.N, self.N))
        if len(factors) > 8:
            out = reunitarize(out)
        return out

    def substitute(self, X, reps, j, override=None) -> np.ndarray:
        d, s, rest = self.substitutions[j]
        val = reps[:, j] @ dagger(self.product(X, rest, override))
        return val if s > 0 else dagger(val)

    def log_face(self, k, X, override=None) -> np.ndarray:
        rho = self.tables[k].density(self.product(X, self.faces[k][2], override))
        return np.log(np.maximum(rho, 1e-300))

    def scores(self, X) -> np.ndarray:
        out = np.empty((X.shape[0], len(self.faces)))
        for k, (_, _, fac) in enumerate(self.faces):
            rho, drho = self.tables[k].density_and_dt(self.product(X, fac))
            if np.any(rho <= 0):
                raise FloatingPointError(f"heat kernel underflow on face {self.faces[k][0]!r}")
            out[:, k] = drho / rho
        return out


@dataclass
class ChainRun:
    """Retained samples: ``values[name]`` has shape ``(chains, retained)``."""

    values: dict[str, np.ndarray]
    scores: np.ndarray | None
    face_ids: list[str]
    acceptance: np.ndarray
    scales: np.ndarray


def chain_streams(seed: int, chains: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(c,))))
            for c in range(chains)]


def schedule_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(_SCHEDULE_KEY,))))


def _initial_state(model: FaceModel, rngs):
    C, N, E = len(rngs), model.N, len(model.edges)
    X = np.empty((C, E, N, N), complex)
    nc = len(model.substitutions)
    V = np.empty((C, nc, N, N), complex)
    for c, r in enumerate(rngs):
        X[c] = haar_sample(N, r, E)
        V[c] = haar_sample(N, r, nc)
    D = np.array([np.diag(np.exp(1j * a)) for a in model.class_angles]).reshape(nc, N, N)
    reps = V @ D[None] @ dagger(V)
    for j in range(nc):
        X[:, model.substitutions[j][0]] = model.substitute(X, reps, j)
    return X, V, D, reps


def run_chains(model: FaceModel, p: ChainParams,
               observables: Mapping[str, Callable[[np.ndarray], np.ndarray]] | None = None,
               with_scores: bool = False, tune: bool = True) -> ChainRun:
    """Random-scan Metropolis over free edges plus Metropolized Haar refresh of class conjugators.

    ``observables`` receive the state array ``(C, edges, N, N)`` after each
    retained sweep and return ``(C,)`` values.  Proposal scales are adapted
    per chain and per edge during burn-in only.
    """
    observables = dict(observables or {})
    rngs = chain_streams(p.seed, p.chains)
    sched = schedule_stream(p.seed)
    C, N = p.chains, model.N
    X, V, D, reps = _initial_state(model, rngs)
    nf, nc = len(model.free), len(model.substitutions)
    nupd = nf + nc
    basis = lie_basis(N)
    logf = np.stack([model.log_face(k, X) for k in range(len(model.faces))], axis=1) if model.faces \
        else np.zeros((C, 0))
    scales = np.full((C, nf), float(p.proposal_scale))
    acc_win = np.zeros((C, nupd))
    acc_tot = np.zeros((C, nupd))
    n_ret = p.retained
    values = {k: np.empty((C, n_ret), complex) for k in observables}
    scores = np.empty((C, n_ret, len(model.faces))) if with_scores else None

    def accept(faces, new_logs, u):
        delta = sum(new_logs[k] - logf[:, k] for k in faces) if faces else np.zeros(C)
        ok = np.log(u) < delta
        for k in faces:
            logf[ok, k] = new_logs[k][ok]
        return ok

    sweep = 0
    while sweep < p.steps:
        B = min(DRAW_BLOCK, p.steps - sweep)
        normals = np.stack([r.standard_normal((DRAW_BLOCK, max(nf, 1), N * N)) for r in rngs], axis=1)
        ginibre = np.stack([r.standard_normal((DRAW_BLOCK, max(nc, 1), 2, N, N)) for r in rngs], axis=1)
        uniforms = np.stack([r.random((DRAW_BLOCK, max(nupd, 1))) for r in rngs], axis=1)
        orders = sched.permuted(np.tile(np.arange(nupd), (DRAW_BLOCK, 1)), axis=1)
        for b in range(B):
            for u_idx in orders[b]:
                u = uniforms[b, :, u_idx]
                if u_idx < nf:
                    i = model.free[u_idx]
                    G = np.einsum("ck,kij->cij", normals[b, :, u_idx], basis) * scales[:, u_idx, None, None]
                    prop = X[:, i] @ expm_skew(G)
                    over = {i: prop}
                    for j, (d, _, rest) in enumerate(model.substitutions):
                        if any(q == i for q, _ in rest):
                            over[d] = model.substitute(X, reps, j, over)
                    faces = model.edge_faces[i]
                    new = {k: model.log_face(k, X, over) for k in faces}
                    ok = accept(faces, new, u)
                    for e, val in over.items():
                        X[ok, e] = val[ok]
                else:
                    j = u_idx - nf
                    if N == 1:
                        ok = np.ones(C, bool)
                    else:
                        g = ginibre[b, :, j]
                        Z = (g[:, 0] + 1j * g[:, 1]) / math.sqrt(2)
                        Q, R = np.linalg.qr(Z)
                        ph = np.diagonal(R, axis1=-2, axis2=-1)
                        Vn = Q * (ph / np.abs(ph))[:, None, :]
                        rep_n = Vn @ D[j] @ dagger(Vn)
                        reps_n = reps.copy()
                        reps_n[:, j] = rep_n
                        d = model.substitutions[j][0]
                        over = {d: model.substitute(X, reps_n, j)}
                        faces = model.class_faces[j]
                        new = {k: model.log_face(k, X, over) for k in faces}
                        ok = accept(faces, new, u)
                        V[ok, j] = Vn[ok]
                        reps[ok, j] = rep_n[ok]
                        X[ok, d] = over[d][ok]
                acc_win[:, u_idx] += ok
                acc_tot[:, u_idx] += ok
            if sweep < p.burn_in:
                if tune and (sweep + 1) % TUNE_WINDOW == 0 and nf:
                    rate = acc_win[:, :nf] / TUNE_WINDOW
                    scales = np.where(rate < TARGET_ACCEPT[0], scales * 0.7, scales)
                    scales = np.where(rate > TARGET_ACCEPT[1], np.minimum(scales * 1.4, SCALE_MAX), scales)
                    acc_win[:] = 0
                if sweep + 1 == p.burn_in:
                    acc_tot[:] = 0
            else:
                r = sweep - p.burn_in
                for name, fn in observables.items():
                    values[name][:, r] = np.broadcast_to(fn(X), (C,))
                if with_scores:
                    scores[:, r] = model.scores(X)
            sweep += 1
            if sweep % 256 == 0:
                X = reunitarize(X)
    return ChainRun(values, scores, model.face_ids, acc_tot / n_ret, scales)


# -- statistics -----------------------------------------------------------------

@dataclass(frozen=True)
class ChainSummary:
    """Batch means of one chain for a vector of complex quantities."""

    chain: int
    batch_means: np.ndarray  # (batches, k)
    n: int
    moment1: np.ndarray  # sum of samples as 2k reals
    moment2: np.ndarray  # sum of outer products of the 2k reals


def _as_real(v: np.ndarray) -> np.ndarray:
    return np.concatenate([v.real, v.imag], axis=-1)


def summarize(samples: np.ndarray, chain_ids: Sequence[int] | None = None) -> list[ChainSummary]:
    """``samples``: ``(chains, n, k)`` complex -> one summary per chain, sqrt(n) batches each."""
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim == 2:
        samples = samples[..., None]
    C, n, k = samples.shape
    if not np.all(np.isfinite(samples)):
        raise ValueError("non-finite sample values")
    nb = max(2, math.isqrt(n))
    size = n // nb
    if size < 1:
        raise ValueError("too few retained samples for batch means")
    out = []
    ids = range(C) if chain_ids is None else chain_ids
    for c, cid in enumerate(ids):
        tail = samples[c, n - nb * size:]
        bm = tail.reshape(nb, size, k).mean(axis=1)
        r = _as_real(samples[c])
        out.append(ChainSummary(int(cid), bm, n, r.sum(axis=0), r.T @ r))
    return out


def merge(summaries: Sequence[ChainSummary]) -> ChainSummary:
    """Combine chain summaries; the result does not depend on their order."""
    ss = sorted(summaries, key=lambda s: s.chain)
    if len({s.chain for s in ss}) != len(ss):
        raise ValueError("duplicate chain ids")
    return ChainSummary(
        ss[0].chain,
        np.concatenate([s.batch_means for s in ss]),
        sum(s.n for s in ss),
        np.sum([s.moment1 for s in ss], axis=0),
        np.sum([s.moment2 for s in ss], axis=0),
    )


def jackknife(func: Callable[[np.ndarray], np.ndarray], items: np.ndarray) -> tuple[complex, float]:
    """Delete-one jackknife over equal-weight ``items`` ``(B, k)``; ``func`` maps ``(..., k) -> (...)``."""
    B = items.shape[0]
    total = items.sum(axis=0)
    full = complex(func(total / B))
    loo = np.asarray(func((total[None] - items) / (B - 1)), dtype=complex)
    dev = loo - loo.mean()
    var = (B - 1) / B * float(np.sum(dev.real ** 2 + dev.imag ** 2))
    return full, math.sqrt(max(var, 0.0))


def _iid_stderr(func, s: ChainSummary) -> float:
    """Delta-method stderr as if samples were independent."""
    k = s.batch_means.shape[1]
    mu = s.moment1 / s.n
    cov = s.moment2 / s.n - np.outer(mu, mu)

    def f_real(v):
        return func(v[..., :k] + 1j * v[..., k:])

    grads = np.empty((2, 2 * k))
    for a in range(2 * k):
        h = 1e-6 * (1 + abs(mu[a]))
        e = np.zeros(2 * k)
        e[a] = h
        d = (complex(f_real(mu + e)) - complex(f_real(mu - e))) / (2 * h)
        grads[:, a] = d.real, d.imag
    var = sum(float(g @ cov @ g) for g in grads) / s.n
    return math.sqrt(max(var, 0.0))


def estimate_from(func, s: ChainSummary, method: str = "mc") -> Estimate:
    mean, se = jackknife(func, s.batch_means)
    se_iid = _iid_stderr(func, s)
    n_eff = float(s.n) if se == 0 else min(float(s.n), s.n * se_iid ** 2 / se ** 2)
    return Estimate(mean, se, max(n_eff, 1.0), method)


def estimate_samples(samples: np.ndarray, func=None, method: str = "mc") -> Estimate:
    """Estimate ``func(E[samples])`` from ``(chains, n, k)`` samples (default: the mean of k=1)."""
    func = func or (lambda v: v[..., 0])
    return estimate_from(func, merge(summarize(samples)), method)


# -- single-configuration API ----------------------------------------------------

def face_score(m, cfg, face: str) -> float | np.ndarray:
    """``d/dt log rho_t(h_F)`` at the face's area."""
    from .unitary import word_eval

    f = m.graph.face(face)
    h = word_eval(holonomy_word(f.boundary), cfg.edges, m.N)
    rho, drho = heat_kernel_table(m.N, float(f.area), m.hk).density_and_dt(h)
    if np.any(rho <= 0):
        raise FloatingPointError(f"heat kernel underflow on face {face!r}; area too small for the cutoff")
    return drho / rho


def metropolis_step(m, cfg, edge: str, rng: np.random.Generator, proposal_scale: float = 0.5):
    """One Metropolis update of a free edge; returns ``(new_cfg, accepted)``."""
    from .ymmeasure import EdgeConfig, apply_constraints, log_density_terms

    if edge not in m.free_edges:
        raise ValueError(f"{edge!r} is not a free edge")
    G = algebra_gaussian(m.N, rng) * proposal_scale
    prop = EdgeConfig(dict(cfg.edges), list(cfg.classes))
    prop.edges[edge] = cfg.edges[edge] @ expm_skew(G)
    if m.constraints:
        prop = apply_constraints(m, prop)
    old = log_density_terms(m, cfg)
    new = log_density_terms(m, prop)
    delta = sum(new[k] - old[k] for k in old)
    if math.log(rng.random()) < delta:
        return prop, True
    return cfg, False


def estimate(m, f: Callable, p: ChainParams, method: str = "mc") -> Estimate:
    """Chain average of ``f`` under the normalized measure.

    ``f`` receives an :class:`EdgeConfig` whose entries are batched over chains.
    """
    from .ymmeasure import EdgeConfig

    model = FaceModel.from_measure(m)
    names = model.edges

    def obs(X):
        v = np.asarray(f(EdgeConfig({e: X[:, i] for i, e in enumerate(names)})), dtype=complex)
        if not np.all(np.isfinite(v)):
            raise ValueError("observable returned non-finite values")
        return v

    run = run_chains(model, p, {"f": obs})
    return estimate_samples(run.values["f"], method=method)
