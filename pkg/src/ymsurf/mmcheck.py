"""Executable Makeenko-Migdal checks.

The left side of the equation is the alternating area derivative
``(d1 - d2 + d3 - d4) E[tr hol L]`` at a crossing; the right side is
``E[tr hol L1 tr hol L2]`` for the two loops obtained by cutting ``L`` at the
crossing.  Monte Carlo versions compute both sides from one set of chains so
that the stderr of their difference accounts for the correlation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .heatkernel import heat_kernel_table
from .montecarlo import (
    ChainParams,
    Estimate,
    FaceModel,
    estimate_from,
    merge,
    run_chains,
    summarize,
)
from .surfgraph import (
    Crossing,
    LoopWord,
    Word,
    alternating_area_vector,
    as_word,
    format_signed,
    holonomy_word,
    require_crossing,
    split_loop,
)
from .unitary import dagger, expm_skew, haar_sample, lie_basis
from .ymmeasure import MeasureSpec, abelian_expectation

MC_SIGMA = 3.0
EXACT_TOL = 1e-9


# -- loop functionals -----------------------------------------------------------

@dataclass(frozen=True)
class LoopFunctional:
    """Product of normalized traces of words in product (holonomy) order.

    Letters name edge variables or entries of ``constants``.  An empty
    factor list is the constant function 1.
    """

    factors: tuple[Word, ...] = ()
    constants: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(as_word(w) for w in self.factors))
        for w in self.factors:
            if not w:
                raise ValueError("empty trace factor")

    @classmethod
    def from_loops(cls, loops: Sequence[LoopWord], constants=None) -> "LoopFunctional":
        return cls(tuple(holonomy_word(l) for l in loops), dict(constants or {}))

    @property
    def variables(self) -> set[str]:
        return {e for w in self.factors for e, _ in w if e not in self.constants}

    def _letter(self, cfg, name, sign):
        x = self.constants[name] if name in self.constants else cfg[name]
        return x if sign > 0 else dagger(x)

    def _prod(self, cfg, letters, N):
        out = None
        for e, s in letters:
            x = self._letter(cfg, e, s)
            out = x if out is None else out @ x
        return np.eye(N, dtype=complex) if out is None else out

    def __call__(self, cfg: Mapping[str, np.ndarray]):
        val = 1.0 + 0j
        for w in self.factors:
            P = self._prod(cfg, w, None)
            val = val * np.trace(P, axis1=-2, axis2=-1) / P.shape[-1]
        return val

    def __str__(self):
        if not self.factors:
            return "1"
        return " * ".join("tr(" + " ".join(format_signed(se) for se in w) + ")" for w in self.factors)


def _cuts(word: Word, edge: str) -> list[tuple[int, int]]:
    """Insertion points for ``d/ds`` of ``edge -> edge exp(sX)``: ``(cut, sign)``."""
    out = []
    for p, (e, s) in enumerate(word):
        if e == edge:
            out.append((p + 1, 1) if s > 0 else (p, -1))
    return out


def _divergence_analytic(f: LoopFunctional, cfg, a: str, b: str, N: int):
    """``sum_X d_s d_t f(a e^{sX}, b e^{tX})`` via the two contraction identities.

    With normalized traces, ``sum_X tr(P X Q X) = -tr(P) tr(Q)`` and
    ``sum_X tr(P X) tr(Q X) = -tr(P Q) / N^2``.
    """
    tr = lambda M: np.trace(M, axis1=-2, axis2=-1) / N  # noqa: E731
    prod = lambda w: f._prod(cfg, w, N)  # noqa: E731
    traces = [tr(prod(w)) for w in f.factors]
    total = 0j
    for i, wi in enumerate(f.factors):
        for ca, sa in _cuts(wi, a):
            for j, wj in enumerate(f.factors):
                for cb, sb in _cuts(wj, b):
                    rest = 1.0 + 0j
                    for k, t in enumerate(traces):
                        if k != i and k != j:
                            rest = rest * t
                    if i == j:
                        lo, hi = sorted((ca, cb))
                        inner = prod(wi[lo:hi])
                        outer = prod(wi[hi:] + wi[:lo])
                        term = -tr(inner) * tr(outer)
                    else:
                        P = prod(wi[ca:] + wi[:ca])
                        Q = prod(wj[cb:] + wj[:cb])
                        term = -tr(P @ Q) / (N * N)
                    total = total + sa * sb * term * rest
    return total


def _divergence_numeric(f: LoopFunctional, cfg, a: str, b: str, basis, h: float):
    total = 0j
    for X in basis:
        Ep, Em = expm_skew(h * X), expm_skew(-h * X)
        vals = {}
        for sa, Ea in ((1, Ep), (-1, Em)):
            for sb, Eb in ((1, Ep), (-1, Em)):
                c = dict(cfg)
                c[a] = cfg[a] @ Ea
                c[b] = cfg[b] @ Eb
                vals[sa, sb] = f(c)
        total = total + (vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / (4 * h * h)
    return total


def divergence_pair(f: LoopFunctional, cfg: Mapping[str, np.ndarray], basis=None,
                    pair: tuple[str, str] = ("a1", "a2"), method: str = "analytic", h: float = 1e-4):
    """``(grad^a . grad^b f)(cfg)`` with left-invariant gradients over an orthonormal basis.

    ``method="analytic"`` uses the trace identities (exact for loop
    functionals and the scaled metric); ``"numeric"`` takes mixed central
    differences over ``basis``.
    """
    a, b = pair
    if a == b:
        raise ValueError("divergence_pair needs two distinct variables")
    if not f.factors:
        return 0j
    N = next(iter(cfg.values())).shape[-1]
    if method == "analytic":
        return _divergence_analytic(f, cfg, a, b, N)
    if method == "numeric":
        return _divergence_numeric(f, cfg, a, b, lie_basis(N) if basis is None else basis, h)
    raise ValueError(f"unknown method {method!r}")


def _dart_value(cfg, dart):
    e, s = dart
    return cfg[e] if s > 0 else dagger(cfg[e])


def _set_dart(cfg, dart, value):
    e, s = dart
    cfg[e] = value if s > 0 else dagger(value)


@dataclass(frozen=True)
class GaugeCheck:
    passed: bool
    max_violation: float
    trials: int


def gauge_invariance_check(f: LoopFunctional, c: Crossing, trials: int = 1000,
                           rng: np.random.Generator | None = None, N: int = 2,
                           tol: float = 1e-10) -> GaugeCheck:
    """Test ``f(a1 x, a2, a3 x, a4) = f(a1, a2 x, a3, a4 x) = f`` on random inputs.

    The dart variable of a dart leaving the vertex along ``e^-1`` is ``x_e^-1``.
    """
    rng = np.random.default_rng() if rng is None else rng
    names = sorted(f.variables | {d[0] for d in c.darts})
    worst = 0.0
    for _ in range(trials):
        cfg = {e: haar_sample(N, rng) for e in names}
        x = haar_sample(N, rng)
        base = f(cfg)
        for pair in ((0, 2), (1, 3)):
            moved = dict(cfg)
            for i in pair:
                _set_dart(moved, c.darts[i], _dart_value(cfg, c.darts[i]) @ x)
            worst = max(worst, float(abs(f(moved) - base)))
    return GaugeCheck(worst <= tol, worst, trials)


# -- reports ----------------------------------------------------------------------

@dataclass(frozen=True)
class MMReport:
    lhs: Estimate
    rhs: Estimate
    discrepancy_sigma: float
    lhs_method: str
    rhs_method: str
    crossing: str
    loop: str
    diff_stderr: float = 0.0
    abs_diff: float = 0.0
    tolerance: float | None = None
    passed: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.discrepancy_sigma >= 0:
            raise ValueError("discrepancy must be nonnegative")


def _exact_report(lhs: Estimate, rhs: Estimate, lm, rm, c, l) -> MMReport:
    d = abs(lhs.mean - rhs.mean)
    return MMReport(lhs, rhs, 0.0, lm, rm, c, l, 0.0, d, EXACT_TOL, d <= EXACT_TOL)


def _sigma(diff: complex, se: float) -> float:
    if abs(diff) <= 1e-12:
        return 0.0
    if se == 0:
        return 0.0 if diff == 0 else math.inf
    return abs(diff) / se


# -- estimators ---------------------------------------------------------------------

def _exact_est(value, method) -> Estimate:
    return Estimate(complex(value), 0.0, math.inf, method)


def wilson_loop(m: MeasureSpec, l: LoopWord, method: str = "mc", p: ChainParams = ChainParams()) -> Estimate:
    """``E[tr hol(l)]``."""
    if method == "abelian_exact":
        val, _ = abelian_expectation(m, [l])
        return _exact_est(val, "abelian_exact")
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    from .montecarlo import estimate

    f = LoopFunctional.from_loops([l])
    return estimate(m, f, p)


@dataclass
class _MCRun:
    summary: object
    index: dict
    h: float | None
    acceptance: np.ndarray


def _alt_vector(m: MeasureSpec, c: Crossing) -> dict[str, int]:
    return {k: v for k, v in alternating_area_vector(m.graph, c).items() if v}


def _fd_step(m: MeasureSpec, alt: Mapping[str, int], h: float | None) -> float:
    small = min(m.graph.face(k).area / abs(v) for k, v in alt.items())
    if h is None:
        h = 0.05 * min(m.graph.face(k).area for k in alt)
    if not 0 < h < small:
        raise ValueError(f"fd step {h} must be positive and below the smallest adjacent area {small}")
    return h


def _mm_chain(m: MeasureSpec, l: LoopWord, c: Crossing, p: ChainParams, want_fd: bool,
              h: float | None) -> _MCRun:
    """One run recording every quantity the MC estimators need, as sample means."""
    require_crossing(m.graph, c)
    l1, l2 = split_loop(m.graph, l, c)
    alt = _alt_vector(m, c)
    model = FaceModel.from_measure(m)
    idx = {e: i for i, e in enumerate(model.edges)}
    f = LoopFunctional.from_loops([l])
    g = LoopFunctional.from_loops([l1, l2])
    view = lambda X: {e: X[:, i] for e, i in idx.items()}  # noqa: E731
    fids = model.face_ids
    alt_k = [(fids.index(k), v) for k, v in alt.items()]
    offsets = []
    if want_fd:
        h = _fd_step(m, alt, h)
        offsets = [h, -h, h / 2, -h / 2]
        shifted = {(k, o): heat_kernel_table(m.N, model.faces[k][1] + v * o, m.hk) for k, v in alt_k for o in offsets}
    cache = {}

    def obs_f(X):
        cache.clear()
        cache["f"] = f(view(X))
        return cache["f"]

    obs = {"f": obs_f, "g": lambda X: g(view(X))}
    for j, o in enumerate(offsets):
        def w_fn(X, o=o):
            w = 1.0
            for k, _ in alt_k:
                hol = model.product(X, model.faces[k][2])
                w = w * shifted[k, o].density(hol) / model.tables[k].density(hol)
            return w
        obs[f"w{j}"] = w_fn
    run = run_chains(model, p, obs, with_scores=True)
    S = sum(v * run.scores[:, :, k] for k, v in alt_k)
    cols = [run.values["f"], run.values["g"], S, run.values["f"] * S]
    names = ["f", "g", "S", "fS"]
    for j in range(len(offsets)):
        w = run.values[f"w{j}"]
        cols += [w, run.values["f"] * w]
        names += [f"w{j}", f"fw{j}"]
    samples = np.stack(cols, axis=-1)
    return _MCRun(merge(summarize(samples)), {n: i for i, n in enumerate(names)},
                  h if want_fd else None, run.acceptance)


def _lhs_func(run: _MCRun, method: str, normalized: bool):
    I = run.index
    if method == "score":
        if normalized:
            return lambda v: v[..., I["fS"]] - v[..., I["f"]] * v[..., I["S"]]
        return lambda v: v[..., I["fS"]]
    if method == "fd":
        h = run.h

        def val(v, j):
            if normalized:
                return v[..., I[f"fw{j}"]] / v[..., I[f"w{j}"]]
            return v[..., I[f"fw{j}"]]

        def fd(v):
            d_h = (val(v, 0) - val(v, 1)) / (2 * h)
            d_h2 = (val(v, 2) - val(v, 3)) / h
            return (4 * d_h2 - d_h) / 3
        return fd
    raise ValueError(f"unknown lhs method {method!r}")


def _rhs_func(run: _MCRun):
    return lambda v: v[..., run.index["g"]]


def mm_lhs(m: MeasureSpec, l: LoopWord, c: Crossing, method: str = "score",
           p: ChainParams = ChainParams(), h: float | None = None) -> Estimate:
    """Alternating area derivative of ``E[tr hol L]`` (per unit ``Z`` for the unnormalized measure)."""
    if method == "abelian_analytic":
        if m.N != 1:
            raise ValueError("abelian_analytic needs N = 1")
        split_loop(m.graph, l, c)
        val, deriv = abelian_expectation(m, [l], _alt_vector(m, c))
        if not m.normalized:
            Z, _ = abelian_expectation(m, [])
            deriv = deriv / Z
        return _exact_est(deriv, "abelian_analytic")
    run = _mm_chain(m, l, c, p, method == "fd", h)
    return estimate_from(_lhs_func(run, method, m.normalized), run.summary, method)


def mm_rhs(m: MeasureSpec, l: LoopWord, c: Crossing, method: str = "mc",
           p: ChainParams = ChainParams()) -> Estimate:
    """``E[tr hol L1 tr hol L2]`` for the two loops cut at the crossing."""
    l1, l2 = split_loop(m.graph, l, c)
    if method == "abelian_exact":
        val, _ = abelian_expectation(m, [l1, l2])
        if not m.normalized:
            Z, _ = abelian_expectation(m, [])
            val = val / Z
        return _exact_est(val, "abelian_exact")
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    run = _mm_chain(m, l, c, p, False, None)
    return estimate_from(_rhs_func(run), run.summary, "mc")


def mm_check(m: MeasureSpec, l: LoopWord, c: Crossing, methods: Sequence[str] = ("score", "mc"),
             p: ChainParams = ChainParams(), h: float | None = None, crossing_id: str = "",
             loop_id: str = "") -> MMReport:
    """Compare both sides; pass at 3 joint stderr (MC) or 1e-9 (exact)."""
    lm, rm = methods
    cid = crossing_id or c.vertex
    lid = loop_id or str(l)
    if lm == "abelian_analytic" and rm == "abelian_exact":
        return _exact_report(mm_lhs(m, l, c, lm), mm_rhs(m, l, c, rm), lm, rm, cid, lid)
    if rm != "mc" or lm not in ("score", "fd"):
        raise ValueError(f"unsupported method pair {methods!r}")
    run = _mm_chain(m, l, c, p, True, h)
    fl = _lhs_func(run, lm, m.normalized)
    fr = _rhs_func(run)
    lhs = estimate_from(fl, run.summary, lm)
    rhs = estimate_from(fr, run.summary, "mc")
    diff = estimate_from(lambda v: fl(v) - fr(v), run.summary, "diff")
    sig = _sigma(diff.mean, diff.stderr)
    other = "fd" if lm == "score" else "score"
    fo = _lhs_func(run, other, m.normalized)
    cross = estimate_from(lambda v: fl(v) - fo(v), run.summary, "diff")
    extra = {
        f"lhs_{other}": estimate_from(fo, run.summary, other),
        "estimator_sigma": _sigma(cross.mean, cross.stderr),
        "acceptance": float(np.mean(run.acceptance)),
    }
    return MMReport(lhs, rhs, sig, lm, rm, cid, lid, diff.stderr, abs(diff.mean), None, sig <= MC_SIGMA, extra)


# -- local equation on K^4 ------------------------------------------------------------

LOCAL_DARTS = (("a1", 1), ("a2", 1), ("a3", 1), ("a4", 1))


def local_model(alpha: Sequence[np.ndarray], t: Sequence[float], hk=None) -> FaceModel:
    """Faces ``rho_{t_i}(a_{i+1}^-1 alpha_i a_i)`` on four free variables."""
    from .heatkernel import HKParams

    alpha = [np.asarray(a, dtype=complex) for a in alpha]
    if len(alpha) != 4 or len(t) != 4:
        raise ValueError("local model needs four alphas and four areas")
    N = alpha[0].shape[-1]
    faces = []
    for i in range(4):
        nxt = (i + 1) % 4
        faces.append((f"F{i + 1}", float(t[i]), ((nxt, -1), (-(i + 1), 1), (i, 1))))
    return FaceModel(N, ["a1", "a2", "a3", "a4"], faces, hk or HKParams(), alpha)


def local_mm_check(alpha: Sequence[np.ndarray], t: Sequence[float], f: LoopFunctional,
                   p: ChainParams = ChainParams(), gauge_trials: int = 200) -> MMReport:
    """Alternating ``d/dt`` of ``int f dmu_{alpha,t}`` against ``-int grad^a1 . grad^a2 f``.

    Both sides are divided by the total mass, so the MC compares
    ``Cov(f, S_alt)`` with ``-E[div f]`` under the normalized local measure.
    """
    model = local_model(alpha, t)
    N = model.N
    c = Crossing("v", LOCAL_DARTS, ("F1", "F2", "F3", "F4"))
    gc = gauge_invariance_check(f, c, gauge_trials, np.random.default_rng(p.seed), N)
    if not gc.passed:
        raise ValueError(f"functional lacks extended gauge invariance (violation {gc.max_violation:.3g})")
    view = lambda X: {e: X[:, i] for i, e in enumerate(model.edges)}  # noqa: E731
    obs = {"f": lambda X: f(view(X)), "div": lambda X: divergence_pair(f, view(X))}
    run = run_chains(model, p, obs, with_scores=True)
    S = run.scores @ np.array([1.0, -1.0, 1.0, -1.0])
    fv = np.broadcast_to(run.values["f"], S.shape)
    samples = np.stack([fv, S, fv * S, run.values["div"]], axis=-1)
    s = merge(summarize(samples))
    fl = lambda v: v[..., 2] - v[..., 0] * v[..., 1]  # noqa: E731
    fr = lambda v: -v[..., 3]  # noqa: E731
    lhs = estimate_from(fl, s, "score")
    rhs = estimate_from(fr, s, "mc")
    diff = estimate_from(lambda v: fl(v) - fr(v), s, "diff")
    sig = _sigma(diff.mean, diff.stderr)
    return MMReport(lhs, rhs, sig, "score", "mc", "v", str(f), diff.stderr, abs(diff.mean), None,
                    sig <= MC_SIGMA, {"gauge_violation": gc.max_violation})
