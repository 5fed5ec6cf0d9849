"""JSON run configuration: parsing with key-path errors, and rendering back to text.

Schema (every section is optional; all commands except ``local-mm-check``
and ``selftest`` need ``graph``)::

    {
      "group": {"N": 2, "tolerance": 1e-12, "brownian_step": 0.001},
      "graph": {
        "vertices": ["v", "w"],
        "edges": {"e1": ["v", "w"], ...},
        "faces": [{"id": "F1", "boundary": ["e1", "-e2"], "area": 1.0}, ...],
        "boundary_components": [["z"]]
      },
      "loops": {"L": ["e1", "-e4", "e2", "-e3"]},
      "crossings": {"v": {"vertex": "v", "darts": ["e1", "e2", "e3", "e4"],
                          "faces": ["F1", "F2", "F3", "F4"]}},
      "constraints": [{"boundary": ["z"], "angles": [0.5, 2.0]}],
      "chain": {"steps": 4000, "burn_in": 500, "proposal_scale": 0.5, "seed": 0, "chains": 16},
      "options": {...}
    }

A leading ``-`` on an edge name means the reversed edge.  Crossing ``faces``
may be omitted; they are then read off the graph.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from .heatkernel import HKParams
from .montecarlo import ChainParams
from .surfgraph import (
    Crossing,
    GraphError,
    LoopWord,
    SurfaceGraph,
    check_loop,
    crossing_at,
    crossing_violations,
    format_signed,
    parse_signed,
    validate_graph,
)
from .unitary import GroupSpec
from .ymmeasure import ConjugacyConstraint, MeasureSpec

EXIT_STATISTICAL = 1
EXIT_SYNTAX = 2
EXIT_SEMANTIC = 3

SECTIONS = {"group", "graph", "loops", "crossings", "constraints", "chain", "options"}
OPTION_KEYS = {
    "normalized": bool,
    "partition_method": str,
    "wilson_method": str,
    "lhs_method": str,
    "rhs_method": str,
    "fd_step": (float, int, type(None)),
    "samples": int,
    "checks": list,
    "local": dict,
}
LOCAL_KEYS = {"alpha", "t", "functional"}


class ConfigError(Exception):
    """Invalid configuration; ``code`` is the process exit status."""

    def __init__(self, errors: list[str], code: int = EXIT_SEMANTIC):
        self.errors = list(errors)
        self.code = code
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    group: GroupSpec
    hk: HKParams
    graph: SurfaceGraph | None
    loops: dict = field(default_factory=dict)
    crossings: dict = field(default_factory=dict)
    constraints: tuple = ()
    chain: ChainParams = ChainParams()
    options: dict = field(default_factory=dict)

    def measure(self) -> MeasureSpec:
        if self.graph is None:
            raise ConfigError(["graph: this command needs a graph section"])
        return MeasureSpec(self.graph, self.group, self.hk, self.constraints,
                           bool(self.options.get("normalized", True)))

    def with_chain(self, **kw) -> "RunConfig":
        return replace(self, chain=replace(self.chain, **kw))


class _Reader:
    def __init__(self):
        self.errors: list[str] = []

    def fail(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")

    def keys(self, obj, path: str, allowed: set, required: set = frozenset()) -> bool:
        if not isinstance(obj, dict):
            self.fail(path, "expected an object")
            return False
        for k in obj:
            if k not in allowed:
                self.fail(f"{path}.{k}" if path else k, "unknown key")
        for k in required:
            if k not in obj:
                self.fail(path or "<root>", f"missing key {k!r}")
        return True

    def number(self, v, path, positive=False):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, "expected a number")
            return None
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v}")
        return float(v)

    def word(self, v, path):
        if not isinstance(v, list) or not v:
            self.fail(path, "expected a nonempty list of signed edge names")
            return None
        try:
            return tuple(parse_signed(t) for t in v)
        except (GraphError, TypeError, ValueError) as exc:
            self.fail(path, str(exc))
            return None


def _parse(data: Any) -> RunConfig:
    r = _Reader()
    if not r.keys(data, "", SECTIONS):
        raise ConfigError(r.errors)

    g = data.get("group", {})
    N, tol, step = 1, 1e-12, 1e-3
    if r.keys(g, "group", {"N", "tolerance", "brownian_step"}):
        N = g.get("N", 1)
        if isinstance(N, bool) or not isinstance(N, int) or N < 1:
            r.fail("group.N", f"must be a positive integer, got {N!r}")
            N = 1
        tol = r.number(g.get("tolerance", tol), "group.tolerance", positive=True) or tol
        step = r.number(g.get("brownian_step", step), "group.brownian_step", positive=True) or step

    if "graph" not in data:
        for k in ("loops", "crossings", "constraints"):
            if data.get(k):
                r.fail(k, "needs a graph section")
    gr = data.get("graph")
    graph = None
    if gr is not None and r.keys(gr, "graph", {"vertices", "edges", "faces", "boundary_components"}, {"vertices", "edges", "faces"}):
        verts = gr.get("vertices", [])
        if not isinstance(verts, list) or not all(isinstance(v, str) for v in verts):
            r.fail("graph.vertices", "expected a list of names")
            verts = []
        edges = {}
        if isinstance(gr.get("edges"), dict):
            for name, ends in gr["edges"].items():
                if not (isinstance(ends, list) and len(ends) == 2 and all(isinstance(x, str) for x in ends)):
                    r.fail(f"graph.edges.{name}", "expected [source, target]")
                elif name.startswith("-"):
                    r.fail(f"graph.edges.{name}", "edge names may not start with '-'")
                else:
                    edges[name] = tuple(ends)
        else:
            r.fail("graph.edges", "expected an object")
        faces = []
        if isinstance(gr.get("faces"), list):
            for i, fobj in enumerate(gr["faces"]):
                p = f"graph.faces[{i}]"
                if not r.keys(fobj, p, {"id", "boundary", "area"}, {"id", "boundary", "area"}):
                    continue
                if any(k not in fobj for k in ("id", "boundary", "area")):
                    continue
                a = r.number(fobj["area"], f"{p}.area")
                if a is not None and not a > 0:
                    r.fail(f"{p}.area", f"face {fobj['id']!r} has non-positive area {a}")
                w = r.word(fobj["boundary"], f"{p}.boundary")
                if w is not None and a is not None:
                    faces.append((str(fobj["id"]), w, a))
        else:
            r.fail("graph.faces", "expected a list")
        bcs = []
        for i, b in enumerate(gr.get("boundary_components", [])):
            w = r.word(b, f"graph.boundary_components[{i}]")
            if w is not None:
                bcs.append(w)
        if not r.errors:
            try:
                graph = SurfaceGraph.build(verts, edges, faces, bcs)
                rep = validate_graph(graph)
                for v in rep.violations:
                    r.fail("graph", v)
            except (GraphError, ValueError) as exc:
                r.fail("graph", str(exc))
    if r.errors:
        raise ConfigError(r.errors)

    loops = {}
    lobj = data.get("loops", {}) if graph is not None else {}
    if isinstance(lobj, dict):
        for name, w in lobj.items():
            word = r.word(w, f"loops.{name}")
            if word is None:
                continue
            try:
                loop = LoopWord(word)
                check_loop(graph, loop)
                loops[name] = loop
            except GraphError as exc:
                r.fail(f"loops.{name}", str(exc))
    else:
        r.fail("loops", "expected an object")

    crossings = {}
    cobj = data.get("crossings", {}) if graph is not None else {}
    if isinstance(cobj, dict):
        for name, c in cobj.items():
            p = f"crossings.{name}"
            if not r.keys(c, p, {"vertex", "darts", "faces"}, {"vertex", "darts"}) or "darts" not in c:
                continue
            darts = r.word(c["darts"], f"{p}.darts")
            if darts is None:
                continue
            try:
                if "faces" in c:
                    cr = Crossing(str(c["vertex"]), darts, tuple(c["faces"]))
                    for v in crossing_violations(graph, cr):
                        r.fail(p, v)
                else:
                    cr = crossing_at(graph, str(c["vertex"]), darts)
                crossings[name] = cr
            except (GraphError, TypeError) as exc:
                r.fail(p, str(exc))
    else:
        r.fail("crossings", "expected an object")

    constraints = []
    for i, c in enumerate(data.get("constraints", []) if graph is not None else []):
        p = f"constraints[{i}]"
        if not r.keys(c, p, {"boundary", "angles"}, {"boundary", "angles"}) or len(c) < 2:
            continue
        w = r.word(c["boundary"], f"{p}.boundary")
        angles = c["angles"]
        if not isinstance(angles, list) or any(r.number(a, f"{p}.angles") is None for a in angles):
            r.fail(f"{p}.angles", "expected a list of numbers")
            continue
        if w is None:
            continue
        try:
            constraints.append(ConjugacyConstraint(w, angles))
        except ValueError as exc:
            r.fail(p, str(exc))

    chain = ChainParams()
    ch = data.get("chain", {})
    if r.keys(ch, "chain", {"steps", "burn_in", "proposal_scale", "seed", "chains"}):
        for k in ("steps", "burn_in", "seed", "chains"):
            if k in ch and (isinstance(ch[k], bool) or not isinstance(ch[k], int)):
                r.fail(f"chain.{k}", "expected an integer")
        if "proposal_scale" in ch:
            r.number(ch["proposal_scale"], "chain.proposal_scale")
        if not r.errors:
            try:
                chain = ChainParams(**ch)
            except (ValueError, TypeError) as exc:
                r.fail("chain", str(exc))

    options = dict(data.get("options", {}))
    if r.keys(options, "options", set(OPTION_KEYS)):
        for k, typ in OPTION_KEYS.items():
            if k in options and not isinstance(options[k], typ):
                r.fail(f"options.{k}", "wrong type")
        if isinstance(options.get("local"), dict):
            r.keys(options["local"], "options.local", LOCAL_KEYS)
        for i, chk in enumerate(options.get("checks", []) if isinstance(options.get("checks"), list) else []):
            if r.keys(chk, f"options.checks[{i}]", {"loop", "crossing"}, {"loop", "crossing"}):
                if chk.get("loop") not in loops:
                    r.fail(f"options.checks[{i}].loop", f"unknown loop {chk.get('loop')!r}")
                if chk.get("crossing") not in crossings:
                    r.fail(f"options.checks[{i}].crossing", f"unknown crossing {chk.get('crossing')!r}")

    group = GroupSpec(N)
    hk = HKParams(tolerance=tol, brownian_step=step)
    cfg = None
    if not r.errors:
        cfg = RunConfig(group, hk, graph, loops, crossings, tuple(constraints), chain, options)
        try:
            if graph is not None:
                cfg.measure()
        except (GraphError, ValueError) as exc:
            r.fail("constraints", str(exc))
    if r.errors:
        raise ConfigError(r.errors)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` with code 2 (syntax) or 3 (semantic)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"], EXIT_SYNTAX) from None
    return _parse(data)


def _w(word) -> list[str]:
    return [format_signed(se) for se in word]


def to_dict(cfg: RunConfig) -> dict:
    g = cfg.graph
    out = {"group": {"N": cfg.group.N, "tolerance": cfg.hk.tolerance, "brownian_step": cfg.hk.brownian_step}}
    if g is not None:
        out["graph"] = {
            "vertices": list(g.vertices),
            "edges": {e: list(ends) for e, ends in g.edges.items()},
            "faces": [{"id": f.id, "boundary": _w(f.boundary), "area": f.area} for f in g.faces],
            "boundary_components": [_w(b) for b in g.boundary_components],
        }
    out.update({
        "loops": {k: _w(l.word) for k, l in cfg.loops.items()},
        "crossings": {k: {"vertex": c.vertex, "darts": _w(c.darts), "faces": list(c.adjacent_faces)}
                      for k, c in cfg.crossings.items()},
        "constraints": [{"boundary": _w(c.boundary_word), "angles": list(c.angles)} for c in cfg.constraints],
        "chain": {"steps": cfg.chain.steps, "burn_in": cfg.chain.burn_in,
                  "proposal_scale": cfg.chain.proposal_scale, "seed": cfg.chain.seed,
                  "chains": cfg.chain.chains},
        "options": dict(cfg.options),
    })
    return out


def render(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def from_fixture(fx, N: int = 1, chain: ChainParams = ChainParams(), constraints=(), options=None,
                 hk: HKParams = HKParams()) -> RunConfig:
    return RunConfig(GroupSpec(N), hk, fx.graph, dict(fx.loops), dict(fx.crossings), tuple(constraints),
                     chain, dict(options or {}))


def shipped_configs() -> dict[str, RunConfig]:
    """Canonical run configurations, one per fixture; stored as JSON under ``ymsurf/data``."""
    from . import fixtures

    fast = ChainParams(steps=2000, burn_in=300, chains=16, seed=20240601)
    out = {
        "sphere_loop_n1": from_fixture(fixtures.sphere_loop(1.0, 1.0), 1, fast),
        "five_face_n2": from_fixture(fixtures.five_face((0.8, 1.2, 1.0, 1.4, 0.6)), 2, fast),
        "figure_eight_n1": from_fixture(fixtures.figure_eight((0.5, 1.0, 1.5, 1.0)), 1, fast),
        "figure_eight_n2": from_fixture(fixtures.figure_eight((1.0, 1.0, 1.0, 1.0)), 2, fast),
        "figure_eight_nongeneric_n1": from_fixture(fixtures.figure_eight_nongeneric(), 1, fast),
        "constrained_disk_n1": from_fixture(
            fixtures.constrained_disk(0.8, 1.3), 1, fast,
            [ConjugacyConstraint((("z", 1),), (1.1,))]),
        "constrained_figure_eight_n2": from_fixture(
            fixtures.constrained_figure_eight((1.0, 1.0, 1.0, 1.0)), 2, fast,
            [ConjugacyConstraint((("z", 1),), (0.7, 2.4))]),
    }
    out["local_random_n2"] = RunConfig(GroupSpec(2), HKParams(), None, chain=fast,
                                       options={"local": {"alpha": "random", "t": [1.0, 1.0, 1.0, 1.0],
                                                          "functional": [["-a3", "a2", "-a4", "a1"]]}})
    return out


def load_shipped(name: str) -> RunConfig:
    from importlib import resources

    return parse_config(resources.files("ymsurf").joinpath("data", f"{name}.json").read_text(encoding="utf-8"))
