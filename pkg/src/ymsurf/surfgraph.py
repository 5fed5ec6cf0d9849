"""Admissible graphs on compact surfaces, loops, crossings and graph surgery.

A graph is given purely combinatorially: vertices, oriented edges, faces as
closed boundary words of signed edges (each with an area), and the boundary
components of the surface as further closed words.  A signed edge is a pair
``(edge_id, sign)`` with ``sign`` in ``{+1, -1}``; ``-1`` means the edge is
traversed against its orientation.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

SignedEdge = tuple[str, int]
Word = tuple[SignedEdge, ...]


class GraphError(ValueError):
    """Raised when an operation receives a graph, loop or crossing it cannot use."""


def parse_signed(token: str) -> SignedEdge:
    """Parse ``"e1"`` / ``"-e1"`` into a signed edge."""
    token = token.strip()
    if token.startswith("-"):
        name, sign = token[1:], -1
    else:
        name, sign = token, 1
    if not name or name.startswith("-"):
        raise GraphError(f"malformed signed edge {token!r}")
    return name, sign


def format_signed(se: SignedEdge) -> str:
    name, sign = se
    return name if sign > 0 else "-" + name


def as_word(word: Iterable[SignedEdge | str]) -> Word:
    out = []
    for item in word:
        if isinstance(item, str):
            out.append(parse_signed(item))
        else:
            name, sign = item
            if sign not in (1, -1):
                raise GraphError(f"edge sign must be +1 or -1, got {sign!r}")
            out.append((str(name), int(sign)))
    return tuple(out)


def invert_word(word: Sequence[SignedEdge]) -> Word:
    return tuple((e, -s) for e, s in reversed(word))


@dataclass(frozen=True)
class Face:
    id: str
    boundary: Word
    area: float


@dataclass(frozen=True)
class SurfaceGraph:
    vertices: tuple[str, ...]
    edges: Mapping[str, tuple[str, str]]
    faces: tuple[Face, ...]
    boundary_components: tuple[Word, ...] = ()

    @classmethod
    def build(cls, vertices, edges, faces, boundary_components=()) -> "SurfaceGraph":
        """Convenience constructor accepting plain lists and string words.

        ``faces`` is a sequence of ``(face_id, word, area)`` triples.
        """
        return cls(
            vertices=tuple(vertices),
            edges={str(k): (str(v[0]), str(v[1])) for k, v in dict(edges).items()},
            faces=tuple(Face(str(fid), as_word(w), float(a)) for fid, w, a in faces),
            boundary_components=tuple(as_word(w) for w in boundary_components),
        )

    # -- basic queries -------------------------------------------------
    def face(self, face_id: str) -> Face:
        for f in self.faces:
            if f.id == face_id:
                return f
        raise GraphError(f"unknown face {face_id!r}")

    @property
    def face_ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.faces)

    @property
    def areas(self) -> dict[str, float]:
        return {f.id: f.area for f in self.faces}

    @property
    def total_area(self) -> float:
        return sum(f.area for f in self.faces)

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.faces)

    def source(self, se: SignedEdge) -> str:
        u, w = self.edges[se[0]]
        return u if se[1] > 0 else w

    def target(self, se: SignedEdge) -> str:
        u, w = self.edges[se[0]]
        return w if se[1] > 0 else u

    def boundary_edges(self) -> set[str]:
        return {e for w in self.boundary_components for e, _ in w}

    def with_areas(self, areas: Mapping[str, float]) -> "SurfaceGraph":
        """Copy of the graph with some face areas replaced."""
        unknown = set(areas) - set(self.face_ids)
        if unknown:
            raise GraphError(f"unknown faces {sorted(unknown)}")
        faces = tuple(Face(f.id, f.boundary, float(areas.get(f.id, f.area))) for f in self.faces)
        return SurfaceGraph(self.vertices, self.edges, faces, self.boundary_components)

    def reorient(self, edge: str) -> "SurfaceGraph":
        """Same graph with the orientation of ``edge`` reversed."""
        if edge not in self.edges:
            raise GraphError(f"unknown edge {edge!r}")
        flip = lambda w: tuple((e, -s) if e == edge else (e, s) for e, s in w)  # noqa: E731
        u, w = self.edges[edge]
        edges = dict(self.edges)
        edges[edge] = (w, u)
        faces = tuple(Face(f.id, flip(f.boundary), f.area) for f in self.faces)
        return SurfaceGraph(self.vertices, edges, faces, tuple(flip(b) for b in self.boundary_components))


@dataclass(frozen=True)
class LoopWord:
    word: Word

    def __post_init__(self):
        object.__setattr__(self, "word", as_word(self.word))
        if not self.word:
            raise GraphError("loop word must be nonempty")

    @classmethod
    def parse(cls, tokens: Iterable[str | SignedEdge]) -> "LoopWord":
        return cls(as_word(tokens))

    def inverse(self) -> "LoopWord":
        return LoopWord(invert_word(self.word))

    def __str__(self):
        return " ".join(format_signed(se) for se in self.word)


@dataclass(frozen=True)
class Crossing:
    vertex: str
    darts: tuple[SignedEdge, SignedEdge, SignedEdge, SignedEdge]
    adjacent_faces: tuple[str, str, str, str]

    def __post_init__(self):
        object.__setattr__(self, "darts", as_word(self.darts))
        object.__setattr__(self, "adjacent_faces", tuple(str(f) for f in self.adjacent_faces))
        if len(self.darts) != 4 or len(self.adjacent_faces) != 4:
            raise GraphError("a crossing needs exactly four darts and four faces")


@dataclass
class ValidationReport:
    euler_characteristic: int
    n_vertices: int
    n_edges: int
    n_faces: int
    incidences: dict[str, int] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _closed_walk_violations(g: SurfaceGraph, word: Word, label: str) -> list[str]:
    out = []
    if not word:
        return [f"{label}: empty word"]
    for e, _ in word:
        if e not in g.edges:
            return [f"{label}: unknown edge {e!r}"]
    for i, se in enumerate(word):
        nxt = word[(i + 1) % len(word)]
        if g.target(se) != g.source(nxt):
            out.append(
                f"{label}: {format_signed(se)} ends at {g.target(se)!r} "
                f"but {format_signed(nxt)} starts at {g.source(nxt)!r}"
            )
    return out


def validate_graph(g: SurfaceGraph) -> ValidationReport:
    """Check the structural invariants of ``g``; violations are returned, not raised."""
    violations: list[str] = []
    vset = set(g.vertices)
    if len(vset) != len(g.vertices):
        violations.append("duplicate vertex ids")
    for e, (u, w) in g.edges.items():
        for x in (u, w):
            if x not in vset:
                violations.append(f"edge {e!r}: endpoint {x!r} is not a vertex")
    ids = [f.id for f in g.faces]
    for fid, k in Counter(ids).items():
        if k > 1:
            violations.append(f"duplicate face id {fid!r}")
    for f in g.faces:
        if not f.area > 0:
            violations.append(f"face {f.id!r}: area must be positive, got {f.area}")
        violations += _closed_walk_violations(g, f.boundary, f"face {f.id!r}")
    for i, b in enumerate(g.boundary_components):
        violations += _closed_walk_violations(g, b, f"boundary component {i}")

    incid = Counter(e for f in g.faces for e, _ in f.boundary)
    incid.update(e for b in g.boundary_components for e, _ in b)
    for e in g.edges:
        if incid.get(e, 0) != 2:
            violations.append(f"edge {e!r}: appears {incid.get(e, 0)} times across faces and boundary (expected 2)")
    for e in incid:
        if e not in g.edges:
            violations.append(f"unknown edge {e!r} referenced")
    used = {x for e in g.edges.values() for x in e}
    for v in g.vertices:
        if v not in used and len(g.vertices) > 1:
            violations.append(f"vertex {v!r} is isolated")
    return ValidationReport(
        euler_characteristic=g.euler_characteristic,
        n_vertices=len(g.vertices),
        n_edges=len(g.edges),
        n_faces=len(g.faces),
        incidences=dict(incid),
        violations=violations,
    )


def require_valid(g: SurfaceGraph) -> SurfaceGraph:
    rep = validate_graph(g)
    if rep.violations:
        raise GraphError("invalid graph: " + "; ".join(rep.violations))
    return g


def check_loop(g: SurfaceGraph, loop: LoopWord) -> None:
    bad = _closed_walk_violations(g, loop.word, "loop")
    if bad:
        raise GraphError("; ".join(bad))


# -- crossings --------------------------------------------------------------

def _face_has_corner(word: Word, arrive: SignedEdge, leave: SignedEdge) -> bool:
    n = len(word)
    return any(word[i] == arrive and word[(i + 1) % n] == leave for i in range(n))


def corner_faces(g: SurfaceGraph, darts: Sequence[SignedEdge]) -> list[list[str]]:
    """For each i, the faces whose boundary turns between dart i and dart i+1.

    The face between outgoing darts ``d_i`` and ``d_{i+1}`` contains, with
    one of its two orientations, the corner "arrive along d_{i+1} reversed,
    leave along d_i".
    """
    out = []
    for i in range(4):
        d, dn = darts[i], darts[(i + 1) % 4]
        hits = []
        for f in g.faces:
            w = f.boundary
            if _face_has_corner(w, (dn[0], -dn[1]), d) or _face_has_corner(w, (d[0], -d[1]), dn):
                hits.append(f.id)
        out.append(hits)
    return out


def crossing_violations(g: SurfaceGraph, c: Crossing) -> list[str]:
    out = []
    if c.vertex not in g.vertices:
        return [f"crossing vertex {c.vertex!r} is not a vertex"]
    for d in c.darts:
        if d[0] not in g.edges:
            return [f"crossing dart {format_signed(d)} names an unknown edge"]
        if g.source(d) != c.vertex:
            out.append(f"dart {format_signed(d)} does not leave {c.vertex!r}")
    if len(set(c.darts)) != 4:
        out.append("crossing darts must be four distinct darts")
    for fid in c.adjacent_faces:
        if fid not in g.face_ids:
            out.append(f"unknown adjacent face {fid!r}")
    if out:
        return out
    corners = corner_faces(g, c.darts)
    for i in range(4):
        if c.adjacent_faces[i] not in corners[i]:
            out.append(
                f"face F{i + 1}={c.adjacent_faces[i]!r} does not lie between darts "
                f"{format_signed(c.darts[i])} and {format_signed(c.darts[(i + 1) % 4])}"
            )
    bedges = g.boundary_edges()
    for d in c.darts:
        if d[0] in bedges:
            out.append(f"dart {format_signed(d)} lies on the surface boundary; crossing must be interior")
    return out


def require_crossing(g: SurfaceGraph, c: Crossing) -> Crossing:
    bad = crossing_violations(g, c)
    if bad:
        raise GraphError("invalid crossing: " + "; ".join(bad))
    return c


def crossing_at(g: SurfaceGraph, vertex: str, darts: Sequence[SignedEdge | str]) -> Crossing:
    """Build a crossing from its darts, reading the adjacent faces off the corners."""
    darts = as_word(darts)
    corners = corner_faces(g, darts)
    faces = []
    for i, hits in enumerate(corners):
        if len(hits) != 1:
            raise GraphError(f"cannot identify the face between darts {i + 1} and {i + 2}: {hits}")
        faces.append(hits[0])
    return require_crossing(g, Crossing(vertex, darts, tuple(faces)))


def is_generic(c: Crossing) -> bool:
    return len(set(c.adjacent_faces)) == 4 and len({e for e, _ in c.darts}) == 4


# -- loops ------------------------------------------------------------------

def split_loop(g: SurfaceGraph, loop: LoopWord, c: Crossing) -> tuple[LoopWord, LoopWord]:
    """Cut ``loop`` at the crossing into the two loops based at the crossing vertex.

    The loop is first rotated to start by leaving along the first dart.  It
    must then return along the fourth dart, leave along the second and return
    along the third, with no other visits to the vertex.
    """
    check_loop(g, loop)
    w = loop.word
    v = c.vertex
    visits = [i for i, se in enumerate(w) if g.source(se) == v]
    if len(visits) != 2:
        raise GraphError(f"loop visits {v!r} {len(visits)} times; a simple crossing needs exactly 2")
    e1, e2, e3, e4 = c.darts
    starts = [i for i in visits if w[i] == e1]
    if not starts:
        raise GraphError(f"loop never leaves {v!r} along {format_signed(e1)}")
    i0 = starts[0]
    w = w[i0:] + w[:i0]
    j = next(i for i in range(1, len(w)) if g.source(w[i]) == v)
    l1, l2 = w[:j], w[j:]
    inv = lambda d: (d[0], -d[1])  # noqa: E731
    if l1[-1] != inv(e4) or l2[0] != e2 or l2[-1] != inv(e3):
        raise GraphError(
            "loop does not cross at the vertex with the schedule "
            "e1 ... e4^-1 e2 ... e3^-1"
        )
    return LoopWord(l1), LoopWord(l2)


def holonomy_word(word: LoopWord | Sequence[SignedEdge | str]) -> Word:
    """Holonomy of a closed word as an ordered product of edge variables.

    Parallel transport reverses order: the word ``e1 e2^-1`` has holonomy
    ``x2^-1 x1``, returned as ``(("e2", -1), ("e1", 1))``.
    """
    w = word.word if isinstance(word, LoopWord) else as_word(word)
    return tuple(reversed(w))


def alternating_area_vector(g: SurfaceGraph, c: Crossing) -> dict[str, int]:
    """Coefficients of the alternating area derivative ``d1 - d2 + d3 - d4``."""
    vec: dict[str, int] = {}
    for sign, fid in zip((1, -1, 1, -1), c.adjacent_faces):
        vec[fid] = vec.get(fid, 0) + sign
    return vec


# -- surgery ----------------------------------------------------------------

@dataclass(frozen=True)
class Subdivision:
    graph: SurfaceGraph
    new_vertex: str
    first: str
    second: str
    old: str

    def rewrite(self, word: Sequence[SignedEdge]) -> Word:
        out: list[SignedEdge] = []
        for e, s in word:
            if e != self.old:
                out.append((e, s))
            elif s > 0:
                out += [(self.first, 1), (self.second, 1)]
            else:
                out += [(self.second, -1), (self.first, -1)]
        return tuple(out)

    def rewrite_loop(self, loop: LoopWord) -> LoopWord:
        return LoopWord(self.rewrite(loop.word))

    def rewrite_crossing(self, c: Crossing) -> Crossing:
        darts = []
        for e, s in c.darts:
            if e != self.old:
                darts.append((e, s))
            else:
                darts.append((self.first, 1) if s > 0 else (self.second, -1))
        return Crossing(c.vertex, tuple(darts), c.adjacent_faces)


def _fresh(name: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    if name not in taken:
        return name
    k = 1
    while f"{name}_{k}" in taken:
        k += 1
    return f"{name}_{k}"


def subdivide_edge(g: SurfaceGraph, edge: str, *, new_vertex=None, names=None) -> Subdivision:
    """Split ``edge`` into two edges through a new vertex.

    Returns a :class:`Subdivision` carrying the new graph and the word
    rewriting map ``e -> e' e''``.
    """
    if edge not in g.edges:
        raise GraphError(f"unknown edge {edge!r}")
    u, w = g.edges[edge]
    nv = new_vertex or _fresh(f"{edge}_mid", g.vertices)
    if nv in g.vertices:
        raise GraphError(f"vertex {nv!r} already exists")
    if names is None:
        first = _fresh(f"{edge}a", g.edges)
        second = _fresh(f"{edge}b", set(g.edges) | {first})
    else:
        first, second = names
        if first in g.edges or second in g.edges or first == second:
            raise GraphError("subdivision edge names must be new and distinct")
    edges = {}
    for e, ends in g.edges.items():
        if e == edge:
            edges[first] = (u, nv)
            edges[second] = (nv, w)
        else:
            edges[e] = ends
    sub = Subdivision(g, nv, first, second, edge)
    new = SurfaceGraph(
        vertices=g.vertices + (nv,),
        edges=edges,
        faces=tuple(Face(f.id, sub.rewrite(f.boundary), f.area) for f in g.faces),
        boundary_components=tuple(sub.rewrite(b) for b in g.boundary_components),
    )
    return Subdivision(new, nv, first, second, edge)


@dataclass(frozen=True)
class EdgeAddition:
    """How to split one face with a new edge.

    The new edge runs from the start vertex of ``face.boundary[start]`` to
    the start vertex of ``face.boundary[end]`` (``start < end``).  The arc
    ``boundary[start:end]`` closes up with the reversed new edge into
    ``face_a``; the complementary arc closes up with the new edge into
    ``face_b``.
    """

    face: str
    start: int
    end: int
    edge: str
    face_a: str
    area_a: float
    face_b: str
    area_b: float


def add_generic_edge(g: SurfaceGraph, c: Crossing | None, spec: EdgeAddition) -> SurfaceGraph:
    """Add one edge inside a face, splitting it in two without new vertices."""
    f = g.face(spec.face)
    w = f.boundary
    if not (0 <= spec.start < spec.end < len(w)):
        raise GraphError(f"arc positions ({spec.start}, {spec.end}) not on face {spec.face!r} of length {len(w)}")
    if not (spec.area_a > 0 and spec.area_b > 0):
        raise GraphError("both new faces need positive area")
    if abs(spec.area_a + spec.area_b - f.area) > 1e-12 * max(1.0, f.area):
        raise GraphError(f"split areas {spec.area_a} + {spec.area_b} do not sum to {f.area}")
    if spec.edge in g.edges:
        raise GraphError(f"edge {spec.edge!r} already exists")
    others = set(g.face_ids) - {spec.face}
    if spec.face_a in others or spec.face_b in others or spec.face_a == spec.face_b:
        raise GraphError("new face ids must be fresh and distinct")
    p = g.source(w[spec.start])
    q = g.source(w[spec.end])
    edges = dict(g.edges)
    edges[spec.edge] = (p, q)
    word_a = w[spec.start:spec.end] + ((spec.edge, -1),)
    word_b = w[spec.end:] + w[:spec.start] + ((spec.edge, 1),)
    faces = []
    for face in g.faces:
        if face.id == spec.face:
            faces.append(Face(spec.face_a, word_a, float(spec.area_a)))
            faces.append(Face(spec.face_b, word_b, float(spec.area_b)))
        else:
            faces.append(face)
    new = SurfaceGraph(g.vertices, edges, tuple(faces), g.boundary_components)
    if c is not None:
        # the crossing must still be readable off the corners of the new graph
        relabel_crossing(new, c)
    return new


def relabel_crossing(g: SurfaceGraph, c: Crossing) -> Crossing:
    """Recompute a crossing's adjacent faces after surgery on ``g``."""
    return crossing_at(g, c.vertex, c.darts)
