"""Graphs, loops and crossings used throughout the tests and shipped configs."""
from __future__ import annotations

from dataclasses import dataclass

from .surfgraph import Crossing, LoopWord, SurfaceGraph, crossing_at


@dataclass(frozen=True)
class Fixture:
    graph: SurfaceGraph
    loops: dict
    crossings: dict


def sphere_loop(s: float = 1.0, t: float = 1.0) -> Fixture:
    """Simple closed curve on S^2: one vertex, one loop edge, two faces."""
    g = SurfaceGraph.build(["v"], {"x": ("v", "v")}, [("S", ["x"], s), ("T", ["-x"], t)])
    return Fixture(g, {"L": LoopWord.parse(["x"])}, {})


def five_face(areas=(1.0, 1.0, 1.0, 1.0, 1.0)) -> Fixture:
    """Six-edge, five-face graph on S^2 with a generic four-valent vertex ``v``."""
    edges = {
        "e1": ("v", "X"), "e2": ("v", "X"), "e3": ("v", "Y"),
        "e4": ("v", "Y"), "e5": ("X", "Y"), "e6": ("X", "Y"),
    }
    words = {
        "F1": ["e1", "-e2"],
        "F2": ["e2", "e6", "-e3"],
        "F3": ["e3", "-e4"],
        "F4": ["e4", "-e5", "-e1"],
        "F5": ["e5", "-e6"],
    }
    g = SurfaceGraph.build(["v", "X", "Y"], edges, [(k, w, a) for (k, w), a in zip(words.items(), areas)])
    loop = LoopWord.parse(["e1", "e5", "-e4", "e2", "e6", "-e3"])
    return Fixture(g, {"L": loop}, {"v": crossing_at(g, "v", ["e1", "e2", "e3", "e4"])})


def figure_eight(areas=(0.5, 1.0, 1.5, 1.0)) -> Fixture:
    """Loop with a simple crossing on S^2, drawn generically on two vertices.

    Four edges run from ``v`` to ``w``; the four faces are digons.  The loop
    ``e1 e4^-1 e2 e3^-1`` crosses itself at ``v``.
    """
    edges = {f"e{i}": ("v", "w") for i in range(1, 5)}
    faces = [
        ("F1", ["e1", "-e2"], areas[0]),
        ("F2", ["e2", "-e3"], areas[1]),
        ("F3", ["e3", "-e4"], areas[2]),
        ("F4", ["e4", "-e1"], areas[3]),
    ]
    g = SurfaceGraph.build(["v", "w"], edges, faces)
    loop = LoopWord.parse(["e1", "-e4", "e2", "-e3"])
    return Fixture(g, {"L": loop}, {"v": crossing_at(g, "v", ["e1", "e2", "e3", "e4"])})


def figure_eight_nongeneric(areas=(2.0, 0.5, 1.0)) -> Fixture:
    """Figure-eight on S^2 whose outer face touches the crossing twice (F1 = F3).

    ``areas`` are (outer face, lobe F2, lobe F4).
    """
    edges = {"e1": ("v", "p"), "e4": ("v", "p"), "e2": ("v", "q"), "e3": ("v", "q")}
    faces = [
        ("O", ["e1", "-e4", "e3", "-e2"], areas[0]),
        ("A", ["e2", "-e3"], areas[1]),
        ("B", ["e4", "-e1"], areas[2]),
    ]
    g = SurfaceGraph.build(["v", "p", "q"], edges, faces)
    loop = LoopWord.parse(["e1", "-e4", "e2", "-e3"])
    c = Crossing("v", (("e1", 1), ("e2", 1), ("e3", 1), ("e4", 1)), ("O", "A", "O", "B"))
    return Fixture(g, {"L": loop}, {"v": c})


def constrained_disk(s: float = 1.0, t: float = 1.0) -> Fixture:
    """Disk whose boundary edge ``z`` is joined by ``y`` to an inner loop ``x``.

    The inner face has holonomy ``x^-1`` (area ``s``); the annular face has
    holonomy ``y^-1 z y x`` (area ``t``).
    """
    edges = {"x": ("p", "p"), "y": ("p", "q"), "z": ("q", "q")}
    faces = [("inner", ["-x"], s), ("outer", ["x", "y", "z", "-y"], t)]
    g = SurfaceGraph.build(["p", "q"], edges, faces, boundary_components=[["z"]])
    return Fixture(g, {"L": LoopWord.parse(["-x"])}, {})


def constrained_figure_eight(areas=(1.0, 1.0, 1.0, 1.0)) -> Fixture:
    """Disk containing the two-vertex figure-eight; the boundary ``z`` hangs off ``w`` inside F3."""
    edges = {f"e{i}": ("v", "w") for i in range(1, 5)}
    edges.update({"y": ("w", "q"), "z": ("q", "q")})
    faces = [
        ("F1", ["e1", "-e2"], areas[0]),
        ("F2", ["e2", "-e3"], areas[1]),
        ("F3", ["e3", "y", "z", "-y", "-e4"], areas[2]),
        ("F4", ["e4", "-e1"], areas[3]),
    ]
    g = SurfaceGraph.build(["v", "w", "q"], edges, faces, boundary_components=[["z"]])
    loop = LoopWord.parse(["e1", "-e4", "e2", "-e3"])
    return Fixture(g, {"L": loop}, {"v": crossing_at(g, "v", ["e1", "e2", "e3", "e4"])})
