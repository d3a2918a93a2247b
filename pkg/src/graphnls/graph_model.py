"""Metric graphs with half-lines, topological predicates and named families.

A graph is stored combinatorially: vertices, bounded edges with lengths and
half-lines attached to vertices.  Half-lines are never truncated here; the
numerical truncation lives in :mod:`graphnls.discretize`.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence

Vertex = Hashable


class GraphError(ValueError):
    """Raised for graphs violating the metric-graph invariants."""


@dataclass(frozen=True)
class Edge:
    a: Vertex
    b: Vertex
    length: float

    @property
    def is_loop(self) -> bool:
        return self.a == self.b


@dataclass(frozen=True)
class MetricGraph:
    """Finite metric graph with bounded edges and half-lines.

    ``halflines`` holds one anchor vertex per half-line.  Parallel edges and
    self-loops are allowed.  Instances are immutable; derived quantities are
    cached on first access.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...] = ()
    halflines: tuple[Vertex, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(
            self, "edges", tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        )
        object.__setattr__(self, "halflines", tuple(self.halflines))
        self._validate()

    @classmethod
    def build(
        cls,
        vertices: Iterable[Vertex],
        edges: Iterable[tuple[Vertex, Vertex, float]] = (),
        halflines: Iterable[Vertex] = (),
        name: str = "",
    ) -> "MetricGraph":
        return cls(tuple(vertices), tuple(Edge(a, b, float(l)) for a, b, l in edges), tuple(halflines), name)

    def _validate(self) -> None:
        if not self.vertices:
            raise GraphError("graph has no vertices")
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex ids")
        known = set(self.vertices)
        for e in self.edges:
            if e.a not in known or e.b not in known:
                raise GraphError(f"edge {e} references an unknown vertex")
            if not (e.length > 0.0) or e.length == float("inf"):
                raise GraphError(f"edge {e} must have a finite positive length")
        for v in self.halflines:
            if v not in known:
                raise GraphError(f"half-line anchored at unknown vertex {v!r}")
        for v in self.vertices:
            if self.degree[v] < 1:
                raise GraphError(f"vertex {v!r} has degree 0")
        if not self._connected():
            raise GraphError("graph is not connected")

    def _connected(self) -> bool:
        adj = self.adjacency
        start = self.vertices[0]
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    @cached_property
    def adjacency(self) -> dict[Vertex, set[Vertex]]:
        adj: dict[Vertex, set[Vertex]] = {v: set() for v in self.vertices}
        for e in self.edges:
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        return adj

    @cached_property
    def degree(self) -> dict[Vertex, int]:
        deg: Counter = Counter({v: 0 for v in self.vertices})
        for e in self.edges:
            deg[e.a] += 1
            deg[e.b] += 1
        for v in self.halflines:
            deg[v] += 1
        return dict(deg)

    @cached_property
    def halflines_at(self) -> dict[Vertex, list[int]]:
        out: dict[Vertex, list[int]] = defaultdict(list)
        for i, v in enumerate(self.halflines):
            out[v].append(i)
        return dict(out)

    @cached_property
    def core_length(self) -> float:
        return sum(e.length for e in self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_halflines(self) -> int:
        return len(self.halflines)

    @cached_property
    def anchors(self) -> tuple[Vertex, ...]:
        """Vertices carrying at least one half-line (V+), in vertex order."""
        return tuple(v for v in self.vertices if v in self.halflines_at)

    def incident_lengths(self, v: Vertex, halfline_length: float = float("inf")) -> list[float]:
        """Length available in each direction leaving ``v``.

        A self-loop contributes two directions of half its length; a
        half-line contributes ``halfline_length``.
        """
        out = []
        for e in self.edges:
            if e.is_loop:
                if e.a == v:
                    out += [e.length / 2.0, e.length / 2.0]
            elif v in (e.a, e.b):
                out.append(e.length)
        out += [halfline_length] * len(self.halflines_at.get(v, []))
        return out

    def relabeled(self, mapping: dict[Vertex, Vertex]) -> "MetricGraph":
        return MetricGraph(
            tuple(mapping[v] for v in self.vertices),
            tuple(Edge(mapping[e.a], mapping[e.b], e.length) for e in self.edges),
            tuple(mapping[v] for v in self.halflines),
            self.name,
        )

    def scaled(self, factor: float) -> "MetricGraph":
        return MetricGraph(
            self.vertices,
            tuple(Edge(e.a, e.b, e.length * factor) for e in self.edges),
            self.halflines,
            self.name,
        )

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": [_jsonable(v) for v in self.vertices],
            "edges": [{"from": _jsonable(e.a), "to": _jsonable(e.b), "length": e.length} for e in self.edges],
            "halflines": [{"at": _jsonable(v)} for v in self.halflines],
        }

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "MetricGraph":
        try:
            vertices = list(data["vertices"])
            edges = [(e["from"], e["to"], float(e["length"])) for e in data.get("edges", [])]
            halflines = [h["at"] for h in data.get("halflines", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph description: {exc}") from exc
        return cls.build(vertices, edges, halflines, name=name)


def _jsonable(v: Vertex):
    return v if isinstance(v, (str, int, float)) else str(v)


def load_graph(path: str | Path) -> MetricGraph:
    """Read a graph description file (JSON)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise GraphError(f"{path}: top-level JSON value must be an object")
    return MetricGraph.from_dict(data, name=path.stem)


def save_graph(g: MetricGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# Assumption (H)
# ---------------------------------------------------------------------------


def check_assumption_H(g: MetricGraph) -> bool:
    """True iff every point of ``g`` lies on a trail through two half-lines.

    A trail containing two half-lines enters along one half-line, performs
    an edge-simple walk in the compact core and leaves along a different
    half-line.  The search enumerates such walks exhaustively.  Parallel
    edges between the same endpoints are interchangeable, so walks are
    tracked by how many edges of each parallel class they have used; this
    keeps towers of parallel edges from blowing up the search.
    """
    if g.n_halflines < 2:
        return False
    return not _uncovered_edge_classes(g)


def _edge_classes(g: MetricGraph) -> tuple[list[tuple[Vertex, Vertex]], list[int]]:
    index: dict[tuple, int] = {}
    keys: list[tuple[Vertex, Vertex]] = []
    sizes: list[int] = []
    for e in g.edges:
        key = _unordered(e.a, e.b)
        if key not in index:
            index[key] = len(keys)
            keys.append(key)
            sizes.append(0)
        sizes[index[key]] += 1
    return keys, sizes


def _unordered(a: Vertex, b: Vertex) -> tuple[Vertex, Vertex]:
    return (a, b) if repr(a) <= repr(b) else (b, a)


def _uncovered_edge_classes(g: MetricGraph) -> set[int]:
    keys, sizes = _edge_classes(g)
    uncovered = set(range(len(keys)))
    if not uncovered:
        return uncovered
    moves: dict[Vertex, list[tuple[int, Vertex]]] = defaultdict(list)
    for c, (a, b) in enumerate(keys):
        moves[a].append((c, b))
        if a != b:
            moves[b].append((c, a))
    hl_count = {v: len(ids) for v, ids in g.halflines_at.items()}

    # A walk starting at anchor s may end at anchor t if t carries a
    # half-line other than the starting one.
    for start in g.anchors:
        seen: set[tuple[Vertex, tuple[int, ...]]] = set()
        stack = [(start, (0,) * len(keys))]
        while stack and uncovered:
            v, used = stack.pop()
            if (v, used) in seen:
                continue
            seen.add((v, used))
            needed = 2 if v == start else 1
            if hl_count.get(v, 0) >= needed:
                uncovered -= {c for c, k in enumerate(used) if k}
            for c, w in moves[v]:
                if used[c] < sizes[c]:
                    nxt = list(used)
                    nxt[c] += 1
                    stack.append((w, tuple(nxt)))
        if not uncovered:
            break
    return uncovered


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TopologyReport:
    satisfies_H: bool
    num_halflines: int
    min_degree: int
    has_degree2_vertex: bool
    is_line: bool
    is_tower_of_bubbles: bool
    regime_tags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "satisfies_H": self.satisfies_H,
            "num_halflines": self.num_halflines,
            "min_degree": self.min_degree,
            "has_degree2_vertex": self.has_degree2_vertex,
            "is_line": self.is_line,
            "is_tower_of_bubbles": self.is_tower_of_bubbles,
            "regime_tags": list(self.regime_tags),
        }


def is_line(g: MetricGraph) -> bool:
    # connected, two half-lines and every vertex of degree 2 forces a path
    return g.n_halflines == 2 and all(d == 2 for d in g.degree.values())


def is_tower_of_bubbles(g: MetricGraph) -> bool:
    """Heuristic: a chain of bubbles between two half-lines.

    The chain v_1, ..., v_k has consecutive vertices joined by bundles of at
    least two parallel edges, self-loops are allowed anywhere along it, and
    one half-line sits at each end.  At least one bubble must be present,
    otherwise the graph is a line.
    """
    if g.n_halflines != 2:
        return False
    loops = sum(1 for e in g.edges if e.is_loop)
    bundles = Counter(_unordered(e.a, e.b) for e in g.edges if not e.is_loop)
    if any(k < 2 for k in bundles.values()):
        return False
    simple_deg = Counter()
    for a, b in bundles:
        simple_deg[a] += 1
        simple_deg[b] += 1
    if len(bundles) != g.n_vertices - 1 or any(simple_deg[v] > 2 for v in g.vertices):
        return False
    h0, h1 = g.halflines
    if g.n_vertices == 1:
        return loops > 0
    ends = [v for v in g.vertices if simple_deg[v] == 1]
    return h0 != h1 and sorted(map(repr, ends)) == sorted(map(repr, (h0, h1)))


def classify(g: MetricGraph) -> TopologyReport:
    H = check_assumption_H(g)
    N = g.n_halflines
    min_deg = min(g.degree.values())
    deg2 = any(d == 2 for d in g.degree.values())
    line = is_line(g)
    tower = is_tower_of_bubbles(g)
    proper_H = H and not line and not tower
    tags = []
    if proper_H and N >= 3 and min_deg >= 3:
        tags.append("Thm-1.1")
    if deg2:
        tags.append("Thm-1.2")
    if N == 2:
        tags.append("Thm-1.3")
    if proper_H and N >= 3 and deg2:
        tags.append("Cor-1.4")
    if proper_H and N == 2 and not deg2:
        tags.append("Cor-1.5")
    if N == 2 and deg2:
        tags.append("Cor-1.6")
    return TopologyReport(H, N, min_deg, deg2, line, tower, tuple(tags))


# ---------------------------------------------------------------------------
# Named families
# ---------------------------------------------------------------------------


def make_star(N: int) -> MetricGraph:
    """Star graph S_N: one vertex with N half-lines."""
    if int(N) != N or N < 2:
        raise GraphError("a star graph needs an integer N >= 2")
    return MetricGraph.build(["0"], [], ["0"] * int(N), name=f"star{N}")


def make_line() -> MetricGraph:
    """The real line as a 2-star (one vertex of degree 2)."""
    g = make_star(2)
    return MetricGraph(g.vertices, g.edges, g.halflines, name="line")


def make_fig1() -> MetricGraph:
    """A representative graph fulfilling Assumption (H).

    Triangle A-B-C with one half-line at A and at B, plus a bubble of two
    parallel edges C-D with a half-line at D.  Every vertex has degree >= 3.
    """
    return MetricGraph.build(
        ["A", "B", "C", "D"],
        [("A", "B", 1.0), ("B", "C", 1.5), ("C", "A", 2.0), ("C", "D", 1.0), ("C", "D", 1.0)],
        ["A", "B", "D"],
        name="fig1",
    )


def make_fig6_Gl(l: float) -> MetricGraph:
    """Degree-2 vertex v joined by edges of length l to v1, v2; two half-lines at each."""
    if not l > 0:
        raise GraphError("edge length l must be positive")
    return MetricGraph.build(
        ["v", "v1", "v2"],
        [("v", "v1", l), ("v", "v2", l)],
        ["v1", "v1", "v2", "v2"],
        name=f"fig6(l={l:g})",
    )


def make_fig7_Gk(k: int) -> MetricGraph:
    """v1 =(3 unit edges)= v2 =(k unit edges)= v3, two half-lines at v3."""
    if int(k) != k or k < 2:
        raise GraphError("k must be an integer >= 2")
    edges = [("v1", "v2", 1.0)] * 3 + [("v2", "v3", 1.0)] * int(k)
    return MetricGraph.build(["v1", "v2", "v3"], edges, ["v3", "v3"], name=f"fig7(k={k})")


def make_fig8_Gl(k: int, l: float) -> MetricGraph:
    """G_k with a degree-2 vertex inserted between the core and the half-lines.

    The half-lines of G_k move from v3 to a new vertex x; v3 and x are
    joined through the degree-2 vertex w by two edges of length l.
    """
    if not l > 0:
        raise GraphError("edge length l must be positive")
    base = make_fig7_Gk(k)
    edges = [(e.a, e.b, e.length) for e in base.edges] + [("v3", "w", l), ("w", "x", l)]
    return MetricGraph.build(
        ["v1", "v2", "v3", "w", "x"], edges, ["x", "x"], name=f"fig8(k={k},l={l:g})"
    )


FAMILIES = ("star", "line", "fig1", "fig6", "fig7", "fig8")


def make_family(name: str, n: int = 3, l: float = 1.0, k: int = 3) -> MetricGraph:
    if name == "star":
        return make_star(n)
    if name == "line":
        return make_line()
    if name == "fig1":
        return make_fig1()
    if name == "fig6":
        return make_fig6_Gl(l)
    if name == "fig7":
        return make_fig7_Gk(k)
    if name == "fig8":
        return make_fig8_Gl(k, l)
    raise GraphError(f"unknown graph family {name!r}; choose from {', '.join(FAMILIES)}")


def vertex_permutations(g: MetricGraph, orders: Sequence[Sequence[int]]) -> list[MetricGraph]:
    """Relabel ``g`` by each permutation of its vertex indices (test helper)."""
    out = []
    for perm in orders:
        mapping = {v: f"p{perm[i]}" for i, v in enumerate(g.vertices)}
        out.append(g.relabeled(mapping))
    return out
