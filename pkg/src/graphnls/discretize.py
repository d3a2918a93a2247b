"""P1 finite elements on metric graphs: grids, sampled functions and energies.

Every bounded edge and every truncated half-line is a *branch* carrying a
uniform grid.  Nodes are numbered globally: vertex nodes first (in the
graph's vertex order), then branch interiors, so a vertex value is stored
once and shared by every incident branch.  The last node of a truncated
half-line is held at zero.

Integrals use the trapezoidal rule and derivatives are forward differences,
so the kinetic term is exactly that of the piecewise-linear interpolant and
the discrete gradient automatically carries the Kirchhoff coupling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .analytic_line import NonlinearityParams, exponents, soliton_frequency
from .graph_model import MetricGraph, Vertex

DEFAULT_H_REL = 0.0125
DEFAULT_L_REL = 20.0


@dataclass(frozen=True)
class GridSpec:
    """Target grid step and half-line truncation length."""

    h: float
    L_halfline: float

    def __post_init__(self) -> None:
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("grid step h must be positive")
        if not self.L_halfline >= 10.0 * self.h:
            raise ValueError("half-line truncation must be at least 10 grid steps")

    @classmethod
    def for_mass(
        cls, p: float, mu: float, h_rel: float = DEFAULT_H_REL, L_rel: float = DEFAULT_L_REL
    ) -> "GridSpec":
        """Grid resolving the soliton of mass ``mu``.

        Lengths are measured in units of the soliton width
        ``1 / (mu^beta sqrt(omega_1))``.
        """
        _, b = exponents(p)
        width = 1.0 / (mu**b * math.sqrt(soliton_frequency(p)))
        return cls(h_rel * width, L_rel * width)

    def intervals(self, length: float) -> int:
        return max(2, math.ceil(length / self.h - 1e-9))

    def to_dict(self) -> dict:
        return {"h": self.h, "L_halfline": self.L_halfline}


@dataclass(frozen=True)
class Branch:
    """A bounded edge or truncated half-line with its node indices."""

    label: str
    nodes: np.ndarray
    length: float
    is_halfline: bool
    index: int  # position in graph.edges or graph.halflines

    @property
    def intervals(self) -> int:
        return len(self.nodes) - 1

    @property
    def step(self) -> float:
        return self.length / self.intervals

    @property
    def arclength(self) -> np.ndarray:
        return np.linspace(0.0, self.length, len(self.nodes))


class Discretization:
    """Node layout, quadrature weights and stiffness matrix for a graph.

    ``counts`` optionally fixes the number of intervals per branch, in the
    order bounded edges then half-lines; this keeps node counts identical
    under rescaling of the graph.
    """

    def __init__(self, graph: MetricGraph, grid: GridSpec, counts: Sequence[int] | None = None):
        self.graph = graph
        self.grid = grid
        n_edges, n_hl = len(graph.edges), graph.n_halflines
        if counts is None:
            counts = [grid.intervals(e.length) for e in graph.edges]
            counts += [grid.intervals(grid.L_halfline)] * n_hl
        counts = [int(c) for c in counts]
        if len(counts) != n_edges + n_hl or min(counts, default=2) < 2:
            raise ValueError("need at least 2 intervals on each of the %d branches" % (n_edges + n_hl))
        self.counts = tuple(counts)

        vid = {v: i for i, v in enumerate(graph.vertices)}
        self.vertex_index = vid
        nxt = len(graph.vertices)
        branches: list[Branch] = []
        for k, e in enumerate(graph.edges):
            c = counts[k]
            interior = np.arange(nxt, nxt + c - 1)
            nxt += c - 1
            nodes = np.concatenate([[vid[e.a]], interior, [vid[e.b]]])
            branches.append(Branch(f"e{k}", nodes, e.length, False, k))
        for k, v in enumerate(graph.halflines):
            c = counts[n_edges + k]
            rest = np.arange(nxt, nxt + c)
            nxt += c
            branches.append(Branch(f"h{k}", np.concatenate([[vid[v]], rest]), grid.L_halfline, True, k))
        self.branches = tuple(branches)
        self.size = nxt

        i = np.concatenate([b.nodes[:-1] for b in branches]) if branches else np.zeros(0, int)
        j = np.concatenate([b.nodes[1:] for b in branches]) if branches else np.zeros(0, int)
        hs = np.concatenate([np.full(b.intervals, b.step) for b in branches]) if branches else np.zeros(0)
        self.seg_i, self.seg_j, self.seg_h = i, j, hs
        self.seg_is_halfline = (
            np.concatenate([np.full(b.intervals, b.is_halfline) for b in branches])
            if branches
            else np.zeros(0, bool)
        )

        w = np.zeros(self.size)
        np.add.at(w, i, hs / 2)
        np.add.at(w, j, hs / 2)
        self.weights = w

        free = np.ones(self.size, bool)
        for b in branches:
            if b.is_halfline:
                free[b.nodes[-1]] = False
        self.free = free

        owner = np.full(self.size, -1)
        pos = np.full(self.size, np.nan)
        for bi, b in enumerate(branches):
            owner[b.nodes[1:-1]] = bi
            pos[b.nodes[1:-1]] = b.arclength[1:-1]
            if b.is_halfline:
                owner[b.nodes[-1]] = bi
                pos[b.nodes[-1]] = b.length
        self.node_branch = owner
        self.node_arclength = pos

    # -- matrices -------------------------------------------------------

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """A with kinetic energy 0.5 u^T A u."""
        inv = 1.0 / self.seg_h
        rows = np.concatenate([self.seg_i, self.seg_j, self.seg_i, self.seg_j])
        cols = np.concatenate([self.seg_i, self.seg_j, self.seg_j, self.seg_i])
        vals = np.concatenate([inv, inv, -inv, -inv])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size))

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices

    @cached_property
    def core_weights(self) -> np.ndarray:
        """Trapezoid weights restricted to bounded edges."""
        w = np.zeros(self.size)
        m = ~self.seg_is_halfline
        np.add.at(w, self.seg_i[m], self.seg_h[m] / 2)
        np.add.at(w, self.seg_j[m], self.seg_h[m] / 2)
        return w

    @cached_property
    def halfline_weights(self) -> np.ndarray:
        return self.weights - self.core_weights

    @property
    def halfline_branches(self) -> tuple[Branch, ...]:
        return tuple(b for b in self.branches if b.is_halfline)

    @property
    def edge_branches(self) -> tuple[Branch, ...]:
        return tuple(b for b in self.branches if not b.is_halfline)

    def distances_from(self, sources: Sequence[int]) -> np.ndarray:
        """Graph distance of every node to the nearest node in ``sources``."""
        adj = sparse.coo_matrix(
            (self.seg_h, (self.seg_i, self.seg_j)), shape=(self.size, self.size)
        ).tocsr()
        d = csgraph.dijkstra(adj, directed=False, indices=list(sources), min_only=True)
        return np.asarray(d)

    @cached_property
    def vertex_distance(self) -> np.ndarray:
        return self.distances_from(range(self.n_vertices))

    # -- sampling -------------------------------------------------------

    def sample(
        self,
        edge_fn: Callable[[int, np.ndarray], np.ndarray] | None = None,
        halfline_fn: Callable[[int, np.ndarray], np.ndarray] | None = None,
        vertex_values: Mapping[Vertex, float] | None = None,
    ) -> "GraphFunction":
        """Build a function from per-branch callables of the arclength.

        Vertex values come from ``vertex_values`` when given, otherwise
        from the first branch touching the vertex.
        """
        u = np.zeros(self.size)
        set_v = np.zeros(self.n_vertices, bool)
        if vertex_values:
            for v, val in vertex_values.items():
                u[self.vertex_index[v]] = val
                set_v[self.vertex_index[v]] = True
        for b in self.branches:
            fn = halfline_fn if b.is_halfline else edge_fn
            if fn is None:
                vals = np.zeros(len(b.nodes))
            else:
                vals = np.asarray(fn(b.index, b.arclength), dtype=float)
            inner = b.nodes[1:] if b.is_halfline else b.nodes[1:-1]
            u[inner] = vals[1:] if b.is_halfline else vals[1:-1]
            for end, val in ((b.nodes[0], vals[0]), (b.nodes[-1], vals[-1])):
                if end < self.n_vertices and not set_v[end]:
                    u[end] = val
                    set_v[end] = True
        u[~self.free] = 0.0
        return GraphFunction(self, u)

    def zeros(self) -> "GraphFunction":
        return GraphFunction(self, np.zeros(self.size))

    def rescaled(self, factor: float) -> "Discretization":
        """Same node counts on the graph with all lengths times ``factor``."""
        g = self.graph.scaled(factor)
        grid = GridSpec(self.grid.h * factor, self.grid.L_halfline * factor)
        return Discretization(g, grid, self.counts)


@dataclass(frozen=True, eq=False)
class GraphFunction:
    """Nodal values of a continuous piecewise-linear function on a graph."""

    disc: Discretization
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.disc.size,):
            raise ValueError(f"expected {self.disc.size} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        if np.any(v[~self.disc.free] != 0.0):
            raise ValueError("truncated half-line ends must vanish")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def graph(self) -> MetricGraph:
        return self.disc.graph

    def vertex_value(self, v: Vertex) -> float:
        return float(self.values[self.disc.vertex_index[v]])

    @property
    def vertex_values(self) -> np.ndarray:
        return self.values[: self.disc.n_vertices]

    def on_branch(self, label_or_index) -> np.ndarray:
        b = self._branch(label_or_index)
        return self.values[b.nodes]

    def _branch(self, key) -> Branch:
        if isinstance(key, int):
            return self.disc.branches[key]
        for b in self.disc.branches:
            if b.label == key:
                return b
        raise KeyError(key)

    def with_values(self, values: np.ndarray) -> "GraphFunction":
        return GraphFunction(self.disc, values)

    def __mul__(self, c: float) -> "GraphFunction":
        return GraphFunction(self.disc, self.values * float(c))

    __rmul__ = __mul__

    @property
    def mass(self) -> float:
        return float(self.disc.weights @ self.values**2)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_csv(self, path: str | Path) -> None:
        write_csv(self, path)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    bulk: float
    vertex: float
    mass: float

    @property
    def E(self) -> float:
        return self.kinetic - self.bulk

    @property
    def F(self) -> float:
        return self.E - self.vertex

    def to_dict(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "bulk": self.bulk,
            "vertex": self.vertex,
            "E": self.E,
            "F": self.F,
            "mass": self.mass,
        }


def _check(u: GraphFunction, disc: Discretization | None) -> None:
    if disc is not None and u.disc is not disc:
        raise ValueError("function lives on a different discretization")


def evaluate(u: GraphFunction, params: NonlinearityParams, disc: Discretization | None = None) -> EnergyBreakdown:
    """Kinetic, bulk and vertex terms plus mass of ``u``."""
    _check(u, disc)
    d = u.disc
    x = u.values
    a = np.abs(x)
    du = x[d.seg_j] - x[d.seg_i]
    kinetic = 0.5 * float(np.sum(du * du / d.seg_h))
    bulk = float(d.weights @ a**params.p) / params.p
    vertex = params.tau * float(np.sum(a[: d.n_vertices] ** params.q)) / params.q
    return EnergyBreakdown(kinetic, bulk, vertex, float(d.weights @ x**2))


def evaluate_halflines(u: GraphFunction, params: NonlinearityParams) -> EnergyBreakdown:
    """Energy terms of ``u`` restricted to the half-lines (no vertex term)."""
    d = u.disc
    x = u.values
    m = d.seg_is_halfline
    du = x[d.seg_j[m]] - x[d.seg_i[m]]
    kinetic = 0.5 * float(np.sum(du * du / d.seg_h[m]))
    w = d.halfline_weights
    bulk = float(w @ np.abs(x) ** params.p) / params.p
    return EnergyBreakdown(kinetic, bulk, 0.0, float(w @ x**2))


def project_mass(u: GraphFunction, mu: float) -> GraphFunction:
    """Rescale ``u`` to mass ``mu``."""
    if not mu > 0:
        raise ValueError("target mass must be positive")
    m = u.mass
    if not m > 0:
        raise ValueError("cannot project the zero function onto a mass sphere")
    v = u.values * math.sqrt(mu / m)
    # one Newton-free correction removes the rounding of the first scaling
    v *= math.sqrt(mu / float(u.disc.weights @ v**2))
    return GraphFunction(u.disc, v)


def gn_ratios(u: GraphFunction, p: float) -> tuple[float, float]:
    """Empirical Gagliardo-Nirenberg quotients (r_p, r_inf).

    Both are +inf when the derivative vanishes identically.
    """
    d = u.disc
    x = u.values
    mass = u.mass
    if mass == 0.0:
        raise ValueError("Gagliardo-Nirenberg ratios are undefined for u = 0")
    du = x[d.seg_j] - x[d.seg_i]
    grad2 = float(np.sum(du * du / d.seg_h))
    if grad2 == 0.0:
        return math.inf, math.inf
    l2 = math.sqrt(mass)
    g = math.sqrt(grad2)
    lp = float(d.weights @ np.abs(x) ** p)
    r_p = lp / (l2 ** (p / 2 + 1) * g ** (p / 2 - 1))
    r_inf = u.sup() ** 2 / (l2 * g)
    return r_p, r_inf


def write_csv(u: GraphFunction, path: str | Path) -> None:
    """Write rows (edge_id, arclength, value) branch by branch."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["edge_id", "arclength", "value"])
        for b in u.disc.branches:
            for s, val in zip(b.arclength, u.values[b.nodes]):
                w.writerow([b.label, repr(float(s)), repr(float(val))])


def read_csv(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    out: dict[str, tuple[list, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            s, v = out.setdefault(row["edge_id"], ([], []))
            s.append(float(row["arclength"]))
            v.append(float(row["value"]))
    return {k: (np.array(s), np.array(v)) for k, (s, v) in out.items()}
