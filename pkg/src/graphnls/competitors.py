"""Explicit trial functions whose energy can undercut the soliton level.

Each constructor samples a closed-form profile on a discretized graph and
rescales it to the requested mass, then reports its energy next to
``-theta_p mu^{2 beta + 1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .analytic_line import NonlinearityParams, exponents, phi1_at_0, soliton_energy, soliton_eval
from .discretize import (
    Discretization,
    EnergyBreakdown,
    GraphFunction,
    GridSpec,
    evaluate,
    project_mass,
)
from .graph_model import MetricGraph, Vertex, make_line


class ConstructionError(ValueError):
    """The requested trial function cannot be built on this graph."""


@dataclass(frozen=True)
class CompetitorResult:
    name: str
    function: GraphFunction
    params: dict = field(default_factory=dict)
    breakdown: EnergyBreakdown | None = None
    soliton_level: float = 0.0

    @property
    def beats_soliton_level(self) -> bool:
        return self.breakdown.F < self.soliton_level

    @property
    def gap(self) -> float:
        return self.breakdown.F - self.soliton_level


def _finish(name: str, u: GraphFunction, params: NonlinearityParams, info: dict) -> CompetitorResult:
    u = project_mass(u, params.mu)
    return CompetitorResult(name, u, info, evaluate(u, params), soliton_energy(params.p, params.mu))


def _disc(g: MetricGraph, params: NonlinearityParams, grid: GridSpec | Discretization | None,
          width_mass: float | None = None) -> Discretization:
    """Use the given grid, else one sized for the soliton of ``width_mass`` (default mu)."""
    if isinstance(grid, Discretization):
        if grid.graph is not g:
            raise ValueError("discretization belongs to another graph")
        return grid
    return Discretization(g, grid or GridSpec.for_mass(params.p, width_mass or params.mu))


def _solve_increasing(f: Callable[[float], float], lo: float, hi: float) -> float:
    flo, fhi = f(lo), f(hi)
    while fhi < 0:
        hi *= 2.0
        fhi = f(hi)
    if flo > 0 or fhi < 0:
        raise ConstructionError("mass equation has no root in the search bracket")
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=500)


# ---------------------------------------------------------------------------


def plateau_soliton(
    g: MetricGraph, params: NonlinearityParams, grid: GridSpec | Discretization | None = None
) -> CompetitorResult:
    """Soliton halves on the half-lines and their peak value on the whole core.

    The soliton mass m solves mu = (N/2) m + l phi_1(0)^2 m^{2 alpha}.
    """
    N = g.n_halflines
    if N < 1:
        raise ConstructionError("plateau construction needs at least one half-line")
    p, mu, ell = params.p, params.mu, g.core_length
    a, _ = exponents(p)
    c0 = phi1_at_0(p) ** 2
    m = _solve_increasing(lambda m: 0.5 * N * m + ell * c0 * m ** (2 * a) - mu, mu * 1e-6, 2.0 * mu / N)
    disc = _disc(g, params, grid, width_mass=m)  # the tails are the wider phi_m
    peak = float(soliton_eval(p, m, 0.0))
    u = disc.sample(
        edge_fn=lambda k, s: np.full_like(s, peak),
        halfline_fn=lambda k, s: soliton_eval(p, m, s),
    )
    return _finish("plateau_soliton", u, params, {"m": m, "plateau": peak})


def _directions(g: MetricGraph, disc: Discretization, v: Vertex):
    """Per branch at ``v``: (branch, arclength-to-distance map, reach)."""
    out = []
    for b in disc.branches:
        if b.is_halfline:
            if g.halflines[b.index] == v:
                out.append((b, lambda s: s, b.length))
            continue
        e = g.edges[b.index]
        if e.is_loop and e.a == v:
            out.append((b, lambda s, L=b.length: np.minimum(s, L - s), b.length / 2.0))
        elif e.a == v:
            out.append((b, lambda s: s, b.length))
        elif e.b == v:
            out.append((b, lambda s, L=b.length: L - s, b.length))
    return out


def _truncated_radial(
    name: str, g: MetricGraph, v: Vertex, params: NonlinearityParams, grid, profile_mass: float
) -> CompetitorResult:
    disc = _disc(g, params, grid)
    dirs = _directions(g, disc, v)
    L = min(reach for _, _, reach in dirs)
    if L < 2.0 * max(b.step for b, _, _ in dirs):
        raise ConstructionError(f"edges at {v!r} are too short to carry a resolved bump")
    p = params.p
    # support radius exactly L; the shift is explicit instead of root-found
    delta = float(soliton_eval(p, profile_mass, L))
    vals = np.zeros(disc.size)
    for b, dist, _ in dirs:
        r = dist(b.arclength)
        w = np.where(r < L, soliton_eval(p, profile_mass, r) - delta, 0.0)
        vals[b.nodes] = np.maximum(w, 0.0)
    vals[disc.vertex_index[v]] = float(soliton_eval(p, profile_mass, 0.0)) - delta
    vals[~disc.free] = 0.0
    u = GraphFunction(disc, vals)
    kappa = math.sqrt(params.mu / u.mass)
    return _finish(name, u, params, {"delta": delta, "kappa": kappa, "support_radius": L,
                                     "profile_mass": profile_mass, "vertex": v})


def truncated_star_soliton(
    g: MetricGraph, v: Vertex | None, params: NonlinearityParams, grid: GridSpec | Discretization | None = None
) -> CompetitorResult:
    """kappa (phi_{2mu/deg v} - delta)_+ radially around a vertex of degree >= 3."""
    if v is None:
        cands = [w for w in g.vertices if g.degree[w] >= 3]
        if not cands:
            raise ConstructionError("graph has no vertex of degree >= 3")
        v = min(cands, key=lambda w: g.degree[w])
    deg = g.degree[v]
    if deg < 3:
        raise ConstructionError(f"vertex {v!r} has degree {deg} < 3")
    return _truncated_radial("truncated_star_soliton", g, v, params, grid, 2.0 * params.mu / deg)


def truncated_line_soliton_at_deg2(
    g: MetricGraph, v: Vertex | None, params: NonlinearityParams, grid: GridSpec | Discretization | None = None
) -> CompetitorResult:
    """kappa (phi_mu - delta)_+ centred at a vertex of degree 2."""
    if v is None:
        cands = [w for w in g.vertices if g.degree[w] == 2]
        if not cands:
            raise ConstructionError("graph has no vertex of degree 2")
        v = cands[0]
    if g.degree[v] != 2:
        raise ConstructionError(f"vertex {v!r} does not have degree 2")
    return _truncated_radial("truncated_line_soliton_at_deg2", g, v, params, grid, params.mu)


EtaProvider = Callable[[float, GridSpec], tuple[np.ndarray, float]]


def _default_eta(params: NonlinearityParams) -> EtaProvider:
    from .solver import line_delta_profile  # solver imports this module

    def provider(m: float, grid: GridSpec):
        return line_delta_profile(params.with_mu(m), grid)

    return provider


def eta_plateau(
    g: MetricGraph,
    params: NonlinearityParams,
    eta: EtaProvider | None = None,
    grid: GridSpec | Discretization | None = None,
) -> CompetitorResult:
    """Halves of the line ground state with a vertex delta, and a core plateau.

    ``eta(m, grid)`` returns (half-line samples on ``grid``, eta_m(0)); the
    default computes the line state with the solver.  The mass m of the
    line state solves m + l eta_m(0)^2 = mu.
    """
    if g.n_halflines != 2:
        raise ConstructionError("eta plateau needs exactly two half-lines")
    disc = _disc(g, params, grid)
    eta = eta or _default_eta(params)
    ell = g.core_length
    cache: dict[float, tuple[np.ndarray, float]] = {}

    def get(m: float):
        if m not in cache:
            cache[m] = eta(m, disc.grid)
        return cache[m]

    if ell == 0.0:
        m = params.mu
    else:
        m = _solve_increasing(lambda m: m + ell * get(m)[1] ** 2 - params.mu, params.mu * 1e-6, params.mu)
    half, peak = get(m)
    counts = {b.intervals for b in disc.halfline_branches}
    if len(counts) != 1 or len(half) != counts.pop() + 1:
        raise ConstructionError("line state samples do not match the half-line grid")
    u = disc.sample(edge_fn=lambda k, s: np.full_like(s, peak), halfline_fn=lambda k, s: half)
    return _finish("eta_plateau", u, params, {"m": m, "eta0": peak, "budget": m + ell * peak**2})


def compact_support_line_function(
    params: NonlinearityParams, h: float | None = None, L: float | None = None
) -> CompetitorResult:
    """kappa (phi_mu - phi_mu(1))_+ on the line, supported exactly on [-1, 1]."""
    auto = GridSpec.for_mass(params.p, params.mu)
    k = math.ceil(1.0 / (h or auto.h))
    h = 1.0 / k
    L = h * math.ceil(max(L or auto.L_halfline, 2.0) / h)
    disc = Discretization(make_line(), GridSpec(h, L), [round(L / h)] * 2)
    p, mu = params.p, params.mu
    delta = float(soliton_eval(p, mu, 1.0))

    def half(_, s):
        idx = np.arange(len(s))
        return np.where(idx < k, np.maximum(soliton_eval(p, mu, s) - delta, 0.0), 0.0)

    u = disc.sample(halfline_fn=half)
    kappa = math.sqrt(mu / u.mass)
    return _finish("compact_support_line_function", u, params, {"delta": delta, "kappa": kappa})


def scale(g: MetricGraph, u: GraphFunction, t: float, p: float) -> tuple[MetricGraph, GraphFunction]:
    """Mass-scaling map: lengths times t^-beta, values u_t = t^alpha u(t^beta x).

    The exponents depend on ``p``.  Node counts are kept, so nodal values
    transfer exactly and the mass is multiplied by t.
    """
    if not t > 0:
        raise ValueError("scaling factor must be positive")
    if u.graph is not g:
        raise ValueError("function does not live on this graph")
    a, b = exponents(p)
    disc = u.disc.rescaled(t ** (-b))
    return disc.graph, GraphFunction(disc, t**a * u.values)
