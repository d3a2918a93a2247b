"""Mass-constrained minimisation of F on a discretized graph.

The descent works on the sphere {mass = mu} with the H^1-type
preconditioner ``A + sigma W`` (``sigma`` tracks the current Lagrange
multiplier), Polak-Ribiere conjugation and a backtracking line search on
the retraction ``u -> |u + s d|`` rescaled to mass ``mu``.  Every accepted
iterate has mass exactly ``mu`` up to rounding and lower energy than its
predecessor.

Existence verdicts follow the comparison criterion: any admissible state
strictly below the soliton level certifies a ground state.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import competitors as comp
from .analytic_line import NonlinearityParams, soliton_energy, soliton_eval
from .discretize import (
    DEFAULT_H_REL,
    DEFAULT_L_REL,
    Discretization,
    EnergyBreakdown,
    GraphFunction,
    GridSpec,
    evaluate,
)
from .graph_model import MetricGraph, make_line

EXISTS = "ExistenceCertified"
NONEXISTENT = "LikelyNonexistent"
INCONCLUSIVE = "Inconclusive"

START_KINDS = ("competitors", "vertex", "escape", "random")


class SolverError(RuntimeError):
    """Numerical breakdown (NaN or overflow) during the descent."""


@dataclass(frozen=True)
class SolveConfig:
    """Solver knobs.  ``grid=None`` picks a grid resolving the soliton of mass mu."""

    grid: GridSpec | None = None
    h_rel: float = DEFAULT_H_REL
    L_rel: float = DEFAULT_L_REL
    max_iters: int = 4000
    step: float = 1.0
    step_floor: float = 1e-12
    tol: float = 1e-10
    window: int = 10
    num_starts: int = 2
    start_kinds: tuple[str, ...] = START_KINDS
    seed: int = 0
    margin: float = 0.005
    escape_threshold: float = 0.01
    max_escape_starts: int = 4
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.window < 1:
            raise ValueError("max_iters and window must be positive")
        if not (self.step > 0 and self.step_floor > 0 and self.tol > 0):
            raise ValueError("step sizes and tolerance must be positive")
        if self.num_starts < 0 or not (self.margin > 0 and self.escape_threshold > 0):
            raise ValueError("num_starts must be >= 0; margins must be positive")
        unknown = set(self.start_kinds) - set(START_KINDS)
        if unknown:
            raise ValueError(f"unknown start kinds {sorted(unknown)}")

    def grid_for(self, params: NonlinearityParams) -> GridSpec:
        return self.grid or GridSpec.for_mass(params.p, params.mu, self.h_rel, self.L_rel)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = self.grid.to_dict() if self.grid else None
        d["start_kinds"] = list(self.start_kinds)
        return d


@dataclass
class StartResult:
    label: str
    function: GraphFunction
    F: float
    iters: int
    status: str  # converged | stalled | max_iters
    trajectory: list[float] = field(repr=False, default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status in ("converged", "stalled")

    def summary(self, level: float) -> dict:
        return {"label": self.label, "F": self.F, "gap": self.F - level, "iters": self.iters,
                "status": self.status}


@dataclass
class SolveReport:
    graph: MetricGraph
    params: NonlinearityParams
    config: SolveConfig
    best: GraphFunction
    breakdown: EnergyBreakdown
    soliton_level: float
    verdict: str
    diagnostics: dict
    starts: list[StartResult] = field(repr=False, default_factory=list)

    @property
    def gap(self) -> float:
        return self.breakdown.F - self.soliton_level

    @property
    def best_energy(self) -> float:
        return self.breakdown.F

    @property
    def best_start(self) -> StartResult:
        return min(self.starts, key=lambda s: s.F)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "params": self.params.to_dict(),
            "config": self.config.to_dict(),
            "best_energy": self.best_energy,
            "soliton_level": self.soliton_level,
            "gap": self.gap,
            "verdict": self.verdict,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_json_default)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# ---------------------------------------------------------------------------
# descent
# ---------------------------------------------------------------------------


class _Problem:
    def __init__(self, disc: Discretization, params: NonlinearityParams):
        self.disc = disc
        self.params = params
        self.W = disc.weights
        self.A = disc.stiffness
        self.free = disc.free
        f = disc.free
        self.Aff = disc.stiffness[f][:, f].tocsc()
        self.Wff = sparse.diags(disc.weights[f]).tocsc()
        self.nv = disc.n_vertices

    def energy(self, u: np.ndarray) -> float:
        P = self.params
        a = np.abs(u)
        return (0.5 * float(u @ (self.A @ u)) - float(self.W @ a**P.p) / P.p
                - P.tau * float(np.sum(a[: self.nv] ** P.q)) / P.q)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        P = self.params
        a = np.abs(u)
        g = self.A @ u - self.W * a ** (P.p - 2) * u
        g[: self.nv] -= P.tau * a[: self.nv] ** (P.q - 2) * u[: self.nv]
        g[~self.free] = 0.0
        return g

    def normalize(self, u: np.ndarray) -> np.ndarray:
        m = float(self.W @ u**2)
        if not m > 0 or not math.isfinite(m):
            raise SolverError("iterate lost all mass or overflowed")
        return u * math.sqrt(self.params.mu / m)


def descend(disc: Discretization, params: NonlinearityParams, u0: np.ndarray, cfg: SolveConfig,
            label: str = "start") -> StartResult:
    """Run the preconditioned descent from ``u0`` until the energy stalls."""
    prob = _Problem(disc, params)
    f, W, mu = prob.free, prob.W, params.mu
    u = np.abs(np.asarray(u0, dtype=float)).copy()
    u[~f] = 0.0
    u = prob.normalize(u)
    E = prob.energy(u)
    traj = [E]
    s = cfg.step
    sigma = lu = None
    d_prev = r_prev = z_prev = None
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = prob.gradient(u)
        lam = float(u @ g) / mu
        r = g - lam * W * u
        target = max(-lam, 1e-3 * abs(E) / mu, 1e-300)
        if sigma is None or abs(target / sigma - 1.0) > 0.2:
            sigma = target
            lu = splu((prob.Aff + sigma * prob.Wff).tocsc())
        z = np.zeros_like(u)
        z[f] = lu.solve(r[f])
        d = -z
        if d_prev is not None:
            denom = float(r_prev @ z_prev)
            beta = max(0.0, float(r @ (z - z_prev)) / denom) if denom > 0 else 0.0
            d = d + beta * d_prev
            if float(d @ r) >= 0.0:
                d = -z
        d -= float(u @ (W * d)) / mu * u
        slope = float(d @ r)
        if not slope < 0.0:
            status = "converged"
            break
        accepted = False
        while s >= cfg.step_floor:
            v = np.abs(u + s * d)
            v = prob.normalize(v)
            Ev = prob.energy(v)
            if not math.isfinite(Ev):
                raise SolverError(f"{label}: non-finite energy at iteration {it}; trace tail {traj[-5:]}")
            if Ev <= E + 1e-4 * s * slope + 1e-15 * abs(E):
                accepted = True
                break
            s *= 0.5
        if not accepted:
            status = "stalled"
            break
        u, E = v, Ev
        traj.append(E)
        d_prev, r_prev, z_prev = d, r, z
        s = min(2.0 * s, 4.0 * cfg.step)
        if len(traj) > cfg.window and traj[-cfg.window - 1] - E <= cfg.tol * abs(E):
            status = "converged"
            break
    return StartResult(label, GraphFunction(disc, u), E, it, status, traj)


# ---------------------------------------------------------------------------
# starting points
# ---------------------------------------------------------------------------


def _bump(disc: Discretization, params: NonlinearityParams, sources: Sequence[int], width: float = 1.0):
    d = disc.distances_from(sources)
    return soliton_eval(params.p, params.mu, np.where(np.isfinite(d), d, 1e300) / width)


def build_starts(disc: Discretization, params: NonlinearityParams, cfg: SolveConfig,
                 include_eta: bool = True) -> list[tuple[str, np.ndarray]]:
    g = disc.graph
    out: list[tuple[str, np.ndarray]] = []
    kinds = set(cfg.start_kinds)
    if "competitors" in kinds:
        makers = [("plateau", lambda: comp.plateau_soliton(g, params, disc))]
        for v in g.vertices:
            if g.degree[v] >= 3:
                makers.append((f"star@{v}", lambda v=v: comp.truncated_star_soliton(g, v, params, disc)))
            elif g.degree[v] == 2:
                makers.append((f"line@{v}", lambda v=v: comp.truncated_line_soliton_at_deg2(g, v, params, disc)))
        if include_eta and g.n_halflines == 2 and g.core_length > 0:
            makers.append(("eta_plateau", lambda: comp.eta_plateau(g, params, grid=disc)))
        for name, make in makers:
            try:
                out.append((name, make().function.values))
            except comp.ConstructionError:
                pass
    if "vertex" in kinds:
        for v in g.vertices:
            out.append((f"bump@{v}", _bump(disc, params, [disc.vertex_index[v]])))
    if "escape" in kinds:
        seen = []
        for b in disc.halfline_branches:
            anchor = g.halflines[b.index]
            if anchor in seen or len(seen) >= cfg.max_escape_starts:
                continue
            seen.append(anchor)
            mid = b.nodes[len(b.nodes) // 2]
            out.append((f"escape@{b.label}", _bump(disc, params, [mid])))
    if "random" in kinds:
        rng = np.random.default_rng(cfg.seed)
        candidates = np.flatnonzero(disc.free)
        for k in range(cfg.num_starts):
            c = int(rng.choice(candidates))
            width = float(np.exp(rng.uniform(np.log(0.5), np.log(2.0))))
            noise = 1.0 + 0.5 * rng.random(disc.size)
            out.append((f"random{k}", _bump(disc, params, [c], width) * noise))
    if not out:
        raise ValueError("no starting points selected")
    return out


# ---------------------------------------------------------------------------
# minimisation and verdicts
# ---------------------------------------------------------------------------


def _workers(cfg: SolveConfig, n: int) -> int:
    if cfg.workers is not None:
        w = cfg.workers
    else:
        try:
            w = int(os.environ.get("GRAPHNLS_THREADS", "1"))
        except ValueError:
            w = 1
    return max(1, min(w, n))


def run_starts(disc: Discretization, params: NonlinearityParams, cfg: SolveConfig,
               starts: list[tuple[str, np.ndarray]]) -> list[StartResult]:
    jobs = [(label, x) for label, x in starts]
    nw = _workers(cfg, len(jobs))
    if nw == 1:
        return [descend(disc, params, x, cfg, label) for label, x in jobs]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(lambda job: descend(disc, params, job[1], cfg, job[0]), jobs))


def diagnostics_for(u: GraphFunction, params: NonlinearityParams) -> dict:
    disc = u.disc
    x = u.values
    mu = u.mass
    peak = int(np.argmax(x))
    return {
        "core_mass_fraction": float(disc.core_weights @ x**2) / mu,
        "peak_value": float(x[peak]),
        "peak_distance_to_vertex": float(disc.vertex_distance[peak]),
        "peak_at_vertex": bool(peak < disc.n_vertices),
        "monotonicity_violations": len(radial_monotonicity_check(u)),
    }


def decide(best: StartResult, results: Sequence[StartResult], level: float, diag: dict,
           cfg: SolveConfig) -> str:
    eps = cfg.margin * abs(level)
    if min(r.F for r in results) - level < -eps:
        return EXISTS
    escaped = (diag["core_mass_fraction"] < cfg.escape_threshold
               and diag["peak_distance_to_vertex"] > 0.0)
    if abs(best.F - level) <= eps and escaped and best.converged:
        return NONEXISTENT
    return INCONCLUSIVE


def minimize(g: MetricGraph, params: NonlinearityParams, cfg: SolveConfig | None = None,
             include_eta: bool = True, starts: list[tuple[str, np.ndarray]] | None = None) -> SolveReport:
    """Multi-start minimisation of F at mass mu; returns the best state and a verdict."""
    cfg = cfg or SolveConfig()
    disc = Discretization(g, cfg.grid_for(params))
    starts = starts if starts is not None else build_starts(disc, params, cfg, include_eta)
    results = run_starts(disc, params, cfg, starts)
    best = min(results, key=lambda r: r.F)
    level = soliton_energy(params.p, params.mu)
    diag = diagnostics_for(best.function, params)
    diag["best_start"] = best.label
    diag["iters"] = best.iters
    diag["starts"] = [r.summary(level) for r in results]
    verdict = decide(best, results, level, diag, cfg)
    return SolveReport(g, params, cfg, best.function, evaluate(best.function, params), level,
                       verdict, diag, list(results))


# ---------------------------------------------------------------------------
# line with a vertex delta
# ---------------------------------------------------------------------------


@dataclass
class LineStateReport:
    report: SolveReport
    F_below_soliton: bool
    peak_above_soliton: bool
    symmetry_error: float

    @property
    def eta0(self) -> float:
        return self.report.best.vertex_value("0")


def line_delta_ground_state(params: NonlinearityParams, cfg: SolveConfig | None = None) -> LineStateReport:
    """Ground state on the line with the vertex term at the origin."""
    cfg = cfg or SolveConfig()
    g = make_line()
    disc = Discretization(g, cfg.grid_for(params))
    start = [("bump@0", _bump(disc, params, [0]))]
    rep = minimize(g, params, replace(cfg, start_kinds=("vertex",)), include_eta=False, starts=start)
    h0, h1 = rep.best.on_branch("h0"), rep.best.on_branch("h1")
    sym = float(np.max(np.abs(h0 - h1))) / max(rep.best.sup(), 1e-300)
    return LineStateReport(
        rep,
        rep.best_energy < rep.soliton_level,
        rep.best.vertex_value("0") > float(soliton_eval(params.p, params.mu, 0.0)),
        sym,
    )


@lru_cache(maxsize=256)
def line_delta_profile(params: NonlinearityParams, grid: GridSpec) -> tuple[np.ndarray, float]:
    """Half-line samples of the line state on ``grid`` and its vertex value."""
    rep = line_delta_ground_state(params, SolveConfig(grid=grid, start_kinds=("vertex",))).report
    half = 0.5 * (rep.best.on_branch("h0") + rep.best.on_branch("h1"))
    half.setflags(write=False)
    return half, float(half[0])


# ---------------------------------------------------------------------------
# radial monotonicity
# ---------------------------------------------------------------------------


def radial_monotonicity_check(obj, rtol: float = 1e-4) -> list[dict]:
    """Departures from symmetric decrease on half-lines sharing a vertex.

    ``obj`` is a SolveReport or a GraphFunction.  Reported are node-level
    differences between half-lines at the same anchor and increases
    along a half-line, both relative to the sup norm.
    """
    u = obj.best if isinstance(obj, SolveReport) else obj
    disc = u.disc
    g = disc.graph
    scale = max(u.sup(), 1e-300)
    out: list[dict] = []
    by_anchor: dict = {}
    for b in disc.halfline_branches:
        by_anchor.setdefault(g.halflines[b.index], []).append(b)
    for v, branches in by_anchor.items():
        if len(branches) < 2:
            continue
        ref = u.values[branches[0].nodes]
        for b in branches:
            vals = u.values[b.nodes]
            rise = np.diff(vals) / scale
            for k in np.flatnonzero(rise > rtol):
                out.append({"vertex": v, "halfline": b.label, "kind": "increase", "node": int(k + 1),
                            "magnitude": float(rise[k])})
            if b is not branches[0]:
                n = min(len(ref), len(vals))
                diff = np.abs(vals[:n] - ref[:n]) / scale
                for k in np.flatnonzero(diff > rtol):
                    out.append({"vertex": v, "halfline": b.label, "kind": "asymmetry", "node": int(k),
                                "magnitude": float(diff[k])})
    return out


# ---------------------------------------------------------------------------
# threshold search
# ---------------------------------------------------------------------------


@dataclass
class BisectionResult:
    mu_star: float
    lo: float
    hi: float
    exists_below: bool
    history: list[tuple[float, str, float]]

    @property
    def relative_width(self) -> float:
        return (self.hi - self.lo) / self.lo


def threshold_bisection(g: MetricGraph, params: NonlinearityParams, cfg: SolveConfig | None,
                        mu_lo: float, mu_hi: float, rel_width: float = 0.05) -> BisectionResult:
    """Bisect (geometrically) on mu between two masses with opposite verdicts.

    Only certification is trusted inside the bracket: a mass is on the
    existence side iff its verdict is ExistenceCertified.  This presumes a
    single transition, which holds on star graphs.
    """
    cfg = cfg or SolveConfig()
    if not 0 < mu_lo < mu_hi:
        raise ValueError("need 0 < mu_lo < mu_hi")

    def verdict(mu: float) -> tuple[str, float]:
        rep = minimize(g, params.with_mu(mu), cfg)
        return rep.verdict, rep.gap

    history = []
    v_lo, gap = verdict(mu_lo)
    history.append((mu_lo, v_lo, gap))
    v_hi, gap = verdict(mu_hi)
    history.append((mu_hi, v_hi, gap))
    if INCONCLUSIVE in (v_lo, v_hi) or v_lo == v_hi:
        raise ValueError(f"bracket ends must carry opposite decisive verdicts, got {v_lo} and {v_hi}")
    exists_below = v_lo == EXISTS
    lo, hi = mu_lo, mu_hi
    while (hi - lo) / lo >= rel_width:
        mid = math.sqrt(lo * hi)
        v, gap = verdict(mid)
        history.append((mid, v, gap))
        if (v == EXISTS) == exists_below:
            lo = mid
        else:
            hi = mid
    return BisectionResult(math.sqrt(lo * hi), lo, hi, exists_below, history)
