"""Command line interface: ``graphnls {solve,sweep,verify}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import analytic_line as al
from .analytic_line import NonlinearityParams
from .competitors import scale
from .discretize import Discretization, GraphFunction, GridSpec, evaluate, gn_ratios, project_mass
from .graph_model import FAMILIES, GraphError, load_graph, make_family, make_fig1, make_fig6_Gl, make_line
from .rearrange import decreasing_rearrangement, discrete_kinetic, symmetric_rearrangement
from .solver import INCONCLUSIVE, SolveConfig, minimize, threshold_bisection

SWEEP_COLUMNS = ("mu", "best_F", "soliton_level", "gap", "verdict", "core_mass_fraction", "iters")
EXIT_USAGE = 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _add_graph_args(ap: argparse.ArgumentParser) -> None:
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", type=Path, help="graph description file (JSON)")
    src.add_argument("--family", choices=FAMILIES, help="named graph family")
    ap.add_argument("--n", type=int, default=3, help="half-lines of the star family")
    ap.add_argument("--l", type=float, default=1.0, help="edge length of fig6/fig8")
    ap.add_argument("--k", type=int, default=3, help="bundle size of fig7/fig8")


def _add_problem_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--p", type=float, required=True)
    ap.add_argument("--q", type=float, default=3.0)
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--grid-h", type=float, help="absolute grid step (default: scaled to the soliton)")
    ap.add_argument("--halfline-trunc", type=float, help="absolute half-line truncation length")
    ap.add_argument("--seeds", type=int, default=2, help="number of random starts")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-iters", type=int, default=4000)
    ap.add_argument("--tol", type=float, default=1e-10)


@dataclass(frozen=True)
class SweepSpec:
    masses: tuple[float, ...]
    bisect: bool = False

    def __post_init__(self) -> None:
        if len(self.masses) < 2:
            raise UsageError("a sweep needs at least two masses")
        if any(not (m > 0 and math.isfinite(m)) for m in self.masses):
            raise UsageError("masses must be positive")


def _graph(args):
    if args.graph is not None:
        return load_graph(args.graph)
    return make_family(args.family, n=args.n, l=args.l, k=args.k)


def _config(args) -> SolveConfig:
    grid = None
    if args.grid_h is not None or args.halfline_trunc is not None:
        if args.grid_h is None or args.halfline_trunc is None:
            raise UsageError("--grid-h and --halfline-trunc must be given together")
        grid = GridSpec(args.grid_h, args.halfline_trunc)
    return SolveConfig(grid=grid, num_starts=args.seeds, seed=args.seed, max_iters=args.max_iters,
                       tol=args.tol)


def _params(args, mu: float) -> NonlinearityParams:
    return NonlinearityParams(args.p, args.q, args.tau, mu)


def _masses(args) -> tuple[float, ...]:
    if args.mass_min is None or args.mass_max is None:
        raise UsageError("--mass-min and --mass-max are required")
    if args.points < 2:
        raise UsageError("--points must be >= 2")
    if not (0 < args.mass_min < args.mass_max):
        raise UsageError("need 0 < --mass-min < --mass-max")
    if args.log:
        return tuple(np.logspace(np.log10(args.mass_min), np.log10(args.mass_max), args.points))
    return tuple(np.linspace(args.mass_min, args.mass_max, args.points))


def _pool_size(n: int) -> int:
    try:
        w = int(os.environ.get("GRAPHNLS_THREADS", "1"))
    except ValueError:
        w = 1
    return max(1, min(w, n))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(args) -> int:
    g = _graph(args)
    rep = minimize(g, _params(args, args.mass), _config(args))
    text = rep.to_json(args.out_report)
    if args.out_csv:
        rep.best.to_csv(args.out_csv)
    if not args.out_report:
        print(text)
    else:
        print(f"{rep.verdict} gap={rep.gap:.6g} best_F={rep.best_energy:.10g}")
    return 0


def sweep_rows(g, args, masses) -> list[dict]:
    cfg = _config(args)

    def row(mu: float) -> dict:
        try:
            rep = minimize(g, _params(args, mu), cfg)
            return {"mu": mu, "best_F": rep.best_energy, "soliton_level": rep.soliton_level,
                    "gap": rep.gap, "verdict": rep.verdict,
                    "core_mass_fraction": rep.diagnostics["core_mass_fraction"],
                    "iters": rep.diagnostics["iters"]}
        except Exception as exc:  # recorded per row, the sweep goes on
            print(f"mu={mu:g}: {exc}", file=sys.stderr)
            return {"mu": mu, "best_F": math.nan, "soliton_level": al.soliton_energy(args.p, mu),
                    "gap": math.nan, "verdict": INCONCLUSIVE, "core_mass_fraction": math.nan, "iters": 0}

    with ThreadPoolExecutor(max_workers=_pool_size(len(masses))) as pool:
        rows = list(pool.map(row, masses))
    return sorted(rows, key=lambda r: r["mu"])


def write_sweep_csv(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(r[k])) if isinstance(r[k], (float, np.floating)) else r[k]) for k in SWEEP_COLUMNS})


def cmd_sweep(args) -> int:
    g = _graph(args)
    if args.bisect:
        if args.mass_min is None or args.mass_max is None:
            raise UsageError("--mass-min and --mass-max are required")
        res = threshold_bisection(g, _params(args, args.mass_min), _config(args), args.mass_min, args.mass_max)
        out = {"mu_star": res.mu_star, "lo": res.lo, "hi": res.hi,
               "relative_width": res.relative_width, "exists_below": res.exists_below,
               "history": [{"mu": m, "verdict": v, "gap": gp} for m, v, gp in res.history]}
        text = json.dumps(out, indent=2)
        if args.out_report:
            Path(args.out_report).write_text(text, encoding="utf-8")
        print(text)
        return 0
    spec = SweepSpec(_masses(args))
    rows = sweep_rows(g, args, spec.masses)
    if args.out_csv:
        with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return 0


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------


Check = tuple[str, bool, str]


def suite_appendixA() -> list[Check]:
    out = []
    for p in (2.5, 3.0, 4.0, 5.0, 5.5):
        r = al.verify_identity_appendixA(p)
        out.append((f"identity p={p}", r < 1e-8, f"residual={r:.3e}"))
    for name, got, want in (("omega1", al.soliton_frequency(4.0), 1 / 16),
                            ("phi1(0)", al.phi1_at_0(4.0), 8**-0.5),
                            ("theta4", al.theta(4.0), 1 / 96)):
        out.append((f"p=4 {name}", abs(got - want) < 1e-10, f"{got!r} vs {want!r}"))
    return out


def random_pl_function(disc: Discretization, rng: np.random.Generator, mu: float = 2.0) -> GraphFunction:
    x = rng.random(disc.size) + 0.1
    x[~disc.free] = 0.0
    return project_mass(GraphFunction(disc, x), mu)


def suite_scaling(ps: tuple[float, ...] = (3.0, 4.0, 5.0), trials: int = 20) -> list[Check]:
    rng = np.random.default_rng(12345)
    out = []
    for g in (make_fig1(), make_fig6_Gl(2.0)):
        disc = Discretization(g, GridSpec(0.1, 4.0))
        funcs = [random_pl_function(disc, rng) for _ in range(trials)]
        for p in ps:
            P = NonlinearityParams(p, 3.0, 0.0, 1.0)
            b = 2 * al.exponents(p)[1] + 1
            worst_m = worst_e = 0.0
            for u in funcs:
                e0 = evaluate(u, P)
                for t in (0.5, 2.0):
                    _, ut = scale(g, u, t, p)
                    et = evaluate(ut, P)
                    worst_m = max(worst_m, abs(et.mass / (t * e0.mass) - 1))
                    worst_e = max(worst_e, abs((et.E / et.mass**b) / (e0.E / e0.mass**b) - 1))
            out.append((f"{g.name} p={p} mass scales by t", worst_m < 1e-10, f"max rel err {worst_m:.2e}"))
            out.append((f"{g.name} p={p} E/mass^(2b+1) invariant", worst_e < 1e-8, f"max rel err {worst_e:.2e}"))
    return out


def suite_gn() -> list[Check]:
    disc = Discretization(make_line(), GridSpec(0.01, 60.0))
    u = disc.sample(halfline_fn=lambda i, s: al.soliton_eval(4.0, 1.0, s))
    rp, ri = gn_ratios(u, 4.0)
    rp2, ri2 = gn_ratios(3.0 * u, 4.0)
    out = [("soliton ratios finite", 0 < rp < math.inf and 0 < ri < math.inf, f"r_p={rp:.6g} r_inf={ri:.6g}"),
           ("r_inf homogeneous", abs(ri2 / ri - 1) < 1e-12, f"{ri2:.12g}"),
           ("r_p homogeneous", abs(rp2 / rp - 1) < 1e-12, f"{rp2:.12g}")]
    try:
        gn_ratios(disc.zeros(), 4.0)
        out.append(("zero function rejected", False, "no error"))
    except ValueError:
        out.append(("zero function rejected", True, ""))
    return out


def suite_rearrange(trials: int = 100) -> list[Check]:
    rng = np.random.default_rng(7)
    multiset = kinetic = True
    for _ in range(trials):
        x = rng.random(int(rng.integers(2, 400)))
        d = decreasing_rearrangement(x)
        multiset &= bool(np.array_equal(np.sort(d), np.sort(x)))
        kinetic &= discrete_kinetic(d) <= discrete_kinetic(x) + 1e-15
        y = np.concatenate([[0.0], x, [0.0]])
        s = symmetric_rearrangement(y)
        multiset &= bool(np.array_equal(np.sort(s), np.sort(y)))
        kinetic &= discrete_kinetic(s) <= discrete_kinetic(y) + 1e-15
    return [("equimeasurability (multisets)", multiset, f"{trials} inputs"),
            ("kinetic non-increase", kinetic, f"{trials} inputs")]


def suite_line_oracle() -> list[Check]:
    P = NonlinearityParams(4.0, 3.0, 0.0, 1.0)
    rep = minimize(make_line(), P, SolveConfig(grid=GridSpec(0.01, 40.0), start_kinds=("vertex",)))
    rel = abs(rep.best_energy * 96 + 1)
    return [("line minimum vs -1/96", rel < 5e-3, f"rel err {rel:.2e}")]


SUITES: dict[str, Callable[[], list[Check]]] = {
    "appendixA": suite_appendixA,
    "scaling": suite_scaling,
    "gn": suite_gn,
    "rearrange": suite_rearrange,
    "line-oracle": suite_line_oracle,
}


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    checks = SUITES[args.suite]()
    failed = [c for c in checks if not c[1]]
    print(json.dumps({"suite": args.suite, "passed": len(checks) - len(failed), "failed": len(failed),
                      "checks": [{"name": n, "ok": ok, "detail": d} for n, ok, d in checks]}, indent=2))
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphnls", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="minimise F at one mass")
    _add_graph_args(s)
    _add_problem_args(s)
    s.add_argument("--mass", type=float, required=True)
    s.add_argument("--out-report", type=Path)
    s.add_argument("--out-csv", type=Path)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="verdicts over a mass grid, or a threshold bisection")
    _add_graph_args(w)
    _add_problem_args(w)
    w.add_argument("--mass-min", type=float)
    w.add_argument("--mass-max", type=float)
    w.add_argument("--points", type=int, default=9)
    w.add_argument("--log", action="store_true", help="logarithmic mass grid")
    w.add_argument("--bisect", action="store_true", help="bisect for the threshold mass instead")
    w.add_argument("--out-report", type=Path)
    w.add_argument("--out-csv", type=Path)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("suite", help=" | ".join(SUITES))
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, GraphError, OSError, ValueError) as exc:
        print(f"graphnls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
