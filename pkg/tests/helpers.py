"""Shared test inputs."""

import numpy as np

from graphnls.analytic_line import NonlinearityParams, soliton_eval
from graphnls.competitors import plateau_soliton
from graphnls.discretize import Discretization, GraphFunction, GridSpec, project_mass
from graphnls.graph_model import make_fig1, make_fig6_Gl, make_star

P_REARRANGE = NonlinearityParams(4.0, 2.5, 1.0, 1.0)


def bumps(g, rng, off_core=False, h=0.02, L=12.0, mu=1.0):
    """Positive smooth test function: a few Gaussian bumps plus a vertex-centred tail."""
    d = Discretization(g, GridSpec(h, L))
    x = np.zeros(d.size)
    pool = np.flatnonzero(d.free & (d.node_branch >= len(g.edges))) if off_core else np.flatnonzero(d.free)
    for c in rng.choice(pool, rng.integers(1, 4)):
        r = d.distances_from([c])
        x += rng.uniform(0.5, 2.0) * np.exp(-(r * rng.uniform(0.5, 2.0)) ** 2)
    x += 0.2 * np.exp(-0.5 * d.vertex_distance)
    x[~d.free] = 0.0
    return project_mass(GraphFunction(d, x), mu)


def star3_inputs():
    rng = np.random.default_rng(2024)
    out = [("fig1-plateau", plateau_soliton(make_fig1(), P_REARRANGE.with_mu(1.0), GridSpec(0.02, 12.0)).function)]
    for g in (make_fig1(), make_fig6_Gl(1.0), make_fig6_Gl(2.0), make_fig6_Gl(4.0), make_star(3), make_star(4)):
        out.append((f"{g.name}-a", bumps(g, rng)))
    out.append(("fig1-offcore", bumps(make_fig1(), rng, off_core=True)))
    out.append(("fig6-offcore", bumps(make_fig6_Gl(0.5), rng, off_core=True)))
    d = Discretization(make_star(3), GridSpec(0.02, 12.0))
    out.append(("star3-radial", d.sample(halfline_fn=lambda k, s: soliton_eval(4.0, 2 / 3, s))))
    return out


def split_inputs():
    rng = np.random.default_rng(7)
    out = []
    for g in (make_fig1(), make_fig6_Gl(1.0), make_fig6_Gl(0.3)):
        for k in range(3):
            out.append((f"{g.name}-{k}", bumps(g, rng, off_core=True)))
    return out
