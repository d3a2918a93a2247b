"""Rearrangements of sampled functions and of graph functions onto stars.

Sample-level operations act on equally weighted samples, so they are
permutations and preserve every discrete norm exactly.

Graph-level operations use the exact distribution function of the
piecewise-linear interpolant (it is itself piecewise linear in the level
and is assembled by a sweep over segments).  Its generalized inverse is
the decreasing rearrangement, which is then sampled on a uniform grid.
A final monotone correction restores the discrete mass exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .analytic_line import NonlinearityParams
from .discretize import Discretization, GraphFunction, GridSpec, evaluate, evaluate_halflines
from .graph_model import check_assumption_H, make_star


class RearrangementWarning(UserWarning):
    """A discrete precondition of a rearrangement inequality failed."""


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Distribution of a piecewise-linear function.

    ``levels`` ascend; ``measure_above[k]`` is |{u > levels[k]}| and
    ``jump[k]`` the measure of the set where u equals ``levels[k]``.
    """

    levels: np.ndarray
    measure_above: np.ndarray
    jump: np.ndarray
    total: float

    def rearranged(self, s) -> np.ndarray:
        """Decreasing rearrangement u*(s) for s in [0, total]."""
        # points (|{u > t}|, t) and (|{u >= t}|, t), ordered by measure
        x = np.empty(2 * len(self.levels))
        y = np.empty_like(x)
        x[0::2] = self.measure_above[::-1]
        x[1::2] = (self.measure_above + self.jump)[::-1]
        y[0::2] = self.levels[::-1]
        y[1::2] = self.levels[::-1]
        return np.interp(np.asarray(s, dtype=float), x, y)

    def measure_of_superlevel(self, t: float) -> float:
        """|{u > t}|; linear between levels, with the flat part of the upper level counted."""
        lv = self.levels
        if t < lv[0]:
            return self.total
        k = int(np.searchsorted(lv, t, side="right")) - 1
        if lv[k] == t or k == len(lv) - 1:
            return float(self.measure_above[k])
        right = self.measure_above[k + 1] + self.jump[k + 1]
        w = (t - lv[k]) / (lv[k + 1] - lv[k])
        return float((1 - w) * self.measure_above[k] + w * right)


def distribution(a: np.ndarray, b: np.ndarray, h: np.ndarray) -> Profile:
    """Distribution function of the P1 function with segment end values (a, b)."""
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    levels = np.unique(np.concatenate([lo, hi]))
    K = len(levels)
    flat = hi == lo
    slope = np.zeros(K)
    sl = ~flat
    # on (lo, hi) the superlevel measure decreases at rate h / (hi - lo)
    rate = h[sl] / (hi[sl] - lo[sl])
    i0 = np.searchsorted(levels, lo[sl])
    i1 = np.searchsorted(levels, hi[sl])
    np.add.at(slope, i0, rate)
    np.add.at(slope, i1, -rate)
    slope = np.cumsum(slope)  # valid on (levels[k], levels[k+1])
    jump = np.zeros(K)
    np.add.at(jump, np.searchsorted(levels, lo[flat]), h[flat])
    inc = jump[1:] + slope[:-1] * np.diff(levels)
    above = np.zeros(K)
    above[:-1] = np.cumsum(inc[::-1])[::-1]
    return Profile(levels, above, jump, float(np.sum(h)))


# ---------------------------------------------------------------------------
# sample level
# ---------------------------------------------------------------------------


def _samples(u) -> np.ndarray:
    x = np.asarray(u, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot rearrange an empty sample")
    return x


def decreasing_rearrangement(u) -> np.ndarray:
    """Non-increasing reordering of equally weighted samples."""
    return np.sort(_samples(u))[::-1].copy()


def attained_twice(u) -> bool:
    """Whether generic levels below the maximum are crossed at least twice.

    Levels are tested halfway between consecutive distinct sample values
    for the piecewise-linear interpolant.
    """
    x = _samples(u)
    vals = np.unique(x)
    if vals.size < 2:
        return True
    mids = 0.5 * (vals[1:] + vals[:-1])
    lo = np.minimum(x[:-1], x[1:])
    hi = np.maximum(x[:-1], x[1:])
    starts = np.searchsorted(np.sort(lo), mids, side="left")
    ends = np.searchsorted(np.sort(hi), mids, side="left")
    crossings = starts - ends  # segments with lo < t < hi
    return bool(np.all(crossings >= 2))


def symmetric_rearrangement(u, warn: bool = True) -> np.ndarray:
    """Even, unimodal reordering centred on the middle sample.

    Kinetic non-increase needs every level below the maximum to be hit at
    least twice; a RearrangementWarning is issued when it is not.
    """
    x = _samples(u)
    n = x.size
    if warn and not attained_twice(x):
        warnings.warn("some levels are attained only once; kinetic energy may grow",
                      RearrangementWarning, stacklevel=2)
    c = (n - 1) / 2.0
    idx = np.arange(n)
    order = np.lexsort((idx, np.abs(idx - c)))
    out = np.empty(n)
    out[order] = np.sort(x)[::-1]
    return out


def discrete_kinetic(u, h: float = 1.0) -> float:
    x = np.asarray(u, dtype=float)
    return 0.5 * float(np.sum(np.diff(x) ** 2)) / h


def discrete_norm(u, r: float, h: float = 1.0) -> float:
    x = np.abs(np.asarray(u, dtype=float))
    if math.isinf(r):
        return float(np.max(x))
    return (h * math.fsum(x**r)) ** (1.0 / r)


# ---------------------------------------------------------------------------
# graph level
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HalfLineProfile:
    """Samples on [0, (n-1) h] of a function on the half-line."""

    values: np.ndarray
    h: float

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.values.size, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    @property
    def mass(self) -> float:
        return float(self.weights @ self.values**2)

    def energy(self, p: float) -> float:
        kin = 0.5 * float(np.sum(np.diff(self.values) ** 2)) / self.h
        return kin - float(self.weights @ np.abs(self.values) ** p) / p


@dataclass
class StarRearrangement:
    function: GraphFunction
    m: float
    E_in: float
    E_out: float
    checks: dict = field(default_factory=dict)


@dataclass
class SplitRearrangement:
    u1: HalfLineProfile
    u2: HalfLineProfile
    m: float
    M: float
    degenerate: bool
    mass_in: float
    E_in: float
    checks: dict = field(default_factory=dict)


def _segments(u: GraphFunction, halflines_only: bool):
    d = u.disc
    mask = d.seg_is_halfline if halflines_only else np.ones(d.seg_h.size, bool)
    x = u.values
    return x[d.seg_i[mask]], x[d.seg_j[mask]], d.seg_h[mask]


def _anchor_min(u: GraphFunction) -> float:
    return min(u.vertex_value(v) for v in u.graph.anchors)


def _check_positive(u: GraphFunction) -> None:
    if np.any(u.values < 0) or np.any(u.vertex_values <= 0):
        raise PreconditionError("rearrangements need u >= 0 with positive vertex values")


def _fix_mass(parts: list[np.ndarray], weights: list[np.ndarray], m: float, target: float) -> None:
    """Map values below m by y -> m (y/m)^gamma so the weighted mass hits target."""
    if m <= 0:
        return
    masks = [v < m for v in parts]

    def mass(gamma: float) -> float:
        tot = 0.0
        for v, w, k in zip(parts, weights, masks):
            y = np.where(k, m * (np.clip(v, 0, m) / m) ** gamma, v)
            tot += float(w @ y**2)
        return tot - target

    if mass(1.0) == 0.0:
        return
    lo, hi = 0.5, 2.0
    while mass(lo) < 0:
        lo *= 0.5
    while mass(hi) > 0:
        hi *= 2.0
    gamma = optimize.brentq(mass, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    for v, k in zip(parts, masks):
        v[k] = m * (np.clip(v[k], 0, m) / m) ** gamma


def rearrange_to_star3(u: GraphFunction, params: NonlinearityParams, slack: float | None = None) -> StarRearrangement:
    """Move ``u`` to the 3-star without raising E, pinning the centre at min over V+ of u.

    Values above m = min_{V+} u are rearranged symmetrically onto an
    interval at the start of the first half-line; the values below m are
    rearranged radially on all three half-lines behind it.
    """
    g = u.graph
    if g.n_halflines < 3:
        raise PreconditionError("need at least three half-lines")
    if not check_assumption_H(g):
        raise PreconditionError("graph does not satisfy Assumption (H)")
    _check_positive(u)
    m = _anchor_min(u)
    prof = distribution(*_segments(u, halflines_only=False))
    J = prof.measure_of_superlevel(m)
    rest = prof.total - J
    h = float(np.min(u.disc.seg_h))
    L = J + rest / 3.0
    n = max(10, math.ceil(L / h))
    h = L / n
    disc = Discretization(make_star(3), GridSpec(h, L), [n, n, n])
    s = np.linspace(0.0, L, n + 1)
    first = np.where(s <= J, prof.rearranged(np.abs(2.0 * s - J)), prof.rearranged(J + 3.0 * (s - J)))
    other = prof.rearranged(J + 3.0 * s)
    vals = np.zeros(disc.size)
    b0, b1, b2 = disc.halfline_branches
    vals[b0.nodes] = first
    vals[b1.nodes] = other
    vals[b2.nodes] = other
    vals[0] = m
    vals[~disc.free] = 0.0
    parts = [vals]
    _fix_mass(parts, [disc.weights], m, u.mass)
    vals[0] = m
    out = GraphFunction(disc, vals)
    E_in = evaluate(u, params).E
    E_out = evaluate(out, params).E
    slack = 1e-6 * abs(E_in) if slack is None else slack
    checks = {
        "energy_not_increased": E_out <= E_in + slack,
        "center_value_exact": out.vertex_value("0") == m,
        "mass_preserved": abs(out.mass - u.mass) <= 1e-10 * u.mass,
        "shape": _star_shape_ok(out),
    }
    return StarRearrangement(out, m, E_in, E_out, checks)


def _nonincreasing(x: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.diff(x) <= tol * max(1.0, float(np.max(np.abs(x))))))


def _unimodal(x: np.ndarray, tol: float = 1e-12) -> bool:
    k = int(np.argmax(x))
    t = tol * max(1.0, float(np.max(np.abs(x))))
    return bool(np.all(np.diff(x[: k + 1]) >= -t) and np.all(np.diff(x[k:]) <= t))


def _star_shape_ok(u: GraphFunction) -> bool:
    b0, b1, b2 = u.disc.halfline_branches
    h1, h2 = u.values[b1.nodes], u.values[b2.nodes]
    return bool(np.array_equal(h1, h2) and _nonincreasing(h1) and _unimodal(u.values[b0.nodes]))


def split_halfline_rearrangement(u: GraphFunction, params: NonlinearityParams,
                                 slack: float | None = None) -> SplitRearrangement:
    """Two half-line profiles carrying the mass and energy of u off the core.

    u1 takes a third of the measure of {u <= m} and is non-increasing; u2
    rises through the symmetric rearrangement of {u > M}, then follows the
    values in (m, M] and finally a copy of u1.  Here m = min over V+ and
    M = max of u on the core.  On graphs without bounded edges, u2 = 0 and
    u1 rearranges everything with half the measure.
    """
    g = u.graph
    if g.n_halflines < 3:
        raise PreconditionError("need at least three half-lines")
    _check_positive(u)
    d = u.disc
    m = _anchor_min(u)
    prof = distribution(*_segments(u, halflines_only=True))
    h = float(np.min(d.seg_h))
    mass_in = float(d.halfline_weights @ u.values**2)
    E_in = evaluate_halflines(u, params).E
    degenerate = len(g.edges) == 0
    if degenerate:
        M = 0.0
        L = prof.total / 2.0
        n = max(10, math.ceil(L / h))
        s = np.linspace(0.0, L, n + 1)
        u1 = prof.rearranged(2.0 * s)
        u1[-1] = 0.0
        hh = L / n
        w = np.full(n + 1, hh)
        w[0] = w[-1] = hh / 2
        _fix_mass([u1], [2 * w], float(u1[0]), mass_in)
        P1 = HalfLineProfile(u1, hh)
        P2 = HalfLineProfile(np.zeros(2), hh)
    else:
        core_nodes = np.unique(np.concatenate([b.nodes for b in d.edge_branches]))
        M = float(np.max(u.values[core_nodes]))
        if not M < float(np.max(u.values)):
            raise PreconditionError("the sup of u must be attained off the compact core only")
        J1 = prof.measure_of_superlevel(M)
        Jm = prof.measure_of_superlevel(m)
        rest = prof.total - Jm
        L1 = rest / 3.0
        L2 = Jm + L1
        n = max(10, math.ceil(L2 / h))
        hh = L2 / n
        s = np.linspace(0.0, L2, n + 1)
        # u2 = [symmetric part of {u > M}] ++ [decreasing part of {m < u <= M}] ++ [u1]
        u2 = np.where(s < J1, prof.rearranged(np.abs(2.0 * s - J1)),
                      np.where(s < Jm, prof.rearranged(s), prof.rearranged(Jm + 3.0 * (s - Jm))))
        n1 = max(10, math.ceil(L1 / hh)) if L1 > 0 else 10
        s1 = np.linspace(0.0, max(L1, hh), n1 + 1)
        u1 = prof.rearranged(Jm + 3.0 * s1)
        u1[-1] = u2[-1] = 0.0
        u2[0] = M
        u1[0] = m
        h1 = s1[1] - s1[0]
        w1 = np.full(n1 + 1, h1)
        w1[0] = w1[-1] = h1 / 2
        w2 = np.full(n + 1, hh)
        w2[0] = w2[-1] = hh / 2
        _fix_mass([u1, u2], [2 * w1, w2], m, mass_in)
        P1 = HalfLineProfile(u1, h1)
        P2 = HalfLineProfile(u2, hh)
    slack = 1e-6 * abs(E_in) if slack is None else slack
    E_out = 2 * P1.energy(params.p) + P2.energy(params.p)
    checks = {
        "mass_identity": abs(2 * P1.mass + P2.mass - mass_in) <= 1e-10 * mass_in,
        "energy_not_increased": E_out <= E_in + slack,
        "u1_at_0": bool(P1.values[0] == m),
        "u2_at_0": P2.values[0] == M,
        "u1_decreasing": _nonincreasing(P1.values),
        "u2_unimodal": _unimodal(P2.values),
    }
    return SplitRearrangement(P1, P2, m, M, degenerate, mass_in, E_in, checks | {"E_out": E_out})
