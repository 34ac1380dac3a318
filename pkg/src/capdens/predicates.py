"""Geometric and capacitary predicates on node sets.

Clearance fields, interior corkscrew profiles, certified John constants,
inner approximation of capacity, beta-neighborhoods and stability probes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import SolverConfig, variational_capacity
from .errors import BallOutOfBoxError, EmptySourceError, InadmissibleCondenserError, InputError
from .space import (
    AMBIENT,
    INNER,
    NodeSet,
    ball_nodes,
    diameter,
    distance_field,
    eps_interior,
    inner_distance_field,
)


def clearance_field(graph, U, metric=AMBIENT):
    """``delta_U``: distance from each node to the node-complement of ``U``.

    Nodes outside ``U`` get 0; if ``U`` is every node the clearance is infinite.
    """
    graph.check_same(U.graph)
    if U.is_empty:
        raise EmptySourceError("clearance needs a nonempty set")
    comp = ~U
    if comp.is_empty:
        return np.full(graph.num_nodes, np.inf)
    d = distance_field(graph, comp, metric)
    d[comp.mask] = 0.0
    return d


# ---------------------------------------------------------------------------
# Corkscrew
# ---------------------------------------------------------------------------


@dataclass
class CorkscrewProfile:
    samples: list  # (x node, r, kappa, witness y node)
    kappa_min: float
    worst: tuple | None

    @property
    def kappas(self):
        return np.array([s[2] for s in self.samples])


def radius_ladder(r_min, r_max, factor=math.sqrt(2)):
    if not 0 < r_min <= r_max:
        raise InputError("need 0 < r_min <= r_max")
    out, r = [], r_min
    while r <= r_max * (1 + 1e-12):
        out.append(r)
        r *= factor
    return out


def _sub_lattice(graph, U, stride):
    step = max(1, int(round(stride / graph.h)))
    on = np.all(graph.lattice % step == 0, axis=1)
    return list(np.flatnonzero(U.mask & on))


def corkscrew_profile(graph, U, x_samples=None, radii=None, metric=AMBIENT,
                      stride=None, r_range=None, factor=math.sqrt(2)) -> CorkscrewProfile:
    """``kappa(x, r) = max_y min(delta_U(y), r - d(x, y)) / r`` over sampled pairs.

    The maximum runs over nodes ``y`` of ``U`` with ``d(x, y) < r``; a ball
    ``B(y, kappa r)`` inside ``U & B(x, r)`` exists exactly when the inner
    expression reaches ``kappa r``. Samples default to a sub-lattice of ``U``
    with spacing ``2h`` and radii to a geometric ladder over ``r_range``.
    """
    graph.check_same(U.graph)
    if radii is None:
        if r_range is None:
            raise InputError("give either radii or r_range")
        radii = radius_ladder(*r_range, factor=factor)
    radii = sorted(float(r) for r in radii)
    if x_samples is None:
        x_samples = _sub_lattice(graph, U, stride or 2 * graph.h)
    xs = [graph.resolve_node(x) for x in x_samples]
    if not xs:
        raise InputError("corkscrew profile needs at least one sample point")
    if any(not U.mask[x] for x in xs):
        raise InputError("corkscrew samples must lie in U")
    delta = clearance_field(graph, U, metric)
    r_top = radii[-1]
    samples = []
    for x in xs:
        if metric == INNER:
            d = inner_distance_field(graph, [x], limit=r_top)
        else:
            d = np.linalg.norm(graph.coords - graph.coords[x], axis=1)
        near = np.flatnonzero(U.mask & (d < r_top))
        dn, cl = d[near], delta[near]
        for r in radii:
            inside = dn < r
            score = np.minimum(cl[inside], r - dn[inside])
            k = int(np.argmax(score))
            kappa = float(np.clip(score[k] / r, 0.0, 1.0))
            samples.append((int(x), r, kappa, int(near[inside][k])))
    worst = min(samples, key=lambda s: (s[2], s[0], s[1]))
    return CorkscrewProfile(samples, worst[2], worst)


# ---------------------------------------------------------------------------
# John constants
# ---------------------------------------------------------------------------


@dataclass
class JohnEstimate:
    center: int
    c: np.ndarray  # certified per-node constants, nan outside U
    c_min: float
    argmin: int
    path: list  # certificate for the argmin, from argmin to center
    unreachable: np.ndarray
    _preds: dict = field(default_factory=dict, repr=False)
    _level: np.ndarray | None = field(default=None, repr=False)

    def path_from(self, x):
        """Stored certificate path from node ``x`` to the John center."""
        x = int(x)
        if self.unreachable[x]:
            return []
        if x == self.center:
            return [x]
        pred = self._preds[int(self._level[x])]
        out = [x]
        while out[-1] != self.center:
            out.append(int(pred[out[-1]]))
        return out


def path_john_constant(graph, path, delta):
    """``min_y delta(y) / l(path from x to y)`` along an explicit node path."""
    if len(path) <= 1:
        return 1.0
    pts = graph.coords[path]
    ell = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return float(np.min(delta[path[1:]] / ell[1:]))


def _john_sweep(adj, allowed, a, center):
    """Largest admissible length budget ``g`` for a fixed John constant.

    ``g(y)`` is the largest length already travelled on arrival at ``y`` from
    which the center can still be reached with ``l <= a(z)`` at every later
    node ``z``. Labels only decrease along edges, so a best-first sweep from
    the center settles each node once.
    """
    indptr, indices, data = adj.indptr.tolist(), adj.indices.tolist(), adj.data.tolist()
    n = len(a)
    g_l = [-math.inf] * n
    pred_l = [-1] * n
    done = [False] * n
    a_l = a.tolist()
    allowed_l = allowed.tolist()
    g_l[center] = a_l[center]
    heap = [(-a_l[center], center)]
    while heap:
        neg, y = heapq.heappop(heap)
        if done[y]:
            continue
        done[y] = True
        gy = -neg
        for k in range(indptr[y], indptr[y + 1]):
            z = indices[k]
            if done[z] or not allowed_l[z]:
                continue
            cand = min(a_l[z], gy - data[k])
            if cand < 0:
                continue
            if cand > g_l[z]:
                g_l[z] = cand
                pred_l[z] = y
                heapq.heappush(heap, (-cand, z))
            elif cand == g_l[z] and y < pred_l[z]:
                pred_l[z] = y
    return np.array(g_l), np.array(pred_l, dtype=np.int64)


def _exact_tree_values(graph, pred, center, delta, nodes):
    """Exact John constant of each tree path in ``nodes`` (vectorized walk)."""
    nodes = np.asarray(nodes, dtype=np.int64)
    vals = np.full(len(nodes), np.inf)
    ell = np.zeros(len(nodes))
    prev = nodes.copy()
    cur = pred[nodes]
    active = nodes != center
    while active.any():
        idx = np.flatnonzero(active)
        step = np.linalg.norm(graph.coords[cur[idx]] - graph.coords[prev[idx]], axis=1)
        ell[idx] += step
        vals[idx] = np.minimum(vals[idx], delta[cur[idx]] / ell[idx])
        active[idx] = cur[idx] != center
        prev[idx] = cur[idx]
        nxt = cur.copy()
        nxt[idx] = pred[cur[idx]]
        cur = nxt
    vals[nodes == center] = 1.0
    return vals


def john_lower_bound(graph, U, center, resolution=1e-3, levels=(0.25, 0.5, 0.75)) -> JohnEstimate:
    """Certified lower bounds for the John constant of ``U`` toward ``center``.

    For a trial constant ``c`` one sweep decides, for every node at once,
    whether some discrete path inside ``U`` satisfies
    ``c l(gamma(x, y)) <= delta_U(y)``. A bisection on ``c`` locates the
    overall constant to ``resolution``; each node reports the exact constant
    of the stored path from the highest level at which it was connected.
    Paths run over the inner-metric stencil restricted to ``U``.
    """
    graph.check_same(U.graph)
    center = graph.resolve_node(center)
    if not U.mask[center]:
        raise InputError("John center must lie in U")
    delta = clearance_field(graph, U, AMBIENT)
    adj = graph.inner_adjacency
    allowed = U.mask

    # nodes reachable at all inside U
    reach = np.isfinite(inner_distance_field(graph, [center], within=U))
    targets = np.flatnonzero(allowed & reach)
    unreachable = allowed & ~reach

    best = np.full(graph.num_nodes, -1, dtype=np.int64)
    best_c = np.full(graph.num_nodes, -1.0)
    preds = {}

    def run(c):
        key = len(preds)
        g, preds[key] = _john_sweep(adj, allowed, delta / c, center)
        ok = g >= 0
        up = ok & (best_c < c)
        best[up], best_c[up] = key, c
        return bool(np.all(ok[targets]))

    # coarse levels, then bisection on the overall constant; every sweep is kept
    lo, hi = 0.0, None
    for c in sorted(set(levels) | {1.0}):
        if run(c):
            lo = c
        else:
            hi = c
            break
    if hi is not None:
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if run(mid):
                lo = mid
            else:
                hi = mid

    c = np.full(graph.num_nodes, np.nan)
    c[unreachable] = 0.0
    have = targets[best[targets] >= 0]
    for key in np.unique(best[have]):
        sel = have[best[have] == key]
        c[sel] = _exact_tree_values(graph, preds[int(key)], center, delta, sel)
    c[targets[best[targets] < 0]] = 0.0
    c[center] = 1.0
    if unreachable.any():
        argmin = int(np.flatnonzero(unreachable)[0])
    else:
        argmin = int(targets[int(np.argmin(c[targets]))])
    est = JohnEstimate(center, c, float(c[argmin]), argmin, [], unreachable, preds, best)
    if best[argmin] >= 0 or argmin == center:
        est.path = est.path_from(argmin)
    return est


# ---------------------------------------------------------------------------
# Inner approximation, beta-neighborhoods, stability
# ---------------------------------------------------------------------------


@dataclass
class StabilityProbe:
    rows: list  # (rho, R, ratio, phi, flag)
    tau: float | None = None
    gamma: float | None = None
    coverage: int = 0

    @property
    def ratios(self):
        return np.array([row[2] for row in self.rows])

    @property
    def phis(self):
        return np.array([row[3] for row in self.rows])

    def table(self, rho):
        return [(R, ratio, phi) for (r, R, ratio, phi, _) in self.rows if r == rho]


def inner_approx_curve(graph, U, omega, rhos, solver=None, metric=AMBIENT, R=math.nan) -> StabilityProbe:
    """``cap(U_rho, omega) / cap(U, omega)`` for each ``rho``."""
    solver = solver or SolverConfig()
    graph.check_same(U.graph)
    if not U <= omega:
        raise InadmissibleCondenserError("U is not contained in Omega")
    base = variational_capacity(graph, U, omega, solver).value
    rows = []
    for rho in rhos:
        inner = eps_interior(graph, U, rho, metric)
        if inner.is_empty:
            rows.append((float(rho), R, 0.0, 1.0, "empty-interior"))
            continue
        if rho == 0:
            ratio = 1.0
        else:
            ratio = variational_capacity(graph, inner, omega, solver).value / base
        rows.append((float(rho), R, ratio, 1.0 - ratio, ""))
    return StabilityProbe(rows)


def neighborhood_set(graph, U, beta) -> NodeSet:
    """``U^beta``: nodes within inner distance ``beta * diam(U)`` of ``U``."""
    graph.check_same(U.graph)
    if not beta > 0:
        raise InputError("beta must be positive")
    if U.is_empty:
        return U
    reach = beta * diameter(graph, U, AMBIENT)
    if reach == 0:
        return U
    d = inner_distance_field(graph, U, limit=reach)
    return NodeSet(graph, U.mask | (d < reach))


COLLECTIONS = ("balls", "inner-balls", "beta")


def collection_member(graph, kind, center, R, beta=0.5, gamma=1.0):
    """``(U, r_B)``: a member of the named collection and the radius of ``B_U``.

    ``balls``: ``U = B(x, R)``, ``B_U = U``. ``inner-balls``: ``U = B_in(x, R)``
    with ``B_U = B(x, R / gamma)`` (needs ``gamma >= L``). ``beta``:
    ``U = B(x, R)^beta`` with ``B_U = B(x, R)``.
    """
    if kind == "balls":
        return ball_nodes(graph, center, R, AMBIENT), R
    if kind == "inner-balls":
        return ball_nodes(graph, center, R, INNER), R / gamma
    if kind == "beta":
        return neighborhood_set(graph, ball_nodes(graph, center, R, AMBIENT), beta), R
    raise InputError(f"collection must be one of {COLLECTIONS}")


def stability_probe(graph, kind, center, radii, rhos, tau=2.0, gamma=1.0, beta=0.5,
                    solver=None, metric=AMBIENT) -> StabilityProbe:
    """Measured ``phi(rho, R) = 1 - cap(U_rho, U*) / cap(U, U*)``.

    One member per radius ``R``, centred at ``center``; ``U* = tau gamma B_U``.
    """
    solver = solver or SolverConfig()
    if not tau > 1 or not gamma >= 1:
        raise InputError("need tau > 1 and gamma >= 1")
    radii = [float(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("radii must be strictly increasing")
    rows = []
    for R in radii:
        U, r_B = collection_member(graph, kind, center, R, beta, gamma)
        c = graph.coords[graph.resolve_node(center)] if isinstance(center, (int, np.integer)) else np.asarray(center, float)
        outer_r = tau * gamma * r_B
        if np.any(c - outer_r < graph.box[:, 0] + graph.h - 1e-12) or np.any(c + outer_r > graph.box[:, 1] - graph.h + 1e-12):
            raise BallOutOfBoxError(f"U* of radius {outer_r:g} leaves the box")
        U_star = ball_nodes(graph, center, outer_r, AMBIENT) | U
        part = inner_approx_curve(graph, U, U_star, rhos, solver, metric, R=R)
        rows.extend(part.rows)
    rows.sort(key=lambda row: (row[0], row[1]))
    return StabilityProbe(rows, tau, gamma, coverage=len(radii))
