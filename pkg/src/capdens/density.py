"""Lower capacity densities evaluated as minima over sampled centers.

For a center ``x`` the density term is

    cap(E & B(x, r), B(x, tau r)) / cap(B(x, r), B(x, tau r))

with balls taken in the ambient or the inner metric. The true densities are
infima over every point of the space; a scan only sees its sampled centers, so
every reported minimum is an upper bound for the infimum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .capacity import SolverConfig, sobolev_capacity, variational_capacity
from .errors import BallOutOfBoxError, InputError, InvalidCollectionMemberError
from .space import AMBIENT, METRICS, ball_nodes


@dataclass(frozen=True)
class DensityParams:
    r: float
    tau: float = 2.0
    metric: str = AMBIENT
    centers: tuple | None = None
    stride: float | None = None
    adversarial: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.r > 0:
            raise InputError("radius r must be positive")
        if not self.tau > 1:
            raise InputError("dilation tau must exceed 1")
        if self.metric not in METRICS:
            raise InputError(f"metric must be one of {METRICS}")
        if self.stride is not None and not self.stride > 0:
            raise InputError("stride must be positive")


@dataclass(frozen=True)
class DensityRecord:
    center: int
    coords: tuple
    numerator: float
    denominator: float
    ratio: float


@dataclass
class DensityScan:
    records: list
    r: float
    tau: float | None = None
    metric: str = AMBIENT
    kind: str = "variational"
    upper_bound_of_infimum: bool = True
    skipped: list = field(default_factory=list)

    @property
    def ratios(self):
        return np.array([rec.ratio for rec in self.records])

    @property
    def minimum(self):
        return min((rec.ratio for rec in self.records), default=math.nan)

    @property
    def argmin(self):
        if not self.records:
            return None
        return min(self.records, key=lambda rec: (rec.ratio, rec.center))


def _check_fits(graph, center, radius):
    x = graph.coords[center]
    lo, hi = graph.box[:, 0], graph.box[:, 1]
    if np.any(x - radius < lo + graph.h - 1e-12) or np.any(x + radius > hi - graph.h + 1e-12):
        raise BallOutOfBoxError(
            f"ball of radius {radius:g} at {tuple(np.round(x, 6))} leaves the box")


def _ratio(graph, E, center, params, cache=None):
    center = graph.resolve_node(center)
    _check_fits(graph, center, params.tau * params.r)
    ball = ball_nodes(graph, center, params.r, params.metric)
    outer = ball_nodes(graph, center, params.tau * params.r, params.metric)
    if cache is not None and center in cache:
        den = cache[center]
    else:
        den = variational_capacity(graph, ball, outer, params.solver).value
        if cache is not None:
            cache[center] = den
    part = E & ball
    num = 0.0 if part.is_empty else variational_capacity(graph, part, outer, params.solver).value
    return DensityRecord(center, tuple(graph.coords[center].tolist()), num, den, num / den)


def density_ratio(graph, E, x, params) -> DensityRecord:
    """Single-center density term; raises ``BallOutOfBoxError`` instead of clipping."""
    graph.check_same(E.graph)
    return _ratio(graph, E, x, params)


def scan_centers(graph, params, margin=None):
    """Resolve the center set of ``params`` to sorted node indices.

    Explicit centers are used as given. Otherwise a sub-lattice with spacing
    ``stride`` (default ``4h``) is taken among nodes whose outer ball fits in
    the box, optionally joined with the geometry's adversarial centers.
    """
    if params.centers is not None:
        nodes = [graph.resolve_node(c) for c in params.centers]
    else:
        radius = params.tau * params.r if margin is None else margin
        step = max(1, int(round((params.stride or 4 * graph.h) / graph.h)))
        on_grid = np.all(graph.lattice % step == 0, axis=1)
        lo, hi = graph.box[:, 0] + graph.h, graph.box[:, 1] - graph.h
        fits = np.all((graph.coords - radius >= lo - 1e-12) & (graph.coords + radius <= hi + 1e-12), axis=1)
        nodes = list(np.flatnonzero(on_grid & fits))
    if params.adversarial:
        for c in graph.space.adversarial_centers():
            x = np.asarray(c, dtype=float)
            if np.all(graph.box[:, 0] <= x) and np.all(x <= graph.box[:, 1]):
                try:
                    nodes.append(graph.resolve_node(x))
                except InputError:
                    pass
    nodes = sorted(set(int(v) for v in nodes))
    if not nodes:
        raise InputError("no admissible centers for this scan")
    return nodes


def _run(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def density_scan(graph, E, params, skip_errors=False, threads=1) -> DensityScan:
    """``min_x`` of the density terms over the sampled centers."""
    graph.check_same(E.graph)
    nodes = scan_centers(graph, params)

    def one(c):
        try:
            return _ratio(graph, E, c, params)
        except BallOutOfBoxError:
            if not skip_errors:
                raise
            return c

    out = _run(one, nodes, threads)
    records = [rec for rec in out if isinstance(rec, DensityRecord)]
    skipped = [int(rec) for rec in out if not isinstance(rec, DensityRecord)]
    return DensityScan(records, params.r, params.tau, params.metric, skipped=skipped)


def sobolev_density_scan(graph, E, r, centers, solver=None, threads=1) -> DensityScan:
    """``min_x C_p(E & B(x, r)) / C_p(B(x, r))`` over the given centers."""
    solver = solver or SolverConfig()
    graph.check_same(E.graph)
    if not r > 0:
        raise InputError("radius r must be positive")
    nodes = [graph.resolve_node(c) for c in centers]
    if not nodes:
        raise InputError("no centers given")

    def one(c):
        ball = ball_nodes(graph, c, r)
        den = sobolev_capacity(graph, ball, solver).value
        num = sobolev_capacity(graph, E & ball, solver).value
        return DensityRecord(c, tuple(graph.coords[c].tolist()), num, den, num / den)

    return DensityScan(_run(one, nodes, threads), r, kind="sobolev")


def collection_density(graph, E, members, solver=None, threads=1) -> DensityScan:
    """``min cap(E & U, U*) / cap(U, U*)`` over members ``(U, U*)``."""
    solver = solver or SolverConfig()
    graph.check_same(E.graph)
    for k, (U, U_star) in enumerate(members):
        if U.is_empty or not U <= U_star:
            raise InvalidCollectionMemberError(f"member {k} does not satisfy empty != U <= U*")

    def one(k):
        U, U_star = members[k]
        den = variational_capacity(graph, U, U_star, solver).value
        part = E & U
        num = 0.0 if part.is_empty else variational_capacity(graph, part, U_star, solver).value
        return DensityRecord(k, (), num, den, num / den)

    return DensityScan(_run(one, range(len(members)), threads), math.nan, kind="collection")
