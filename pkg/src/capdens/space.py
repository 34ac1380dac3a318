"""Continuous geometries, their grid discretizations, and metric primitives.

A geometry (``EuclideanBox``, ``SlitSpace``, ``CosineStrip``) is rasterized by
:func:`build_graph` into a :class:`MetricGraph`: the lattice points of a bounding
box that lie in the space, each carrying the measure of its (clipped) grid cell.
Two metrics live on a graph:

* ``"ambient"``: the Euclidean distance between node coordinates;
* ``"inner"``: shortest-path length along straight segments that stay inside the
  space, using a wide stencil so that the grid metric is close to isotropic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from .errors import (
    EmptyDomainError,
    EmptySourceError,
    InputError,
    InvalidLevelError,
    MismatchedGraphError,
    ResolutionTooCoarseError,
)

AMBIENT = "ambient"
INNER = "inner"
METRICS = (AMBIENT, INNER)

# Interior sample points per unit of stencil length when validating a segment.
_SEGMENT_SAMPLES = 4


def _check_metric(metric):
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _as_points(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[None, :] if pts.ndim == 1 else pts


# ---------------------------------------------------------------------------
# Geometries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EuclideanBox:
    """The closed box ``prod [lo_d, hi_d]`` with the Euclidean metric."""

    bounds: tuple

    convex = True

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise InputError("box needs at least one axis")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise InputError(f"box axis [{lo}, {hi}] must be finite with positive extent")
        object.__setattr__(self, "bounds", bounds)

    @property
    def n(self):
        return len(self.bounds)

    def contains(self, pts):
        pts = _as_points(pts)
        b = np.asarray(self.bounds)
        return np.all((pts >= b[:, 0]) & (pts <= b[:, 1]), axis=1)

    def default_box(self):
        return self.bounds

    def adversarial_centers(self):
        return np.empty((0, self.n))


@dataclass(frozen=True)
class SlitSpace:
    """R^n with the open upper half-balls B+((4^j, 0, ..., 0), 2^j), 1 <= j <= j_max, removed.

    "Upper" refers to the last coordinate. Half-balls beyond ``j_max`` are dropped;
    they lie far outside any bounding box used with a small ``j_max``.
    """

    n: int = 2
    j_max: int = 4

    convex = False

    def __post_init__(self):
        if self.n < 1 or self.j_max < 1:
            raise InputError("SlitSpace needs n >= 1 and j_max >= 1")

    def half_ball_centers(self):
        c = np.zeros((self.j_max, self.n))
        c[:, 0] = 4.0 ** np.arange(1, self.j_max + 1)
        return c

    def half_ball_radii(self):
        return 2.0 ** np.arange(1, self.j_max + 1)

    def contains(self, pts):
        pts = _as_points(pts)
        inside = np.ones(len(pts), dtype=bool)
        for c, r in zip(self.half_ball_centers(), self.half_ball_radii()):
            q = pts - c
            removed = (np.einsum("ij,ij->i", q, q) < r * r) & (q[:, -1] > 0)
            inside &= ~removed
        return inside

    def removed_distance(self, pts):
        """Euclidean distance to the union of the removed half-balls."""
        pts = _as_points(pts)
        out = np.full(len(pts), np.inf)
        for c, r in zip(self.half_ball_centers(), self.half_ball_radii()):
            out = np.minimum(out, _upper_half_ball_distance(pts - c, r))
        return out

    def default_box(self):
        raise InputError("SlitSpace is unbounded; an explicit box is required")

    def adversarial_centers(self):
        return self.half_ball_centers()


@dataclass(frozen=True)
class CosineStrip:
    """The planar strip ``|y - cos x| <= 1/2`` restricted to ``x_range``."""

    x_range: tuple

    convex = False
    n = 2

    def __post_init__(self):
        lo, hi = (float(v) for v in self.x_range)
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
            raise InputError("CosineStrip x_range must be finite and increasing")
        object.__setattr__(self, "x_range", (lo, hi))

    def contains(self, pts):
        pts = _as_points(pts)
        x, y = pts[:, 0], pts[:, 1]
        lo, hi = self.x_range
        return (x >= lo) & (x <= hi) & (np.abs(y - np.cos(x)) <= 0.5)

    def default_box(self):
        return (self.x_range, (-1.5, 1.5))

    def adversarial_centers(self):
        return np.empty((0, 2))


SPACE_TYPES = (EuclideanBox, SlitSpace, CosineStrip)


def _upper_half_ball_distance(q, r):
    # distance from q (relative to the center) to the closed half-ball {|y| <= r, y_n >= 0}
    perp = np.sqrt(np.einsum("ij,ij->i", q[:, :-1], q[:, :-1]))
    above = q[:, -1] >= 0
    radial = np.maximum(np.linalg.norm(q, axis=1) - r, 0.0)
    below = np.sqrt(q[:, -1] ** 2 + np.maximum(perp - r, 0.0) ** 2)
    return np.where(above, radial, below)


def _lower_half_ball_distance(q, r):
    flipped = q.copy()
    flipped[:, -1] *= -1
    return _upper_half_ball_distance(flipped, r)


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


def _stencil_offsets(n, reach=2):
    """Primitive integer vectors with max-norm <= reach (16 vectors in the plane)."""
    offs = []
    for v in itertools.product(range(-reach, reach + 1), repeat=n):
        if any(v) and math.gcd(*[abs(c) for c in v]) == 1:
            offs.append(v)
    return np.array(offs, dtype=int)


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Weighted lattice graph standing in for a metric measure space.

    ``coords`` and ``measure`` are per node; ``axis_neighbors[i, d, 0/1]`` is the
    node one step below/above node ``i`` along axis ``d`` (-1 if missing).
    All arrays are read-only.
    """

    space: object
    box: np.ndarray
    h: float
    shape: tuple
    lattice: np.ndarray
    coords: np.ndarray
    measure: np.ndarray
    index: np.ndarray
    axis_neighbors: np.ndarray

    @property
    def n(self):
        return self.coords.shape[1]

    @property
    def num_nodes(self):
        return self.coords.shape[0]

    def __len__(self):
        return self.num_nodes

    def __repr__(self):
        return (f"MetricGraph({type(self.space).__name__}, n={self.n}, "
                f"nodes={self.num_nodes}, h={self.h:g})")

    @property
    def total_measure(self):
        return float(self.measure.sum())

    @cached_property
    def edges(self):
        """Axis edges as an (E, 2) array with ``i < j``."""
        parts = []
        for d in range(self.n):
            up = self.axis_neighbors[:, d, 1]
            src = np.flatnonzero(up >= 0)
            parts.append(np.column_stack([src, up[src]]))
        e = np.concatenate(parts) if parts else np.empty((0, 2), int)
        e.setflags(write=False)
        return e

    @property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.coords[e[:, 1]] - self.coords[e[:, 0]], axis=1)

    @cached_property
    def kdtree(self):
        return cKDTree(self.coords)

    def node_at(self, point):
        """Index of the node nearest to ``point`` (ties: smallest index)."""
        _, i = self.kdtree.query(np.asarray(point, dtype=float))
        return int(i)

    def resolve_node(self, center):
        if isinstance(center, (int, np.integer)):
            i = int(center)
            if not 0 <= i < self.num_nodes:
                raise InputError(f"node index {i} out of range")
            return i
        return self.node_at(center)

    def boundary_layer(self, width=None):
        """Mask of nodes within ``width`` (default h) of a face of the box."""
        width = self.h if width is None else width
        lo, hi = self.box[:, 0], self.box[:, 1]
        tol = 1e-9 * self.h
        near = (self.coords - lo < width - tol) | (hi - self.coords < width - tol)
        return near.any(axis=1)

    @cached_property
    def stencil(self):
        return _stencil_offsets(self.n)

    @cached_property
    def inner_adjacency(self):
        """Sparse symmetric adjacency for the inner metric (wide stencil)."""
        rows, cols, vals = [], [], []
        for off in self.stencil:
            if tuple(off) < tuple(-off):
                continue  # each undirected edge once
            src, dst = self._shifted(off)
            if len(src) == 0:
                continue
            if not self.space.convex:
                ok = _segments_inside(self.space, self.coords[src], self.coords[dst],
                                      _SEGMENT_SAMPLES * int(np.abs(off).max()))
                src, dst = src[ok], dst[ok]
            length = self.h * float(np.linalg.norm(off))
            rows.append(src)
            cols.append(dst)
            vals.append(np.full(len(src), length))
        r = np.concatenate(rows + cols)
        c = np.concatenate(cols + rows)
        v = np.concatenate(vals + vals)
        return sp.csr_matrix((v, (r, c)), shape=(self.num_nodes, self.num_nodes))

    def _shifted(self, off):
        tgt = self.lattice + off
        ok = np.all((tgt >= 0) & (tgt < np.array(self.shape)), axis=1)
        src = np.flatnonzero(ok)
        dst = self.index[tuple(tgt[ok].T)]
        keep = dst >= 0
        return src[keep], dst[keep]

    def check_same(self, other):
        if other is not self:
            raise MismatchedGraphError("objects refer to different graphs")


def _segments_inside(space, a, b, samples):
    ok = np.ones(len(a), dtype=bool)
    for k in range(1, samples + 1):
        t = k / (samples + 1)
        ok &= space.contains(a + t * (b - a))
    return ok


def _cell_fraction(space, pts, h, box):
    """Fraction of each node's cell inside both the box and X."""
    n = pts.shape[1]
    if isinstance(space, EuclideanBox):
        sb = np.asarray(space.bounds)
        lo = np.maximum(box[:, 0], sb[:, 0])
        hi = np.minimum(box[:, 1], sb[:, 1])
        return np.prod(_overlap(pts, h, lo, hi), axis=1)
    frac = np.prod(_overlap(pts, h, box[:, 0], box[:, 1]), axis=1)
    sub = np.array(list(itertools.product((-h / 3, 0.0, h / 3), repeat=n)))
    hits = np.zeros(len(pts))
    for s in sub:
        hits += space.contains(pts + s)
    return frac * hits / len(sub)


def _overlap(pts, h, lo, hi):
    a = np.maximum(pts - h / 2, lo)
    b = np.minimum(pts + h / 2, hi)
    return np.clip(b - a, 0.0, h) / h


def build_graph(space, box=None, h=0.1) -> MetricGraph:
    """Rasterize ``space`` on the lattice ``box.lo + h * Z^n`` restricted to ``box``.

    Node measure is ``h^n`` times the fraction of the node's cell inside both
    the box and the space (3^n-point subsampling near curved boundaries).
    Axis neighbors are linked only when the joining segment stays in the space.
    """
    if box is None:
        box = space.default_box()
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] != space.n:
        raise InputError(f"box must have shape ({space.n}, 2)")
    if not (h > 0 and math.isfinite(h)):
        raise InputError("grid spacing h must be positive")
    extent = box[:, 1] - box[:, 0]
    if np.any(extent <= 0) or not np.all(np.isfinite(box)):
        raise InputError("box must be finite with positive extent")
    if h > extent.min():
        raise ResolutionTooCoarseError(f"h={h} exceeds the smallest box extent {extent.min()}")

    axes = []
    for lo, hi in box:
        m = int(math.floor((hi - lo) / h + 1e-9)) + 1
        k0 = lo / h
        if abs(k0 - round(k0)) < 1e-9:
            axes.append((round(k0) + np.arange(m)) * h)
        else:
            axes.append(lo + np.arange(m) * h)
    shape = tuple(len(a) for a in axes)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, space.n)
    inside = space.contains(grid)
    if not inside.any():
        raise EmptyDomainError("the box does not meet the space")

    index = np.full(shape, -1, dtype=np.int64)
    flat = np.flatnonzero(inside)
    index.reshape(-1)[flat] = np.arange(len(flat))
    lattice = np.stack(np.unravel_index(flat, shape), axis=1)
    coords = grid[flat]
    measure = h ** space.n * _cell_fraction(space, coords, h, box)

    nbrs = np.full((len(flat), space.n, 2), -1, dtype=np.int64)
    for d in range(space.n):
        for side, step in enumerate((-1, 1)):
            tgt = lattice.copy()
            tgt[:, d] += step
            ok = (tgt[:, d] >= 0) & (tgt[:, d] < shape[d])
            src = np.flatnonzero(ok)
            dst = index[tuple(tgt[ok].T)]
            keep = dst >= 0
            src, dst = src[keep], dst[keep]
            if not space.convex and len(src):
                good = _segments_inside(space, coords[src], coords[dst], _SEGMENT_SAMPLES)
                src, dst = src[good], dst[good]
            nbrs[src, d, side] = dst

    for arr in (box, lattice, coords, measure, index, nbrs):
        arr.setflags(write=False)
    return MetricGraph(space=space, box=box, h=float(h), shape=shape, lattice=lattice,
                       coords=coords, measure=measure, index=index, axis_neighbors=nbrs)


# ---------------------------------------------------------------------------
# Node sets
# ---------------------------------------------------------------------------


class NodeSet:
    """Immutable subset of the nodes of one graph, stored as a boolean mask."""

    __slots__ = ("graph", "_mask")

    def __init__(self, graph, mask):
        mask = np.array(mask, dtype=bool)
        if mask.shape != (graph.num_nodes,):
            raise InputError("node mask has the wrong length for this graph")
        mask.setflags(write=False)
        self.graph = graph
        self._mask = mask

    @classmethod
    def from_indices(cls, graph, indices):
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                         dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= graph.num_nodes):
            raise InputError("node index out of range")
        mask = np.zeros(graph.num_nodes, dtype=bool)
        mask[idx] = True
        return cls(graph, mask)

    @classmethod
    def empty(cls, graph):
        return cls(graph, np.zeros(graph.num_nodes, dtype=bool))

    @classmethod
    def full(cls, graph):
        return cls(graph, np.ones(graph.num_nodes, dtype=bool))

    @property
    def mask(self):
        return self._mask

    @property
    def indices(self):
        return np.flatnonzero(self._mask)

    @property
    def coords(self):
        return self.graph.coords[self._mask]

    @property
    def measure(self):
        return float(self.graph.measure[self._mask].sum())

    @property
    def is_empty(self):
        return not self._mask.any()

    def __len__(self):
        return int(self._mask.sum())

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, node):
        return bool(self._mask[int(node)])

    def __repr__(self):
        return f"NodeSet({len(self)}/{self.graph.num_nodes} nodes)"

    def _other(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        self.graph.check_same(other.graph)
        return other._mask

    def __or__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else NodeSet(self.graph, self._mask | m)

    def __and__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else NodeSet(self.graph, self._mask & m)

    def __sub__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else NodeSet(self.graph, self._mask & ~m)

    def __xor__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else NodeSet(self.graph, self._mask ^ m)

    def __invert__(self):
        return NodeSet(self.graph, ~self._mask)

    complement = __invert__

    def __le__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else not np.any(self._mask & ~m)

    issubset = __le__

    def __ge__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else not np.any(m & ~self._mask)

    def __eq__(self, other):
        if not isinstance(other, NodeSet):
            return NotImplemented
        return other.graph is self.graph and np.array_equal(self._mask, other._mask)

    __hash__ = None

    def isdisjoint(self, other):
        return not np.any(self._mask & self._other(other))


# ---------------------------------------------------------------------------
# Distances, balls, interiors and neighborhoods
# ---------------------------------------------------------------------------


def _source_mask(graph, sources):
    if isinstance(sources, NodeSet):
        graph.check_same(sources.graph)
        return sources.mask
    return NodeSet.from_indices(graph, np.atleast_1d(sources)).mask


def inner_distance_field(graph, sources, within=None, limit=np.inf):
    """Multi-source shortest-path distance along the inner-metric stencil.

    ``within`` restricts paths to a node subset (distance is +inf outside it);
    ``limit`` stops the sweep early, leaving +inf beyond it.
    """
    src = _source_mask(graph, sources)
    if not src.any():
        raise EmptySourceError("distance sweep needs at least one source node")
    adj = graph.inner_adjacency
    if within is not None:
        keep = _source_mask(graph, within)
        sub = np.flatnonzero(keep)
        local = np.full(graph.num_nodes, -1)
        local[sub] = np.arange(len(sub))
        s = local[np.flatnonzero(src & keep)]
        out = np.full(graph.num_nodes, np.inf)
        if len(s):
            out[sub] = csgraph.dijkstra(adj[sub][:, sub], directed=False, indices=s,
                                        min_only=True, limit=limit)
        return out
    return csgraph.dijkstra(adj, directed=False, indices=np.flatnonzero(src),
                            min_only=True, limit=limit)


def ambient_distance_field(graph, sources):
    """Euclidean distance from every node to the nearest source node."""
    src = _source_mask(graph, sources)
    if not src.any():
        raise EmptySourceError("distance sweep needs at least one source node")
    d, _ = cKDTree(graph.coords[src]).query(graph.coords)
    return d


def distance_field(graph, sources, metric=AMBIENT, within=None):
    _check_metric(metric)
    if metric == INNER:
        return inner_distance_field(graph, sources, within=within)
    if within is not None:
        raise InputError("'within' restriction only applies to the inner metric")
    return ambient_distance_field(graph, sources)


def ball_nodes(graph, center, r, metric=AMBIENT) -> NodeSet:
    """Open ball ``{y : d(x, y) < r}``; ``center`` is a node index or a point.

    Ambient balls accept arbitrary centre points; inner balls are centred at the
    nearest node.
    """
    _check_metric(metric)
    if not r > 0:
        raise InputError("ball radius must be positive")
    if metric == AMBIENT:
        c = (graph.coords[graph.resolve_node(center)]
             if isinstance(center, (int, np.integer)) else np.asarray(center, float))
        d = np.linalg.norm(graph.coords - c, axis=1)
        return NodeSet(graph, d < r)
    i = graph.resolve_node(center)
    d = inner_distance_field(graph, [i], limit=r)
    return NodeSet(graph, d < r)


def eps_interior(graph, U, eps, metric=AMBIENT) -> NodeSet:
    """Nodes of ``U`` whose distance to the node-complement of ``U`` exceeds ``eps``."""
    if eps < 0:
        raise InputError("eps must be nonnegative")
    graph.check_same(U.graph)
    if U.is_empty:
        return U
    comp = ~U
    if comp.is_empty:
        return U
    d = distance_field(graph, comp, metric)
    return NodeSet(graph, U.mask & (d > eps))


def eps_neighborhood(graph, U, eps, metric=AMBIENT) -> NodeSet:
    """``U`` together with all nodes at distance ``< eps`` from ``U``."""
    if eps < 0:
        raise InputError("eps must be nonnegative")
    graph.check_same(U.graph)
    if U.is_empty or eps == 0:
        return U
    d = distance_field(graph, U, metric)
    return NodeSet(graph, U.mask | (d < eps))


def diameter(graph, U, metric=AMBIENT):
    """Diameter of a node set (exact for ambient; double sweep bound for inner)."""
    if U.is_empty:
        return 0.0
    pts = U.coords
    if metric == AMBIENT:
        if len(pts) > 4000:
            from scipy.spatial import ConvexHull
            if graph.n >= 2:
                try:
                    pts = pts[ConvexHull(pts).vertices]
                except Exception:  # degenerate hull: fall back to all points
                    pass
        from scipy.spatial.distance import pdist
        return float(pdist(pts).max()) if len(pts) > 1 else 0.0
    a = U.indices[0]
    d = inner_distance_field(graph, [a], within=U)
    b = int(np.argmax(np.where(np.isfinite(d), d, -1)))
    d2 = inner_distance_field(graph, [b], within=U)
    return float(np.max(np.where(np.isfinite(d2), d2, 0.0)))


@dataclass(frozen=True)
class QuasiconvexityEstimate:
    L: float
    witness: tuple
    pairs: int


def quasiconvexity_estimate(graph, sample_pairs=200, seed=0, pairs=None) -> QuasiconvexityEstimate:
    """Largest ratio ``d_in / d`` over seeded random node pairs (plus ``pairs``).

    Disconnected pairs give ``L = inf`` with the offending pair as witness.
    """
    rng = np.random.default_rng(seed)
    n = graph.num_nodes
    a = rng.integers(0, n, size=sample_pairs)
    b = rng.integers(0, n, size=sample_pairs)
    if pairs:
        extra = np.array([[graph.resolve_node(p), graph.resolve_node(q)] for p, q in pairs])
        a = np.concatenate([a, extra[:, 0]])
        b = np.concatenate([b, extra[:, 1]])
    keep = a != b
    a, b = a[keep], b[keep]
    best, witness = 1.0, (None, None)
    for s in np.unique(a):
        sel = a == s
        din = csgraph.dijkstra(graph.inner_adjacency, directed=False, indices=int(s))[b[sel]]
        d = np.linalg.norm(graph.coords[b[sel]] - graph.coords[s], axis=1)
        ratio = din / d
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, witness = float(ratio[k]), (int(s), int(b[sel][k]))
            if not np.isfinite(best):
                break
    return QuasiconvexityEstimate(L=best, witness=witness, pairs=int(len(a)))


# ---------------------------------------------------------------------------
# Set specifications
# ---------------------------------------------------------------------------


def _rel(pts, center):
    return _as_points(pts) - np.asarray(center, dtype=float)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def contains(self, pts, space=None):
        return np.linalg.norm(_rel(pts, self.center), axis=1) < self.radius

    def distance(self, pts, space=None):
        return np.maximum(np.linalg.norm(_rel(pts, self.center), axis=1) - self.radius, 0.0)


@dataclass(frozen=True)
class LowerHalfBall:
    """``B(c, r)`` minus its open upper half: ``|y - c| < r`` and ``y_n <= c_n``."""

    center: tuple
    radius: float

    def contains(self, pts, space=None):
        q = _rel(pts, self.center)
        return (np.linalg.norm(q, axis=1) < self.radius) & (q[:, -1] <= 0)

    def distance(self, pts, space=None):
        return _lower_half_ball_distance(_rel(pts, self.center), self.radius)


@dataclass(frozen=True)
class UpperHalfBall:
    """The open upper half-ball ``|y - c| < r``, ``y_n > c_n``."""

    center: tuple
    radius: float

    def contains(self, pts, space=None):
        q = _rel(pts, self.center)
        return (np.linalg.norm(q, axis=1) < self.radius) & (q[:, -1] > 0)

    def distance(self, pts, space=None):
        return _upper_half_ball_distance(_rel(pts, self.center), self.radius)


@dataclass(frozen=True)
class RemovedHalfBalls:
    """The half-balls cut out of a ``SlitSpace`` (empty for other geometries)."""

    def contains(self, pts, space=None):
        if not isinstance(space, SlitSpace):
            return np.zeros(len(_as_points(pts)), dtype=bool)
        return ~space.contains(pts)

    def distance(self, pts, space=None):
        if not isinstance(space, SlitSpace):
            return np.full(len(_as_points(pts)), np.inf)
        return space.removed_distance(pts)


@dataclass(frozen=True)
class Neighborhood:
    """Points at Euclidean distance ``< eps`` from a geometric base set."""

    base: object
    eps: float

    def contains(self, pts, space=None):
        return self.base.distance(pts, space) < self.eps


@dataclass(frozen=True)
class LatticeBalls:
    """Union of ``B(z, radius)`` over lattice points ``z = offset + spacing * Z^n`` not in ``exclude``."""

    spacing: float
    radius: float
    exclude: object = None
    offset: tuple = None

    def __post_init__(self):
        if not (self.spacing > 0 and self.radius > 0):
            raise InputError("lattice spacing and ball radius must be positive")

    def contains(self, pts, space=None):
        pts = _as_points(pts)
        n = pts.shape[1]
        off = np.zeros(n) if self.offset is None else np.asarray(self.offset, float)
        base = np.round((pts - off) / self.spacing)
        k = int(math.ceil(self.radius / self.spacing))
        hit = np.zeros(len(pts), dtype=bool)
        for shift in itertools.product(range(-k, k + 1), repeat=n):
            z = off + (base + shift) * self.spacing
            near = np.linalg.norm(pts - z, axis=1) < self.radius
            if self.exclude is not None and near.any():
                idx = np.flatnonzero(near)
                near[idx] &= ~self.exclude.contains(z[idx], space)
            hit |= near
        return hit


@dataclass(frozen=True)
class Everything:
    def contains(self, pts, space=None):
        return np.ones(len(_as_points(pts)), dtype=bool)


@dataclass(frozen=True)
class Nothing:
    def contains(self, pts, space=None):
        return np.zeros(len(_as_points(pts)), dtype=bool)

    def distance(self, pts, space=None):
        return np.full(len(_as_points(pts)), np.inf)


@dataclass(frozen=True)
class Superlevel:
    """Nodes where a capacitary potential exceeds (``strict``) or reaches ``level``."""

    potential: object
    level: float
    strict: bool = True


@dataclass(frozen=True)
class Union:
    parts: tuple

    def contains(self, pts, space=None):
        out = np.zeros(len(_as_points(pts)), dtype=bool)
        for p in self.parts:
            out |= p.contains(pts, space)
        return out

    def distance(self, pts, space=None):
        out = np.full(len(_as_points(pts)), np.inf)
        for p in self.parts:
            out = np.minimum(out, p.distance(pts, space))
        return out


@dataclass(frozen=True)
class Intersection:
    parts: tuple

    def contains(self, pts, space=None):
        out = np.ones(len(_as_points(pts)), dtype=bool)
        for p in self.parts:
            out &= p.contains(pts, space)
        return out


@dataclass(frozen=True)
class Complement:
    part: object

    def contains(self, pts, space=None):
        return ~self.part.contains(pts, space)


def superlevel_mask(values, level, strict=True):
    if not 0 < level <= 1:
        raise InvalidLevelError(f"level {level} outside (0, 1]")
    return values > level if strict else values >= level


def rasterize_set(graph, spec) -> NodeSet:
    """Node set of ``spec``; Boolean combinations are evaluated on node masks."""
    return NodeSet(graph, _raster_mask(graph, spec))


def _raster_mask(graph, spec):
    if isinstance(spec, NodeSet):
        graph.check_same(spec.graph)
        return spec.mask
    if isinstance(spec, Union):
        out = np.zeros(graph.num_nodes, dtype=bool)
        for p in spec.parts:
            out |= _raster_mask(graph, p)
        return out
    if isinstance(spec, Intersection):
        out = np.ones(graph.num_nodes, dtype=bool)
        for p in spec.parts:
            out &= _raster_mask(graph, p)
        return out
    if isinstance(spec, Complement):
        return ~_raster_mask(graph, spec.part)
    if isinstance(spec, Superlevel):
        pot = spec.potential
        graph.check_same(pot.graph)
        return superlevel_mask(pot.values, spec.level, spec.strict)
    if hasattr(spec, "contains"):
        return np.asarray(spec.contains(graph.coords, graph.space), dtype=bool)
    raise InputError(f"cannot rasterize {spec!r}")
