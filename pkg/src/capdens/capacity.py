"""Discrete p-Dirichlet energy, capacitary potentials and capacities.

The energy of a nodal field ``u`` is ``sum_k w_k |G_k u|^p`` where each row
block ``G_k`` is a finite-difference gradient sample and ``w_k`` its share of
the node measure. Two samplings are available:

``"quadrant"`` (default)
    every node contributes ``2^n`` one-sided gradients, one per quadrant, each
    with weight ``mu_i / 2^n``;
``"central"``
    one central-difference gradient per node, one-sided where a neighbour is
    missing.

Minimizers are computed by continuation in a smoothing parameter ``eps``:
``|g|`` is replaced by ``sqrt(|g|^2 + eps^2)``, each smoothed problem is solved
by reweighted (Newton) steps with a backtracking line search, and ``eps`` is
halved until the energy stops decreasing.
"""

from __future__ import annotations

import itertools
import logging
import math
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    EmptyInnerPlateError,
    InadmissibleCondenserError,
    InputError,
    InvalidFieldError,
    NoBoundaryError,
)
from .space import NodeSet, superlevel_mask

log = logging.getLogger(__name__)

STENCILS = ("quadrant", "central")
LINEAR_SOLVERS = ("auto", "direct", "cg")

# Above this many unknowns the "auto" inner solver switches to AMG-preconditioned CG.
_DIRECT_LIMIT = 20_000


@dataclass(frozen=True)
class SolverConfig:
    p: float = 2.0
    tol: float = 1e-8
    max_iter: int = 10_000
    eps0: float = 1.0
    eps_min: float = 1e-9
    eps_factor: float = 0.5
    stencil: str = "quadrant"
    linear_solver: str = "auto"

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1):
            raise InputError(f"exponent p={self.p} must satisfy 1 < p < inf")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be at least 1")
        if not 0 < self.eps_min <= self.eps0:
            raise InputError("need 0 < eps_min <= eps0")
        if not 0 < self.eps_factor < 1:
            raise InputError("eps_factor must lie in (0, 1)")
        if self.stencil not in STENCILS:
            raise InputError(f"stencil must be one of {STENCILS}")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise InputError(f"linear_solver must be one of {LINEAR_SOLVERS}")

    def schedule(self):
        """Smoothing levels eps0, eps0*f, ... down to (and including) eps_min."""
        out, e = [], self.eps0
        while e > self.eps_min * (1 + 1e-12):
            out.append(e)
            e *= self.eps_factor
        out.append(self.eps_min)
        return out


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Nodal values of a capacitary potential together with its condenser."""

    values: np.ndarray
    graph: object
    E: NodeSet
    omega: NodeSet | None
    config: SolverConfig

    def superlevel(self, M, strict=True):
        return superlevel_set(self, M, strict)


@dataclass(eq=False)
class CapacityResult:
    value: float
    potential: PotentialField
    iterations: int = 0
    residual: float = 0.0
    energy_trace: list = field(default_factory=list)
    converged: bool = True
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Gradient operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GradientOperator:
    """``components[d] @ u`` is the d-th gradient component at every sample."""

    components: tuple
    weights: np.ndarray

    @property
    def num_samples(self):
        return len(self.weights)

    def gradients(self, u):
        return np.stack([G @ u for G in self.components])


_OPERATORS = weakref.WeakKeyDictionary()


def gradient_operator(graph, stencil="quadrant") -> GradientOperator:
    if stencil not in STENCILS:
        raise InputError(f"stencil must be one of {STENCILS}")
    cache = _OPERATORS.setdefault(graph, {})
    if stencil not in cache:
        build = _quadrant_operator if stencil == "quadrant" else _central_operator
        cache[stencil] = build(graph)
    return cache[stencil]


def _quadrant_operator(graph):
    N, n, h = graph.num_nodes, graph.n, graph.h
    nodes = np.arange(N)
    signs = list(itertools.product((-1, 1), repeat=n))
    comps = []
    for d in range(n):
        rows, cols, vals = [], [], []
        for b, s in enumerate(signs):
            side = 1 if s[d] > 0 else 0
            primary = graph.axis_neighbors[:, d, side]
            backup = graph.axis_neighbors[:, d, 1 - side]
            use = np.where(primary >= 0, primary, backup)
            sgn = np.where(primary >= 0, s[d], -s[d]) / h
            ok = use >= 0
            r = b * N + nodes[ok]
            rows += [r, r]
            cols += [use[ok], nodes[ok]]
            vals += [sgn[ok], -sgn[ok]]
        comps.append(sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(signs) * N, N)))
    weights = np.tile(graph.measure / len(signs), len(signs))
    return GradientOperator(tuple(comps), weights)


def _central_operator(graph):
    N, n, h = graph.num_nodes, graph.n, graph.h
    nodes = np.arange(N)
    comps = []
    for d in range(n):
        lo = graph.axis_neighbors[:, d, 0]
        hi = graph.axis_neighbors[:, d, 1]
        both = (lo >= 0) & (hi >= 0)
        only_hi = (hi >= 0) & (lo < 0)
        only_lo = (lo >= 0) & (hi < 0)
        rows = np.concatenate([nodes[both], nodes[both], nodes[only_hi], nodes[only_hi],
                               nodes[only_lo], nodes[only_lo]])
        cols = np.concatenate([hi[both], lo[both], hi[only_hi], nodes[only_hi],
                               nodes[only_lo], lo[only_lo]])
        k2, k1, k3 = both.sum(), only_hi.sum(), only_lo.sum()
        vals = np.concatenate([np.full(k2, 0.5 / h), np.full(k2, -0.5 / h),
                               np.full(k1, 1 / h), np.full(k1, -1 / h),
                               np.full(k3, 1 / h), np.full(k3, -1 / h)])
        comps.append(sp.csr_matrix((vals, (rows, cols)), shape=(N, N)))
    return GradientOperator(tuple(comps), graph.measure.copy())


def dirichlet_energy(graph, u, p, stencil="quadrant"):
    """``sum_k w_k |grad u|_k^p`` over all gradient samples of the graph."""
    u = np.asarray(u, dtype=float)
    if u.shape != (graph.num_nodes,):
        raise InvalidFieldError("field has the wrong length for this graph")
    if not np.all(np.isfinite(u)):
        raise InvalidFieldError("field contains NaN or infinite values")
    op = gradient_operator(graph, stencil)
    g = op.gradients(u)
    mag2 = np.einsum("dk,dk->k", g, g)
    return float(np.dot(op.weights, mag2 ** (p / 2)))


# ---------------------------------------------------------------------------
# Smoothed minimization
# ---------------------------------------------------------------------------


class _Problem:
    """Energy restricted to the free nodes, with fixed values folded in."""

    def __init__(self, graph, fixed, u_fixed, p, stencil, mass):
        op = gradient_operator(graph, stencil)
        self.p = p
        self.n = graph.n
        free = ~fixed
        self.free = np.flatnonzero(free)
        self.u_base = np.where(fixed, u_fixed, 0.0)
        active = np.zeros(op.num_samples, dtype=bool)
        for G in op.components:
            active |= G[:, self.free].getnnz(axis=1) > 0
        rows = np.flatnonzero(active)
        blocks, offsets = [], []
        for G in op.components:
            Ga = G[rows]
            blocks.append(Ga[:, self.free])
            offsets.append(Ga @ self.u_base)
        self.G = sp.vstack(blocks).tocsr()
        self.GT = self.G.T.tocsr()
        self.b = np.concatenate(offsets)
        self.w = op.weights[rows]
        self.K = len(rows)
        self.mass = graph.measure[self.free] if mass else None

    def _grad_parts(self, x):
        return (self.G @ x + self.b).reshape(self.n, self.K)

    def energy(self, x, eps):
        g = self._grad_parts(x)
        s = np.einsum("dk,dk->k", g, g) + eps * eps
        val = np.dot(self.w, s ** (self.p / 2))
        if self.mass is not None:
            val += np.dot(self.mass, (x * x + eps * eps) ** (self.p / 2))
        return float(val)

    def newton_system(self, x, eps):
        p, n = self.p, self.n
        g = self._grad_parts(x)
        s = np.einsum("dk,dk->k", g, g) + eps * eps
        a = self.w * p * s ** (p / 2 - 1)
        grad = self.GT @ (g * a).reshape(-1)
        if p == 2:
            C = sp.diags(np.tile(a, n))
        else:
            c = self.w * p * (p - 2) * s ** (p / 2 - 2)
            blocks = [[None] * n for _ in range(n)]
            for d in range(n):
                for e in range(n):
                    diag = c * g[d] * g[e]
                    if d == e:
                        diag = diag + a
                    blocks[d][e] = sp.diags(diag)
            C = sp.bmat(blocks, format="csr")
        H = (self.GT @ (C @ self.G)).tocsr()
        if self.mass is not None and p == 2:
            grad = grad + 2 * self.mass * x
            H = H + sp.diags(2 * self.mass)
        elif self.mass is not None:
            t = x * x + eps * eps
            grad = grad + self.mass * p * t ** (p / 2 - 1) * x
            H = H + sp.diags(self.mass * p * t ** (p / 2 - 2) * ((p - 1) * x * x + eps * eps))
        return grad, H


def _direct_solve(H, rhs):
    H = H.tocsc()
    try:
        return spla.splu(H, permc_spec="COLAMD").solve(rhs)
    except RuntimeError:
        shift = 1e-12 * float(np.abs(H.diagonal()).mean() or 1.0)
        return spla.splu(H + shift * sp.identity(H.shape[0], format="csc"),
                         permc_spec="COLAMD").solve(rhs)


def _linear_solve(H, rhs, method):
    if method == "auto":
        method = "direct" if H.shape[0] <= _DIRECT_LIMIT else "cg"
    if method == "direct":
        return _direct_solve(H, rhs)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(H.tocsr(), symmetry="symmetric")
    residuals = []
    x = np.asarray(ml.solve(rhs, tol=1e-12, accel="cg", maxiter=500, residuals=residuals))
    if not np.all(np.isfinite(x)) or residuals[-1] > 1e-8 * max(residuals[0], 1e-300):
        log.debug("AMG-CG stalled after %d steps; falling back to LU", len(residuals))
        return _direct_solve(H, rhs)
    return x


def _minimize(problem, x0, config, fixed_energy=0.0):
    """Continuation-in-eps Newton minimization; returns (x, info)."""
    p, tol = problem.p, config.tol
    levels = [0.0] if p == 2 else config.schedule()
    x = x0.copy()
    trace, total, residual, converged = [], 0, 0.0, True
    prev_level_energy = None

    for eps in levels:
        per_level = 0
        while True:
            if total >= config.max_iter:
                converged = False
                break
            F = problem.energy(x, eps)
            grad, H = problem.newton_system(x, eps)
            step = _linear_solve(H, -grad, config.linear_solver)
            slope = float(np.dot(grad, step))
            if not np.all(np.isfinite(step)) or slope >= 0:
                break
            if -slope <= tol * max(F, 1e-300):
                residual = -slope / max(F, 1e-300)
                break
            t, accepted = 1.0, False
            for _ in range(40):
                F_new = problem.energy(x + t * step, eps)
                if F_new <= F + 1e-4 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            x = x + t * step
            total += 1
            per_level += 1
            residual = (F - F_new) / max(F_new, 1e-300)
            trace.append(problem.energy(x, 0.0) + fixed_energy)
            if residual < tol or per_level >= 100:
                break
        if not converged:
            break
        level_energy = problem.energy(x, 0.0) + fixed_energy
        if prev_level_energy is not None and eps > 0:
            if abs(prev_level_energy - level_energy) <= tol * max(level_energy, 1e-300):
                break
        prev_level_energy = level_energy
    return x, dict(iterations=total, residual=float(residual), trace=trace, converged=converged)


def _solve(graph, fixed, u_fixed, config, mass=False, x0=None):
    problem = _Problem(graph, fixed, u_fixed, config.p, config.stencil, mass)
    u = problem.u_base.copy()
    if len(problem.free) == 0:
        return u, dict(iterations=0, residual=0.0, trace=[], converged=True)
    if x0 is None:
        x0 = np.zeros(len(problem.free))
        if config.p != 2:
            # the quadratic problem gives a smooth starting point
            lin = _Problem(graph, fixed, u_fixed, 2.0, config.stencil, mass)
            grad, H = lin.newton_system(x0, 0.0)
            x0 = np.clip(_linear_solve(H, -grad, config.linear_solver), 0.0, 1.0)
    x, info = _minimize(problem, x0, config)
    u[problem.free] = x
    # truncation to [0, 1] never increases the energy
    np.clip(u, 0.0, 1.0, out=u)
    if not info["converged"]:
        log.warning("solver stopped at max_iter=%d", config.max_iter)
    return u, info


# ---------------------------------------------------------------------------
# Capacities
# ---------------------------------------------------------------------------


def _check_condenser(graph, E, omega):
    graph.check_same(E.graph)
    graph.check_same(omega.graph)
    if E.is_empty:
        raise EmptyInnerPlateError("the inner plate E is empty")
    if not E <= omega:
        raise InadmissibleCondenserError("E is not contained in Omega")
    if (~omega).is_empty:
        raise NoBoundaryError("Omega covers every node; no exterior to hold u = 0")


def _condenser_solve(graph, E, omega, config):
    _check_condenser(graph, E, omega)
    fixed = E.mask | ~omega.mask
    u_fixed = E.mask.astype(float)
    u, info = _solve(graph, fixed, u_fixed, config)
    u.setflags(write=False)
    return PotentialField(values=u, graph=graph, E=E, omega=omega, config=config), info


def capacitary_potential(graph, E, omega, config=None) -> PotentialField:
    """Minimizer of the energy with ``u = 1`` on ``E`` and ``u = 0`` off ``omega``."""
    pot, _ = _condenser_solve(graph, E, omega, config or SolverConfig())
    return pot


def variational_capacity(graph, E, omega, config=None) -> CapacityResult:
    """``cap_p(E, omega)`` with the potential and solver diagnostics."""
    config = config or SolverConfig()
    pot, info = _condenser_solve(graph, E, omega, config)
    value = dirichlet_energy(graph, pot.values, config.p, config.stencil)
    warnings = [] if info["converged"] else ["max-iter-reached"]
    return CapacityResult(value=value, potential=pot, iterations=info["iterations"],
                          residual=info["residual"], energy_trace=info["trace"],
                          converged=info["converged"], warnings=warnings)


def sobolev_capacity(graph, E, config=None) -> CapacityResult:
    """``C_p(E)``: minimize ``sum mu |u|^p + energy`` over ``u >= 1`` on ``E``.

    The box boundary carries natural (free) conditions. A ``truncation-unsafe``
    warning is attached when ``E`` reaches the outermost node layer of the box.
    """
    config = config or SolverConfig()
    graph.check_same(E.graph)
    if E.is_empty:
        zero = np.zeros(graph.num_nodes)
        zero.setflags(write=False)
        pot = PotentialField(values=zero, graph=graph, E=E, omega=None, config=config)
        return CapacityResult(value=0.0, potential=pot)
    warnings = []
    if np.any(E.mask & graph.boundary_layer()):
        warnings.append("truncation-unsafe")
    u, info = _solve(graph, E.mask, E.mask.astype(float), config, mass=True)
    u.setflags(write=False)
    pot = PotentialField(values=u, graph=graph, E=E, omega=None, config=config)
    value = (dirichlet_energy(graph, u, config.p, config.stencil)
             + float(np.dot(graph.measure, np.abs(u) ** config.p)))
    if not info["converged"]:
        warnings.append("max-iter-reached")
    return CapacityResult(value=value, potential=pot, iterations=info["iterations"],
                          residual=info["residual"], energy_trace=info["trace"],
                          converged=info["converged"], warnings=warnings)


def truncation_margin(graph, E):
    """Distance from ``E`` to the nearest face of the computational box."""
    if E.is_empty:
        return math.inf
    pts = E.coords
    lo, hi = graph.box[:, 0], graph.box[:, 1]
    return float(min((pts - lo).min(), (hi - pts).min()))


def superlevel_set(u, M, strict=True) -> NodeSet:
    """``{u > M}`` (``strict``) or ``{u >= M}`` for a level ``0 < M <= 1``."""
    return NodeSet(u.graph, superlevel_mask(u.values, M, strict))
