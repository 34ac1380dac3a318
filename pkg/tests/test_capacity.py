import math

import numpy as np
import pytest

from capdens.capacity import (
    SolverConfig,
    capacitary_potential,
    dirichlet_energy,
    sobolev_capacity,
    superlevel_set,
    truncation_margin,
    variational_capacity,
)
from capdens.errors import (
    EmptyInnerPlateError,
    InadmissibleCondenserError,
    InputError,
    InvalidFieldError,
    InvalidLevelError,
    NoBoundaryError,
)
from capdens.space import Ball, EuclideanBox, NodeSet, ball_nodes, build_graph, rasterize_set

from oracles import exact_p2_capacity, loop_energy, minimize_p_energy, radial_capacity


@pytest.fixture(scope="module")
def square():
    return build_graph(EuclideanBox(((-2.25, 2.25), (-2.25, 2.25))), h=1 / 16)


@pytest.fixture(scope="module")
def line():
    return build_graph(EuclideanBox(((-1.5, 1.5),)), h=0.01)


def test_energy_of_constant_is_zero(square):
    for stencil in ("quadrant", "central"):
        assert dirichlet_energy(square, np.full(square.num_nodes, 0.7), 2.5, stencil) == 0.0


def test_energy_of_ramp():
    g = build_graph(EuclideanBox(((0, 1),)), h=0.1)
    assert dirichlet_energy(g, g.coords[:, 0], 2) == pytest.approx(1.0)
    assert dirichlet_energy(g, g.coords[:, 0], 2, "central") == pytest.approx(1.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_energy_matches_loop_oracle(p):
    g = build_graph(EuclideanBox(((0, 1), (0, 0.75))), h=0.125)
    u = np.random.default_rng(4).random(g.num_nodes)
    assert dirichlet_energy(g, u, p) == pytest.approx(loop_energy(g.coords, g.measure, g.h, u, p), rel=1e-12)


def test_energy_rejects_bad_fields(square):
    with pytest.raises(InvalidFieldError):
        dirichlet_energy(square, np.zeros(3), 2)
    u = np.zeros(square.num_nodes)
    u[5] = np.nan
    with pytest.raises(InvalidFieldError):
        dirichlet_energy(square, u, 2)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_point_in_interval(line, p):
    x = line.coords[:, 0]
    E = NodeSet(line, np.isclose(x, 0.0))
    omega = NodeSet(line, np.abs(x) < 1 - 1e-9)
    res = variational_capacity(line, E, omega, SolverConfig(p=p))
    # two linear ramps of length 1
    assert res.value == pytest.approx(2.0, rel=1e-6)
    np.testing.assert_allclose(res.potential.values, np.clip(1 - np.abs(x), 0, 1), atol=1e-6)


def test_annulus_p2_converges():
    exact, errors = radial_capacity(2, 2, 1, 2), []
    for h in (1 / 16, 1 / 32):
        g = build_graph(EuclideanBox(((-2.25, 2.25), (-2.25, 2.25))), h=h)
        res = variational_capacity(g, rasterize_set(g, Ball((0, 0), 1)), rasterize_set(g, Ball((0, 0), 2)))
        assert res.converged and res.warnings == []
        errors.append(abs(res.value / exact - 1))
    assert errors[1] < 0.04
    assert errors[1] < 0.6 * errors[0]


def test_ball_in_three_space():
    g = build_graph(EuclideanBox(((-2.25, 2.25),) * 3), h=1 / 16)
    E = rasterize_set(g, Ball((0, 0, 0), 1))
    omega = rasterize_set(g, Ball((0, 0, 0), 2))
    val = variational_capacity(g, E, omega).value
    assert val == pytest.approx(radial_capacity(3, 2, 1, 2), rel=0.08)
    assert radial_capacity(3, 2, 1, 2) == pytest.approx(8 * math.pi)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_thin_annulus_tends_to_ramp(p):
    g = build_graph(EuclideanBox(((-1.75, 1.75), (-1.75, 1.75))), h=1 / 64)
    E = rasterize_set(g, Ball((0, 0), 1))
    omega = rasterize_set(g, Ball((0, 0), 1.5))
    val = variational_capacity(g, E, omega, SolverConfig(p=p)).value
    assert val == pytest.approx(radial_capacity(2, p, 1, 1.5), rel=0.06)


def test_matches_exact_p2_oracle():
    g = build_graph(EuclideanBox(((0, 2), (0, 1.5))), h=0.125)
    rng = np.random.default_rng(0)
    E = NodeSet(g, rng.random(g.num_nodes) < 0.1)
    omega = NodeSet(g, rng.random(g.num_nodes) < 0.7) | E
    expected, u = exact_p2_capacity(g.coords, g.measure, g.h, E.mask, omega.mask)
    for solver in ("direct", "cg"):
        res = variational_capacity(g, E, omega, SolverConfig(linear_solver=solver))
        assert res.value == pytest.approx(expected, rel=1e-8)
        np.testing.assert_allclose(res.potential.values, u, atol=1e-7)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_matches_generic_minimizer(p):
    g = build_graph(EuclideanBox(((0, 1), (0, 1))), h=0.125)
    c = np.array([0.5, 0.5])
    r = np.linalg.norm(g.coords - c, axis=1)
    E, omega = NodeSet(g, r < 0.2), NodeSet(g, r < 0.45)
    expected = minimize_p_energy(g.coords, g.measure, g.h, E.mask, omega.mask, p)
    got = variational_capacity(g, E, omega, SolverConfig(p=p)).value
    assert got == pytest.approx(expected, rel=1e-6)


def test_condenser_errors(square):
    E = rasterize_set(square, Ball((0, 0), 1))
    omega = rasterize_set(square, Ball((0, 0), 2))
    with pytest.raises(EmptyInnerPlateError):
        variational_capacity(square, NodeSet.empty(square), omega)
    with pytest.raises(InadmissibleCondenserError):
        variational_capacity(square, omega, E)
    with pytest.raises(NoBoundaryError):
        variational_capacity(square, E, NodeSet.full(square))


@pytest.mark.parametrize("kwargs", [dict(p=1.0), dict(p=math.inf), dict(tol=0), dict(stencil="hex"),
                                    dict(eps_factor=1.5), dict(linear_solver="qr")])
def test_solver_config_validation(kwargs):
    with pytest.raises(InputError):
        SolverConfig(**kwargs)


def test_potential_and_superlevels(square):
    E = rasterize_set(square, Ball((0, 0), 1))
    omega = rasterize_set(square, Ball((0, 0), 2))
    u = capacitary_potential(square, E, omega)
    assert np.all((u.values >= 0) & (u.values <= 1))
    assert np.all(u.values[E.mask] == 1) and np.all(u.values[~omega.mask] == 0)
    assert u.values.flags.writeable is False
    assert superlevel_set(u, 1.0).is_empty
    assert superlevel_set(u, 1.0, strict=False) == E
    s = superlevel_set(u, 0.5)
    assert E <= s <= omega
    for M in (0.0, -0.1, 1.5):
        with pytest.raises(InvalidLevelError):
            superlevel_set(u, M)


def test_nested_plates_are_monotone(square):
    omega = rasterize_set(square, Ball((0, 0), 2))
    small = variational_capacity(square, rasterize_set(square, Ball((0, 0), 0.5)), omega).value
    big = variational_capacity(square, rasterize_set(square, Ball((0, 0), 1)), omega).value
    assert small < big


def test_sobolev_bracket(square):
    B = ball_nodes(square, (0.0, 0.0), 0.5)
    res = sobolev_capacity(square, B)
    assert res.warnings == []
    mu = square.measure[B.mask].sum()
    # u = 1 on E is admissible for the mass term alone
    assert res.value >= mu
    omega = ball_nodes(square, (0.0, 0.0), 1.5)
    u = capacitary_potential(square, B, omega).values
    upper = dirichlet_energy(square, u, 2) + float(square.measure @ u ** 2)
    assert res.value <= upper + 1e-9
    assert sobolev_capacity(square, NodeSet.empty(square)).value == 0.0


def test_sobolev_p3_is_consistent(square):
    B = ball_nodes(square, (0.0, 0.0), 0.5)
    res = sobolev_capacity(square, B, SolverConfig(p=3))
    assert res.converged
    u = res.potential.values
    total = dirichlet_energy(square, u, 3) + float(square.measure @ np.abs(u) ** 3)
    assert res.value == pytest.approx(total)


def test_truncation_warning(square):
    edge = ball_nodes(square, (2.25, 0.0), 0.3)
    assert "truncation-unsafe" in sobolev_capacity(square, edge).warnings
    inner = ball_nodes(square, (0.0, 0.0), 0.5)
    assert truncation_margin(square, inner) == pytest.approx(2.25 - 0.4375)
    assert truncation_margin(square, NodeSet.empty(square)) == math.inf
