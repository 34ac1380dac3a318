import numpy as np
import pytest

from capdens.errors import BallOutOfBoxError, EmptySourceError, InadmissibleCondenserError, InputError
from capdens.predicates import (
    clearance_field,
    collection_member,
    corkscrew_profile,
    inner_approx_curve,
    john_lower_bound,
    neighborhood_set,
    path_john_constant,
    radius_ladder,
    stability_probe,
)
from capdens.space import Ball, EuclideanBox, NodeSet, ball_nodes, build_graph, rasterize_set


@pytest.fixture(scope="module")
def disk():
    g = build_graph(EuclideanBox(((-1.1, 1.1), (-1.1, 1.1))), h=1 / 32)
    return g, rasterize_set(g, Ball((0, 0), 1))


def test_clearance_of_disk(disk):
    g, U = disk
    delta = clearance_field(g, U)
    r = np.linalg.norm(g.coords, axis=1)
    assert np.all(delta[~U.mask] == 0)
    np.testing.assert_allclose(delta[U.mask], 1 - r[U.mask], atol=g.h)
    assert np.all(np.isinf(clearance_field(g, NodeSet.full(g))))
    with pytest.raises(EmptySourceError):
        clearance_field(g, NodeSet.empty(g))


def test_corkscrew_at_disk_center(disk):
    g, U = disk
    prof = corkscrew_profile(g, U, x_samples=[(0.0, 0.0)], radii=[0.25, 0.5])
    assert np.allclose(prof.kappas, 1.0)


def test_corkscrew_profile_bounds(disk):
    g, U = disk
    prof = corkscrew_profile(g, U, stride=0.25, r_range=(0.125, 1.0))
    assert np.all((prof.kappas >= 0) & (prof.kappas <= 1))
    assert all(U.mask[s[3]] for s in prof.samples)
    # a disk satisfies the corkscrew condition with kappa close to 1/2
    assert 0.4 < prof.kappa_min <= 0.55
    assert prof.worst[2] == prof.kappa_min


def test_corkscrew_errors(disk):
    g, U = disk
    with pytest.raises(InputError):
        corkscrew_profile(g, U, x_samples=[(0.0, 0.0)])
    with pytest.raises(InputError):
        corkscrew_profile(g, U, x_samples=[(1.09, 1.09)], radii=[0.5])


def test_radius_ladder():
    assert radius_ladder(1, 4, 2) == [1, 2, 4]
    with pytest.raises(InputError):
        radius_ladder(2, 1)


def test_john_disk(disk):
    g, U = disk
    est = john_lower_bound(g, U, (0.0, 0.0), resolution=1e-2)
    assert est.c[est.center] == 1.0
    assert 0.9 < est.c_min <= 1.0
    assert not est.unreachable.any()
    assert est.path[0] == est.argmin and est.path[-1] == est.center
    delta = clearance_field(g, U)
    # the certificate re-checks exactly
    assert path_john_constant(g, est.path, delta) == pytest.approx(est.c_min, rel=1e-12)
    for x in np.flatnonzero(U.mask)[::97]:
        assert path_john_constant(g, est.path_from(x), delta) >= est.c[x] - 1e-12


def test_john_disconnected():
    g = build_graph(EuclideanBox(((-2, 2), (-1, 1))), h=1 / 8)
    U = rasterize_set(g, Ball((-1, 0), 0.6)) | rasterize_set(g, Ball((1, 0), 0.6))
    est = john_lower_bound(g, U, (-1.0, 0.0), resolution=1e-2)
    assert est.c_min == 0.0
    assert est.unreachable[est.argmin]
    assert est.path_from(est.argmin) == []
    with pytest.raises(InputError):
        john_lower_bound(g, U, (0.0, 0.0))


def test_beta_neighbourhood_of_ball():
    g = build_graph(EuclideanBox(((-3, 3), (-3, 3))), h=1 / 16)
    B = ball_nodes(g, (0.0, 0.0), 1.0)
    nb = neighborhood_set(g, B, 0.5)
    r = np.linalg.norm(g.coords, axis=1)
    # diam = 2, so the neighbourhood is B(x, 2) up to the grid error
    assert np.all(nb.mask[r < 2 - 2 * g.h])
    assert not np.any(nb.mask[r > 2 + 2 * g.h])
    assert B <= nb
    with pytest.raises(InputError):
        neighborhood_set(g, B, 0.0)


def test_inner_approx_curve(disk):
    g, _ = disk
    omega = ball_nodes(g, (0.0, 0.0), 1.0)
    U = ball_nodes(g, (0.0, 0.0), 0.5)
    probe = inner_approx_curve(g, U, omega, [0.0, 0.1, 0.2, 0.6])
    assert probe.rows[0][2] == 1.0 and probe.rows[0][3] == 0.0
    assert probe.ratios[1] > probe.ratios[2]
    assert probe.rows[-1][4] == "empty-interior" and probe.rows[-1][3] == 1.0
    with pytest.raises(InadmissibleCondenserError):
        inner_approx_curve(g, omega, U, [0.1])


def test_collection_members():
    g = build_graph(EuclideanBox(((-3, 3), (-3, 3))), h=1 / 8)
    U, r = collection_member(g, "balls", (0.0, 0.0), 1.0)
    assert r == 1.0 and U == ball_nodes(g, (0.0, 0.0), 1.0)
    U, r = collection_member(g, "inner-balls", (0.0, 0.0), 1.0, gamma=1.25)
    assert r == pytest.approx(0.8)
    with pytest.raises(InputError):
        collection_member(g, "cubes", (0.0, 0.0), 1.0)


def test_stability_probe():
    g = build_graph(EuclideanBox(((-5, 5), (-5, 5))), h=1 / 8)
    probe = stability_probe(g, "balls", (0.0, 0.0), [1.0, 2.0], [0.0, 0.25])
    assert len(probe.rows) == 4 and probe.coverage == 2
    assert [row[3] for row in probe.rows if row[0] == 0.0] == [0.0, 0.0]
    phi = dict(((row[1], row[0]), row[3]) for row in probe.rows)
    # a fixed rho costs relatively less on the larger ball
    assert 0 < phi[2.0, 0.25] < phi[1.0, 0.25] < 1
    with pytest.raises(InputError):
        stability_probe(g, "balls", (0.0, 0.0), [2.0, 1.0], [0.1])
    with pytest.raises(InputError):
        stability_probe(g, "balls", (0.0, 0.0), [1.0], [0.1], tau=1.0)
    with pytest.raises(BallOutOfBoxError):
        stability_probe(g, "balls", (0.0, 0.0), [3.0], [0.1])
