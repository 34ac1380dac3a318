import math

import numpy as np
import pytest

from capdens.capacity import SolverConfig
from capdens.density import (
    DensityParams,
    collection_density,
    density_ratio,
    density_scan,
    scan_centers,
    sobolev_density_scan,
)
from capdens.errors import BallOutOfBoxError, InputError, InvalidCollectionMemberError
from capdens.space import (
    EuclideanBox,
    LatticeBalls,
    NodeSet,
    SlitSpace,
    ball_nodes,
    build_graph,
    rasterize_set,
)


@pytest.fixture(scope="module")
def plane():
    return build_graph(EuclideanBox(((-3, 3), (-3, 3))), h=1 / 8)


def test_full_and_empty_sets(plane):
    params = DensityParams(r=0.5, centers=((0, 0), (1, 1)))
    full = density_scan(plane, NodeSet.full(plane), params)
    assert np.allclose(full.ratios, 1.0)
    empty = density_scan(plane, NodeSet.empty(plane), params)
    assert empty.minimum == 0.0
    assert np.all(empty.ratios == 0.0)


def test_concentric_half_ball(plane):
    E = ball_nodes(plane, (0.0, 0.0), 0.5)
    rec = density_ratio(plane, E, (0.0, 0.0), DensityParams(r=1.0))
    # log(2r / r) / log(2r / (r/2)) for the radial harmonic condenser
    assert rec.ratio == pytest.approx(math.log(2) / math.log(4), abs=0.05)
    assert 0 < rec.numerator < rec.denominator


def test_ratio_in_unit_interval(plane):
    E = rasterize_set(plane, LatticeBalls(0.5, 0.1))
    scan = density_scan(plane, E, DensityParams(r=0.5, stride=0.5))
    assert np.all((scan.ratios >= 0) & (scan.ratios <= 1 + 1e-12))
    assert scan.minimum == scan.argmin.ratio


def test_ball_out_of_box(plane):
    with pytest.raises(BallOutOfBoxError):
        density_ratio(plane, NodeSet.full(plane), (2.5, 0.0), DensityParams(r=0.5))
    params = DensityParams(r=0.5, centers=((0, 0), (2.5, 0)))
    with pytest.raises(BallOutOfBoxError):
        density_scan(plane, NodeSet.full(plane), params)
    scan = density_scan(plane, NodeSet.full(plane), params, skip_errors=True)
    assert len(scan.records) == 1 and len(scan.skipped) == 1


def test_default_centers_fit(plane):
    params = DensityParams(r=0.5)
    nodes = scan_centers(plane, params)
    x = plane.coords[nodes]
    assert np.all(np.abs(x) <= 3 - 1 - plane.h + 1e-12)
    assert np.all(np.mod(plane.lattice[nodes], 4) == 0)
    with pytest.raises(InputError):
        scan_centers(plane, DensityParams(r=5.0))


@pytest.mark.parametrize("kwargs", [dict(r=0), dict(r=1, tau=1), dict(r=1, metric="taxicab"),
                                    dict(r=1, stride=-1)])
def test_params_validation(kwargs):
    with pytest.raises(InputError):
        DensityParams(**kwargs)


def test_adversarial_centers_only_lower_the_minimum():
    space = SlitSpace(n=2, j_max=1)
    g = build_graph(space, box=((0, 8), (-4, 4)), h=1 / 8)
    E = NodeSet(g, g.coords[:, 1] < 0)
    # (4, 0) is off the stride-1.5 sub-lattice
    base = DensityParams(r=1.0, stride=1.5)
    adv = DensityParams(r=1.0, stride=1.5, adversarial=True)
    plain, worst = density_scan(g, E, base), density_scan(g, E, adv)
    assert len(worst.records) == len(plain.records) + 1
    assert worst.minimum <= plain.minimum


def test_threads_do_not_change_results(plane):
    E = rasterize_set(plane, LatticeBalls(0.5, 0.1))
    params = DensityParams(r=0.5, stride=1.0)
    one = density_scan(plane, E, params)
    many = density_scan(plane, E, params, threads=4)
    assert one.ratios.tolist() == many.ratios.tolist()


def test_inner_metric_scan(plane):
    E = NodeSet(plane, plane.coords[:, 0] > 0)
    inner = density_ratio(plane, E, (0.0, 0.0), DensityParams(r=1.0, metric="inner"))
    ambient = density_ratio(plane, E, (0.0, 0.0), DensityParams(r=1.0))
    assert 0.5 < inner.ratio < 1
    assert inner.ratio == pytest.approx(ambient.ratio, abs=0.02)


def test_collection_density(plane):
    U = ball_nodes(plane, (0.0, 0.0), 0.5)
    star = ball_nodes(plane, (0.0, 0.0), 1.0)
    scan = collection_density(plane, NodeSet.full(plane), [(U, star)])
    assert scan.minimum == pytest.approx(1.0)
    with pytest.raises(InvalidCollectionMemberError):
        collection_density(plane, NodeSet.full(plane), [(star, U)])
    with pytest.raises(InvalidCollectionMemberError):
        collection_density(plane, NodeSet.full(plane), [(NodeSet.empty(plane), star)])


def test_sobolev_density(plane):
    E = ball_nodes(plane, (0.0, 0.0), 0.25)
    scan = sobolev_density_scan(plane, E, 0.5, [(0, 0), (1, 1)], SolverConfig())
    assert scan.kind == "sobolev"
    assert scan.records[1].ratio == 0.0
    assert 0 < scan.records[0].ratio < 1
    full = sobolev_density_scan(plane, NodeSet.full(plane), 0.5, [(0, 0)])
    assert full.minimum == pytest.approx(1.0)
