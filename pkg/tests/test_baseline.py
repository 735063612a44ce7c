import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from skimage.draw import circle_perimeter

from conftest import one_ball
from voidinspect.assemble import AssemblyParams, finalize_voids, measure
from voidinspect.baseline import (BaselineParams, baseline_detect, bridge_edges, chain_endpoints,
                                  pair_endpoints)
from voidinspect.edges import EdgeMask, classify_contours, fill_closed
from voidinspect.pipeline import prepare_ball
from voidinspect.raster import crop_ball
from voidinspect.segment import BallRegion

SHAPE = (41, 41)
BALL = BallRegion((20.0, 20.0), 19.0)


def circle_edges(r=8, gap=0):
    """Bresenham circle around the crop centre with ``gap`` consecutive pixels removed."""
    m = np.zeros(SHAPE, bool)
    rr, cc = circle_perimeter(20, 20, r)
    m[rr, cc] = True
    if gap:
        # drop the pixels closest to angle 0 (the right-hand side)
        around = np.argsort(np.abs(np.arctan2(rr - 20, cc - 20)), kind="stable")[:gap]
        m[rr[around], cc[around]] = False
    return EdgeMask(m, np.zeros(SHAPE))


def test_closed_only_matches_closed_path():
    edges = circle_edges()
    crop = np.full(SHAPE, 90, np.uint8)
    rep = baseline_detect(crop, edges, BALL)
    fill = fill_closed(classify_contours(edges), SHAPE)
    ref = measure(finalize_voids([], fill, SHAPE, AssemblyParams()), BALL, SHAPE)
    assert rep.total_void_area == ref.total_void_area > 0
    assert [r.pixels.tolist() for r in rep.regions] == [r.pixels.tolist() for r in ref.regions]


def test_small_gap_bridged():
    edges = circle_edges(gap=2)
    assert not classify_contours(edges).closed
    rep = baseline_detect(np.full(SHAPE, 90, np.uint8), edges, BALL)
    full = baseline_detect(np.full(SHAPE, 90, np.uint8), circle_edges(), BALL)
    assert len(rep.regions) == 1
    assert abs(rep.total_void_area - full.total_void_area) <= 4


def test_wide_gap_not_bridged():
    edges = circle_edges(gap=9)
    rep = baseline_detect(np.full(SHAPE, 90, np.uint8), edges, BALL, BaselineParams(max_join_distance=5))
    assert rep.regions == [] and rep.void_percentage == 0.0


def test_zero_distance_is_closed_only():
    edges = circle_edges(gap=2)
    assert np.array_equal(bridge_edges(edges, BaselineParams(0)), edges.mask)
    assert baseline_detect(np.full(SHAPE, 90, np.uint8), edges, BALL, BaselineParams(0)).regions == []


def test_params():
    assert BaselineParams().max_join_distance == 5
    with pytest.raises(ValueError):
        BaselineParams(-1)


def test_endpoints_of_segment():
    m = np.zeros((10, 10), bool)
    m[4, 2:8] = True
    assert sorted(map(tuple, chain_endpoints(m).tolist())) == [(2, 4), (7, 4)]


def test_pairing_is_mutual_nearest():
    ends = np.array([[0, 0], [2, 0], [3, 0], [20, 0]])
    pairs = pair_endpoints(ends, 5)
    assert pairs == [(1, 2)]
    assert pair_endpoints(ends, 0) == []


def test_baseline_on_clean_ball():
    img, _, ball = one_ball(())
    work = prepare_ball(crop_ball(img, ball), ball)
    rep = baseline_detect(work.crop, work.edges, ball, origin=work.origin, region=work.disk)
    assert rep.void_percentage == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(0, 8))
@settings(max_examples=40, deadline=None)
def test_bridging_never_deletes_edges(seed, dist):
    rng = np.random.default_rng(seed)
    m = rng.random((24, 24)) < 0.15
    out = bridge_edges(EdgeMask(m, np.zeros(m.shape)), BaselineParams(dist))
    assert (out | ~m).all()
