import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voidinspect.raster import disk_mask
from voidinspect.segment import (DETECTED, INTERPOLATED, BallRegion, SegmentationError, SegmentationParams,
                                 adaptive_threshold, detect_circles, filter_by_radius_mode, interpolate_missing,
                                 segment_balls, slice_bounds, threshold_by_slices)
from voidinspect.synth import SynthSpec, generate


def brute_threshold(img, window, offset):
    """Per-pixel local mean over the window clipped to the image."""
    h, w = img.shape
    half = window // 2
    out = np.zeros(img.shape, dtype=bool)
    for y in range(h):
        for x in range(w):
            patch = img[max(y - half, 0):y + half + 1, max(x - half, 0):x + half + 1].astype(float)
            out[y, x] = img[y, x] < patch.mean() - offset
    return out


def test_params_validation():
    with pytest.raises(ValueError):
        SegmentationParams(threshold_window=4)
    with pytest.raises(ValueError):
        SegmentationParams(gap_factor=1.0)
    with pytest.raises(ValueError):
        SegmentationParams(slice_height=0)
    with pytest.raises(ValueError):
        BallRegion((1, 1), 0)
    with pytest.raises(ValueError):
        BallRegion((1, 1), 3, "guessed")


# -- threshold --------------------------------------------------------------

def test_uniform_image_empty_mask():
    assert not threshold_by_slices(np.full((50, 60), 100, np.uint8)).any()


def test_dark_disk_matches_brute_force_oracle():
    img = np.full((60, 60), 120, np.uint8)
    disk = disk_mask(img.shape, (30, 30), 12)
    img[disk] = 60
    got = threshold_by_slices(img)
    np.testing.assert_array_equal(got, brute_threshold(img, 31, 5))
    # foreground is the disk up to a one-pixel band at its rim
    band = disk ^ (disk_mask(img.shape, (30, 30), 11))
    assert not (got & ~disk).any()
    assert (disk & ~band <= got).all()


@given(st.integers(0, 2**32 - 1), st.sampled_from([3, 5, 9]), st.integers(0, 10))
@settings(max_examples=25, deadline=None)
def test_threshold_matches_oracle_random(seed, window, offset):
    img = np.random.default_rng(seed).integers(0, 256, (13, 11)).astype(np.uint8)
    np.testing.assert_array_equal(adaptive_threshold(img, window, offset), brute_threshold(img, window, offset))


def test_slicing_350x450():
    p = SegmentationParams()
    assert len(list(slice_bounds((350, 450), p))) == 4
    img = np.random.default_rng(1).integers(0, 256, (350, 450)).astype(np.uint8)
    out = threshold_by_slices(img, p)
    assert out.shape == (350, 450)
    # each slice is thresholded on its own
    np.testing.assert_array_equal(out[300:, 400:], adaptive_threshold(img[300:, 400:], 31, 5))


# -- circles ----------------------------------------------------------------

def test_empty_mask_no_circles():
    assert detect_circles(np.zeros((40, 40), bool), (10, 30)) == []


def test_min_radius_precondition():
    with pytest.raises(ValueError):
        detect_circles(np.zeros((10, 10), bool), (2, 5))


def test_filled_disk_found():
    mask = disk_mask((100, 100), (50, 50), 20)
    (ball,) = detect_circles(mask, (10, 30))
    assert abs(ball.center[0] - 50) <= 1 and abs(ball.center[1] - 50) <= 1
    assert abs(ball.radius - 20) <= 2
    assert ball.provenance == DETECTED


def test_two_disks_found():
    mask = disk_mask((100, 140), (35, 40), 15) | disk_mask((100, 140), (100, 60), 18)
    found = sorted(detect_circles(mask, (10, 30)), key=lambda b: b.center[0])
    assert len(found) == 2
    for b, (cx, cy, r) in zip(found, [(35, 40, 15), (100, 60, 18)]):
        assert np.hypot(b.center[0] - cx, b.center[1] - cy) <= 1
        assert abs(b.radius - r) <= 2


# -- radius mode ------------------------------------------------------------

def balls_with_radii(radii):
    return [BallRegion((10.0 * i, 0.0), r) for i, r in enumerate(radii)]


def test_radius_mode_example():
    balls = balls_with_radii([18, 19, 20, 21, 40])
    kept, hist = filter_by_radius_mode(balls, 4)
    assert kept == balls[:4]
    assert hist.mode_radius == 20 and hist.counts == {20.0: 4, 40.0: 1}


def test_radius_mode_all_equal():
    balls = balls_with_radii([9, 9, 9])
    assert filter_by_radius_mode(balls, 4)[0] == balls


def test_radius_mode_tie_goes_to_larger():
    balls = balls_with_radii([8, 8, 16, 16])
    kept, hist = filter_by_radius_mode(balls, 4)
    assert kept == balls[2:] and hist.mode_radius == 16


def test_radius_mode_empty():
    with pytest.raises(ValueError):
        filter_by_radius_mode([], 4)


@given(st.lists(st.floats(3, 60), min_size=1, max_size=20), st.integers(1, 8))
@settings(max_examples=60, deadline=None)
def test_radius_mode_subset_with_equal_bins(radii, bw):
    balls = balls_with_radii(radii)
    kept, hist = filter_by_radius_mode(balls, bw)
    assert kept and all(b in balls for b in kept)
    q = {np.floor(b.radius / bw + 0.5) * bw for b in kept}
    assert q == {hist.mode_radius}
    assert hist.counts[hist.mode_radius] == max(hist.counts.values())


# -- interpolation ----------------------------------------------------------

def test_single_gap_filled_at_midpoint():
    balls = [BallRegion((x, 5), 9) for x in (10, 30, 70)]
    out = interpolate_missing(balls)
    assert out[:3] == balls
    (new,) = out[3:]
    assert new.center == (50.0, 5.0) and new.radius == 9.0 and new.provenance == INTERPOLATED


def test_even_grid_unchanged():
    balls = [BallRegion((x, y), 9) for y in (10, 40) for x in (10, 30, 50)]
    assert interpolate_missing(balls) == balls


def test_double_gap_equal_spacing():
    balls = [BallRegion((0, 0), 9), BallRegion((20, 0), 9), BallRegion((81, 0), 9)]
    new = interpolate_missing(balls)[3:]
    assert [b.center[0] for b in new] == pytest.approx([20 + 61 / 3, 20 + 122 / 3])


def test_fewer_than_two_balls_warns():
    with pytest.warns(RuntimeWarning):
        assert interpolate_missing([BallRegion((1, 1), 3)]) == [BallRegion((1, 1), 3)]


@given(st.lists(st.integers(0, 6), min_size=2, max_size=7, unique=True), st.integers(15, 30))
@settings(max_examples=50, deadline=None)
def test_interpolation_only_appends(cols, pitch):
    cols = sorted(cols)
    balls = [BallRegion((10 + c * pitch, 20), 6) for c in cols]
    out = interpolate_missing(balls)
    assert out[:len(balls)] == balls
    assert all(b.provenance == INTERPOLATED for b in out[len(balls):])


# -- end to end -------------------------------------------------------------

def grid_truth(spec):
    return [spec.center(r, c) for r in range(spec.grid_rows) for c in range(spec.grid_cols)]


def test_full_grid():
    spec = SynthSpec(grid_rows=4, grid_cols=4, seed=7)
    img, _ = generate(spec)
    balls = segment_balls(img)
    assert len(balls) == 16 and all(b.provenance == DETECTED for b in balls)
    for b, (tx, ty) in zip(balls, grid_truth(spec)):
        assert abs(b.center[0] - tx) <= 1 and abs(b.center[1] - ty) <= 1


def test_erased_ball_interpolated():
    spec = SynthSpec(grid_rows=4, grid_cols=4, erased_balls=((2, 1),), seed=3)
    img, _ = generate(spec)
    balls = segment_balls(img)
    assert len(balls) == 16
    (interp,) = [b for b in balls if b.provenance == INTERPOLATED]
    tx, ty = spec.center(2, 1)
    assert np.hypot(interp.center[0] - tx, interp.center[1] - ty) <= 2


def test_two_erasures_in_a_row():
    spec = SynthSpec(grid_rows=2, grid_cols=6, erased_balls=((0, 1), (0, 3)), seed=5)
    img, _ = generate(spec)
    assert len(segment_balls(img)) == 12


def test_blank_image_errors():
    with pytest.raises(SegmentationError, match="no balls detected"):
        segment_balls(np.full((80, 80), 140, np.uint8))


def test_deterministic_and_offset_invariant():
    spec = SynthSpec(grid_rows=3, grid_cols=3, seed=11)
    img, _ = generate(spec)
    a = segment_balls(img)
    assert segment_balls(img.copy()) == a
    for c in (10, 50):
        assert segment_balls(img + np.uint8(c)) == a
