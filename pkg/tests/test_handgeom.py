import math

import numpy as np
import pytest

from gesturecare.imaging import BinaryMask, Image
from gesturecare.handgeom import (
    DEFAULT_FINGERTIP_PARAMS,
    EmptyMask,
    FingertipParams,
    HandGeometry,
    centroid_and_radius,
    chamfer_distance,
    detect_fingertips,
    draw_overlay,
    trace_contour,
)
from gesturecare.segmentation import (
    DEFAULT_SKIN_MODEL,
    classify_skin,
    extract_roi,
    fill_holes,
    min_area_default,
    morph_open,
)
from gesturecare.synth import HandParams, canonical_finger_angles, render_hand
from oracles import boundary_set, chamfer_oracle, random_single_component


def mask_of(rows):
    return BinaryMask(np.array(rows, dtype=bool))


def disc_mask(h, w, cx, cy, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return BinaryMask((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r)


def test_trace_single_pixel():
    bits = np.zeros((3, 3), dtype=bool)
    bits[1, 1] = True
    assert trace_contour(BinaryMask(bits)) == [(1, 1)]


def test_trace_2x2_square():
    bits = np.zeros((4, 4), dtype=bool)
    bits[0:2, 0:2] = True
    contour = trace_contour(BinaryMask(bits))
    assert len(contour) == 4
    assert set(contour) == {(0, 0), (1, 0), (1, 1), (0, 1)}


def test_trace_3x3_square_clockwise():
    bits = np.zeros((5, 5), dtype=bool)
    bits[0:3, 0:3] = True
    assert trace_contour(BinaryMask(bits)) == [
        (0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1),
    ]


def test_trace_empty_mask():
    with pytest.raises(EmptyMask):
        trace_contour(BinaryMask(np.zeros((3, 3), dtype=bool)))


def test_trace_diagonal_pair_stays_closed():
    bits = np.zeros((3, 3), dtype=bool)
    bits[0, 0] = bits[1, 1] = True
    contour = trace_contour(BinaryMask(bits))
    assert set(contour) == {(0, 0), (1, 1)}
    ring = contour + [contour[0]]
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        assert max(abs(x0 - x1), abs(y0 - y1)) == 1


def test_trace_visits_exactly_the_boundary_set():
    rng = np.random.default_rng(8)
    for _ in range(40):
        bits = random_single_component(rng, 24, 24)
        contour = trace_contour(BinaryMask(bits))
        assert set(contour) == boundary_set(bits)


def test_trace_consecutive_points_are_moore_neighbors():
    rng = np.random.default_rng(9)
    for _ in range(20):
        bits = random_single_component(rng, 20, 20)
        contour = trace_contour(BinaryMask(bits))
        ring = contour + [contour[0]]
        for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
            assert max(abs(x0 - x1), abs(y0 - y1)) <= 1


def test_chamfer_matches_oracle():
    rng = np.random.default_rng(10)
    for _ in range(25):
        bits = rng.random((12, 12)) < rng.uniform(0.3, 0.9)
        got = chamfer_distance(BinaryMask(bits))
        assert np.array_equal(got, chamfer_oracle(bits))


def test_chamfer_full_3x3():
    got = chamfer_distance(BinaryMask(np.ones((3, 3), dtype=bool)))
    assert got.tolist() == [[3, 3, 3], [3, 6, 3], [3, 3, 3]]


def test_centroid_and_radius_disc():
    mask = disc_mask(100, 100, 50, 50, 10)
    (cx, cy), radius = centroid_and_radius(mask)
    assert abs(cx - 50) <= 0.5 and abs(cy - 50) <= 0.5
    assert 9.0 <= radius <= 11.0


def test_centroid_and_radius_3x3():
    # by hand: ring pixels chamfer 3, center 6, so the radius is 6/3
    (cx, cy), radius = centroid_and_radius(BinaryMask(np.ones((3, 3), dtype=bool)))
    assert (cx, cy) == (1.0, 1.0)
    assert radius == 2.0


def test_centroid_empty_mask():
    with pytest.raises(EmptyMask):
        centroid_and_radius(BinaryMask(np.zeros((2, 2), dtype=bool)))


def test_palm_radius_close_to_rendered_palm():
    sample = render_hand(
        HandParams(palm_center=(160.0, 70.0), palm_radius=40.0,
                   finger_angles=canonical_finger_angles(5)),
        (320, 240),
    )
    mask = classify_skin(DEFAULT_SKIN_MODEL, sample.image)
    roi, _ = extract_roi(morph_open(mask, 1), min_area_default(320, 240))
    _, radius = centroid_and_radius(fill_holes(roi))
    assert abs(radius - 40.0) / 40.0 <= 0.10


def _hand_geometry(sample):
    mask = classify_skin(DEFAULT_SKIN_MODEL, sample.image)
    roi, bbox = extract_roi(morph_open(mask, 1), min_area_default(320, 240))
    roi = fill_holes(roi)
    contour = trace_contour(roi)
    centroid, radius = centroid_and_radius(roi)
    tips = detect_fingertips(contour, centroid, radius)
    return tips, bbox, centroid, radius


def test_detect_no_fingers_on_disc():
    mask = disc_mask(80, 80, 40, 40, 20)
    contour = trace_contour(mask)
    centroid, radius = centroid_and_radius(mask)
    assert detect_fingertips(contour, centroid, radius) == []


def test_detect_five_finger_hand_within_3px():
    sample = render_hand(
        HandParams(palm_center=(160.0, 70.0), palm_radius=40.0,
                   finger_angles=canonical_finger_angles(5)),
        (320, 240),
    )
    tips, bbox, _, _ = _hand_geometry(sample)
    assert len(tips) == 5
    for tip in tips:
        gx, gy = tip.pos[0] + bbox[0], tip.pos[1] + bbox[1]
        err = min(math.hypot(gx - tx, gy - ty) for tx, ty in sample.truth_tips)
        assert err <= 3.0


def test_detect_two_finger_angles_within_5_degrees():
    sample = render_hand(
        HandParams(palm_center=(160.0, 70.0), palm_radius=40.0,
                   finger_angles=(75.0, 105.0)),
        (320, 240),
    )
    tips, _, _, _ = _hand_geometry(sample)
    assert len(tips) == 2
    for tip, truth in zip(tips, (75.0, 105.0)):
        assert abs(tip.theta - truth) <= 5.0


def test_detect_translation_equivariance():
    base = render_hand(
        HandParams(palm_center=(120.0, 70.0), palm_radius=40.0,
                   finger_angles=(60.0, 90.0, 120.0)),
        (320, 240),
    )
    mask = classify_skin(DEFAULT_SKIN_MODEL, base.image).bits
    dx, dy = 31, 17
    shifted = np.zeros_like(mask)
    shifted[dy:, dx:] = mask[:-dy, :-dx]

    def geo(bits):
        m = BinaryMask(bits)
        contour = trace_contour(m)
        centroid, radius = centroid_and_radius(m)
        return centroid, radius, detect_fingertips(contour, centroid, radius)

    (c0, r0, t0), (c1, r1, t1) = geo(mask), geo(shifted)
    assert c1[0] == pytest.approx(c0[0] + dx, abs=1e-9)
    assert c1[1] == pytest.approx(c0[1] + dy, abs=1e-9)
    assert r1 == r0
    assert len(t0) == len(t1) == 3
    for a, b in zip(t0, t1):
        assert (b.pos[0] - a.pos[0], b.pos[1] - a.pos[1]) == (dx, dy)
        assert b.r == pytest.approx(a.r, abs=1e-9)
        assert b.theta == pytest.approx(a.theta, abs=1e-9)


def test_detect_cap_and_threshold_and_determinism():
    rng = np.random.default_rng(12)
    params = FingertipParams()
    for _ in range(10):
        count = int(rng.integers(0, 6))
        sample = render_hand(
            HandParams(
                palm_center=(160.0 + int(rng.integers(-10, 10)), 70.0),
                palm_radius=float(rng.uniform(36, 44)),
                finger_angles=tuple(a + rng.uniform(-5, 5) for a in canonical_finger_angles(count)),
            ),
            (320, 240),
        )
        mask = classify_skin(DEFAULT_SKIN_MODEL, sample.image)
        roi, _ = extract_roi(morph_open(mask, 1), min_area_default(320, 240))
        contour = trace_contour(roi)
        centroid, radius = centroid_and_radius(roi)
        tips = detect_fingertips(contour, centroid, radius, params)
        assert len(tips) <= 5
        assert all(t.r >= params.ratio_threshold * radius * 0.9 for t in tips)
        assert tips == detect_fingertips(contour, centroid, radius, params)
        assert [t.theta for t in tips] == sorted(t.theta for t in tips)


def test_detect_rejects_bad_args():
    with pytest.raises(EmptyMask):
        detect_fingertips([], (0, 0), 1.0)
    with pytest.raises(ValueError):
        detect_fingertips([(0, 0)], (0, 0), 0.0)


def test_overlay_pixel_layout():
    from gesturecare.handgeom import Fingertip

    img = Image(np.zeros((21, 21, 3), dtype=np.uint8))
    geom = HandGeometry(
        centroid=(10.0, 10.0),
        palm_radius=3.0,
        fingertips=(Fingertip(pos=(4, 4), r=8.49, theta=225.0),),
    )
    out = draw_overlay(img, geom).data
    for k in range(-3, 4):
        assert out[4, 4 + k].tolist() == [255, 0, 0]
        assert out[4 + k, 4].tolist() == [255, 0, 0]
    for dx, dy in ((2, 0), (-2, 0), (0, 2), (0, -2), (2, 1), (1, 2)):
        assert out[10 + dy, 10 + dx].tolist() == [0, 255, 0]
    assert out[10, 10].tolist() == [0, 0, 0]  # ring leaves the center untouched


def test_overlay_clamps_at_borders():
    img = Image(np.zeros((5, 5, 3), dtype=np.uint8))
    from gesturecare.handgeom import Fingertip

    geom = HandGeometry(
        centroid=(0.0, 0.0),
        palm_radius=1.0,
        fingertips=(Fingertip(pos=(0, 0), r=1.0, theta=0.0),),
    )
    out = draw_overlay(img, geom)  # must not raise
    assert out.data[0, 0].tolist() == [255, 0, 0]
