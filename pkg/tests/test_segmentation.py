import numpy as np
import pytest

from gesturecare.imaging import BinaryMask, Image, WrongChannels
from gesturecare.segmentation import (
    DEFAULT_SKIN_MODEL,
    HandNotFound,
    SkinModel,
    TooFewSamples,
    SkinModelFormatError,
    classify_skin,
    connected_components,
    dilate,
    extract_roi,
    fill_holes,
    fit_skin_model,
    min_area_default,
    morph_open,
    skin_model_from_text,
    skin_model_to_text,
)
from oracles import flood_label_oracle, open_oracle, random_mask

from gesturecare.synth import HandParams, render_hand


def rgb(*pixels):
    return Image(np.array([list(pixels)], dtype=np.uint8))


def test_classify_skin_examples():
    assert classify_skin(DEFAULT_SKIN_MODEL, rgb((150, 90, 60))).bits.tolist() == [[True]]
    assert classify_skin(DEFAULT_SKIN_MODEL, rgb((60, 90, 150))).bits.tolist() == [[False]]
    black = Image(np.zeros((3, 3, 3), dtype=np.uint8))
    assert classify_skin(DEFAULT_SKIN_MODEL, black).count() == 0


def test_classify_skin_rejects_gray_input():
    with pytest.raises(WrongChannels):
        classify_skin(DEFAULT_SKIN_MODEL, Image(np.zeros((2, 2), dtype=np.uint8)))


def test_classify_skin_is_pixel_local():
    rng = np.random.default_rng(0)
    img = Image(rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8))
    mask = classify_skin(DEFAULT_SKIN_MODEL, img)
    perm = rng.permutation(8)
    permuted = classify_skin(DEFAULT_SKIN_MODEL, Image(img.data[perm]))
    assert np.array_equal(permuted.bits, mask.bits[perm])


def test_classify_skin_gain_invariant_decision():
    rng = np.random.default_rng(1)
    for _ in range(200):
        r = int(rng.integers(20, 120))
        g = int(rng.integers(10, r))
        b = int(rng.integers(0, g))
        a = int(rng.integers(1, 255 // r + 1))
        if DEFAULT_SKIN_MODEL.min_r_minus_g > a * (r - g):
            continue  # the scaled difference must still clear the threshold
        base = classify_skin(DEFAULT_SKIN_MODEL, rgb((r, g, b))).bits[0, 0]
        scaled = classify_skin(DEFAULT_SKIN_MODEL, rgb((a * r, a * g, a * b))).bits[0, 0]
        if DEFAULT_SKIN_MODEL.min_r_minus_g <= (r - g):
            assert base == scaled


def test_morph_open_removes_isolated_pixel():
    bits = np.zeros((7, 7), dtype=bool)
    bits[3, 3] = True
    assert morph_open(BinaryMask(bits), 1).count() == 0


def test_morph_open_preserves_wide_square():
    bits = np.zeros((9, 9), dtype=bool)
    bits[2:7, 2:7] = True
    assert morph_open(BinaryMask(bits), 1) == BinaryMask(bits)


def test_morph_open_removes_bridge_between_squares():
    bits = np.zeros((7, 13), dtype=bool)
    bits[1:6, 1:6] = True
    bits[1:6, 7:12] = True
    bits[3, 6] = True  # 1-pixel bridge
    opened = morph_open(BinaryMask(bits), 1)
    expected = BinaryMask(open_oracle(bits, 1))
    assert opened == expected
    assert not opened.bits[3, 6]
    assert opened.bits[2:5, 2:5].all() and opened.bits[2:5, 8:11].all()


def test_morph_open_matches_oracle_on_random_masks():
    rng = np.random.default_rng(2)
    for _ in range(60):
        bits = random_mask(rng, 16, 16, p=float(rng.uniform(0.2, 0.8)))
        radius = int(rng.integers(1, 3))
        assert np.array_equal(morph_open(BinaryMask(bits), radius).bits, open_oracle(bits, radius))


def test_morph_open_subset_of_dilation_and_idempotent():
    rng = np.random.default_rng(3)
    for _ in range(40):
        mask = BinaryMask(random_mask(rng, 20, 20))
        opened = morph_open(mask, 1)
        assert not (opened.bits & ~dilate(mask, 1).bits).any()
        assert morph_open(opened, 1) == opened


def test_components_diagonal_touch():
    bits = np.zeros((3, 3), dtype=bool)
    bits[0, 0] = bits[1, 1] = True
    regions, _ = connected_components(BinaryMask(bits))
    assert len(regions) == 1 and regions[0].area == 2


def test_components_separate_pixels():
    bits = np.zeros((1, 5), dtype=bool)
    bits[0, 0] = bits[0, 3] = True
    regions, _ = connected_components(BinaryMask(bits))
    assert len(regions) == 2


def test_components_match_flood_oracle():
    rng = np.random.default_rng(4)
    for _ in range(150):
        bits = random_mask(rng, 32, 32, p=float(rng.uniform(0.2, 0.8)))
        _, labels = connected_components(BinaryMask(bits))
        assert np.array_equal(labels, flood_label_oracle(bits))


def test_components_area_sum_and_bboxes():
    rng = np.random.default_rng(5)
    for _ in range(30):
        bits = random_mask(rng, 24, 24)
        regions, labels = connected_components(BinaryMask(bits))
        assert sum(r.area for r in regions) == bits.sum()
        for r in regions:
            ys, xs = np.nonzero(labels == r.label)
            assert (xs.min(), ys.min(), xs.max(), ys.max()) == r.bbox
            assert r.area == len(xs) <= (r.bbox[2] - r.bbox[0] + 1) * (r.bbox[3] - r.bbox[1] + 1)


def test_extract_roi_keeps_largest():
    bits = np.zeros((8, 8), dtype=bool)
    bits[0, 0:5] = True  # area 5
    bits[3:6, 3:6] = True  # area 9
    roi, bbox = extract_roi(BinaryMask(bits), 1)
    assert bbox == (3, 3, 5, 5)
    assert roi.count() == 9


def test_extract_roi_empty_mask():
    with pytest.raises(HandNotFound):
        extract_roi(BinaryMask(np.zeros((4, 4), dtype=bool)), 1)


def test_extract_roi_min_area_filter():
    bits = np.zeros((10, 10), dtype=bool)
    bits[2:7, 2:7] = True  # area 25
    with pytest.raises(HandNotFound):
        extract_roi(BinaryMask(bits), 100)


def test_extract_roi_tie_breaks_to_smaller_label():
    bits = np.zeros((3, 7), dtype=bool)
    bits[1, 1:3] = True  # first encountered
    bits[1, 4:6] = True
    roi, bbox = extract_roi(BinaryMask(bits), 1)
    assert bbox == (1, 1, 2, 1)


def test_extract_roi_area_equals_max_component():
    rng = np.random.default_rng(6)
    for _ in range(30):
        bits = random_mask(rng, 20, 20, p=0.4)
        mask = BinaryMask(bits)
        regions, _ = connected_components(mask)
        if not regions:
            continue
        roi, _ = extract_roi(mask, 1)
        assert roi.count() == max(r.area for r in regions)


def test_extract_roi_excludes_other_components_inside_bbox():
    bits = np.zeros((5, 5), dtype=bool)
    bits[0, 0] = bits[4, 4] = True
    bits[0, 4] = bits[4, 0] = True
    bits[1:4, 1:4] = True  # center square, area 9, bbox (1,1,3,3)
    roi, bbox = extract_roi(BinaryMask(bits), 1)
    assert bbox == (1, 1, 3, 3)
    assert roi.count() == 9


def test_fill_holes():
    bits = np.ones((5, 5), dtype=bool)
    bits[2, 2] = False  # enclosed hole
    assert fill_holes(BinaryMask(bits)).count() == 25
    open_pocket = np.ones((5, 5), dtype=bool)
    open_pocket[2, 2] = open_pocket[2, 3] = open_pocket[2, 4] = False  # reaches the edge
    assert fill_holes(BinaryMask(open_pocket)) == BinaryMask(open_pocket)


def test_min_area_default_scales_with_frame():
    assert min_area_default(320, 240) == 100
    assert min_area_default(4, 4) == 1


def test_fit_skin_model_constant_sample():
    model = fit_skin_model([(150, 90, 60)] * 100, quantile=0.05)
    assert model.r_lo == pytest.approx(0.495, abs=1e-9)
    assert model.r_hi == pytest.approx(0.505, abs=1e-9)
    assert model.g_lo == pytest.approx(0.295, abs=1e-9)
    assert model.g_hi == pytest.approx(0.305, abs=1e-9)
    assert model.require_order and model.min_r_minus_g == 0


def test_fit_skin_model_too_few_samples():
    with pytest.raises(TooFewSamples):
        fit_skin_model([(150, 90, 60)] * 5, quantile=0.05)


def test_fit_skin_model_bad_quantile():
    with pytest.raises(ValueError):
        fit_skin_model([(150, 90, 60)] * 20, quantile=0.7)


def _hand_pixels(seed, n_frames):
    """Skin pixels harvested from rendered hands, via the flat-background trick."""
    rng = np.random.default_rng(seed)
    pixels = []
    for _ in range(n_frames):
        params = HandParams(
            palm_center=(160.0 + rng.integers(-10, 10), 70.0 + rng.integers(-10, 10)),
            palm_radius=float(rng.uniform(36, 44)),
            finger_angles=(75.0, 105.0),
            gain=float(rng.uniform(0.7, 1.3)),
            noise_amp=2,
            seed=int(rng.integers(0, 2**63)),
        )
        sample = render_hand(params, (320, 240))
        img = sample.image.data
        bg = np.array(params.background_color)
        hand = np.abs(img.astype(int) - (params.gain * bg).round()).sum(axis=2) > 20
        pixels.append(img[hand])
    return np.concatenate(pixels)


def test_fit_skin_model_covers_held_out_pixels():
    train = _hand_pixels(seed=10, n_frames=8)
    held_out = _hand_pixels(seed=20, n_frames=8)
    model = fit_skin_model(train, quantile=0.05)
    img = Image(held_out.reshape(1, -1, 3))
    frac = classify_skin(model, img).count() / len(held_out)
    assert frac >= 0.99


def test_skin_model_text_layout_and_round_trip():
    text = skin_model_to_text(DEFAULT_SKIN_MODEL)
    assert text == "skinmodel 1\nr 0.36 0.52\ng 0.26 0.36\norder 1\nrminusg 12\n"
    assert skin_model_from_text(text) == DEFAULT_SKIN_MODEL


def test_skin_model_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        lo = float(rng.uniform(0, 0.5))
        glo = float(rng.uniform(0, 0.5))
        model = SkinModel(
            r_lo=lo,
            r_hi=lo + float(rng.uniform(0.01, 0.4)),
            g_lo=glo,
            g_hi=glo + float(rng.uniform(0.01, 0.4)),
            require_order=bool(rng.integers(0, 2)),
            min_r_minus_g=int(rng.integers(0, 40)),
        )
        assert skin_model_from_text(skin_model_to_text(model)) == model


def test_skin_model_parse_errors():
    with pytest.raises(SkinModelFormatError):
        skin_model_from_text("skinmodel 2\nr 0 1\ng 0 1\norder 1\nrminusg 0\n")
    with pytest.raises(SkinModelFormatError):
        skin_model_from_text("skinmodel 1\nr 0 1\ng 0 1\norder maybe\nrminusg 0\n")
    with pytest.raises(SkinModelFormatError):
        skin_model_from_text("skinmodel 1\nr 0 1\n")


def test_skin_model_validates_bounds():
    with pytest.raises(ValueError):
        SkinModel(r_lo=0.5, r_hi=0.4, g_lo=0.2, g_hi=0.3)
