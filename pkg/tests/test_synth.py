import numpy as np
import pytest
from scipy import ndimage

from patchbank import (
    DefectConfig,
    GenerationError,
    PlacementError,
    ShapeMask,
    SynthSample,
    bezier_curve_points,
    derive_rng,
    fuse_defect,
    gen_bezier_blob,
    gen_bezier_clump,
    gen_bezier_scar,
    gen_cutpaste_fill,
    gen_noise_fill,
    gen_rect_shape,
    generate_samples,
    label_for,
    make_sample,
    place_defect,
)
from patchbank.synth import SHAPE_KINDS, gen_shape, _draw_polyline, _tight_bbox

from oracles import bezier_point_scalar


# ---------------------------------------------------------------- curves


def test_bezier_endpoints_are_exact():
    ctrl = [(0.25, 0.75), (2.0, 1.0), (3.5, -0.5)]
    curve = bezier_curve_points(ctrl, 7)
    assert tuple(curve[0]) == ctrl[0]
    assert tuple(curve[-1]) == ctrl[-1]


def test_bezier_straight_segment_midpoint():
    curve = bezier_curve_points([(0.0, 0.0), (3.0, 1.0)], 3)
    assert tuple(curve[1]) == (1.5, 0.5)


def test_bezier_matches_scalar_oracle():
    rng = np.random.default_rng(11)
    for n in (2, 3, 5, 8):
        ctrl = rng.uniform(-5, 5, size=(n, 2))
        curve = bezier_curve_points(ctrl, 9)
        for i in range(9):
            want = bezier_point_scalar(ctrl, i / 8)
            assert curve[i, 0] == pytest.approx(want[0], abs=1e-12)
            assert curve[i, 1] == pytest.approx(want[1], abs=1e-12)


def test_bezier_input_validation():
    with pytest.raises(ValueError):
        bezier_curve_points([(0.0, 0.0)], 5)
    with pytest.raises(ValueError):
        bezier_curve_points([(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)], 5)
    with pytest.raises(ValueError):
        bezier_curve_points([(0.0, 0.0), (1.0, 1.0)], 1)


# ---------------------------------------------------------------- labels


def test_label_taxonomy():
    assert label_for("bezier_blob", "noise") == 1
    assert label_for("bezier_blob", "cutpaste") == 2
    assert label_for("bezier_scar", "noise") == 3
    assert label_for("bezier_scar", "cutpaste") == 4
    assert label_for("bezier_clump", "noise") == 5
    assert label_for("bezier_clump", "cutpaste") == 6
    # rectangle baselines sit outside the 7-class default taxonomy
    assert label_for("rect", "noise") == 7
    assert label_for("rect", "cutpaste") == 8
    assert label_for("rect_scar", "noise") == 9
    assert label_for("rect_scar", "cutpaste") == 10


# ---------------------------------------------------------------- config


def test_defect_config_validation():
    DefectConfig()  # defaults are self-consistent
    with pytest.raises(ValueError):
        DefectConfig(shape_kind="triangle")
    with pytest.raises(ValueError):
        DefectConfig(fill_kind="checker")
    with pytest.raises(ValueError):
        DefectConfig(fuse_mode="poisson")
    with pytest.raises(ValueError):
        DefectConfig(area_range=(0.0, 0.1))  # zero-area lower bound
    with pytest.raises(ValueError):
        DefectConfig(area_range=(0.3, 0.2))
    with pytest.raises(ValueError):
        DefectConfig(area_range=(0.5, 1.5))
    with pytest.raises(ValueError):
        DefectConfig(scar_aspect_range=(0.5, 3.0))  # below 1:1
    with pytest.raises(ValueError):
        DefectConfig(blend_range=(0.0, 0.5))
    with pytest.raises(ValueError):
        DefectConfig(noise_mean=300.0)
    with pytest.raises(ValueError):
        DefectConfig(noise_fluctuation=-1.0)
    with pytest.raises(ValueError):
        DefectConfig(control_points=(1, 5))
    with pytest.raises(ValueError):
        DefectConfig(control_points=(6, 4))
    with pytest.raises(ValueError):
        DefectConfig(normal_prob=1.5)


# ------------------------------------------------------------ shape mask


def test_shape_mask_invariants():
    m = np.zeros((5, 6), np.uint8)
    m[1:3, 2:5] = 1
    s = ShapeMask.from_mask(m)
    assert s.bbox == (2, 1, 3, 2)
    assert s.area == 6
    assert s.cropped().shape == (2, 3)
    assert s.cropped().all()
    with pytest.raises(ValueError):
        ShapeMask.from_mask(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        ShapeMask(5, 6, m, (0, 0, 6, 5))  # loose box
    with pytest.raises(ValueError):
        ShapeMask(4, 4, m, (2, 1, 3, 2))  # wrong dims


def test_synth_sample_label_mask_consistency():
    img = np.zeros((4, 4), np.uint8)
    empty = np.zeros((4, 4), np.uint8)
    full = np.ones((4, 4), np.uint8)
    SynthSample(img, empty, 0)
    SynthSample(img, full, 3)
    with pytest.raises(ValueError):
        SynthSample(img, full, 0)  # normal label with set mask
    with pytest.raises(ValueError):
        SynthSample(img, empty, 2)  # defect label with empty mask
    with pytest.raises(ValueError):
        SynthSample(img, np.zeros((3, 4), np.uint8), 0)


# ------------------------------------------------------------ generators


def test_blob_area_in_range_and_deterministic():
    cfg = DefectConfig(area_range=(0.01, 0.06))
    total = 64 * 64
    for seed in range(50):
        m = gen_bezier_blob(cfg, np.random.default_rng(seed), (64, 64))
        assert 0.01 <= m.area / total <= 0.06, seed
    a = gen_bezier_blob(cfg, np.random.default_rng(5), (64, 64))
    b = gen_bezier_blob(cfg, np.random.default_rng(5), (64, 64))
    assert np.array_equal(a.mask, b.mask)


def test_blob_infeasible_range_errors():
    cfg = DefectConfig(area_range=(0.999, 1.0))
    with pytest.raises(GenerationError):
        gen_bezier_blob(cfg, np.random.default_rng(0), (64, 64))


def test_scar_aspect_and_area():
    cfg = DefectConfig(area_range=(0.005, 0.02), scar_aspect_range=(2.0, 6.0))
    total = 128 * 128
    for seed in range(50):
        m = gen_bezier_scar(cfg, np.random.default_rng(seed), (128, 128))
        x, y, w, h = m.bbox
        long_side, short_side = max(w, h), min(w, h)
        assert 2.0 <= long_side / short_side <= 6.0, seed
        assert 0.005 <= m.area / total <= 0.02, seed
        # the box is tight around the stroke: it spans the full canvas
        assert (w, h) == (m.width, m.height)


def test_scar_degenerate_square_aspect():
    cfg = DefectConfig(area_range=(0.002, 0.02), scar_aspect_range=(1.0, 1.0))
    for seed in range(10):
        m = gen_bezier_scar(cfg, np.random.default_rng(seed), (100, 100))
        assert m.bbox[2] == m.bbox[3], seed


def test_polyline_width_one_is_a_thin_line():
    pts = np.array([[0.0, 0.0], [7.0, 0.0]])
    mask = _draw_polyline(pts, 1, 8, [1])
    assert mask.sum() == 8
    assert _tight_bbox(mask) == (0, 0, 8, 1)


def test_clump_splits_into_pieces():
    cfg = DefectConfig(area_range=(0.005, 0.03))
    total = 128 * 128
    for seed in range(12):
        m = gen_bezier_clump(cfg, np.random.default_rng(seed), (128, 128))
        assert ndimage.label(m.mask)[1] >= 2, seed
        assert 0.005 <= m.area / total <= 0.03, seed
    a = gen_bezier_clump(cfg, np.random.default_rng(3), (128, 128))
    b = gen_bezier_clump(cfg, np.random.default_rng(3), (128, 128))
    assert np.array_equal(a.mask, b.mask)


def test_rect_is_solid_and_area_in_range():
    cfg = DefectConfig(area_range=(0.01, 0.06))
    total = 64 * 64
    for seed in range(50):
        m = gen_rect_shape(cfg, np.random.default_rng(seed), (64, 64))
        assert m.cropped().all() and m.area == m.bbox[2] * m.bbox[3]
        assert 0.01 <= m.area / total <= 0.06, seed


def test_rect_single_pixel_area():
    cfg = DefectConfig(area_range=(0.01, 0.01))
    for seed in range(5):
        m = gen_rect_shape(cfg, np.random.default_rng(seed), (10, 10))
        assert m.mask.shape == (1, 1) and m.area == 1


def test_rect_scar_rounding_case():
    # 10:1 aspect at ~100 px on a 100x100 frame rounds to a 3-wide bar
    cfg = DefectConfig(area_range=(0.009, 0.011), scar_aspect_range=(10.0, 10.0))
    for seed in range(5):
        m = gen_rect_shape(cfg, np.random.default_rng(seed), (100, 100), scar=True)
        x, y, w, h = m.bbox
        assert min(w, h) == 3 and 29 <= max(w, h) <= 34, (seed, m.bbox)
        assert 90 <= m.area <= 110


def test_generators_respect_bounds():
    cfg = DefectConfig(area_range=(0.0005, 0.002))
    m = gen_bezier_blob(cfg, np.random.default_rng(1), (256, 256), bounds=(20, 20))
    assert m.height <= 20 and m.width <= 20
    cfg = DefectConfig(area_range=(0.01, 0.02))
    with pytest.raises(GenerationError):
        gen_bezier_blob(cfg, np.random.default_rng(1), (256, 256), bounds=(5, 5))


def test_gen_shape_dispatch():
    cfg = DefectConfig()
    for kind in SHAPE_KINDS:
        m = gen_shape(kind, cfg, np.random.default_rng(0), (128, 128))
        assert m.area > 0
    with pytest.raises(ValueError):
        gen_shape("disk", cfg, np.random.default_rng(0), (128, 128))


# ----------------------------------------------------------------- fills


def test_noise_fill_constant_when_fluctuation_zero():
    shape = ShapeMask.from_mask(np.ones((4, 6), np.uint8))
    cfg = DefectConfig(noise_mean=71.0, noise_fluctuation=0.0)
    patch = gen_noise_fill(shape, cfg, np.random.default_rng(0))
    assert patch.shape == (4, 6)
    assert (patch == 71).all()


def test_noise_fill_statistics_and_clamping():
    shape = ShapeMask.from_mask(np.ones((250, 400), np.uint8))
    cfg = DefectConfig(noise_mean=128.0, noise_fluctuation=128.0)
    patch = gen_noise_fill(shape, cfg, np.random.default_rng(1))
    assert patch.dtype == np.uint8
    assert patch.min() >= 0 and patch.max() <= 255
    assert abs(patch.mean() - 128.0) < 3.0
    again = gen_noise_fill(shape, cfg, np.random.default_rng(1))
    assert np.array_equal(patch, again)


def test_noise_fill_channels():
    shape = ShapeMask.from_mask(np.ones((3, 5), np.uint8))
    patch = gen_noise_fill(shape, DefectConfig(), np.random.default_rng(2), channels=3)
    assert patch.shape == (3, 5, 3)


def test_cutpaste_fill_windows_of_donor():
    shape = ShapeMask.from_mask(np.ones((4, 5), np.uint8))
    donor = np.full((10, 10), 9, np.uint8)
    patch = gen_cutpaste_fill(shape, donor, np.random.default_rng(0))
    assert patch.shape == (4, 5) and (patch == 9).all()
    # unique donor values pin down the crop window exactly
    donor = np.arange(100, dtype=np.int32).reshape(10, 10)
    for seed in range(50):
        patch = gen_cutpaste_fill(shape, donor, np.random.default_rng(seed))
        v = int(patch[0, 0])
        y, x = divmod(v, 10)
        assert np.array_equal(patch, donor[y : y + 4, x : x + 5]), seed
    with pytest.raises(ValueError):
        gen_cutpaste_fill(shape, np.zeros((3, 10), np.uint8), np.random.default_rng(0))


# ------------------------------------------------------------- placement


def test_place_single_pixel_saliency():
    shape = ShapeMask.from_mask(np.ones((1, 1), np.uint8))
    sal = np.zeros((12, 12), np.uint8)
    sal[5, 7] = 1
    for seed in range(5):
        assert place_defect(shape, sal, np.random.default_rng(seed)) == (7, 5)


def test_place_containment_in_half_frame():
    m = np.zeros((7, 7), np.uint8)
    m[2:5, 1:6] = 1
    m[3, 3] = 0  # non-rectangular shape exercises the pixel check
    shape = ShapeMask.from_mask(m)
    sal = np.zeros((40, 40), np.uint8)
    sal[:, :20] = 1
    rng = np.random.default_rng(0)
    for _ in range(500):
        x, y = place_defect(shape, sal, rng)
        placed = np.zeros_like(sal)
        bx, by, bw, bh = shape.bbox
        placed[y : y + bh, x : x + bw] = shape.cropped()
        assert not (placed & ~sal).any()


def test_place_without_saliency_uses_frame():
    shape = ShapeMask.from_mask(np.ones((3, 3), np.uint8))
    rng = np.random.default_rng(1)
    for _ in range(100):
        x, y = place_defect(shape, None, rng, image_shape=(8, 10))
        assert 0 <= x <= 7 and 0 <= y <= 5
    with pytest.raises(ValueError):
        place_defect(shape, None, rng)


def test_place_covers_all_feasible_offsets():
    shape = ShapeMask.from_mask(np.ones((1, 1), np.uint8))
    sal = np.ones((4, 4), np.uint8)
    rng = np.random.default_rng(2)
    seen = {place_defect(shape, sal, rng) for _ in range(600)}
    assert len(seen) == 16


def test_place_errors():
    shape = ShapeMask.from_mask(np.ones((3, 3), np.uint8))
    with pytest.raises(PlacementError):
        place_defect(shape, np.zeros((10, 10), np.uint8), np.random.default_rng(0))
    small = np.zeros((10, 10), np.uint8)
    small[4, 4] = 1
    with pytest.raises(PlacementError):
        place_defect(shape, small, np.random.default_rng(0))
    # feasibility can vanish even when the saliency bbox is large enough
    sparse = np.zeros((20, 20), np.uint8)
    sparse[0, 0] = sparse[19, 19] = 1
    with pytest.raises(PlacementError):
        place_defect(shape, sparse, np.random.default_rng(0))
    with pytest.raises(PlacementError):
        place_defect(ShapeMask.from_mask(np.ones((5, 5))), None,
                     np.random.default_rng(0), image_shape=(4, 8))


# ---------------------------------------------------------------- fusing


def test_fuse_leaves_outside_pixels_untouched():
    m = np.ones((3, 3), np.uint8)
    m[1, 1] = 0  # hole stays background
    shape = ShapeMask.from_mask(m)
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    fill = np.full((3, 3), 255, np.uint8)
    out = fuse_defect(img, fill, shape, (2, 4), "paste")
    assert out[5, 3] == img[5, 3]  # the hole
    touched = np.zeros((8, 8), bool)
    touched[4:7, 2:5] = m.astype(bool)
    assert np.array_equal(out[~touched], img[~touched])
    assert (out[touched] == 255).all()


def test_blend_beta_one_equals_paste():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(10, 10), dtype=np.uint8)
    fill = rng.integers(0, 256, size=(4, 4), dtype=np.uint8)
    shape = ShapeMask.from_mask(np.ones((4, 4), np.uint8))
    a = fuse_defect(img, fill, shape, (1, 2), "paste")
    b = fuse_defect(img, fill, shape, (1, 2), "blend", beta=1.0)
    assert np.array_equal(a, b)


def test_blend_arithmetic_rounds_half_up():
    shape = ShapeMask.from_mask(np.ones((1, 1), np.uint8))
    img = np.full((2, 2), 100, np.uint8)
    out = fuse_defect(img, np.full((1, 1), 200, np.uint8), shape, (0, 0), "blend", 0.5)
    assert out[0, 0] == 150
    out = fuse_defect(img, np.full((1, 1), 101, np.uint8), shape, (0, 0), "blend", 0.5)
    assert out[0, 0] == 101  # 100.5 rounds up
    img0 = np.zeros((1, 1), np.uint8)
    out = fuse_defect(img0, np.ones((1, 1), np.uint8), shape, (0, 0), "blend", 0.5)
    assert out[0, 0] == 1


def test_fuse_color_image_with_flat_fill():
    img = np.zeros((6, 6, 3), np.uint8)
    shape = ShapeMask.from_mask(np.ones((2, 2), np.uint8))
    out = fuse_defect(img, np.full((2, 2), 40, np.uint8), shape, (1, 1), "paste")
    assert (out[1:3, 1:3] == 40).all()
    assert out[0].sum() == 0


def test_fuse_validation():
    shape = ShapeMask.from_mask(np.ones((2, 2), np.uint8))
    img = np.zeros((4, 4), np.uint8)
    fill = np.zeros((2, 2), np.uint8)
    with pytest.raises(ValueError):
        fuse_defect(img, fill, shape, (0, 0), "overlay")
    with pytest.raises(ValueError):
        fuse_defect(img, fill, shape, (0, 0), "blend", beta=0.0)
    with pytest.raises(ValueError):
        fuse_defect(img, fill, shape, (0, 0), "blend", beta=1.5)
    with pytest.raises(PlacementError):
        fuse_defect(img, fill, shape, (3, 0), "paste")
    with pytest.raises(PlacementError):
        fuse_defect(img, fill, shape, (-1, 0), "paste")
    with pytest.raises(ValueError):
        fuse_defect(img, np.zeros((3, 3), np.uint8), shape, (0, 0), "paste")


# --------------------------------------------------------------- samples


def test_make_sample_normal_path():
    img = np.arange(256, dtype=np.uint8).reshape(16, 16)
    cfg = DefectConfig(normal_prob=1.0)
    s = make_sample(img, None, cfg, np.random.default_rng(0))
    assert s.label == 0
    assert np.array_equal(s.image, img)
    assert not s.mask.any()


def test_make_sample_deterministic():
    rng = np.random.default_rng(77)
    img = rng.integers(0, 256, size=(96, 96), dtype=np.uint8)
    cfg = DefectConfig(seed=5)
    a = make_sample(img, None, cfg, derive_rng(5, 3))
    b = make_sample(img, None, cfg, derive_rng(5, 3))
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.mask, b.mask)
    assert a.label == b.label


def test_make_sample_changes_only_masked_pixels():
    rng = np.random.default_rng(13)
    img = rng.integers(0, 256, size=(96, 96), dtype=np.uint8)
    for i in range(10):
        s = make_sample(img, None, DefectConfig(), derive_rng(0, i))
        changed = img != s.image
        assert not (changed & (s.mask == 0)).any()
        assert s.label in range(1, 7)


def test_make_sample_respects_saliency():
    rng = np.random.default_rng(14)
    img = rng.integers(0, 256, size=(96, 96), dtype=np.uint8)
    sal = np.zeros((96, 96), np.uint8)
    sal[10:80, 20:90] = 1
    for i in range(20):
        s = make_sample(img, sal, DefectConfig(), derive_rng(1, i))
        assert not (s.mask & ~sal).any()


def test_make_sample_covers_all_default_labels():
    rng = np.random.default_rng(15)
    img = rng.integers(0, 256, size=(96, 96), dtype=np.uint8)
    cfg = DefectConfig(normal_prob=1.0 / 7.0)
    labels = {make_sample(img, None, cfg, derive_rng(2, i)).label for i in range(200)}
    assert labels == set(range(7))


def test_make_sample_rect_labels():
    rng = np.random.default_rng(16)
    img = rng.integers(0, 256, size=(96, 96), dtype=np.uint8)
    s = make_sample(img, None, DefectConfig(shape_kind="rect", fill_kind="noise"),
                    derive_rng(3, 0))
    assert s.label == 7
    s = make_sample(img, None, DefectConfig(shape_kind="rect_scar", fill_kind="cutpaste"),
                    derive_rng(3, 1))
    assert s.label == 10


def test_make_sample_input_validation():
    with pytest.raises(ValueError):
        make_sample(np.zeros(5, np.uint8), None, DefectConfig(), derive_rng(0, 0))
    img = np.zeros((32, 32), np.uint8)
    with pytest.raises(PlacementError):
        make_sample(img, np.zeros((32, 32), np.uint8), DefectConfig(), derive_rng(0, 0))


def test_derive_rng_streams():
    assert derive_rng(1, 2).random() == derive_rng(1, 2).random()
    assert derive_rng(1, 2).random() != derive_rng(1, 3).random()
    assert derive_rng(2, 2).random() != derive_rng(1, 2).random()


# ------------------------------------------------------------ batch runs


def test_generate_samples_cycles_images():
    images = [np.full((24, 24), v, np.uint8) for v in (50, 100, 150)]
    cfg = DefectConfig(normal_prob=1.0)
    out = list(generate_samples(images, None, cfg, 7))
    assert len(out) == 7
    for i, s in enumerate(out):
        assert s.image[0, 0] == (50, 100, 150)[i % 3]


def test_generate_samples_deterministic():
    rng = np.random.default_rng(21)
    images = [rng.integers(0, 256, size=(64, 64), dtype=np.uint8) for _ in range(2)]
    cfg = DefectConfig(seed=9)
    a = list(generate_samples(images, None, cfg, 6))
    b = list(generate_samples(images, None, cfg, 6))
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.image, sb.image)
        assert np.array_equal(sa.mask, sb.mask)
        assert sa.label == sb.label


def test_generate_samples_cutpaste_donor_is_next_image():
    images = [np.zeros((32, 32), np.uint8), np.full((32, 32), 200, np.uint8)]
    cfg = DefectConfig(shape_kind="rect", fill_kind="cutpaste", fuse_mode="paste",
                       area_range=(0.05, 0.1))
    s = next(iter(generate_samples(images, None, cfg, 1)))
    assert (s.image[s.mask == 1] == 200).all()
    # explicit donors override the cycle
    donors = [np.full((32, 32), 77, np.uint8)]
    s = next(iter(generate_samples(images, None, cfg, 1, donors=donors)))
    assert (s.image[s.mask == 1] == 77).all()


def test_generate_samples_validation():
    assert list(generate_samples([np.zeros((8, 8), np.uint8)], None,
                                 DefectConfig(normal_prob=1.0), 0)) == []
    with pytest.raises(ValueError):
        list(generate_samples([], None, DefectConfig(), 1))
    with pytest.raises(ValueError):
        list(generate_samples([np.zeros((8, 8), np.uint8)], None, DefectConfig(), -1))
