import numpy as np
import pytest

from slabuq.synth import SynthConfig, fuel_mask, generate_sequence, surface_heights_px


def column_heights(mask):
    # independent oracle: count fuel pixels per column by looping
    H, W = mask.shape
    return np.array([sum(1 for r in range(H) if mask[r, c]) for c in range(W)])


def test_zero_rate_masks_identical():
    _, masks = generate_sequence(SynthConfig(r_star=0.0, n_frames=5))
    for m in masks[1:]:
        np.testing.assert_array_equal(m, masks[0])


def test_drop_per_frame():
    cfg = SynthConfig(r_star=0.75, dt=0.32, mm_per_pixel=0.1)
    h = surface_heights_px(cfg)
    # 0.75 * 0.32 / 0.1 = 2.4 px per frame before rounding
    drops = -np.diff(h)
    assert set(drops) <= {2, 3}
    assert np.isclose((h[0] - h[-1]) / (len(h) - 1), 2.4, atol=1.0 / (len(h) - 1))


def test_ground_truth_heights_match_render(synth_default):
    cfg, _, masks = synth_default
    expected = surface_heights_px(cfg)
    mid = (cfg.fuel_start + cfg.fuel_stop) // 2
    for m, h in zip(masks, expected):
        assert column_heights(m)[mid] == h


def test_monotone_non_increasing(synth_default):
    _, _, masks = synth_default
    sums = [m.sum() for m in masks]
    assert all(b <= a for a, b in zip(sums, sums[1:]))
    for a, b in zip(masks, masks[1:]):
        assert not np.any(b & ~a)


def test_fuel_span_and_slant(synth_default):
    cfg, _, masks = synth_default
    cols = np.flatnonzero(masks[0].any(axis=0))
    assert cols[0] == cfg.fuel_start and cols[-1] == cfg.fuel_stop - 1
    h = column_heights(masks[0])
    lead = h[cfg.fuel_start:cfg.fuel_start + 10]
    assert np.all(np.diff(lead) > 0)   # the leading face rises
    assert h[cfg.fuel_stop - 1] == surface_heights_px(cfg)[0]


def test_clutter_scales_with_saturation():
    counts = {}
    for level in ("low", "mid", "high"):
        cfg = SynthConfig(saturation_level=level, noise_seed=3)
        seq, masks = generate_sequence(cfg)
        f, m = seq.frames[0][..., 0], masks[0]
        top = m.argmax(axis=0)
        above = np.arange(cfg.height)[:, None] < np.where(m.any(axis=0), top, cfg.height)
        counts[level] = int(np.count_nonzero((f > 0) & above & ~m))
    assert counts["low"] < counts["mid"] < counts["high"]


def test_clutter_keeps_gap(synth_default):
    _, seq, masks = synth_default
    for f, m in zip(seq.frames, masks):
        lit = (f[..., 0] > 0) & ~m
        rr, cc = np.nonzero(lit)
        fr, fc = np.nonzero(m)
        # chessboard distance from every clutter pixel to the fuel is > 2
        for r, c in list(zip(rr, cc))[:200]:
            d = np.maximum(np.abs(fr - r), np.abs(fc - c)).min()
            assert d > 2


def test_background_is_zero(synth_default):
    cfg, seq, masks = synth_default
    f = seq.frames[0][..., 0]
    assert not f[:, :cfg.fuel_start].any()
    assert not f[:, cfg.fuel_stop:].any()
    assert f[masks[0]].min() > 0


def test_seeded_determinism():
    a, _ = generate_sequence(SynthConfig(noise_seed=5, n_frames=3))
    b, _ = generate_sequence(SynthConfig(noise_seed=5, n_frames=3))
    np.testing.assert_array_equal(a.frames, b.frames)


@pytest.mark.parametrize("kw", [
    {"r_star": -1.0},
    {"r_star": 1.0, "h0": 5.6, "n_frames": 20},  # 5.6 - 1.0*0.32*19 < 0
    {"saturation_level": "extreme"},
    {"n_frames": 1},
    {"h0": 7.0},  # 70 px > 64 rows
])
def test_invalid_configs(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_fuel_mask_flat_top():
    cfg = SynthConfig()
    m = fuel_mask(cfg, 30)
    assert column_heights(m)[250] == 30
    assert m[-1, cfg.fuel_start + 30:cfg.fuel_stop].all()
