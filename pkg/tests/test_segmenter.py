import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slabuq.core import DataError, RngStream, load_probmap
from slabuq.segmenter import (LN2, PlaybackBackend, ReferenceSegmenter, compose_umask,
                              entropy_map, mcd_predict, write_playback)

FRAME = np.zeros((4, 6, 3), np.uint8)


class ConstBackend:
    def __init__(self, value):
        self.value = value

    def predict_sample(self, frame, rng, *, frame_id=None, sample_idx=0):
        return np.full(frame.shape[:2], self.value)


class NoisyBackend:
    """Uses only its generator, so output reflects the substream it gets."""

    def predict_sample(self, frame, rng, *, frame_id=None, sample_idx=0):
        return rng.random(frame.shape[:2])


def test_entropy_values():
    assert entropy_map(np.array([[0.5]]))[0, 0] == pytest.approx(LN2, abs=1e-12)
    np.testing.assert_array_equal(entropy_map(np.array([[0.0, 1.0]])), [[0.0, 0.0]])
    p = 0.9
    assert entropy_map(np.array([[p]]))[0, 0] == pytest.approx(
        -(p * math.log(p) + (1 - p) * math.log(1 - p)), rel=1e-12)


def test_entropy_rejects_out_of_range():
    with pytest.raises(DataError):
        entropy_map(np.array([[1.2]]))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(0, 1)))
def test_entropy_symmetric_and_bounded(p):
    h = entropy_map(p)
    np.testing.assert_allclose(h, entropy_map(1 - p), atol=1e-12)
    assert np.all(h >= 0) and np.all(h <= LN2 + 1e-15)


def test_mcd_two_sample_example():
    maps = {(0, 0): np.full((4, 6), 0.2), (0, 1): np.full((4, 6), 0.8)}
    res = mcd_predict(PlaybackBackend(maps=maps), FRAME, T=2, frame_id=0)
    np.testing.assert_allclose(res.mean, 0.5)
    np.testing.assert_allclose(res.um, LN2, atol=1e-12)
    assert res.samples_used == 2


def test_mcd_constant_backend():
    res = mcd_predict(ConstBackend(1.0), FRAME, T=5)
    np.testing.assert_array_equal(res.mean, 1.0)
    np.testing.assert_array_equal(res.um, 0.0)


def test_mcd_mean_matches_manual_average():
    stream = RngStream(11)
    res = mcd_predict(NoisyBackend(), FRAME, T=7, rng=stream)
    manual = sum(stream.child(t).generator().random((4, 6)) for t in range(7)) / 7
    np.testing.assert_allclose(res.mean, manual, rtol=1e-15)


def test_mcd_deterministic_and_seed_sensitive():
    a = mcd_predict(NoisyBackend(), FRAME, T=3, rng=RngStream(1))
    b = mcd_predict(NoisyBackend(), FRAME, T=3, rng=RngStream(1))
    c = mcd_predict(NoisyBackend(), FRAME, T=3, rng=RngStream(2))
    np.testing.assert_array_equal(a.mean, b.mean)
    assert not np.array_equal(a.mean, c.mean)


def test_mcd_invalid_T():
    with pytest.raises(ValueError):
        mcd_predict(ConstBackend(0.5), FRAME, T=0)


def test_mcd_shape_checked():
    class Bad:
        def predict_sample(self, frame, rng, **kw):
            return np.zeros((2, 2))

    with pytest.raises(DataError):
        mcd_predict(Bad(), FRAME, T=1)


def test_compose_umask():
    um = np.array([[0.2]])
    out = compose_umask(um, np.array([[0.8]]), 0.7)
    assert out[0, 0] == pytest.approx(0.2 + 0.8 * 0.007)
    np.testing.assert_array_equal(compose_umask(um, np.array([[0.3]]), 0.0), um)
    with pytest.raises(ValueError):
        compose_umask(um, np.zeros((2, 2)), 0.5)
    with pytest.raises(ValueError):
        compose_umask(um, np.array([[0.5]]), -0.1)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(0, 1)), st.floats(0, 1),
       st.floats(0, 2), st.floats(0, 2))
def test_compose_linear_in_us(p, um0, a, b):
    um = np.full((3, 3), um0)
    lhs = compose_umask(um, p, a + b) - um
    rhs = (compose_umask(um, p, a) - um) + (compose_umask(um, p, b) - um)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_playback_layout(tmp_path):
    maps = [[np.full((4, 6), 0.1 * (t + 1)) for t in range(3)] for _ in range(2)]
    root = write_playback(tmp_path / "pb", maps)
    assert (root / "0001" / "2.pmap").exists()
    assert (root / "0001" / "2.json").exists()
    np.testing.assert_allclose(load_probmap(root / "0000" / "1.pmap"), 0.2, rtol=1e-7)
    backend = PlaybackBackend(root)
    assert backend.keys == [(f, t) for f in range(2) for t in range(3)]
    res = mcd_predict(backend, FRAME, T=3, frame_id=1)
    np.testing.assert_allclose(res.mean, 0.2, rtol=1e-6)


def test_playback_errors(tmp_path):
    backend = PlaybackBackend(maps={(0, 0): np.zeros((4, 6))})
    with pytest.raises(DataError):
        backend.predict_sample(FRAME, None)
    with pytest.raises(DataError):
        backend.predict_sample(FRAME, None, frame_id=3)
    with pytest.raises(DataError):
        PlaybackBackend(tmp_path / "missing")


# reference segmenter --------------------------------------------------------

def test_reference_separates_fuel_from_clutter(synth_default):
    cfg, seq, masks = synth_default
    seg = ReferenceSegmenter()
    p = seg.predict_deterministic(seq.frames[0])
    m = masks[0]
    interior = m & np.roll(m, 3, axis=0) & np.roll(m, -3, axis=0) \
        & np.roll(m, 3, axis=1) & np.roll(m, -3, axis=1)
    assert np.median(p[interior]) > 0.5
    assert np.median(p[:, :cfg.fuel_start - 5]) < 0.5
    assert (threshold := p >= 0.5)[m].mean() > 0.9 and threshold[~m].mean() < 0.05


def test_reference_zero_weights():
    seg = ReferenceSegmenter(weights=np.zeros(ReferenceSegmenter.n_features), bias=0.0)
    p = seg.predict_sample(FRAME, np.random.default_rng(0))
    np.testing.assert_array_equal(p, 0.5)


def test_reference_batched_matches_single(synth_default):
    _, seq, _ = synth_default
    seg = ReferenceSegmenter()
    frame = seq.frames[3]
    rngs = [RngStream(5).child(t).generator() for t in range(4)]
    batched = seg.predict_samples(frame, rngs)
    singles = [seg.predict_sample(frame, RngStream(5).child(t).generator()) for t in range(4)]
    np.testing.assert_allclose(batched, np.stack(singles), rtol=1e-12, atol=1e-15)


def test_reference_keep_rate():
    seg = ReferenceSegmenter(p_dropout=0.5)
    g = np.random.default_rng(0)
    z = np.stack([seg.draw_keep(g) for _ in range(4000)])
    assert abs(z.mean() - 0.5) < 4 * math.sqrt(0.25 / z.size)
    assert ReferenceSegmenter(p_dropout=0.0).draw_keep(g).all()


def test_reference_validation():
    with pytest.raises(ValueError):
        ReferenceSegmenter(weights=np.zeros(3))
    with pytest.raises(ValueError):
        ReferenceSegmenter(p_dropout=1.5)


def test_uncertainty_concentrates_at_boundary(synth_default):
    _, seq, masks = synth_default
    res = mcd_predict(ReferenceSegmenter(), seq.frames[0], T=20, rng=RngStream(0))
    m = masks[0]
    from scipy import ndimage
    edge = m ^ ndimage.binary_erosion(m, border_value=1)
    near = ndimage.binary_dilation(edge, iterations=2)
    assert res.um[near].mean() > 2 * res.um[~near].mean()
