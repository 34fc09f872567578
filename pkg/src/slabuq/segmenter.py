"""Stochastic segmenters, Monte-Carlo-dropout aggregation and entropy maps.

A backend is any object with a ``predict_sample`` method::

    predict_sample(frame, rng, *, frame_id=None, sample_idx=0) -> ndarray (H, W)

returning one stochastic forward pass (fuel probability per pixel).  Backends
may also define ``predict_samples(frame, rngs, *, frame_id=None)`` returning a
``(T, H, W)`` stack; :func:`mcd_predict` uses it when present.

Entropies are in nats.  Dropout follows the ``W = w * diag(z)`` form with
``z ~ Bernoulli(keep)`` and ``keep = 1 - p_dropout`` (0.5 by default), without
inverted-dropout rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, special

from .core import DataError, RngStream, as_frame, as_probmap, as_uncmap, load_probmap

LN2 = math.log(2.0)


@dataclass(frozen=True)
class McdResult:
    mean: np.ndarray
    um: np.ndarray
    samples_used: int


def entropy_map(p) -> np.ndarray:
    """Binary predictive entropy ``-[p ln p + (1-p) ln(1-p)]`` with 0 ln 0 = 0."""
    p = as_probmap(p)
    return special.entr(p) + special.entr(1.0 - p)


def compose_umask(um, p_fuel, us: float) -> np.ndarray:
    """Complete uncertainty map: model-form entropy plus ``p_fuel * us/100``."""
    um = as_uncmap(um)
    p_fuel = as_probmap(p_fuel)
    if um.shape != p_fuel.shape:
        raise ValueError(f"shape mismatch: {um.shape} vs {p_fuel.shape}")
    if us < 0:
        raise ValueError("us must be nonnegative")
    return um + p_fuel * (us / 100.0)


def mcd_predict(backend, frame, T: int = 20, rng: RngStream | None = None,
                frame_id=None) -> McdResult:
    """Average `T` stochastic passes and take the entropy of the mean.

    Sample ``t`` draws from the substream ``rng.child(t)``; the mean is
    accumulated in float64 in sample order, so the result does not depend on
    how the passes were scheduled.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    rng = rng if rng is not None else RngStream(0)
    frame = as_frame(frame)
    gens = [rng.child(t).generator() for t in range(T)]
    if hasattr(backend, "predict_samples"):
        stack = np.asarray(backend.predict_samples(frame, gens, frame_id=frame_id),
                           dtype=np.float64)
    else:
        stack = np.stack([np.asarray(backend.predict_sample(frame, g, frame_id=frame_id,
                                                            sample_idx=t), dtype=np.float64)
                          for t, g in enumerate(gens)])
    if stack.shape != (T,) + frame.shape[:2]:
        raise DataError(f"backend returned shape {stack.shape}, expected {(T,) + frame.shape[:2]}")
    total = np.zeros(frame.shape[:2])
    for sample in stack:
        total += sample
    mean = np.clip(total / T, 0.0, 1.0)
    return McdResult(mean=mean, um=entropy_map(mean), samples_used=T)


# ---------------------------------------------------------------------------
# reference backend

_CENTERS = np.array([0.0, 0.3, 0.6, 0.9])
_BAND_WEIGHTS = np.array([-3.0, -1.0, 3.0, -3.0])
_BAND_WIDTHS = (0.10, 0.14)
_SCALES = (1, 3, 5)


def _default_weights() -> np.ndarray:
    # one band per (scale, width, center), then the row-position feature
    n_bands = len(_SCALES) * len(_BAND_WIDTHS)
    return np.concatenate([np.tile(_BAND_WEIGHTS, n_bands), [0.5]])


class ReferenceSegmenter:
    """Per-pixel logistic model over simple features, with feature dropout.

    Features are Gaussian intensity bands (two widths) of the pixel value
    and of its 3x3 and 5x5 local means, plus the normalized row index (0 at the top, 1 at
    the bottom).  Each stochastic pass keeps each feature with probability
    ``1 - p_dropout``; the bias is never dropped.

    It is a stand-in for a trained network: cheap, deterministic under a
    seed, and uncertain where its local context mixes fuel with background
    or flame, which is what the downstream uncertainty math needs.
    """

    n_features = len(_SCALES) * len(_BAND_WIDTHS) * len(_CENTERS) + 1

    def __init__(self, weights=None, bias: float = -1.0, p_dropout: float = 0.5):
        w = _default_weights() if weights is None else np.asarray(weights, dtype=np.float64)
        if w.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} weights, got shape {w.shape}")
        if not 0.0 <= p_dropout <= 1.0:
            raise ValueError("p_dropout must lie in [0, 1]")
        self.weights = w
        self.bias = float(bias)
        self.p_dropout = float(p_dropout)

    @property
    def keep(self) -> float:
        return 1.0 - self.p_dropout

    def features(self, frame) -> np.ndarray:
        """Feature stack of shape ``(F, H*W)``."""
        frame = as_frame(frame)
        H, W = frame.shape[:2]
        intensity = frame.astype(np.float64).mean(axis=2) / 255.0
        out = np.empty((self.n_features, H * W))
        i = 0
        for size in _SCALES:
            src = intensity if size == 1 else ndimage.uniform_filter(intensity, size, mode="nearest")
            src = src.ravel()
            for width in _BAND_WIDTHS:
                for c in _CENTERS:
                    np.exp(-0.5 * ((src - c) / width) ** 2, out=out[i])
                    i += 1
        out[i] = np.repeat(np.linspace(0.0, 1.0, H), W)
        return out

    def draw_keep(self, rng: np.random.Generator) -> np.ndarray:
        return rng.random(self.n_features) < self.keep

    def probability(self, features: np.ndarray, z: np.ndarray, shape) -> np.ndarray:
        logits = (self.weights * z) @ features + self.bias
        return special.expit(logits).reshape(shape)

    def predict_sample(self, frame, rng: np.random.Generator, *, frame_id=None,
                       sample_idx: int = 0) -> np.ndarray:
        frame = as_frame(frame)
        return self.probability(self.features(frame), self.draw_keep(rng), frame.shape[:2])

    def predict_samples(self, frame, rngs, *, frame_id=None) -> np.ndarray:
        frame = as_frame(frame)
        H, W = frame.shape[:2]
        Z = np.stack([self.draw_keep(g) for g in rngs])        # (T, F)
        logits = (self.weights * Z) @ self.features(frame)      # (T, H*W)
        logits += self.bias
        return special.expit(logits, out=logits).reshape(len(rngs), H, W)

    def predict_deterministic(self, frame) -> np.ndarray:
        """All dropout variables forced to 1."""
        frame = as_frame(frame)
        return self.probability(self.features(frame), np.ones(self.n_features), frame.shape[:2])


# ---------------------------------------------------------------------------
# playback backend

class PlaybackBackend:
    """Replays precomputed per-sample probability maps.

    Directory layout: ``<root>/<frame_id>/<sample_idx>.pmap`` (with the usual
    ``.json`` sidecars), where both ids are integers.  Frame content is
    ignored; the maps are looked up by ``(frame_id, sample_idx)`` only.
    """

    def __init__(self, root=None, maps: dict | None = None):
        self._maps: dict[tuple[int, int], np.ndarray] = {}
        if maps is not None:
            for (fid, sid), m in maps.items():
                self._maps[int(fid), int(sid)] = as_probmap(m)
        if root is not None:
            root = Path(root)
            if not root.is_dir():
                raise DataError(f"playback directory {root} does not exist")
            for fdir in root.iterdir():
                if not fdir.is_dir():
                    continue
                try:
                    fid = int(fdir.name)
                except ValueError:
                    continue
                for f in fdir.glob("*.pmap"):
                    self._maps[fid, int(f.stem)] = load_probmap(f)

    @property
    def keys(self):
        return sorted(self._maps)

    def predict_sample(self, frame, rng, *, frame_id=None, sample_idx: int = 0) -> np.ndarray:
        if frame_id is None:
            raise DataError("playback backend needs a frame_id")
        try:
            return self._maps[int(frame_id), int(sample_idx)]
        except KeyError:
            raise DataError(f"no playback map for frame {frame_id}, sample {sample_idx}") from None


def write_playback(root, maps_per_frame) -> Path:
    """Write ``maps_per_frame[k][t]`` into the playback directory layout."""
    from .core import save_probmap

    root = Path(root)
    for k, samples in enumerate(maps_per_frame):
        fdir = root / f"{k:04d}"
        fdir.mkdir(parents=True, exist_ok=True)
        for t, m in enumerate(samples):
            save_probmap(m, fdir / f"{t}.pmap")
    return root
