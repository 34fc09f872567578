"""Sampling and injection of the experimental data uncertainties.

Three sources, each expressed in percent:

* ``uc``     fraction of pixels displaced by lens distortion, U(0.133, 0.7)
* ``ugamma`` relative fuel-length error from an angled placement, U(-1.319, 0.558)
* ``us``     manual-segmentation variance, U(0.56, 0.83)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_frame

UC_RANGE = (0.133, 0.7)
UGAMMA_RANGE = (-1.319, 0.558)
US_RANGE = (0.56, 0.83)

SOURCES = ("uc", "ugamma", "us")


@dataclass(frozen=True)
class PerturbationDraw:
    uc: float = 0.0
    ugamma: float = 0.0
    us: float = 0.0


@dataclass(frozen=True)
class GeometrySpec:
    y: float = 8.069    # true fuel length, cm
    L: float = 37.46    # specimen-to-camera distance, cm

    def __post_init__(self):
        if not (self.y > 0 and self.L > 0):
            raise ValueError("y and L must be positive")

    @property
    def beta(self) -> float:
        """Angle to the end of a correctly placed specimen, radians."""
        return math.atan(self.y / (2.0 * self.L))


def normalize_enabled(enabled) -> frozenset:
    """Accept a mapping ``{source: bool}`` or an iterable of source names."""
    if isinstance(enabled, dict):
        names = {k for k, v in enabled.items() if v}
        bad = set(enabled) - set(SOURCES)
    else:
        names = set(enabled)
        bad = names - set(SOURCES)
    if bad:
        raise ValueError(f"unknown uncertainty source(s): {sorted(bad)}")
    return frozenset(names)


def sample_draw(rng: np.random.Generator, enabled) -> PerturbationDraw:
    """Draw one (uc, ugamma, us) triple; disabled sources are exactly 0.

    All three uniforms are always consumed, in the order ugamma, uc, us, so
    the same stream yields the same values for every case selection.
    """
    on = normalize_enabled(enabled)
    ugamma = rng.uniform(*UGAMMA_RANGE)
    uc = rng.uniform(*UC_RANGE)
    us = rng.uniform(*US_RANGE)
    return PerturbationDraw(uc=uc if "uc" in on else 0.0,
                            ugamma=ugamma if "ugamma" in on else 0.0,
                            us=us if "us" in on else 0.0)


def distortion_map(shape: tuple[int, int], uc: float, rng: np.random.Generator) -> np.ndarray:
    """Per-pixel Bernoulli(uc/100) map of distorted pixels."""
    if uc < 0 or uc > 100:
        raise ValueError(f"uc must lie in [0, 100] percent, got {uc}")
    return rng.random(shape) < uc / 100.0


def apply_distortion(frame, uc: float, rng: np.random.Generator) -> np.ndarray:
    """Zero every channel of a random subset of pixels.

    Each pixel is distorted independently with probability ``uc/100``, so the
    distorted-pixel count is Binomial(H*W, uc/100).
    """
    frame = as_frame(frame)
    hit = distortion_map(frame.shape[:2], uc, rng)
    out = frame.copy()
    out[hit] = 0
    return out


def gamma_to_error(gamma: float, geom: GeometrySpec = GeometrySpec()) -> float:
    """Perceived-length error in percent for a placement angle in degrees."""
    if abs(gamma) >= 90:
        raise ValueError("|gamma| must be below 90 degrees")
    g = math.radians(gamma)
    return 100.0 * (math.cos(g) + math.tan(geom.beta) * math.sin(g) - 1.0)


def pixel_density(mask, y: float) -> float:
    """Fuel length in pixels (column extent of the mask) per cm."""
    cols = np.flatnonzero(np.asarray(mask, dtype=bool).any(axis=0))
    if cols.size == 0:
        raise ValueError("mask contains no fuel pixels")
    return (cols[-1] - cols[0] + 1) / y


def shift_locations(ugamma: float, rho: float, y: float, width: int) -> tuple[int, int]:
    """Strip bounds of the angle shift, ordered so that ``lo <= hi``.

    The floors are applied to ``mid -/+ shift/2`` exactly as in the strip
    algorithm; for negative shifts the two bounds swap roles.
    """
    mid = width // 2
    shift = ugamma / 100.0 * y * rho
    loc1 = math.floor(mid - shift / 2.0)
    loc2 = math.floor(mid + shift / 2.0)
    return min(loc1, loc2), max(loc1, loc2)


def apply_angle_shift(frame, ugamma: float, rho: float, y: float) -> np.ndarray:
    """Move the right fuel boundary by ``ugamma*y/100*rho`` pixels.

    Positive `ugamma` duplicates the central strip after the middle column and
    truncates on the right; negative `ugamma` removes the strip, stitches the
    halves and pads the right edge with zero (background) columns.  Frame
    dimensions are preserved.
    """
    frame = as_frame(frame)
    W = frame.shape[1]
    if ugamma == 0:
        return frame.copy()
    lo, hi = shift_locations(ugamma, rho, y, W)
    if lo < 0 or hi >= W:
        raise ValueError(f"shift strip [{lo}:{hi}] escapes the frame width {W}")
    n = hi - lo
    if n == 0:
        return frame.copy()
    mid = W // 2
    if ugamma > 0:
        strip = frame[:, lo:hi]
        return np.concatenate([frame[:, :mid], strip, frame[:, mid:W - n]], axis=1)
    pad = np.zeros((frame.shape[0], n, 3), dtype=frame.dtype)
    return np.concatenate([frame[:, :lo], frame[:, hi:], pad], axis=1)
