"""Top-surface tracking and regression-rate estimation.

Rates are reported recession-positive: ``(h(t_k) - h(t_{k+1})) / dt`` is
positive while the fuel burns back, so values read as mm/s of fuel
consumed.

Heights are the vertical fuel extent at fixed station columns.  Heights
never grow in time (fuel does not regrow), which :func:`enforce_monotonic`
imposes before any rate is computed.  An interval that ends at height 0
belongs to a burned-out station and is left out of the average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_probmap, as_uncmap, threshold_mask


@dataclass(frozen=True)
class TrackConfig:
    calib_points: tuple[int, ...]
    mm_per_pixel: float
    dt: float

    def __post_init__(self):
        pts = tuple(int(c) for c in self.calib_points)
        if not pts:
            raise ValueError("calib_points must be non-empty")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("calib_points must be strictly increasing")
        if min(pts) < 0:
            raise ValueError("calib_points must be nonnegative column indices")
        if not (self.mm_per_pixel > 0 and self.dt > 0):
            raise ValueError("mm_per_pixel and dt must be positive")
        object.__setattr__(self, "calib_points", pts)


@dataclass(frozen=True)
class RateEstimate:
    r_hat: float
    r_plus: float
    r_minus: float
    per_point: np.ndarray  # localized rates of the thresholded masks, (K-1, S)


def default_calib_points(mask, n: int = 10, span: float = 0.8) -> tuple[int, ...]:
    """`n` equally spaced columns over the central `span` of the fuel extent."""
    cols = np.flatnonzero(np.asarray(mask, dtype=bool).any(axis=0))
    if cols.size == 0:
        raise ValueError("mask contains no fuel pixels")
    lo, hi = cols[0], cols[-1]
    margin = (1.0 - span) / 2.0 * (hi - lo)
    pts = np.rint(np.linspace(lo + margin, hi - margin, n)).astype(int)
    return tuple(int(c) for c in np.unique(pts))


def extract_heights(mask, cfg: TrackConfig) -> np.ndarray:
    """Fuel extent (bottommost - topmost fuel row + 1) at each station, in mm."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask contains no fuel pixels")
    cols = np.asarray(cfg.calib_points)
    if cols.max() >= mask.shape[1]:
        raise ValueError("calibration point outside the mask width")
    sub = mask[:, cols]
    H = sub.shape[0]
    has = sub.any(axis=0)
    top = sub.argmax(axis=0)
    bottom = H - 1 - sub[::-1].argmax(axis=0)
    px = np.where(has, bottom - top + 1, 0)
    return px * cfg.mm_per_pixel


def enforce_monotonic(heights) -> np.ndarray:
    """Running minimum down the time axis (axis 0): no station may regrow."""
    h = np.asarray(heights, dtype=np.float64)
    return np.minimum.accumulate(h, axis=0)


def localized_rates(heights, dt: float) -> np.ndarray:
    """Recession-positive rates ``(h_k - h_{k+1}) / dt`` per interval and station."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    h = np.asarray(heights, dtype=np.float64)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] < 2:
        raise ValueError("need at least two time rows")
    return (h[:-1] - h[1:]) / dt


def valid_intervals(heights) -> np.ndarray:
    """Intervals that end with fuel still present at the station."""
    h = np.asarray(heights, dtype=np.float64)
    if h.ndim == 1:
        h = h[:, None]
    return h[1:] > 0


def total_rate(localized, valid=None) -> float:
    """Mean of the localized rates, optionally restricted to `valid` entries."""
    r = np.asarray(localized, dtype=np.float64)
    if valid is not None:
        r = r[np.asarray(valid, dtype=bool)]
    if r.size == 0:
        raise ValueError("no localized rates to average")
    return float(r.sum() / r.size)


def grow_mask(mean, umask) -> np.ndarray:
    mean, umask = as_probmap(mean), as_uncmap(umask)
    if mean.shape != umask.shape:
        raise ValueError(f"shape mismatch: {mean.shape} vs {umask.shape}")
    return mean + umask >= 0.5


def shrink_mask(mean, umask) -> np.ndarray:
    mean, umask = as_probmap(mean), as_uncmap(umask)
    if mean.shape != umask.shape:
        raise ValueError(f"shape mismatch: {mean.shape} vs {umask.shape}")
    return mean - umask >= 0.5


def heights_series(masks, cfg: TrackConfig) -> np.ndarray:
    """Monotone height matrix ``(K, S)`` for a mask sequence.

    A frame with no fuel at all contributes zero height at every station.
    """
    rows = []
    for m in masks:
        m = np.asarray(m, dtype=bool)
        rows.append(extract_heights(m, cfg) if m.any()
                    else np.zeros(len(cfg.calib_points)))
    return enforce_monotonic(np.stack(rows))


def rate_from_masks(masks, cfg: TrackConfig) -> tuple[float, np.ndarray]:
    h = heights_series(masks, cfg)
    loc = localized_rates(h, cfg.dt)
    valid = valid_intervals(h)
    # every station gone after the first interval: fall back to all intervals
    return total_rate(loc, valid if valid.any() else None), loc


def rate_with_bounds(means, umasks, cfg: TrackConfig, return_masks: bool = False):
    """Regression rate from thresholded mean masks plus grown/shrunk bounds.

    Returns a :class:`RateEstimate`; with ``return_masks=True`` also returns
    the ``(threshold, grown, shrunk)`` mask lists.
    """
    if len(means) != len(umasks):
        raise ValueError("means and umasks differ in length")
    if len(means) < 2:
        raise ValueError("need at least two frames")
    base = [threshold_mask(m) for m in means]
    grown = [grow_mask(m, u) for m, u in zip(means, umasks)]
    shrunk = [shrink_mask(m, u) for m, u in zip(means, umasks)]
    r_hat, loc = rate_from_masks(base, cfg)
    r_plus, _ = rate_from_masks(grown, cfg)
    r_minus, _ = rate_from_masks(shrunk, cfg)
    est = RateEstimate(r_hat=r_hat, r_plus=r_plus, r_minus=r_minus, per_point=loc)
    if return_masks:
        return est, (base, grown, shrunk)
    return est
