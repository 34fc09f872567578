"""Synthetic slab-burn frame sequences with a known recession rate.

The rendered scene is a dark chamber (intensity 0), a mid-gray fuel slab
resting on the bottom edge of the frame with a slanted leading face, and
bright flame clutter above the top surface.  The clutter density grows with
the saturation level.  Ground-truth masks are the exact rendered fuel
regions, so the sequences double as an end-to-end oracle.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .core import DEFAULT_HEIGHT, DEFAULT_WIDTH, FrameSequence

SATURATION_LEVELS = ("low", "mid", "high")

# fraction of eligible pixels lit by flame clutter, per level
_CLUTTER_DENSITY = {"low": 0.04, "mid": 0.15, "high": 0.40}
# mean fuel intensity at each level; flame glow brightens the slab
_FUEL_LEVEL = {"low": 140.0, "mid": 155.0, "high": 170.0}
_CLUTTER_GAP = 2


@dataclass(frozen=True)
class SynthConfig:
    r_star: float = 0.75        # mm/s
    n_frames: int = 20
    dt: float = 0.32            # s
    h0: float = 5.6             # mm
    mm_per_pixel: float = 0.1
    slant_angle: float = 45.0   # degrees
    saturation_level: str = "mid"
    noise_seed: int = 0
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    fuel_start: int = 50        # first fuel column
    fuel_stop: int = 450        # one past the last fuel column
    y_true: float = 8.069       # physical fuel length, cm

    def __post_init__(self):
        if self.r_star < 0:
            raise ValueError("r_star must be nonnegative")
        if self.n_frames < 2:
            raise ValueError("n_frames must be at least 2")
        if not (self.dt > 0 and self.mm_per_pixel > 0 and self.y_true > 0):
            raise ValueError("dt, mm_per_pixel and y_true must be positive")
        if self.h0 - self.r_star * self.dt * (self.n_frames - 1) <= 0:
            raise ValueError("fuel vanishes before the last frame: "
                             "need h0 - r_star*dt*(n_frames-1) > 0")
        if round(self.h0 / self.mm_per_pixel) > self.height:
            raise ValueError("initial fuel height exceeds the frame height")
        if self.saturation_level not in SATURATION_LEVELS:
            raise ValueError(f"saturation_level must be one of {SATURATION_LEVELS}")
        if not 0 < self.slant_angle <= 90:
            raise ValueError("slant_angle must lie in (0, 90] degrees")
        if not 0 <= self.fuel_start < self.fuel_stop <= self.width:
            raise ValueError("fuel columns must satisfy 0 <= start < stop <= width")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown SynthConfig field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def mm_per_column(self) -> float:
        """Horizontal scale implied by the fuel span and its physical length."""
        return 10.0 * self.y_true / (self.fuel_stop - self.fuel_start)


def surface_heights_px(cfg: SynthConfig) -> np.ndarray:
    """Rendered top-surface height (pixels above the bottom edge) per frame."""
    k = np.arange(cfg.n_frames)
    h_mm = cfg.h0 - cfg.r_star * k * cfg.dt
    return np.rint(h_mm / cfg.mm_per_pixel).astype(int)


def fuel_mask(cfg: SynthConfig, height_px: int) -> np.ndarray:
    """Exact fuel region for a slab whose flat top sits `height_px` above the floor."""
    H, W = cfg.height, cfg.width
    rows = np.arange(H)[:, None]
    cols = np.arange(W)[None, :]
    # height above the floor of the bottom edge of each row, in pixels
    level = H - rows
    # leading face: rises tan(slant) mm per mm along the slab
    run_mm = (cols - cfg.fuel_start + 1) * cfg.mm_per_column
    slant_px = np.floor(run_mm * np.tan(np.radians(cfg.slant_angle)) / cfg.mm_per_pixel)
    in_span = (cols >= cfg.fuel_start) & (cols < cfg.fuel_stop)
    return in_span & (level <= height_px) & (level <= slant_px)


def render_frame(cfg: SynthConfig, mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    H, W = mask.shape
    gray = np.zeros((H, W), dtype=np.float64)
    fuel_mean = _FUEL_LEVEL[cfg.saturation_level]
    gray[mask] = rng.normal(fuel_mean, 10.0, size=int(mask.sum()))

    # clutter lives above the surface, inside the slab span, clear of the fuel
    cols = np.arange(W)
    in_span = (cols >= cfg.fuel_start) & (cols < cfg.fuel_stop)
    has_fuel = mask.any(axis=0)
    top = np.where(has_fuel, mask.argmax(axis=0), H)
    above = (np.arange(H)[:, None] < top[None, :]) & in_span[None, :]
    near = ndimage.binary_dilation(mask, structure=np.ones((3, 3), bool),
                                   iterations=_CLUTTER_GAP)
    eligible = above & ~near
    # one uniform per pixel regardless of level, so levels nest at equal seeds
    u = rng.random((H, W))
    lit = eligible & (u < _CLUTTER_DENSITY[cfg.saturation_level])
    gray[lit] = 200.0 + 55.0 * rng.random(int(lit.sum()))

    gray = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def generate_sequence(cfg: SynthConfig) -> tuple[FrameSequence, list[np.ndarray]]:
    """Render a frame sequence and its ground-truth masks.

    Frame ``k`` shows a slab whose top surface is ``h0 - r_star*k*dt`` mm
    above the floor, rounded to the nearest pixel.
    """
    heights = surface_heights_px(cfg)
    masks = [fuel_mask(cfg, int(h)) for h in heights]
    frames = []
    for k, mask in enumerate(masks):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.noise_seed, spawn_key=(k,)))
        frames.append(render_frame(cfg, mask, rng))
    seq = FrameSequence(np.stack(frames), dt=cfg.dt, y_true=cfg.y_true,
                        mm_per_pixel=cfg.mm_per_pixel)
    return seq, masks
