"""Shared rasters, frame sequences, random streams and file IO.

Layout convention used throughout the package: arrays are row-major with
the origin at the top-left corner.  Axis 0 is the image height (``y``,
downward, 64 rows by default) and axis 1 is the fuel length (``x``,
rightward, 512 columns by default).

Frames are ``uint8`` arrays of shape ``(H, W, 3)``.  Probability and
uncertainty maps are ``float64`` arrays of shape ``(H, W)``; binary masks are
``bool`` arrays of shape ``(H, W)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

DEFAULT_HEIGHT = 64
DEFAULT_WIDTH = 512


class DataError(ValueError):
    """Raised when an input raster or map file is malformed."""


# ---------------------------------------------------------------------------
# validation helpers

def as_frame(data) -> np.ndarray:
    """Return `data` as a validated ``(H, W, 3)`` uint8 frame.

    Grayscale ``(H, W)`` input is replicated across the three channels.
    """
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"frame must have shape (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
            raise DataError("frame contains non-finite intensities")
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise DataError("frame intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_probmap(values) -> np.ndarray:
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 2:
        raise DataError(f"probability map must be 2-D, got shape {p.shape}")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise DataError("probability map values must lie in [0, 1]")
    return p


def as_uncmap(values) -> np.ndarray:
    u = np.asarray(values, dtype=np.float64)
    if u.ndim != 2:
        raise DataError(f"uncertainty map must be 2-D, got shape {u.shape}")
    if not np.all(u >= 0.0):
        raise DataError("uncertainty map values must be nonnegative")
    return u


def threshold_mask(p, tau: float = 0.5) -> np.ndarray:
    """Binary fuel mask: True exactly where ``p >= tau`` (inclusive)."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return as_probmap(p) >= tau


# ---------------------------------------------------------------------------
# sequences

@dataclass(frozen=True)
class FrameSequence:
    """Time-ordered frames sampled at a fixed interval.

    Parameters
    ----------
    frames : array of shape (K, H, W, 3), uint8
    dt : float
        Seconds between consecutive frames.
    y_true : float
        Physical fuel length in cm.
    mm_per_pixel : float
        Vertical physical scale.
    """

    frames: np.ndarray
    dt: float
    y_true: float = 8.069
    mm_per_pixel: float = 0.1

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise DataError(f"frames must have shape (K, H, W, 3), got {frames.shape}")
        if frames.shape[0] < 2:
            raise DataError("a frame sequence needs at least 2 frames")
        if frames.dtype != np.uint8:
            frames = np.stack([as_frame(f) for f in frames])
        if not self.dt > 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        if not (self.y_true > 0 and self.mm_per_pixel > 0):
            raise DataError("y_true and mm_per_pixel must be positive")
        frames = frames.copy()
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1], self.frames.shape[2]


# ---------------------------------------------------------------------------
# random streams

@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    A stream is identified by a master seed and a tuple of integer indices
    (trial, purpose, frame, sample, ...).  Equal addresses give identical
    sequences; distinct addresses give independent streams, courtesy of
    :class:`numpy.random.SeedSequence` spawn keys.
    """

    master_seed: int
    key: tuple[int, ...] = field(default=())

    def child(self, *index: int) -> "RngStream":
        return RngStream(self.master_seed, self.key + tuple(int(i) for i in index))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=self.key)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


# ---------------------------------------------------------------------------
# frame IO

def _read_pgm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    tokens = []
    pos = 0
    # magic, width, height, maxval; '#' comments allowed between tokens
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise DataError(f"{path}: truncated PGM header")
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace before the raster
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0:
        raise DataError(f"{path}: malformed PGM dimensions")
    if maxval != 255:
        raise DataError(f"{path}: bit depth must be 8 (maxval 255), got maxval {maxval}")
    payload = raw[pos:pos + width * height]
    if len(payload) != width * height:
        raise DataError(f"{path}: PGM raster truncated")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def load_frame(path, format: str | None = None) -> np.ndarray:
    """Load an 8-bit PGM (P5) or PNG file as an ``(H, W, 3)`` frame.

    The format is taken from the file suffix unless given explicitly.
    Grayscale inputs are replicated across three channels.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    if fmt == "PGM":
        return as_frame(_read_pgm(path))
    if fmt == "PNG":
        try:
            with Image.open(path) as img:
                mode = img.mode
                if mode not in ("L", "RGB", "RGBA", "P"):
                    raise DataError(f"{path}: unsupported PNG mode {mode!r} (need 8-bit)")
                arr = np.asarray(img.convert("L") if mode == "L" else img.convert("RGB"))
        except OSError as exc:
            raise DataError(f"{path}: {exc}") from exc
        return as_frame(arr)
    raise DataError(f"unsupported frame format {fmt!r}")


def save_frame(frame, path, format: str | None = None) -> None:
    """Write a frame as PGM (channel 0 only, grayscale) or PNG (RGB)."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).upper()
    frame = as_frame(frame)
    if fmt == "PGM":
        if not (np.array_equal(frame[..., 0], frame[..., 1])
                and np.array_equal(frame[..., 0], frame[..., 2])):
            raise DataError("PGM output requires a grayscale frame")
        save_pgm(frame[..., 0], path)
    elif fmt == "PNG":
        Image.fromarray(frame, mode="RGB").save(path)
    else:
        raise DataError(f"unsupported frame format {fmt!r}")


def save_pgm(gray, path) -> None:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(gray.tobytes())


def save_mask(mask, path) -> None:
    """Write a binary mask as a PGM with fuel=255 and background=0."""
    save_pgm(np.asarray(mask, dtype=bool).astype(np.uint8) * 255, path)


def load_mask(path) -> np.ndarray:
    return load_frame(path)[..., 0] >= 128


# ---------------------------------------------------------------------------
# map IO

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_probmap(values, path, kind: str = "prob") -> None:
    """Persist a map as little-endian float32 plus a JSON sidecar.

    The sidecar sits next to the payload with a ``.json`` suffix and holds
    ``{"width", "height", "kind"}``.  `kind` is ``"prob"`` or ``"unc"``.
    """
    path = Path(path)
    values = as_probmap(values) if kind == "prob" else as_uncmap(values)
    h, w = values.shape
    path.write_bytes(values.astype("<f4").tobytes())
    _sidecar(path).write_text(json.dumps({"width": w, "height": h, "kind": kind}))


def load_probmap(path) -> np.ndarray:
    path = Path(path)
    try:
        meta = json.loads(_sidecar(path).read_text())
        w, h = int(meta["width"]), int(meta["height"])
        kind = meta.get("kind", "prob")
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: unreadable sidecar ({exc})") from exc
    payload = path.read_bytes()
    if len(payload) != 4 * w * h:
        raise DataError(
            f"{path}: payload has {len(payload)} bytes, sidecar implies {4 * w * h}")
    values = np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float64)
    return as_probmap(values) if kind == "prob" else as_uncmap(values)
