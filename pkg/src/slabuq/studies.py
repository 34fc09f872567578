"""Case studies over combinations of uncertainty sources.

Each case enables a subset of ``{uc, ugamma, us}``.  A study draws N
perturbations of one image, segments each perturbed copy and histograms the
uncertainty values inside a band around the fuel boundary: the model-form
entropy for cases without ``us`` and the complete uncertainty map for cases
with it.

The dropout realization is held fixed across the N draws of a study (one
model stream per image), so differences between cases isolate the data
uncertainty sources rather than dropout noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import RngStream, as_frame, threshold_mask
from .perturb import US_RANGE, apply_angle_shift, apply_distortion, pixel_density, sample_draw
from .segmenter import LN2, compose_umask, mcd_predict
from .synth import SATURATION_LEVELS, SynthConfig, generate_sequence

CASES: dict[str, frozenset] = {
    "baseline": frozenset(),
    "1": frozenset({"uc"}),
    "2": frozenset({"ugamma"}),
    "3": frozenset({"uc", "ugamma"}),
    "4": frozenset({"us"}),
    "5": frozenset({"uc", "us"}),
    "6": frozenset({"ugamma", "us"}),
    "7": frozenset({"uc", "ugamma", "us"}),
}

HIST_RANGE = (0.0, LN2 + US_RANGE[1] / 100.0)

_MODEL = 0
_DRAWS = 1
_DISTORT = 2


def case_sources(case) -> frozenset:
    key = str(case).strip().lower()
    if key not in CASES:
        raise ValueError(f"unknown case {case!r}; expected baseline or 1..7")
    return CASES[key]


def boundary_band(mask, width: int = 5) -> np.ndarray:
    """Pixels within `width` pixels (chessboard) of the mask edge.

    The frame border is not treated as an edge.
    """
    mask = np.asarray(mask, dtype=bool)
    inner = ndimage.binary_erosion(mask, structure=np.ones((3, 3), bool), border_value=1)
    edge = mask & ~inner
    if width <= 0:
        return edge
    return ndimage.binary_dilation(edge, structure=np.ones((3, 3), bool), iterations=width)


@dataclass
class CaseStudyResult:
    case: str
    n_draws: int
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    n_values: int

    def density(self) -> np.ndarray:
        widths = np.diff(self.edges)
        total = self.counts.sum()
        return self.counts / (total * widths) if total else np.zeros_like(widths)


def case_study(image, backend, case, N: int = 1000, seed: int = 0, T: int = 20,
               band_width: int = 5, y: float = 8.069, bins: int = 50) -> CaseStudyResult:
    """Boundary-band uncertainty histogram for one image under one case."""
    key = str(case).strip().lower()
    sources = case_sources(key)
    image = as_frame(image)
    root = RngStream(seed)
    model = root.child(_MODEL)

    base = mcd_predict(backend, image, T, model, frame_id=0)
    base_mask = threshold_mask(base.mean)
    band = boundary_band(base_mask, band_width)
    rho = pixel_density(base_mask, y) if base_mask.any() else 0.0

    n_draws = 1 if not sources else int(N)
    edges = np.linspace(*HIST_RANGE, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    total, n_values = 0.0, 0
    for n in range(n_draws):
        draw = sample_draw(root.child(_DRAWS, n).generator(), sources)
        if draw.uc or draw.ugamma:
            x = image
            if draw.ugamma:
                x = apply_angle_shift(x, draw.ugamma, rho, y)
            if draw.uc:
                x = apply_distortion(x, draw.uc, root.child(_DISTORT, n).generator())
            res = mcd_predict(backend, x, T, model, frame_id=0)
        else:
            res = base
        values = compose_umask(res.um, res.mean, draw.us) if "us" in sources else res.um
        v = values[band]
        # values above the top edge land in the last bin
        idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, bins - 1)
        counts += np.bincount(idx, minlength=bins)
        total += float(v.sum())
        n_values += v.size
    return CaseStudyResult(case=key, n_draws=n_draws, edges=edges, counts=counts,
                           mean=total / n_values if n_values else 0.0, n_values=n_values)


def saturation_fixtures(seed: int = 0, frame: int = 5, **overrides) -> dict[str, np.ndarray]:
    """One synthetic frame per saturation level, same scene and noise seed."""
    out = {}
    for level in SATURATION_LEVELS:
        cfg = SynthConfig(saturation_level=level, noise_seed=seed, **overrides)
        seq, _ = generate_sequence(cfg)
        out[level] = np.array(seq.frames[min(frame, len(seq) - 1)])
    return out
