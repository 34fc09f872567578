"""Monte-Carlo uncertainty propagation from slab-burner images to regression rate."""

__version__ = "0.1.0"

from .core import (DataError, FrameSequence, RngStream, load_frame, load_probmap,
                   save_frame, save_probmap, threshold_mask)
from .perturb import (GeometrySpec, PerturbationDraw, apply_angle_shift, apply_distortion,
                      gamma_to_error, pixel_density, sample_draw)
from .propagate import PropagateConfig, RateDistribution, run, run_trial, summarize
from .segmenter import (McdResult, PlaybackBackend, ReferenceSegmenter, compose_umask,
                        entropy_map, mcd_predict)
from .surface import (RateEstimate, TrackConfig, enforce_monotonic, extract_heights,
                      grow_mask, localized_rates, rate_with_bounds, shrink_mask, total_rate)
from .synth import SynthConfig, generate_sequence

__all__ = [
    "DataError", "FrameSequence", "RngStream", "load_frame", "load_probmap", "save_frame",
    "save_probmap", "threshold_mask", "GeometrySpec", "PerturbationDraw", "apply_angle_shift",
    "apply_distortion", "gamma_to_error", "pixel_density", "sample_draw", "PropagateConfig",
    "RateDistribution", "run", "run_trial", "summarize", "McdResult", "PlaybackBackend",
    "ReferenceSegmenter", "compose_umask", "entropy_map", "mcd_predict", "RateEstimate",
    "TrackConfig", "enforce_monotonic", "extract_heights", "grow_mask", "localized_rates",
    "rate_with_bounds", "shrink_mask", "total_rate", "SynthConfig", "generate_sequence",
]
