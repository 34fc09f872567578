"""
Image perturbations on a synthetic slab
=======================================

Render one frame, then apply the two data perturbations: random pixel
dropout and the angle-shift strip.
"""

import numpy as np

from slabuq import ReferenceSegmenter, SynthConfig, generate_sequence, threshold_mask
from slabuq.perturb import (apply_angle_shift, apply_distortion, gamma_to_error,
                            pixel_density, shift_locations)

seq, masks = generate_sequence(SynthConfig(saturation_level="mid", noise_seed=0))
frame = seq.frames[0]
print("frame", frame.shape, "fuel pixels", masks[0].sum())

# a +-5 degree tilt of the camera maps to a length error in percent
for g in (-5.0, 0.0, 5.0):
    print(f"gamma {g:+.0f} deg -> {gamma_to_error(g):+.3f} %")

# density comes from the segmented fuel width
mask = threshold_mask(ReferenceSegmenter().predict_deterministic(frame))
rho = pixel_density(mask, seq.y_true)
print(f"rho = {rho:.2f} px/cm")

for ug in (0.558, -1.319):
    lo, hi = shift_locations(ug, rho, seq.y_true, frame.shape[1])
    out = apply_angle_shift(frame, ug, rho, seq.y_true)
    right = np.flatnonzero(out[..., 0].any(axis=0))[-1]
    print(f"ugamma {ug:+.3f}: strip [{lo}, {hi}), right edge now at column {right}")

rng = np.random.default_rng(1)
dist = apply_distortion(frame, 0.7, rng)
print("zeroed pixels at uc=0.7%:", np.count_nonzero((dist == 0).all(axis=2) & (frame != 0).any(axis=2)))
