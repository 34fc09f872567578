"""
How much of a calibration target moves under lens distortion
============================================================
"""

from dataclasses import replace

from slabuq.camera import (REFERENCE_CAMERA, CameraExtrinsics, PlanarTarget, distorted_fraction,
                           rotation_xyz, target_displacements)

target = PlanarTarget.grid(20, 20, spacing=2.0)
pose = CameraExtrinsics(rotation_xyz(3.0, -2.0, 0.0), [0.0, 0.0, -100.0])

pix, norms = target_displacements(target, pose, REFERENCE_CAMERA)
print(f"largest displacement {norms.max():.2f} px at pixel {pix[norms.argmax()].round(1)}")

for k1 in (0.0, 2.15, 4.30, 8.60):
    frac = distorted_fraction(target, pose, replace(REFERENCE_CAMERA, k1=k1))
    print(f"k1 = {k1:4.2f}: {frac:5.1f}% of points moved by more than 1 px")
