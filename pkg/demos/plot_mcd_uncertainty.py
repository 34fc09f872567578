"""
Dropout ensembles and entropy maps
==================================

Average 20 dropout passes of the reference segmenter and see where the
entropy sits for each saturation level.
"""

import numpy as np
from scipy import ndimage

from slabuq import RngStream, ReferenceSegmenter, mcd_predict
from slabuq.segmenter import LN2, compose_umask
from slabuq.studies import case_study, saturation_fixtures

seg = ReferenceSegmenter()
fixtures = saturation_fixtures()

for level, image in fixtures.items():
    res = mcd_predict(seg, image, T=20, rng=RngStream(0))
    mask = res.mean >= 0.5
    edge = mask ^ ndimage.binary_erosion(mask, border_value=1)
    near = ndimage.binary_dilation(edge, iterations=3)
    print(f"{level:>4}: entropy near boundary {res.um[near].mean():.3f}, "
          f"elsewhere {res.um[~near].mean():.4f} (max possible {LN2:.3f})")

# the saturation term adds p * us / 100 on top of the model entropy
res = mcd_predict(seg, fixtures["mid"], T=20)
u = compose_umask(res.um, res.mean, 0.83)
print("largest added term:", float(np.max(u - res.um)))

# boundary-band histograms: baseline against case 4 (saturation only)
for level, image in fixtures.items():
    b = case_study(image, seg, "baseline")
    c = case_study(image, seg, 4, N=200)
    print(f"{level:>4}: band mean {b.mean:.4f} -> {c.mean:.4f}")
