"""Light-invariant orientation histogram and the classifier feature vector.

Gradient orientations are unchanged when every intensity is multiplied by
the same gain, and L1 normalization cancels the gain in the magnitudes, so
the histogram depends on the gesture's shape rather than on the lighting.
"""

from __future__ import annotations

import numpy as np

from .imaging import BinaryMask, Image
from .handgeom import HandGeometry

N_BINS = 36
FEATURE_LEN = 47  # 36 histogram bins + finger count + five (r, theta) pairs
DEFAULT_MAG_THRESHOLD = 8.0  # on 0-255 samples; rejects sensor-noise gradients


class DimensionMismatch(ValueError):
    """Gray image and mask have different shapes."""


def orientation_histogram(
    gray, mask: BinaryMask, mag_threshold: float = DEFAULT_MAG_THRESHOLD
) -> np.ndarray:
    """36-bin gradient-orientation histogram over masked interior pixels.

    Accepts a 1-channel Image or a bare 2-D array (floats are fine, which is
    what exact-gain comparisons use). Central differences, magnitude
    weighting, bins of 10 degrees over [0, 360). All-zero if no gradient
    reaches mag_threshold.
    """
    a = gray.data if isinstance(gray, Image) else np.asarray(gray)
    if a.ndim != 2:
        raise ValueError("orientation_histogram needs a single-channel image")
    if a.shape != mask.bits.shape:
        raise DimensionMismatch(f"gray {a.shape} vs mask {mask.bits.shape}")
    hist = np.zeros(N_BINS, dtype=np.float64)
    if a.shape[0] < 3 or a.shape[1] < 3:
        return hist
    a = a.astype(np.float64)
    gx = a[1:-1, 2:] - a[1:-1, :-2]
    gy = a[2:, 1:-1] - a[:-2, 1:-1]
    m = np.hypot(gx, gy)
    sel = mask.bits[1:-1, 1:-1] & (m >= mag_threshold)
    if not sel.any():
        return hist
    theta = np.degrees(np.arctan2(gy[sel], gx[sel])) % 360.0
    bins = (theta // 10.0).astype(np.int64) % N_BINS
    hist = np.bincount(bins, weights=m[sel], minlength=N_BINS).astype(np.float64)
    return hist / hist.sum()


def build_feature_vector(hist: np.ndarray, geom: HandGeometry) -> np.ndarray:
    """47-entry vector: histogram, finger count / 5, five (r, theta) pairs.

    Tip radii are normalized by 3 * palm_radius (anatomical fingers land
    around 1.5-2.5 palm radii) and clamped to 1; angles by 360. Unused pairs
    stay (0, 0). Every entry lies in [0, 1].
    """
    if geom.palm_radius <= 0:
        raise ValueError("palm_radius must be > 0")
    if hist.shape != (N_BINS,):
        raise ValueError(f"histogram must have {N_BINS} bins")
    vec = np.zeros(FEATURE_LEN, dtype=np.float64)
    vec[:N_BINS] = hist
    tips = sorted(geom.fingertips, key=lambda t: t.theta)[:5]
    vec[N_BINS] = len(tips) / 5.0
    for i, tip in enumerate(tips):
        vec[N_BINS + 1 + 2 * i] = min(tip.r / (3.0 * geom.palm_radius), 1.0)
        vec[N_BINS + 2 + 2 * i] = tip.theta / 360.0
    return vec
