"""Hand contour, palm estimate, and fingertip detection.

Fingertips are found as peaks of the contour's radial distance to the
palm centroid. That needs only the boundary and one reference point, is
chirality-agnostic, and has an exact ground truth on rendered hands.
Angles are measured in raster coordinates: degrees from the +x axis with
y growing downward, so a point below the centroid sits near 90 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, Image


class EmptyMask(ValueError):
    """Geometry was asked for on a mask with no set pixels."""


@dataclass(frozen=True)
class Fingertip:
    pos: tuple[int, int]
    r: float
    theta: float  # degrees in [0, 360), +x axis, y-down


@dataclass(frozen=True)
class HandGeometry:
    centroid: tuple[float, float]
    palm_radius: float
    fingertips: tuple[Fingertip, ...]


@dataclass(frozen=True)
class FingertipParams:
    smooth_window: int = 7
    peak_halfwidth: int = 5
    # true tips sit at >= 2.2 palm radii on the rendered corpus while the far
    # palm rim (pushed out by the finger-ward centroid shift) reaches ~1.7
    ratio_threshold: float = 1.9
    nms_angle_deg: float = 20.0
    max_tips: int = 5


DEFAULT_FINGERTIP_PARAMS = FingertipParams()

# Moore neighborhood in clockwise screen order (y grows downward).
_CW = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_CW_INDEX = {d: i for i, d in enumerate(_CW)}


def trace_contour(mask: BinaryMask) -> list[tuple[int, int]]:
    """Moore-neighbor boundary trace, clockwise from the topmost-leftmost pixel.

    The walk stops when a (pixel, backtrack) state repeats, which is the
    stopping rule that also terminates on thin diagonal shapes where the
    start pixel is never re-entered from its original direction. Every
    boundary pixel appears at least once; thin sections are revisited.
    """
    bits = mask.bits
    h, w = bits.shape
    ys, xs = np.nonzero(bits)
    if len(ys) == 0:
        raise EmptyMask("cannot trace an empty mask")
    rows = bits.tolist()

    def is_set(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and rows[y][x]

    start = (int(xs[ys == ys.min()].min()), int(ys.min()))
    backtrack = (start[0] - 1, start[1])  # entered from the west by raster-scan convention

    points = [start]
    p, b = start, backtrack
    seen = {(p, b)}
    while True:
        k = _CW_INDEX[(b[0] - p[0], b[1] - p[1])]
        found = None
        for step in range(1, 9):
            dx, dy = _CW[(k + step) % 8]
            cand = (p[0] + dx, p[1] + dy)
            if is_set(*cand):
                pdx, pdy = _CW[(k + step - 1) % 8]
                found = (cand, (p[0] + pdx, p[1] + pdy))
                break
        if found is None:
            return points  # isolated pixel
        state = found
        if state in seen:
            break
        seen.add(state)
        points.append(state[0])
        p, b = state
    if len(points) > 1 and points[-1] == points[0]:
        points.pop()
    return points


def chamfer_distance(mask: BinaryMask) -> np.ndarray:
    """(3,4)-weighted two-pass distance to background, in chamfer units.

    Image borders count as background, implemented by padding with a zero
    ring. The in-row recurrence d[x] = min(c[x], d[x-1]+3) is evaluated with
    a running minimum of c[k]-3k so each pass is a handful of row-vector ops.
    """
    bits = mask.bits
    h, w = bits.shape
    inf = np.int64(1) << 40
    d = np.where(bits, inf, 0).astype(np.int64)
    d = np.pad(d, 1)
    idx3 = 3 * np.arange(w + 2, dtype=np.int64)

    for y in range(1, h + 1):
        prev = d[y - 1]
        c = d[y].copy()
        c[1:-1] = np.minimum.reduce(
            [d[y][1:-1], prev[1:-1] + 3, prev[:-2] + 4, prev[2:] + 4]
        )
        d[y] = np.minimum(c, np.minimum.accumulate(c - idx3) + idx3)

    for y in range(h, 0, -1):
        nxt = d[y + 1]
        c = d[y].copy()
        c[1:-1] = np.minimum.reduce(
            [d[y][1:-1], nxt[1:-1] + 3, nxt[:-2] + 4, nxt[2:] + 4]
        )
        d[y] = np.minimum.accumulate((c + idx3)[::-1])[::-1] - idx3

    return d[1:-1, 1:-1]


def centroid_and_radius(mask: BinaryMask) -> tuple[tuple[float, float], float]:
    """Mean of set-pixel coordinates, and max chamfer distance / 3 as palm radius."""
    ys, xs = np.nonzero(mask.bits)
    if len(ys) == 0:
        raise EmptyMask("cannot measure an empty mask")
    centroid = (float(xs.mean()), float(ys.mean()))
    radius = float(chamfer_distance(mask).max()) / 3.0
    return centroid, radius


def _circular_angle_diff(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def detect_fingertips(
    contour: list[tuple[int, int]],
    centroid: tuple[float, float],
    palm_radius: float,
    params: FingertipParams = DEFAULT_FINGERTIP_PARAMS,
) -> list[Fingertip]:
    """Radial-distance peaks of the contour, as fingertip candidates.

    Distances are smoothed with a circular moving average, candidates must be
    strict local maxima over +-peak_halfwidth indices and reach
    ratio_threshold * palm_radius, and angular non-maximum suppression keeps
    the highest peak within any nms_angle_deg window. An empty result is a
    closed fist, not an error.
    """
    if not contour:
        raise EmptyMask("empty contour")
    if palm_radius <= 0:
        raise ValueError("palm_radius must be > 0")
    pts = np.asarray(contour, dtype=np.float64)
    n = len(pts)
    cx, cy = centroid
    d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)

    half = params.smooth_window // 2
    offs = np.arange(-half, params.smooth_window - half)
    idx = (np.arange(n)[:, None] + offs[None, :]) % n
    dsm = d[idx].mean(axis=1)

    nb = np.arange(-params.peak_halfwidth, params.peak_halfwidth + 1)
    nb = nb[nb != 0]
    nbi = (np.arange(n)[:, None] + nb[None, :]) % n
    is_peak = np.all(dsm[:, None] > dsm[nbi], axis=1)
    is_peak &= dsm >= params.ratio_threshold * palm_radius
    cand = np.flatnonzero(is_peak)
    if len(cand) == 0:
        return []

    theta = np.degrees(np.arctan2(pts[cand, 1] - cy, pts[cand, 0] - cx)) % 360.0
    order = np.argsort(-dsm[cand], kind="stable")
    kept: list[int] = []
    for oi in order:
        t = theta[oi]
        if all(_circular_angle_diff(t, theta[kj]) >= params.nms_angle_deg for kj in kept):
            kept.append(oi)
        if len(kept) == params.max_tips:
            break

    tips = []
    for oi in kept:
        ci = cand[oi]
        x, y = int(pts[ci, 0]), int(pts[ci, 1])
        tips.append(Fingertip(pos=(x, y), r=float(d[ci]), theta=float(theta[oi])))
    tips.sort(key=lambda t: t.theta)
    return tips


_TIP_COLOR = (255, 0, 0)
_CENTROID_COLOR = (0, 255, 0)
# radius-2 pixel ring: all offsets whose rounded distance is 2
_RING = ((2, 0), (-2, 0), (0, 2), (0, -2), (2, 1), (2, -1), (-2, 1), (-2, -1),
         (1, 2), (1, -2), (-1, 2), (-1, -2))


def draw_overlay(img: Image, geom: HandGeometry, offset: tuple[int, int] = (0, 0)) -> Image:
    """Fingertips as 7-px crosses, centroid as a 5-px circle, on an RGB copy.

    `offset` shifts ROI-local geometry back into full-frame coordinates.
    The pixel layout is fixed so overlay output can be compared exactly.
    """
    if img.channels == 1:
        data = np.repeat(img.data[:, :, None], 3, axis=2).copy()
    else:
        data = img.data.copy()
    h, w = data.shape[:2]
    ox, oy = offset

    def put(x: int, y: int, color: tuple[int, int, int]) -> None:
        if 0 <= x < w and 0 <= y < h:
            data[y, x] = color

    for tip in geom.fingertips:
        tx, ty = tip.pos[0] + ox, tip.pos[1] + oy
        for k in range(-3, 4):
            put(tx + k, ty, _TIP_COLOR)
            put(tx, ty + k, _TIP_COLOR)

    cx = int(math.floor(geom.centroid[0] + ox + 0.5))
    cy = int(math.floor(geom.centroid[1] + oy + 0.5))
    for dx, dy in _RING:
        put(cx + dx, cy + dy, _CENTROID_COLOR)
    return Image(data)
