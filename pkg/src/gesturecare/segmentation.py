"""Skin-pixel classification, binary morphology, component labeling, ROI extraction.

The skin classifier is an axis-aligned box in normalized-rg chromaticity,
optionally combined with an R > G > B ordering test. The box cancels uniform
intensity gain, which keeps detection stable across lighting changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import BinaryMask, Image, WrongChannels


class HandNotFound(Exception):
    """No component survived the size filter: no hand in the frame."""


class TooFewSamples(ValueError):
    """fit_skin_model needs at least 10 training pixels."""


class SkinModelFormatError(ValueError):
    """Skin-model file does not match the expected token layout."""


@dataclass(frozen=True)
class SkinModel:
    """Chromaticity box plus channel-order test for per-pixel skin decisions."""

    r_lo: float
    r_hi: float
    g_lo: float
    g_hi: float
    require_order: bool = True
    min_r_minus_g: int = 0

    def __post_init__(self):
        if not (0.0 <= self.r_lo < self.r_hi <= 1.0):
            raise ValueError(f"bad r bounds [{self.r_lo}, {self.r_hi}]")
        if not (0.0 <= self.g_lo < self.g_hi <= 1.0):
            raise ValueError(f"bad g bounds [{self.g_lo}, {self.g_hi}]")


# Tuned against the synthetic corpus; not derived from measured skin data.
DEFAULT_SKIN_MODEL = SkinModel(
    r_lo=0.36, r_hi=0.52, g_lo=0.26, g_hi=0.36, require_order=True, min_r_minus_g=12
)


def classify_skin(model: SkinModel, img: Image) -> BinaryMask:
    """Mark pixels whose chromaticity lies inside the model's box.

    With require_order the pixel must also satisfy R > G > B and
    R - G >= min_r_minus_g, which rejects gray and blue-ish surfaces whose
    chroma happens to graze the box.
    """
    if img.channels != 3:
        raise WrongChannels("skin classification needs an RGB image")
    rgb = img.data.astype(np.int32)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    s = (r + g + b).astype(np.float64)
    safe = np.where(s == 0.0, 1.0, s)
    rn = np.where(s == 0.0, 1.0 / 3.0, r / safe)
    gn = np.where(s == 0.0, 1.0 / 3.0, g / safe)
    ok = (rn >= model.r_lo) & (rn <= model.r_hi) & (gn >= model.g_lo) & (gn <= model.g_hi)
    if model.require_order:
        ok &= (r > g) & (g > b) & ((r - g) >= model.min_r_minus_g)
    return BinaryMask(ok)


def _box_counts(bits: np.ndarray, radius: int) -> np.ndarray:
    """Count of set pixels in the (2r+1)^2 window around each pixel.

    Out-of-bounds cells count as background (zero).
    """
    k = 2 * radius + 1
    a = bits.astype(np.int64)
    p = np.pad(a, ((radius + 1, radius), (radius + 1, radius)))
    c = p.cumsum(axis=0).cumsum(axis=1)
    return c[k:, k:] + c[:-k, :-k] - c[:-k, k:] - c[k:, :-k]


def erode(mask: BinaryMask, radius: int) -> BinaryMask:
    k = 2 * radius + 1
    return BinaryMask(_box_counts(mask.bits, radius) == k * k)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    return BinaryMask(_box_counts(mask.bits, radius) >= 1)


def morph_open(mask: BinaryMask, radius: int) -> BinaryMask:
    """Erosion then dilation with a square element of side 2*radius+1."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    return dilate(erode(mask, radius), radius)


@dataclass(frozen=True)
class Region:
    label: int
    area: int
    bbox: tuple[int, int, int, int]  # (x_min, y_min, x_max, y_max), inclusive


def _label_runs(bits: np.ndarray, connectivity: int) -> tuple[list[Region], np.ndarray]:
    """Run-based two-pass labeling; the union-find is over row runs, not pixels."""
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)

    parent: list[int] = []

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            # keep the smaller id as root so first-encounter order survives
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb

    reach = 1 if connectivity == 8 else 0  # diagonal touch counts only for 8-conn
    runs: list[tuple[int, int, int, int]] = []  # (y, x0, x1exclusive, run_id)
    prev_row: list[tuple[int, int, int]] = []  # (x0, x1exclusive, run_id)
    row_pad = np.zeros(w + 2, dtype=np.int8)
    for y in range(h):
        row_pad[1:-1] = bits[y]
        edges = np.flatnonzero(np.diff(row_pad))
        starts, ends = edges[0::2], edges[1::2]
        cur_row: list[tuple[int, int, int]] = []
        for x0, x1 in zip(starts.tolist(), ends.tolist()):
            rid = len(parent)
            parent.append(rid)
            runs.append((y, x0, x1, rid))
            cur_row.append((x0, x1, rid))
            for px0, px1, prid in prev_row:
                if px0 <= x1 - 1 + reach and px1 - 1 >= x0 - reach:
                    union(rid, prid)
        prev_row = cur_row

    # dense labels in first-encounter raster order = ascending minimal run id
    root_label: dict[int, int] = {}
    stats: dict[int, list[int]] = {}
    for y, x0, x1, rid in runs:
        root = find(rid)
        lab = root_label.get(root)
        if lab is None:
            lab = len(root_label) + 1
            root_label[root] = lab
            stats[lab] = [0, x0, y, x1 - 1, y]  # area, x_min, y_min, x_max, y_max
        st = stats[lab]
        st[0] += x1 - x0
        if x0 < st[1]:
            st[1] = x0
        if y < st[2]:
            st[2] = y
        if x1 - 1 > st[3]:
            st[3] = x1 - 1
        if y > st[4]:
            st[4] = y
        labels[y, x0:x1] = lab

    regions = [
        Region(label=lab, area=st[0], bbox=(st[1], st[2], st[3], st[4]))
        for lab, st in sorted(stats.items())
    ]
    return regions, labels


def connected_components(mask: BinaryMask) -> tuple[list[Region], np.ndarray]:
    """8-connected component labeling.

    Labels are dense starting at 1, assigned in the raster order in which
    each component is first encountered. Returns the region list (sorted by
    label) and the full label raster (0 = background).
    """
    return _label_runs(mask.bits, connectivity=8)


def fill_holes(mask: BinaryMask) -> BinaryMask:
    """Set every background pocket that cannot reach the image border.

    Background is treated 4-connected, the dual of 8-connected foreground.
    Sensor noise punches single-pixel holes into the classified skin mask;
    unfilled, those holes cap the chamfer transform and wreck the palm
    radius estimate.
    """
    bg = ~mask.bits
    regions, labels = _label_runs(bg, connectivity=4)
    if not regions:
        return BinaryMask(mask.bits.copy())
    border_labels = set(np.unique(labels[0, :]))
    border_labels |= set(np.unique(labels[-1, :]))
    border_labels |= set(np.unique(labels[:, 0]))
    border_labels |= set(np.unique(labels[:, -1]))
    out = mask.bits.copy()
    for reg in regions:
        if reg.label not in border_labels:
            x0, y0, x1, y1 = reg.bbox
            sub = labels[y0 : y1 + 1, x0 : x1 + 1] == reg.label
            out[y0 : y1 + 1, x0 : x1 + 1] |= sub
    return BinaryMask(out)


def min_area_default(width: int, height: int) -> int:
    """Size filter for false skin regions, scaled with frame area."""
    return max(1, int(np.floor(0.0013 * width * height + 0.5)))


def extract_roi(mask: BinaryMask, min_area: int) -> tuple[BinaryMask, tuple[int, int, int, int]]:
    """Keep the largest component (ties: smallest label), cropped to its bbox.

    Raises HandNotFound when the mask is empty or the largest component is
    below min_area.
    """
    if min_area < 1:
        raise ValueError("min_area must be >= 1")
    regions, labels = connected_components(mask)
    if not regions:
        raise HandNotFound("empty mask")
    best = regions[0]
    for reg in regions[1:]:
        if reg.area > best.area:
            best = reg
    if best.area < min_area:
        raise HandNotFound(f"largest component has area {best.area} < {min_area}")
    x0, y0, x1, y1 = best.bbox
    cropped = BinaryMask(labels[y0 : y1 + 1, x0 : x1 + 1] == best.label)
    return cropped, best.bbox


_FIT_EPS = 0.005  # widens the quantile box so held-out pixels at the rim still match


def fit_skin_model(skin_pixels, quantile: float) -> SkinModel:
    """Fit the chroma box to the [quantile, 1-quantile] span of training pixels."""
    px = np.asarray(skin_pixels, dtype=np.float64)
    if px.ndim != 2 or px.shape[1] != 3:
        raise ValueError("skin_pixels must be an (n, 3) RGB list")
    if px.shape[0] < 10:
        raise TooFewSamples(f"got {px.shape[0]} pixels, need at least 10")
    if not (0.0 < quantile <= 0.5):
        raise ValueError("quantile must be in (0, 0.5]")
    s = px.sum(axis=1)
    safe = np.where(s == 0.0, 1.0, s)
    rn = np.where(s == 0.0, 1.0 / 3.0, px[:, 0] / safe)
    gn = np.where(s == 0.0, 1.0 / 3.0, px[:, 1] / safe)
    r_lo, r_hi = np.quantile(rn, [quantile, 1.0 - quantile])
    g_lo, g_hi = np.quantile(gn, [quantile, 1.0 - quantile])
    return SkinModel(
        r_lo=max(0.0, float(r_lo) - _FIT_EPS),
        r_hi=min(1.0, float(r_hi) + _FIT_EPS),
        g_lo=max(0.0, float(g_lo) - _FIT_EPS),
        g_hi=min(1.0, float(g_hi) + _FIT_EPS),
        require_order=True,
        min_r_minus_g=0,
    )


def skin_model_to_text(model: SkinModel) -> str:
    return (
        "skinmodel 1\n"
        f"r {model.r_lo!r} {model.r_hi!r}\n"
        f"g {model.g_lo!r} {model.g_hi!r}\n"
        f"order {1 if model.require_order else 0}\n"
        f"rminusg {model.min_r_minus_g}\n"
    )


def skin_model_from_text(text: str) -> SkinModel:
    lines = text.splitlines()
    if len(lines) < 5:
        raise SkinModelFormatError(f"expected 5 lines, got {len(lines)}")
    if lines[0] != "skinmodel 1":
        raise SkinModelFormatError(f"bad magic line {lines[0]!r}")

    def fields(line: str, key: str, n: int) -> list[str]:
        parts = line.split(" ")
        if len(parts) != n + 1 or parts[0] != key:
            raise SkinModelFormatError(f"bad {key!r} line: {line!r}")
        return parts[1:]

    (order,) = fields(lines[3], "order", 1)
    if order not in ("0", "1"):
        raise SkinModelFormatError(f"order must be 0 or 1, got {order!r}")
    try:
        r_lo, r_hi = (float(v) for v in fields(lines[1], "r", 2))
        g_lo, g_hi = (float(v) for v in fields(lines[2], "g", 2))
        (rmg,) = fields(lines[4], "rminusg", 1)
        return SkinModel(r_lo, r_hi, g_lo, g_hi, order == "1", int(rmg))
    except ValueError as exc:
        raise SkinModelFormatError(str(exc)) from None


def save_skin_model(path, model: SkinModel) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(skin_model_to_text(model))


def load_skin_model(path) -> SkinModel:
    with open(path, "r", encoding="ascii") as f:
        return skin_model_from_text(f.read())
