"""Brute-force reference implementations used to check the fast code paths.

Everything here is deliberately written the slow, obvious way and shares no
code with the package.
"""

from __future__ import annotations

import numpy as np


def erode_oracle(bits: np.ndarray, radius: int) -> np.ndarray:
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            keep = True
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    ny, nx = y + dy, x + dx
                    if not (0 <= ny < h and 0 <= nx < w) or not bits[ny, nx]:
                        keep = False
                        break
                if not keep:
                    break
            out[y, x] = keep
    return out


def dilate_oracle(bits: np.ndarray, radius: int) -> np.ndarray:
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            hit = False
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and bits[ny, nx]:
                        hit = True
                        break
                if hit:
                    break
            out[y, x] = hit
    return out


def open_oracle(bits: np.ndarray, radius: int) -> np.ndarray:
    return dilate_oracle(erode_oracle(bits, radius), radius)


def flood_label_oracle(bits: np.ndarray) -> np.ndarray:
    """8-connected flood fill, new labels in raster first-encounter order."""
    h, w = bits.shape
    labels = np.zeros((h, w), dtype=np.int32)
    next_label = 1
    for y in range(h):
        for x in range(w):
            if bits[y, x] and labels[y, x] == 0:
                stack = [(y, x)]
                labels[y, x] = next_label
                while stack:
                    cy, cx = stack.pop()
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if (
                                0 <= ny < h
                                and 0 <= nx < w
                                and bits[ny, nx]
                                and labels[ny, nx] == 0
                            ):
                                labels[ny, nx] = next_label
                                stack.append((ny, nx))
                next_label += 1
    return labels


def boundary_set(bits: np.ndarray) -> set[tuple[int, int]]:
    """Set pixels with a background 4-neighbor or lying on the image edge."""
    h, w = bits.shape
    out = set()
    for y in range(h):
        for x in range(w):
            if not bits[y, x]:
                continue
            if y == 0 or y == h - 1 or x == 0 or x == w - 1:
                out.add((x, y))
                continue
            if not (bits[y - 1, x] and bits[y + 1, x] and bits[y, x - 1] and bits[y, x + 1]):
                out.add((x, y))
    return out


def chamfer_oracle(bits: np.ndarray) -> np.ndarray:
    """Exact (3,4) chamfer distance: min over background cells (including a
    one-pixel out-of-frame ring) of 4*diag + 3*straight steps."""
    h, w = bits.shape
    bg = [(x, y) for y in range(-1, h + 1) for x in range(-1, w + 1)
          if not (0 <= y < h and 0 <= x < w) or not bits[y, x]]
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            if not bits[y, x]:
                continue
            best = None
            for bx, by in bg:
                ax, ay = abs(x - bx), abs(y - by)
                cost = 4 * min(ax, ay) + 3 * (max(ax, ay) - min(ax, ay))
                if best is None or cost < best:
                    best = cost
            out[y, x] = best
    return out


def fill_holes_oracle(bits: np.ndarray) -> np.ndarray:
    """Flood 4-connected background from the border; unreached cells become set."""
    h, w = bits.shape
    reach = np.zeros((h, w), dtype=bool)
    stack = []
    for x in range(w):
        for y in (0, h - 1):
            if not bits[y, x] and not reach[y, x]:
                reach[y, x] = True
                stack.append((y, x))
    for y in range(h):
        for x in (0, w - 1):
            if not bits[y, x] and not reach[y, x]:
                reach[y, x] = True
                stack.append((y, x))
    while stack:
        cy, cx = stack.pop()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ny, nx = cy + dy, cx + dx
            if 0 <= ny < h and 0 <= nx < w and not bits[ny, nx] and not reach[ny, nx]:
                reach[ny, nx] = True
                stack.append((ny, nx))
    return bits | ~reach


def random_mask(rng: np.random.Generator, h: int, w: int, p: float = 0.45) -> np.ndarray:
    return rng.random((h, w)) < p


def random_single_component(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Random blobby mask reduced to one hole-free 8-connected component."""
    bits = np.zeros((h, w), dtype=bool)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(int(rng.integers(2, 6))):
        cy, cx = rng.integers(2, h - 2), rng.integers(2, w - 2)
        r = int(rng.integers(2, max(3, min(h, w) // 3)))
        bits |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    labels = flood_label_oracle(bits)
    if labels.max() == 0:
        bits[h // 2, w // 2] = True
        return bits
    areas = [(labels == k).sum() for k in range(1, labels.max() + 1)]
    keep = 1 + int(np.argmax(areas))
    return fill_holes_oracle(labels == keep)
