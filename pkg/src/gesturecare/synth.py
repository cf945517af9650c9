"""Synthetic palm-facing hand renderer with exact fingertip ground truth.

Hands are a filled palm disc plus one capsule per finger. The capsule's
rounded cap ends exactly at palm_radius * (1 + finger_length) along the
finger axis, and that apex point is the ground-truth tip. Angles follow
raster convention (degrees from +x, y-down), matching detected fingertip
angles, so canonical fingers extend toward the lower half of the frame.

Every function is a pure function of its arguments including the seed, so
corpora regenerate byte-identically.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .imaging import Image, read_pnm, write_pnm
from .segmentation import DEFAULT_SKIN_MODEL, classify_skin


class OutOfFrame(ValueError):
    """Rendered shape touches or crosses the frame border."""


DEFAULT_SKIN_COLOR = (118, 77, 53)
DEFAULT_BACKGROUND_COLOR = (25, 35, 55)


@dataclass(frozen=True)
class HandParams:
    palm_center: tuple[float, float]
    palm_radius: float
    finger_angles: tuple[float, ...] = ()
    finger_length: float = 1.8  # in palm radii, measured beyond the rim to the tip apex
    finger_width: float = 0.25  # in palm radii
    skin_color: tuple[int, int, int] = DEFAULT_SKIN_COLOR
    background_color: tuple[int, int, int] = DEFAULT_BACKGROUND_COLOR
    gain: float = 1.0
    noise_amp: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.palm_radius <= 0:
            raise ValueError("palm_radius must be > 0")
        if len(self.finger_angles) > 5:
            raise ValueError("at most 5 fingers")
        if self.gain <= 0:
            raise ValueError("gain must be > 0")
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be >= 0")


@dataclass(frozen=True)
class LabeledSample:
    image: Image
    label: int
    truth_tips: tuple[tuple[float, float], ...]


def canonical_finger_angles(count: int) -> tuple[float, ...]:
    """Fingers 30 degrees apart, centered on 90 (straight toward +y)."""
    if not (0 <= count <= 5):
        raise ValueError("count must be in [0, 5]")
    return tuple(90.0 + 30.0 * (i - (count - 1) / 2.0) for i in range(count))


def _is_skin(color) -> bool:
    one = Image(np.asarray(color, dtype=np.uint8).reshape(1, 1, 3))
    return bool(classify_skin(DEFAULT_SKIN_MODEL, one).bits[0, 0])


def _check_colors(skin, background) -> None:
    if not _is_skin(skin):
        raise ValueError(f"skin_color {skin} does not classify as skin")
    if _is_skin(background):
        raise ValueError(f"background_color {background} classifies as skin")


def _half_up(a: np.ndarray) -> np.ndarray:
    return np.floor(a + 0.5)


def render_hand(p: HandParams, frame_size: tuple[int, int]) -> LabeledSample:
    """Palm disc plus finger capsules, filled flat, then gain and noise."""
    _check_colors(p.skin_color, p.background_color)
    w, h = frame_size
    cx, cy = p.palm_center
    rp = p.palm_radius
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    shape = (xx - cx) ** 2 + (yy - cy) ** 2 <= rp * rp
    half_width = p.finger_width * rp / 2.0
    tip_dist = rp * (1.0 + p.finger_length)
    seg_len = tip_dist - half_width
    if seg_len <= 0:
        raise ValueError("finger too short for its width")
    tips = []
    for ang in p.finger_angles:
        rad = math.radians(ang)
        dx, dy = math.cos(rad), math.sin(rad)
        t = np.clip((xx - cx) * dx + (yy - cy) * dy, 0.0, seg_len)
        px, py = cx + t * dx, cy + t * dy
        shape |= (xx - px) ** 2 + (yy - py) ** 2 <= half_width * half_width
        tips.append((cx + tip_dist * dx, cy + tip_dist * dy))

    if shape[0, :].any() or shape[-1, :].any() or shape[:, 0].any() or shape[:, -1].any():
        raise OutOfFrame("hand touches the frame border")

    img = np.where(
        shape[:, :, None],
        np.asarray(p.skin_color, dtype=np.float64),
        np.asarray(p.background_color, dtype=np.float64),
    )
    img = np.clip(_half_up(p.gain * img), 0, 255)
    if p.noise_amp > 0:
        rng = np.random.default_rng(p.seed)
        noise = rng.integers(-p.noise_amp, p.noise_amp + 1, size=img.shape)
        img = np.clip(img + noise, 0, 255)
    return LabeledSample(
        image=Image(img.astype(np.uint8)),
        label=len(p.finger_angles),
        truth_tips=tuple(tips),
    )


def apply_lighting(img: Image, gain: float, noise_amp: int, seed: int) -> Image:
    """Per-sample clamp(round(gain * v)) plus seeded uniform integer noise."""
    if gain <= 0:
        raise ValueError("gain must be > 0")
    out = np.clip(_half_up(gain * img.data.astype(np.float64)), 0, 255)
    if noise_amp > 0:
        rng = np.random.default_rng(seed)
        noise = rng.integers(-noise_amp, noise_amp + 1, size=out.shape)
        out = np.clip(out + noise, 0, 255)
    return Image(out.astype(np.uint8))


def _sample_skin_color(rng: np.random.Generator) -> tuple[int, int, int]:
    """Random chroma inside the skin box with margins that survive rounding,
    R > G > B kept strict, and channel values low enough that gain 1.4
    cannot clip (max pre-gain sample stays <= 130)."""
    rn = rng.uniform(0.44, 0.50)
    gn = rng.uniform(max(0.285, (1.0 - rn) / 2.0 + 0.01), min(0.34, rn - 0.13))
    s = rng.uniform(210.0, 260.0)
    r = int(math.floor(rn * s + 0.5))
    g = int(math.floor(gn * s + 0.5))
    b = int(math.floor((1.0 - rn - gn) * s + 0.5))
    return (r, g, b)


def generate_corpus(
    seed: int,
    per_class: int,
    frame_size: tuple[int, int] = (320, 240),
    *,
    noise_amp_max: int = 4,
    gain_range: tuple[float, float] = (0.6, 1.4),
) -> list[LabeledSample]:
    """6 gesture classes (0-5 extended fingers), per_class samples each.

    Per sample: palm center jittered +-15 px, radius +-10%, finger angles
    +-6 degrees, random in-box skin color, gain drawn from gain_range, and a
    noise amplitude up to noise_amp_max. Deterministic in `seed`; samples
    come out label-major.
    """
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    w, h = frame_size
    base_cx, base_cy = w // 2, int(math.floor(h * 0.29 + 0.5))
    base_rp = min(h / 6.0, w / 8.0)
    master = np.random.default_rng(seed)
    samples = []
    for label in range(6):
        canonical = canonical_finger_angles(label)
        for _ in range(per_class):
            cx = base_cx + int(master.integers(-15, 16))
            cy = base_cy + int(master.integers(-15, 16))
            rp = base_rp * master.uniform(0.9, 1.1)
            angles = tuple(a + master.uniform(-6.0, 6.0) for a in canonical)
            color = _sample_skin_color(master)
            gain = master.uniform(gain_range[0], gain_range[1])
            amp = int(master.integers(0, noise_amp_max + 1)) if noise_amp_max > 0 else 0
            frame_seed = int(master.integers(0, 2**63))
            params = HandParams(
                palm_center=(float(cx), float(cy)),
                palm_radius=rp,
                finger_angles=angles,
                skin_color=color,
                gain=gain,
                noise_amp=amp,
                seed=frame_seed,
            )
            samples.append(render_hand(params, frame_size))
    return samples


@dataclass(frozen=True)
class CorpusEntry:
    filename: str
    path: str
    label: int
    truth_tips: tuple[tuple[float, float], ...]

    def load_image(self) -> Image:
        return read_pnm(self.path)


def save_corpus(samples: list[LabeledSample], out_dir) -> None:
    """Frames as <label>_<index>.ppm plus a truth.txt manifest."""
    os.makedirs(out_dir, exist_ok=True)
    counters: dict[int, int] = {}
    lines = []
    for s in samples:
        i = counters.get(s.label, 0)
        counters[s.label] = i + 1
        name = f"{s.label}_{i:04d}.ppm"
        write_pnm(os.path.join(out_dir, name), s.image)
        coords = " ".join(f"{x:.3f} {y:.3f}" for x, y in s.truth_tips)
        lines.append(f"{name} {s.label} {len(s.truth_tips)}" + (" " + coords if coords else ""))
    with open(os.path.join(out_dir, "truth.txt"), "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def load_corpus(corpus_dir) -> list[CorpusEntry]:
    entries = []
    with open(os.path.join(corpus_dir, "truth.txt"), "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split(" ")
            name, label, n_tips = parts[0], int(parts[1]), int(parts[2])
            coords = [float(v) for v in parts[3:]]
            if len(coords) != 2 * n_tips:
                raise ValueError(f"truth line for {name} promises {n_tips} tips")
            tips = tuple((coords[2 * i], coords[2 * i + 1]) for i in range(n_tips))
            entries.append(
                CorpusEntry(
                    filename=name,
                    path=os.path.join(corpus_dir, name),
                    label=label,
                    truth_tips=tips,
                )
            )
    return entries
