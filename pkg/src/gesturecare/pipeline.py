"""Per-frame recognition state machine and the gesture registry.

A frame runs skin classification, morphological cleanup, ROI extraction,
contour/fingertip geometry, the orientation histogram, and the classifier.
The resulting (label, confidence) stream is debounced: a gesture must hold
for k consecutive confident frames to emit, and a refractory window stops
the same gesture from re-announcing while it is simply being held.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .classifier import Mlp, mlp_forward
from .features import DEFAULT_MAG_THRESHOLD, build_feature_vector, orientation_histogram
from .handgeom import (
    DEFAULT_FINGERTIP_PARAMS,
    FingertipParams,
    HandGeometry,
    centroid_and_radius,
    detect_fingertips,
    trace_contour,
)
from .imaging import Image, to_grayscale
from .segmentation import (
    HandNotFound,
    SkinModel,
    classify_skin,
    extract_roi,
    fill_holes,
    min_area_default,
    morph_open,
)

WRONG_GESTURE_FEEDBACK = "wrong gesture"


class UnknownGesture(Exception):
    """Class id not in the registry; carries the local feedback text."""

    def __init__(self, label):
        super().__init__(f"gesture {label} is not registered")
        self.label = label
        self.feedback = WRONG_GESTURE_FEEDBACK


class RegistryParseError(ValueError):
    """Registry file error; the message names the offending line."""


@dataclass(frozen=True)
class GestureClass:
    id: int
    fingers: int
    message: str
    name: str = field(default="", compare=False)  # display only; not serialized

    def __post_init__(self):
        if not (0 <= self.fingers <= 5):
            raise ValueError("fingers must be in [0, 5]")
        if not self.name:
            object.__setattr__(self, "name", f"g{self.id}")


class GestureRegistry:
    """Ordered set of gesture classes with unique ids.

    Ships with 6 defaults but accepts additions at any time; descriptions
    are configuration, not constants.
    """

    def __init__(self, classes=()):
        self._classes: list[GestureClass] = []
        self._by_id: dict[int, GestureClass] = {}
        for c in classes:
            self.add(c)

    def add(self, cls: GestureClass) -> None:
        if cls.id in self._by_id:
            raise ValueError(f"duplicate gesture id {cls.id}")
        self._classes.append(cls)
        self._by_id[cls.id] = cls

    def remove(self, gesture_id: int) -> None:
        cls = self._by_id.pop(gesture_id, None)
        if cls is None:
            raise KeyError(gesture_id)
        self._classes.remove(cls)

    def get(self, gesture_id: int):
        return self._by_id.get(gesture_id)

    @property
    def classes(self) -> tuple[GestureClass, ...]:
        return tuple(self._classes)

    def __len__(self) -> int:
        return len(self._classes)

    def __contains__(self, gesture_id: int) -> bool:
        return gesture_id in self._by_id

    def __eq__(self, other):
        if not isinstance(other, GestureRegistry):
            return NotImplemented
        return self._classes == other._classes


_DEFAULT_GESTURES = (
    (0, "fist", "need water"),
    (1, "one", "need food"),
    (2, "two", "need toilet"),
    (3, "three", "call nurse"),
    (4, "four", "pain"),
    (5, "five", "emergency"),
)


def default_registry() -> GestureRegistry:
    """Six finger-count gestures with placeholder need messages."""
    return GestureRegistry(
        GestureClass(id=i, fingers=i, message=msg, name=name)
        for i, name, msg in _DEFAULT_GESTURES
    )


def _escape_msg(msg: str) -> str:
    return msg.replace("\\", "\\\\").replace('"', '\\"')


def registry_to_text(registry: GestureRegistry) -> str:
    lines = ["# gesture registry"]
    for c in registry.classes:
        if "\n" in c.message or "\r" in c.message:
            raise ValueError(f"gesture {c.id}: message must be a single line")
        lines.append(f'gesture {c.id} fingers={c.fingers} msg="{_escape_msg(c.message)}"')
    return "\n".join(lines) + "\n"


def _parse_msg(raw: str, lineno: int) -> str:
    if not raw.startswith('"'):
        raise RegistryParseError(f"line {lineno}: msg value must be quoted")
    out = []
    i = 1
    while i < len(raw):
        ch = raw[i]
        if ch == "\\":
            if i + 1 >= len(raw) or raw[i + 1] not in ('"', "\\"):
                raise RegistryParseError(f"line {lineno}: bad escape in msg")
            out.append(raw[i + 1])
            i += 2
        elif ch == '"':
            if raw[i + 1 :]:
                raise RegistryParseError(f"line {lineno}: trailing text after msg")
            return "".join(out)
        else:
            out.append(ch)
            i += 1
    raise RegistryParseError(f"line {lineno}: unterminated msg quote")


def registry_from_text(text: str) -> GestureRegistry:
    registry = GestureRegistry()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(" ", 3)
        if len(parts) != 4 or parts[0] != "gesture":
            raise RegistryParseError(f"line {lineno}: expected 'gesture <id> fingers=<n> msg=...'")
        try:
            gid = int(parts[1])
        except ValueError:
            raise RegistryParseError(f"line {lineno}: bad gesture id {parts[1]!r}") from None
        if not parts[2].startswith("fingers="):
            raise RegistryParseError(f"line {lineno}: expected fingers=<n>")
        try:
            fingers = int(parts[2][len("fingers=") :])
        except ValueError:
            raise RegistryParseError(f"line {lineno}: bad finger count") from None
        if not parts[3].startswith("msg="):
            raise RegistryParseError(f"line {lineno}: expected msg=...")
        msg = _parse_msg(parts[3][len("msg=") :], lineno)
        try:
            registry.add(GestureClass(id=gid, fingers=fingers, message=msg))
        except ValueError as exc:
            raise RegistryParseError(f"line {lineno}: {exc}") from None
    if len(registry) == 0:
        raise RegistryParseError("registry file has no gesture entries")
    return registry


def save_registry(path, registry: GestureRegistry) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(registry_to_text(registry))


def load_registry(path) -> GestureRegistry:
    with open(path, "r", encoding="utf-8") as f:
        return registry_from_text(f.read())


def resolve_message(registry: GestureRegistry, label: int) -> str:
    """The class's lingual description; UnknownGesture means local feedback
    only, never a network send."""
    cls = registry.get(label)
    if cls is None:
        raise UnknownGesture(label)
    return cls.message


@dataclass(frozen=True)
class Thresholds:
    conf_accept: float = 0.7
    conf_reject: float = 0.5
    k_consecutive: int = 3
    refractory_frames: int = 30


@dataclass(frozen=True)
class PipelineState:
    thresholds: Thresholds = Thresholds()
    current_label: int | None = None
    streak: int = 0
    refractory_remaining: int = 0
    last_emitted: int | None = None


@dataclass(frozen=True)
class NoHand:
    pass


@dataclass(frozen=True)
class Rejected:
    reason: str  # "low-confidence" | "unknown-gesture"
    feedback: str
    label: int | None = None
    confidence: float | None = None


@dataclass(frozen=True)
class Tracking:
    label: int
    streak: int
    confidence: float | None = None


@dataclass(frozen=True)
class Emitted:
    label: int
    message: str
    confidence: float


FrameOutcome = NoHand | Rejected | Tracking | Emitted


def debounce_update(
    state: PipelineState, label: int, confidence: float
) -> tuple[PipelineState, FrameOutcome]:
    """One debounce step; returns the new state and the frame's outcome.

    Below conf_reject the frame is rejected and the streak resets. In the
    middle band the frame only reports Tracking. At or above conf_accept the
    streak grows (or restarts on a label change) and emits exactly when it
    reaches k_consecutive, unless the same gesture is still inside its
    refractory window. The refractory ticks down once per frame.
    """
    t = state.thresholds
    refr = max(0, state.refractory_remaining - 1)
    if confidence < t.conf_reject:
        new = replace(state, current_label=None, streak=0, refractory_remaining=refr)
        return new, Rejected("low-confidence", WRONG_GESTURE_FEEDBACK, label, confidence)
    if confidence < t.conf_accept:
        return replace(state, refractory_remaining=refr), Tracking(label, state.streak, confidence)
    streak = state.streak + 1 if label == state.current_label else 1
    same_event_blocked = refr > 0 and label == state.last_emitted
    if streak == t.k_consecutive and not same_event_blocked:
        new = replace(
            state,
            current_label=label,
            streak=0,
            refractory_remaining=t.refractory_frames,
            last_emitted=label,
        )
        return new, Emitted(label, "", confidence)
    new = replace(state, current_label=label, streak=streak, refractory_remaining=refr)
    return new, Tracking(label, streak, confidence)


def frame_features(
    frame: Image,
    skin_model: SkinModel,
    *,
    morph_radius: int = 1,
    min_area: int | None = None,
    fingertip_params: FingertipParams = DEFAULT_FINGERTIP_PARAMS,
    mag_threshold: float = DEFAULT_MAG_THRESHOLD,
) -> tuple[np.ndarray, HandGeometry, tuple[int, int, int, int]]:
    """Front half of the pipeline: frame in, feature vector and geometry out.

    Raises HandNotFound when no skin component passes the size filter.
    """
    mask = classify_skin(skin_model, frame)
    opened = morph_open(mask, morph_radius)
    if min_area is None:
        min_area = min_area_default(frame.width, frame.height)
    roi, bbox = extract_roi(opened, min_area)
    # sensor noise leaves pinholes in the classified mask; they would cap the
    # chamfer transform and sink the palm radius
    roi = fill_holes(roi)
    contour = trace_contour(roi)
    centroid, palm_radius = centroid_and_radius(roi)
    tips = detect_fingertips(contour, centroid, palm_radius, fingertip_params)
    geom = HandGeometry(centroid=centroid, palm_radius=palm_radius, fingertips=tuple(tips))
    gray = to_grayscale(frame)
    x0, y0, x1, y1 = bbox
    sub = Image(gray.data[y0 : y1 + 1, x0 : x1 + 1])
    hist = orientation_histogram(sub, roi, mag_threshold)
    return build_feature_vector(hist, geom), geom, bbox


def process_frame(
    state: PipelineState,
    registry: GestureRegistry,
    net: Mlp,
    skin_model: SkinModel,
    frame: Image,
    **feature_kwargs,
) -> tuple[PipelineState, FrameOutcome]:
    """Full per-frame step: segmentation through debounced classification.

    Degenerate frames never raise; they produce NoHand or Rejected. An
    emission whose label is missing from the registry becomes a debounced
    "wrong gesture" rejection instead of a network event.
    """
    try:
        vec, _, _ = frame_features(frame, skin_model, **feature_kwargs)
    except HandNotFound:
        refr = max(0, state.refractory_remaining - 1)
        new = replace(state, current_label=None, streak=0, refractory_remaining=refr)
        return new, NoHand()
    probs = mlp_forward(net, vec)
    label = int(np.argmax(probs))
    confidence = float(probs[label])
    state, outcome = debounce_update(state, label, confidence)
    if isinstance(outcome, Emitted):
        try:
            msg = resolve_message(registry, label)
        except UnknownGesture as exc:
            return state, Rejected("unknown-gesture", exc.feedback, label, confidence)
        outcome = replace(outcome, message=msg)
    return state, outcome
