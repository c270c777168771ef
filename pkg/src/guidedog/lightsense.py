"""Traffic-light patches, the five-class light taxonomy and the multi-frame vote."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy import ndimage

from .errors import InvalidInput, ParseError
from .maskmodel import SegmentationFrame, binary_mask, is_traffic_light
from .walkable import label_components

MIN_PATCH_SIDE = 8
BUFFER_LENGTH = 7
DEFAULT_NO_LIGHT_RESET_FRAMES = 15


class LightClass(str, enum.Enum):
    PEDESTRIAN_RED = "pedestrian_red"
    PEDESTRIAN_GREEN = "pedestrian_green"
    VEHICLE_RED = "vehicle_red"
    VEHICLE_GREEN = "vehicle_green"
    OTHERS = "others"

    @property
    def is_pedestrian(self) -> bool:
        return self in (LightClass.PEDESTRIAN_RED, LightClass.PEDESTRIAN_GREEN)


PEDESTRIAN_COLOR = {LightClass.PEDESTRIAN_RED: "red", LightClass.PEDESTRIAN_GREEN: "green"}


@dataclass(frozen=True)
class LightPatch:
    """Inclusive pixel bounding box of one traffic-light component."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int
    pixel_count: int = 0

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def crop(self, image: np.ndarray) -> np.ndarray:
        return image[self.y_min : self.y_max + 1, self.x_min : self.x_max + 1]


def extract_patches(frame: SegmentationFrame, min_side: int = MIN_PATCH_SIDE) -> list[LightPatch]:
    """Bounding boxes of traffic-light components, largest component first.

    Boxes narrower or shorter than ``min_side`` pixels are dropped.
    """
    mask = binary_mask(frame, is_traffic_light)
    if not mask.any():
        return []
    labels, n = label_components(mask)
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    patches = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        ys, xs = sl
        p = LightPatch(xs.start, ys.start, xs.stop - 1, ys.stop - 1, int(counts[i]))
        if p.width >= min_side and p.height >= min_side:
            patches.append(p)
    # stable sort keeps raster order among equal-sized components
    patches.sort(key=lambda p: -p.pixel_count)
    return patches


class PatchClassifier(Protocol):
    """Anything that labels an RGB light patch with one of the five classes."""

    def classify(self, pixels: np.ndarray) -> LightClass: ...


def check_patch_pixels(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels)
    if pixels.ndim < 2 or pixels.shape[0] < MIN_PATCH_SIDE or pixels.shape[1] < MIN_PATCH_SIDE:
        raise InvalidInput(f"patch must be at least {MIN_PATCH_SIDE}x{MIN_PATCH_SIDE}, got {pixels.shape[:2]}")
    return pixels


@dataclass(frozen=True)
class LightVerdict:
    buffer: tuple[LightClass, ...] = ()
    color: str | None = None

    def __post_init__(self):
        if len(self.buffer) > BUFFER_LENGTH:
            raise InvalidInput(f"buffer longer than {BUFFER_LENGTH}")
        if any(not p.is_pedestrian for p in self.buffer):
            raise InvalidInput("buffer holds only pedestrian predictions")
        object.__setattr__(self, "color", majority_color(self.buffer))


def majority_color(buffer: Sequence[LightClass]) -> str | None:
    """Most frequent pedestrian color; a tie resolves to red."""
    if not buffer:
        return None
    counts = Counter(buffer)
    green = counts[LightClass.PEDESTRIAN_GREEN]
    red = counts[LightClass.PEDESTRIAN_RED]
    return "green" if green > red else "red"


def update_verdict(verdict: LightVerdict, prediction: LightClass) -> LightVerdict:
    """Append a pedestrian prediction to the sliding window; others are ignored."""
    prediction = LightClass(prediction)
    if not prediction.is_pedestrian:
        return verdict
    return LightVerdict((verdict.buffer + (prediction,))[-BUFFER_LENGTH:])


def reset_verdict(verdict: LightVerdict | None = None) -> LightVerdict:
    return LightVerdict()


@dataclass
class LightTracker:
    """Per-stream verdict state plus the no-light counter that clears it."""

    reset_after: int = DEFAULT_NO_LIGHT_RESET_FRAMES
    verdict: LightVerdict = field(default_factory=LightVerdict)
    frames_without_light: int = 0

    @property
    def color(self) -> str | None:
        return self.verdict.color

    def observe(self, prediction: LightClass | None) -> LightVerdict:
        """Feed one frame's prediction, or None when no light patch was seen."""
        if prediction is None:
            self.frames_without_light += 1
            if self.frames_without_light >= self.reset_after:
                self.verdict = reset_verdict(self.verdict)
        else:
            self.frames_without_light = 0
            self.verdict = update_verdict(self.verdict, prediction)
        return self.verdict


NO_LIGHT_LABELS = {"none", "-", ""}


def parse_label(token: str) -> LightClass | None:
    token = token.strip().lower()
    if token in NO_LIGHT_LABELS:
        return None
    try:
        return LightClass(token)
    except ValueError:
        raise InvalidInput(f"unknown light label {token!r}") from None


def read_label_file(path) -> list[tuple[LightClass | None, float | None]]:
    """Sidecar labels: one line per frame, ``<label> [altitude_m]``; ``#`` comments."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) > 2:
            raise ParseError("expected '<label> [altitude]'", lineno, str(path))
        try:
            label = parse_label(parts[0])
            alt = float(parts[1]) if len(parts) == 2 else None
        except ValueError as exc:
            raise ParseError(str(exc), lineno, str(path)) from None
        rows.append((label, alt))
    return rows
