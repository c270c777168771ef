"""Largest walkable region, its centroid, and the three-band control codes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyRegion, InvalidInput
from .maskmodel import SegmentationFrame, binary_mask, is_walkable

DEFAULT_THETA_CONF = 0.30

# 8-connectivity
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class WalkableAnalysis:
    component_mask: np.ndarray
    pixel_count: int
    centroid: tuple[float, float] | None
    partition_confidences: tuple[float, float, float]
    codes: tuple[int, int, int]
    present: bool

    def summary(self) -> dict:
        return {
            "present": self.present,
            "pixel_count": self.pixel_count,
            "centroid": None if self.centroid is None else [round(c, 4) for c in self.centroid],
            "confidences": [round(c, 4) for c in self.partition_confidences],
            "codes": list(self.codes),
        }


def label_components(grid: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected labels, numbered in row-major order of each component's first pixel."""
    return ndimage.label(grid, structure=_EIGHT)


def largest_component(walkable: np.ndarray) -> tuple[np.ndarray, int, bool]:
    """Pick the 8-connected component with the most pixels.

    Ties go to the component whose first pixel comes earliest in row-major
    order. Returns ``(component_mask, pixel_count, present)``.
    """
    walkable = np.asarray(walkable, dtype=bool)
    if walkable.ndim != 2 or walkable.size == 0:
        raise InvalidInput("grid must be 2D and nonempty")
    labels, n = label_components(walkable)
    if n == 0:
        return np.zeros_like(walkable), 0, False
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    counts[0] = 0
    # argmax returns the first maximum, i.e. the lowest label
    best = int(np.argmax(counts))
    return labels == best, int(counts[best]), True


def estimate_centroid(component_mask: np.ndarray) -> tuple[float, float]:
    """Centroid from raw image moments: (M10 / M00, M01 / M00).

    x is the column index and y the row index of pixel centers.
    """
    mask = np.asarray(component_mask, dtype=bool)
    if mask.ndim != 2:
        raise InvalidInput("mask must be 2D")
    cols = np.count_nonzero(mask, axis=0)
    m00 = int(cols.sum())
    if m00 == 0:
        raise EmptyRegion("cannot take the centroid of an empty region")
    rows = np.count_nonzero(mask, axis=1)
    m10 = int(cols @ np.arange(mask.shape[1]))
    m01 = int(rows @ np.arange(mask.shape[0]))
    return m10 / m00, m01 / m00


def band_edges(width: int) -> tuple[int, int]:
    """Column boundaries of the left/middle/right bands; the remainder goes right."""
    third = width // 3
    return third, 2 * third


def partition_confidences(component_mask: np.ndarray) -> tuple[float, float, float]:
    mask = np.asarray(component_mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[1] < 3:
        raise InvalidInput("mask must be 2D with width >= 3")
    h = mask.shape[0]
    a, b = band_edges(mask.shape[1])
    cols = mask.sum(axis=0, dtype=np.int64)
    counts = (cols[:a].sum(), cols[a:b].sum(), cols[b:].sum())
    widths = (a, b - a, mask.shape[1] - b)
    return tuple(float(c) / (w * h) for c, w in zip(counts, widths))


def binary_conversion(conf: float, theta_conf: float) -> int:
    if not (0.0 <= conf <= 1.0) or not (0.0 <= theta_conf <= 1.0):
        raise InvalidInput(f"conf and threshold must lie in [0, 1], got {conf}, {theta_conf}")
    return 1 if conf >= theta_conf else 0


def analyze(frame: SegmentationFrame, theta_conf: float = DEFAULT_THETA_CONF) -> WalkableAnalysis:
    walk = binary_mask(frame, is_walkable)
    component, count, present = largest_component(walk)
    if not present:
        return WalkableAnalysis(component, 0, None, (0.0, 0.0, 0.0), (0, 0, 0), False)
    centroid = estimate_centroid(component)
    confs = partition_confidences(component)
    codes = tuple(binary_conversion(c, theta_conf) for c in confs)
    return WalkableAnalysis(component, count, centroid, confs, codes, True)
