"""Ground-truth traffic-light classifier with optional label noise."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..lightsense import LightClass, LightPatch
from .render import LightProjection
from .scenario import Scenario
from .world import WorldState

ALL_CLASSES = tuple(LightClass)
# a light face further than this from the camera direction reads as "others"
MAX_FACING_ANGLE = math.radians(60)


def true_class(kind: str, color: str) -> LightClass:
    return LightClass(f"{kind}_{color}")


def corrupt(label: LightClass, noise: float, rng: np.random.Generator) -> LightClass:
    """With probability ``noise`` swap ``label`` for a uniformly chosen other class."""
    if noise > 0 and rng.random() < noise:
        others = [c for c in ALL_CLASSES if c != label]
        return others[int(rng.integers(len(others)))]
    return label


def _overlap(a, b) -> int:
    w = min(a[2], b[2]) - max(a[0], b[0]) + 1
    h = min(a[3], b[3]) - max(a[1], b[1]) + 1
    return max(w, 0) * max(h, 0)


def oracle_classify(
    world: WorldState,
    scenario: Scenario,
    patch: LightPatch,
    projections: Sequence[LightProjection],
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> LightClass:
    """Label a patch from the light that produced it.

    The light whose projected box overlaps the patch most wins; ties go to
    the nearer light. Lights seen from behind or the side are "others".
    """
    best = None
    for p in projections:
        ov = _overlap(p.bbox, patch.bbox)
        if ov == 0:
            continue
        key = (ov, -p.depth)
        if best is None or key > best[0]:
            best = (key, p)
    if best is None:
        label = LightClass.OTHERS
    else:
        idx = best[1].light
        light = scenario.lights[idx]
        d = world.drone
        to_drone = math.atan2(d.y - light.position[1], d.x - light.position[0])
        off = abs(math.remainder(to_drone - light.facing, 2 * math.pi))
        if off > MAX_FACING_ANGLE:
            label = LightClass.OTHERS
        else:
            label = true_class(light.kind, world.light_colors[idx])
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    return corrupt(label, noise, rng)
