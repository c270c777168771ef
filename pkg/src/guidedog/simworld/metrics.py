"""Scoring of closed-loop runs against scenario ground truth."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping

import shapely
from shapely.geometry import Point

from ..maskmodel import ClassPalette, default_palette
from .scenario import Scenario
from .world import light_color_at


@dataclass(frozen=True)
class Metrics:
    rms_deviation: float
    max_deviation: float
    walkable_fraction: float
    obstacle_hits: int
    red_light_violations: int
    goal_reached: bool
    steps_to_goal: int | None
    steps: int

    def to_dict(self) -> dict:
        return asdict(self)


def surface_class_at(scenario: Scenario, x: float, y: float) -> str | None:
    """Topmost painted class at a ground point, or None off the map."""
    for layer in reversed(scenario.painted()):
        if shapely.contains_xy(layer.polygon, x, y):
            return layer.class_name
    return None


def _pose(rec: Mapping) -> tuple[float, float]:
    p = rec["pose"]
    return float(p["x"]), float(p["y"])


def score(records: Iterable[Mapping], scenario: Scenario, palette: ClassPalette | None = None) -> Metrics:
    """Metrics over a run log.

    Each record carries the drone ``pose`` after its step and the
    simulation ``time`` at that pose. Positions before the first record
    are taken from the scenario start.
    """
    palette = palette or default_palette()
    walkable = {e.name for e in palette.entries if e.walkable}
    obstacles = [o.polygon for o in scenario.obstacles]

    dev_sq = 0.0
    dev_max = 0.0
    on_walk = 0
    hits = 0
    violations = 0
    steps_to_goal = None
    n = 0
    prev_inside = [
        shapely.contains_xy(cw.polygon, scenario.start.x, scenario.start.y) for cw in scenario.crosswalks
    ]
    for rec in records:
        n += 1
        x, y = _pose(rec)
        pt = Point(x, y)
        if scenario.centerline is not None:
            dev = scenario.centerline.distance(pt)
            dev_sq += dev * dev
            dev_max = max(dev_max, dev)
        if surface_class_at(scenario, x, y) in walkable:
            on_walk += 1
        if obstacles:
            disc = pt.buffer(scenario.footprint)
            if any(disc.intersects(o) for o in obstacles):
                hits += 1
        for k, cw in enumerate(scenario.crosswalks):
            inside = bool(shapely.contains_xy(cw.polygon, x, y))
            if inside and not prev_inside[k]:
                light = scenario.lights[cw.light]
                if light_color_at(light, float(rec["time"])) == "red":
                    violations += 1
            prev_inside[k] = inside
        if steps_to_goal is None and scenario.goal is not None and shapely.contains_xy(scenario.goal, x, y):
            steps_to_goal = n
    return Metrics(
        rms_deviation=math.sqrt(dev_sq / n) if n else 0.0,
        max_deviation=dev_max,
        walkable_fraction=on_walk / n if n else 0.0,
        obstacle_hits=hits,
        red_light_violations=violations,
        goal_reached=steps_to_goal is not None,
        steps_to_goal=steps_to_goal,
        steps=n,
    )
