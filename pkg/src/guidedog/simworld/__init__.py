"""Deterministic street world used to close the loop around the controller."""

from .metrics import Metrics, score, surface_class_at
from .oracle import oracle_classify
from .render import LightProjection, Renderer, render
from .scenario import Camera, Light, Pose, Scenario, bundled_scenarios, load_scenario, parse_scenario
from .world import Calibration, DroneState, WorldState, initial_world, light_color_at, step_kinematics

__all__ = [
    "Calibration",
    "Camera",
    "DroneState",
    "Light",
    "LightProjection",
    "Metrics",
    "Pose",
    "Renderer",
    "Scenario",
    "WorldState",
    "bundled_scenarios",
    "initial_world",
    "light_color_at",
    "load_scenario",
    "oracle_classify",
    "parse_scenario",
    "render",
    "score",
    "step_kinematics",
    "surface_class_at",
]
