"""Drone kinematics and traffic-light phase schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .scenario import Light, Scenario


@dataclass(frozen=True)
class Calibration:
    """Physical response per RC unit; 100 RC units of v_f is about 2 m/s."""

    k_lin: float = 0.02  # m/s per RC unit
    k_yaw: float = 0.015  # rad/s per RC unit
    k_vert: float = 0.01  # m/s per RC unit


def normalize_angle(a: float) -> float:
    """Wrap into (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


@dataclass(frozen=True)
class DroneState:
    x: float
    y: float
    heading: float
    h: float
    time: float = 0.0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("altitude must be nonnegative")
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class WorldState:
    drone: DroneState
    light_colors: tuple[str, ...] = ()
    step_index: int = 0


def light_color_at(light: Light, time: float) -> str:
    """Phase color at ``time``; a phase boundary belongs to the phase that starts there."""
    t = math.fmod(time + light.phase_offset, light.cycle)
    if t < 0:
        t += light.cycle
    elapsed = 0.0
    for color, dur in light.schedule:
        elapsed += dur
        if t < elapsed:
            return color
    return light.schedule[0][0]


def initial_world(scenario: Scenario) -> WorldState:
    s = scenario.start
    drone = DroneState(s.x, s.y, s.heading, s.altitude, 0.0)
    return WorldState(drone, tuple(light_color_at(l, 0.0) for l in scenario.lights), 0)


def step_kinematics(world: WorldState, command, dt: float, calib: Calibration, scenario: Scenario | None = None) -> WorldState:
    """Advance the drone by one command held for ``dt`` seconds.

    The body-frame velocity is applied along the heading at the start of
    the step, so two steps of ``dt`` equal one of ``2 dt`` for pure
    translation.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    v_lr, v_f, v_ud, v_yaw = command.as_tuple() if hasattr(command, "as_tuple") else command
    d = world.drone
    fwd = calib.k_lin * v_f * dt
    side = calib.k_lin * v_lr * dt
    c, s = math.cos(d.heading), math.sin(d.heading)
    x = d.x + fwd * c - side * s
    y = d.y + fwd * s + side * c
    heading = d.heading + calib.k_yaw * v_yaw * dt
    h = max(0.0, d.h + calib.k_vert * v_ud * dt)
    t = d.time + dt
    lights = world.light_colors
    if scenario is not None:
        lights = tuple(light_color_at(l, t) for l in scenario.lights)
    return WorldState(DroneState(x, y, heading, h, t), lights, world.step_index + 1)


def with_pose(world: WorldState, **changes) -> WorldState:
    return replace(world, drone=replace(world.drone, **changes))
