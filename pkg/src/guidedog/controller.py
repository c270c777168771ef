"""Drone velocity controller: altitude hold, path following and light fusion.

Every frame produces one RC command, a quadruple of integers in
[-100, 100] for (left/right, forward/back, up/down, yaw). Positive yaw
turns right, positive left/right moves right.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace
from itertools import product
from pathlib import Path

from .errors import InvalidInput, ParseError
from .lightsense import DEFAULT_NO_LIGHT_RESET_FRAMES
from .walkable import DEFAULT_THETA_CONF, WalkableAnalysis

RC_LIMIT = 100
CONFIG_ENV_VAR = "GUIDEDOG_CONFIG"

Codes = tuple[int, int, int]

DEFAULT_YAWS: dict[Codes, int] = {
    (1, 1, 1): 0,
    (0, 1, 0): 0,
    (1, 0, 1): 0,
    (1, 1, 0): -15,
    (0, 1, 1): 15,
    (1, 0, 0): -30,
    (0, 0, 1): 30,
    (0, 0, 0): 0,
}


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def clamp(x: float, lo: float = -RC_LIMIT, hi: float = RC_LIMIT) -> float:
    return max(lo, min(hi, x))


def to_rc(x: float) -> int:
    return round_half_away(clamp(x))


@dataclass(frozen=True)
class ControllerConfig:
    h_target: float = 1.2
    v_ud_base: float = 40.0
    v_f0: float = 20.0
    speedup: float = 20.0
    theta_conf: float = DEFAULT_THETA_CONF
    list_yaws: dict = field(default_factory=lambda: dict(DEFAULT_YAWS))
    lowpass_alpha: float = 0.5
    highpass_deadband: float = 2.0
    no_light_reset_frames: int = DEFAULT_NO_LIGHT_RESET_FRAMES
    search_yaw: float = 20.0

    def __post_init__(self):
        if not self.h_target > 0:
            raise InvalidInput("h_target must be positive")
        if self.v_f0 < 0 or self.speedup < 0:
            raise InvalidInput("v_f0 and speedup must be nonnegative")
        if not 0.0 <= self.theta_conf <= 1.0:
            raise InvalidInput("theta_conf must lie in [0, 1]")
        if not 0.0 < self.lowpass_alpha <= 1.0:
            raise InvalidInput("lowpass_alpha must lie in (0, 1]")
        if self.highpass_deadband < 0:
            raise InvalidInput("highpass_deadband must be nonnegative")
        if self.no_light_reset_frames < 1:
            raise InvalidInput("no_light_reset_frames must be at least 1")
        missing = [c for c in product((0, 1), repeat=3) if c not in self.list_yaws]
        if missing:
            raise InvalidInput(f"list_yaws lacks entries for codes {missing}")


_SCALARS = {f.name: f.type for f in fields(ControllerConfig) if f.name != "list_yaws"}


def parse_config(text: str, path=None) -> ControllerConfig:
    """Parse ``key = value`` lines; yaw entries are written ``yaw_LMR = value``."""
    values: dict = {}
    yaws = dict(DEFAULT_YAWS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, path)
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("yaw_"):
                bits = key[4:]
                if len(bits) != 3 or set(bits) - {"0", "1"}:
                    raise ValueError(f"bad yaw code {bits!r}")
                yaws[tuple(int(b) for b in bits)] = int(value)
            elif key in _SCALARS:
                values[key] = int(value) if key == "no_light_reset_frames" else float(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ParseError(str(exc), lineno, path) from None
    try:
        return ControllerConfig(list_yaws=yaws, **values)
    except InvalidInput as exc:
        raise ParseError(str(exc), None, path) from None


def load_config(path=None) -> ControllerConfig:
    """Load a config file; falls back to $GUIDEDOG_CONFIG, then to defaults."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return ControllerConfig()
    return parse_config(Path(path).read_text(), str(path))


def config_to_text(config: ControllerConfig) -> str:
    lines = [f"{name} = {getattr(config, name)}" for name in _SCALARS]
    for code, yaw in sorted(config.list_yaws.items()):
        lines.append(f"yaw_{''.join(map(str, code))} = {yaw}")
    return "\n".join(lines) + "\n"


@dataclass
class ControllerState:
    start_crossing: bool = False
    filtered_centroid_x: float | None = None
    prev_raw_centroid_x: float | None = None
    # consecutive frames whose verdict color was None
    frames_without_light: int = 0
    last_color: str | None = None


@dataclass(frozen=True)
class VelocityCommand:
    v_lr: int = 0
    v_f: int = 0
    v_ud: int = 0
    v_yaw: int = 0

    def __post_init__(self):
        for name in ("v_lr", "v_f", "v_ud", "v_yaw"):
            v = getattr(self, name)
            if not isinstance(v, int) or not -RC_LIMIT <= v <= RC_LIMIT:
                raise InvalidInput(f"{name}={v!r} outside the RC range")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.v_lr, self.v_f, self.v_ud, self.v_yaw)

    def to_wire(self) -> str:
        return "rc {} {} {} {}".format(*self.as_tuple())

    @classmethod
    def from_wire(cls, line: str) -> "VelocityCommand":
        parts = line.split()
        if len(parts) != 5 or parts[0] != "rc":
            raise InvalidInput(f"not an rc command: {line!r}")
        try:
            return cls(*(int(p) for p in parts[1:]))
        except ValueError:
            raise InvalidInput(f"non-integer channel in {line!r}") from None


@dataclass(frozen=True)
class VoiceEvent:
    text: str
    frame_index: int

    def to_record(self) -> dict:
        return {"frame": self.frame_index, "event": self.text}


def altitude_hold(h: float, config: ControllerConfig) -> int:
    if h < 0:
        raise InvalidInput("altitude must be nonnegative")
    return to_rc((config.h_target - h) / config.h_target * config.v_ud_base)


def smooth_centroid(raw_x: float, state: ControllerState, config: ControllerConfig) -> float:
    """Deadband on frame-to-frame jumps, then an exponential low-pass."""
    prev = state.prev_raw_centroid_x
    if prev is not None and abs(raw_x - prev) < config.highpass_deadband:
        raw_x = prev
    else:
        state.prev_raw_centroid_x = raw_x
    if state.filtered_centroid_x is None:
        state.filtered_centroid_x = raw_x
    else:
        a = config.lowpass_alpha
        state.filtered_centroid_x = a * raw_x + (1 - a) * state.filtered_centroid_x
    return state.filtered_centroid_x


def lateral_gain(width: int) -> float:
    return RC_LIMIT / (width / 2)


def lateral_velocity_raw(filtered_x: float, width: int) -> float:
    if width <= 0:
        raise InvalidInput("image width must be positive")
    return lateral_gain(width) * (filtered_x - width / 2)


def lateral_velocity(filtered_x: float, width: int) -> int:
    return to_rc(lateral_velocity_raw(filtered_x, width))


def get_yaw_vel(codes: Codes, config: ControllerConfig) -> int:
    return to_rc(config.list_yaws[tuple(int(c) for c in codes)])


def fuse_traffic_light(color: str | None, state: ControllerState, config: ControllerConfig) -> int:
    """Forward speed from the pedestrian-light verdict.

    Green, or any frame after green was seen, gives the boosted speed; red
    before that stops the drone. The crossing latch clears once the
    verdict has been None for ``no_light_reset_frames`` frames in a row.
    """
    if color not in (None, "red", "green"):
        raise InvalidInput(f"unknown light color {color!r}")
    if color is None:
        state.frames_without_light += 1
        if state.start_crossing and state.frames_without_light >= config.no_light_reset_frames:
            state.start_crossing = False
    else:
        state.frames_without_light = 0

    if color == "green" or state.start_crossing:
        state.start_crossing = True
        return to_rc(config.v_f0 + config.speedup)
    if color is None:
        return to_rc(config.v_f0)
    return 0


def voice_for_transition(prev: str | None, color: str | None) -> str | None:
    if color == prev:
        return None
    if color == "red":
        return "stop"
    if color == "green":
        return "go"
    return None


class Controller:
    """Stateful per-stream controller; call :meth:`step` once per frame."""

    def __init__(self, config: ControllerConfig | None = None):
        self.config = config or ControllerConfig()
        self.state = ControllerState()

    def reset(self):
        self.state = ControllerState()

    def step(
        self,
        analysis: WalkableAnalysis,
        color: str | None,
        h: float,
        width: int,
        frame_index: int = 0,
    ) -> tuple[VelocityCommand, VoiceEvent | None]:
        cfg, st = self.config, self.state
        v_ud = altitude_hold(max(h, 0.0), cfg)
        v_f = fuse_traffic_light(color, st, cfg)

        if analysis.present:
            fx = smooth_centroid(analysis.centroid[0], st, cfg)
            v_lr = lateral_velocity(fx, width)
            v_yaw = get_yaw_vel(analysis.codes, cfg)
        else:
            # hover and rotate until a walkable area comes back into view
            v_lr, v_f, v_yaw = 0, 0, to_rc(cfg.search_yaw)

        text = voice_for_transition(st.last_color, color)
        st.last_color = color
        event = VoiceEvent(text, frame_index) if text else None
        return VelocityCommand(v_lr, v_f, v_ud, v_yaw), event


def step(analysis, color, h, state: ControllerState, config: ControllerConfig, width: int, frame_index: int = 0):
    """Functional form of :meth:`Controller.step`; returns the updated state too."""
    ctl = Controller(config)
    ctl.state = replace(state)
    cmd, event = ctl.step(analysis, color, h, width, frame_index)
    return cmd, event, ctl.state
