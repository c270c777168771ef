"""Per-frame guidance pipeline plus the closed-loop, replay and bench drivers."""

from __future__ import annotations

import json
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import shapely

from .controller import Controller, ControllerConfig, VelocityCommand, VoiceEvent, load_config
from .errors import InvalidInput
from .lightsense import LightClass, LightPatch, LightTracker, extract_patches, read_label_file
from .maskmodel import ClassPalette, SegmentationFrame, decode_mask, default_palette, list_frame_files, read_mask_image
from .simworld import (
    Calibration,
    Renderer,
    Scenario,
    initial_world,
    load_scenario,
    oracle_classify,
    score,
    step_kinematics,
)
from .simworld.metrics import Metrics
from .walkable import WalkableAnalysis, analyze

log = logging.getLogger(__name__)

PatchLabeler = Callable[[Sequence[LightPatch]], "LightClass | None"]


@dataclass
class FrameResult:
    command: VelocityCommand
    event: VoiceEvent | None
    analysis: WalkableAnalysis
    patches: list[LightPatch]
    prediction: LightClass | None
    color: str | None


class GuidancePipeline:
    """analyze -> light verdict -> controller, for one frame stream."""

    def __init__(self, config: ControllerConfig | None = None):
        self.config = config or ControllerConfig()
        self.controller = Controller(self.config)
        self.tracker = LightTracker(self.config.no_light_reset_frames)

    def process(self, frame: SegmentationFrame, h: float, labeler: PatchLabeler) -> FrameResult:
        analysis = analyze(frame, self.config.theta_conf)
        patches = extract_patches(frame)
        prediction = labeler(patches)
        if len(patches) > 1:
            log.debug("frame %d: %d light patches, classifying the largest", frame.frame_index, len(patches))
        verdict = self.tracker.observe(prediction)
        cmd, event = self.controller.step(analysis, verdict.color, h, frame.width, frame.frame_index)
        return FrameResult(cmd, event, analysis, patches, prediction, verdict.color)


def _r(x: float) -> float:
    return round(float(x), 6)


def dump_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


@dataclass
class RunRecord:
    scenario: str
    seed: int
    entries: list[dict] = field(default_factory=list)
    metrics: Metrics | None = None
    events: list[VoiceEvent] = field(default_factory=list)

    @property
    def success(self) -> bool:
        m = self.metrics
        return bool(m and m.goal_reached and m.red_light_violations == 0)

    def log_lines(self) -> list[str]:
        return [dump_record(e) for e in self.entries]

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "success": self.success,
            "events": [e.to_record() for e in self.events],
            "metrics": self.metrics.to_dict() if self.metrics else None,
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "log.jsonl").write_text("".join(line + "\n" for line in self.log_lines()))
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def simulate(
    scenario: Scenario,
    config: ControllerConfig | None = None,
    seed: int | None = None,
    noise: float = 0.0,
    max_steps: int | None = None,
    calib: Calibration | None = None,
    palette: ClassPalette | None = None,
    frame_sink: Callable[[int, SegmentationFrame, LightClass | None, float], None] | None = None,
) -> RunRecord:
    """Closed loop: render, guide, move, until the goal or the step cap."""
    seed = scenario.seed if seed is None else seed
    scenario = scenario.with_seed(seed)
    palette = palette or default_palette()
    calib = calib or Calibration()
    pipeline = GuidancePipeline(config)
    renderer = Renderer(scenario, palette)
    rng = np.random.default_rng([seed, 0x11])
    world = initial_world(scenario)
    cap = scenario.max_steps if max_steps is None else max_steps
    record = RunRecord(scenario.name, seed)

    for k in range(cap):
        frame, projections = renderer.render(world, k)
        # the guidance side consumes the colorized prediction, as from a segmentor
        frame = decode_mask(frame.colorize(), palette, frame_index=k)
        current = world

        def labeler(patches):
            if not patches:
                return None
            return oracle_classify(current, scenario, patches[0], projections, noise, rng)

        h = world.drone.h
        res = pipeline.process(frame, h, labeler)
        if frame_sink is not None:
            frame_sink(k, frame, res.prediction, h)
        world = step_kinematics(world, res.command, scenario.dt, calib, scenario)
        d = world.drone
        entry = {
            "frame": k,
            "time": _r(d.time),
            "pose": {"x": _r(d.x), "y": _r(d.y), "heading": _r(d.heading), "h": _r(d.h)},
            "command": res.command.to_wire(),
            "color": res.color,
            "prediction": None if res.prediction is None else res.prediction.value,
            "lights": list(world.light_colors),
            "analysis": res.analysis.summary(),
        }
        if res.event is not None:
            entry["event"] = res.event.text
            record.events.append(res.event)
        record.entries.append(entry)
        if scenario.goal is not None and shapely.contains_xy(scenario.goal, d.x, d.y):
            break
    record.metrics = score(record.entries, scenario, palette)
    return record


def run_scenario(scenario_path, config_path=None, seed=None, out_dir=None, noise=0.0, max_steps=None) -> RunRecord:
    scenario = load_scenario(scenario_path)
    config = load_config(config_path)
    record = simulate(scenario, config, seed=seed, noise=noise, max_steps=max_steps)
    if out_dir is not None:
        record.write(out_dir)
    return record


@dataclass
class ReplayResult:
    commands: list[VelocityCommand]
    events: list[VoiceEvent]
    unknown_pixel_frames: int
    entries: list[dict]

    def command_lines(self) -> list[str]:
        return [c.to_wire() for c in self.commands]


def load_frames(frames_dir) -> list[np.ndarray]:
    files = list_frame_files(frames_dir)
    if not files:
        raise InvalidInput(f"no PNG frames in {frames_dir}")
    return [read_mask_image(f) for f in files]


def replay(
    frames_dir,
    labels_file=None,
    config: ControllerConfig | None = None,
    palette: ClassPalette | None = None,
    tolerance: int = 0,
) -> ReplayResult:
    """Run the guidance pipeline over recorded colorized masks.

    Light predictions come from the sidecar label file (one line per
    frame); without one, no light is ever reported. Altitude defaults to
    the target altitude when the sidecar gives none.
    """
    config = config or ControllerConfig()
    palette = palette or default_palette()
    images = load_frames(frames_dir)
    if labels_file is not None:
        labels = read_label_file(labels_file)
        if len(labels) != len(images):
            raise InvalidInput(f"{len(images)} frames but {len(labels)} label lines")
    else:
        labels = [(None, None)] * len(images)

    pipeline = GuidancePipeline(config)
    commands, events, entries = [], [], []
    unknown = 0
    for k, (img, (label, alt)) in enumerate(zip(images, labels)):
        frame = decode_mask(img, palette, tolerance=tolerance, frame_index=k)
        if frame.unknown_pixels:
            unknown += 1
        h = config.h_target if alt is None else alt
        res = pipeline.process(frame, h, lambda patches, label=label: label)
        commands.append(res.command)
        entry = {"frame": k, "command": res.command.to_wire(), "color": res.color, "analysis": res.analysis.summary()}
        if res.event is not None:
            events.append(res.event)
            entry["event"] = res.event.text
        entries.append(entry)
    if unknown:
        log.warning("%d frames contained colors outside the palette", unknown)
    return ReplayResult(commands, events, unknown, entries)


@dataclass
class BenchReport:
    frames: int
    warmup: int
    iterations: int
    median_ms: float
    p95_ms: float
    mean_ms: float
    max_ms: float
    width: int
    height: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def bench(
    frames_dir=None,
    iterations: int = 800,
    warmup: int = 200,
    config: ControllerConfig | None = None,
    palette: ClassPalette | None = None,
    images: Sequence[np.ndarray] | None = None,
) -> BenchReport:
    """Time decode -> analyze -> verdict -> controller step per frame.

    Frames are preloaded so file I/O is excluded; they are cycled to fill
    ``warmup + iterations`` pipeline passes and only the last
    ``iterations`` are measured.
    """
    if iterations < 1:
        raise InvalidInput("iterations must be at least 1")
    if warmup < 0:
        raise InvalidInput("warmup must be nonnegative")
    palette = palette or default_palette()
    if images is None:
        images = load_frames(frames_dir)
    if not images:
        raise InvalidInput("need at least one frame")
    pipeline = GuidancePipeline(config)
    h = pipeline.config.h_target
    times = []
    clock = time.perf_counter
    for i in range(warmup + iterations):
        img = images[i % len(images)]
        t0 = clock()
        frame = decode_mask(img, palette, frame_index=i)
        pipeline.process(frame, h, lambda patches: LightClass.OTHERS if patches else None)
        dt = clock() - t0
        if i >= warmup:
            times.append(dt * 1000.0)
    times.sort()
    p95 = times[min(len(times) - 1, int(np.ceil(0.95 * len(times))) - 1)]
    height, width = images[0].shape[:2]
    return BenchReport(
        frames=len(images),
        warmup=warmup,
        iterations=iterations,
        median_ms=statistics.median(times),
        p95_ms=p95,
        mean_ms=statistics.fmean(times),
        max_ms=times[-1],
        width=width,
        height=height,
    )
