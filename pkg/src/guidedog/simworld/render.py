"""Synthesize segmentation frames with a pinhole camera over the ground plane."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely

from ..maskmodel import VOID_ID, ClassPalette, SegmentationFrame, default_palette
from .scenario import Camera, Scenario
from .world import WorldState

MAP_RESOLUTION = 0.05
MAP_MARGIN = 1.0
MIN_LIGHT_DEPTH = 0.2


@dataclass(frozen=True)
class LightProjection:
    light: int
    bbox: tuple[int, int, int, int]  # inclusive x_min, y_min, x_max, y_max
    depth: float


class GroundMap:
    """Scenario surfaces rasterized into a class-id grid for fast lookup."""

    def __init__(self, scenario: Scenario, palette: ClassPalette, resolution: float = MAP_RESOLUTION):
        layers = scenario.painted()
        bounds = np.array([s.polygon.bounds for s in layers])
        self.x0 = float(bounds[:, 0].min()) - MAP_MARGIN
        self.y0 = float(bounds[:, 1].min()) - MAP_MARGIN
        x1 = float(bounds[:, 2].max()) + MAP_MARGIN
        y1 = float(bounds[:, 3].max()) + MAP_MARGIN
        self.res = resolution
        self.nx = int(math.ceil((x1 - self.x0) / resolution))
        self.ny = int(math.ceil((y1 - self.y0) / resolution))
        xs = self.x0 + (np.arange(self.nx) + 0.5) * resolution
        ys = self.y0 + (np.arange(self.ny) + 0.5) * resolution
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        grid = np.full((self.nx, self.ny), VOID_ID, dtype=np.uint8)
        for layer in layers:
            cid = palette.id_of(layer.class_name)
            minx, miny, maxx, maxy = layer.polygon.bounds
            i0, i1 = self._span(minx, maxx, self.x0, self.nx)
            j0, j1 = self._span(miny, maxy, self.y0, self.ny)
            if i0 >= i1 or j0 >= j1:
                continue
            inside = shapely.contains_xy(layer.polygon, gx[i0:i1, j0:j1], gy[i0:i1, j0:j1])
            grid[i0:i1, j0:j1][inside] = cid
        self.grid = grid

    def _span(self, lo, hi, origin, n):
        a = max(0, int(math.floor((lo - origin) / self.res)))
        b = min(n, int(math.ceil((hi - origin) / self.res)) + 1)
        return a, b

    def sample(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        i = np.floor((x - self.x0) / self.res)
        j = np.floor((y - self.y0) / self.res)
        ok = (i >= 0) & (i < self.nx) & (j >= 0) & (j < self.ny)
        out = np.full(x.shape, VOID_ID, dtype=np.uint8)
        out[ok] = self.grid[i[ok].astype(np.intp), j[ok].astype(np.intp)]
        return out


class Renderer:
    """Renders what a downward-pitched camera on the drone would segment."""

    def __init__(self, scenario: Scenario, palette: ClassPalette | None = None):
        self.scenario = scenario
        self.palette = palette or default_palette()
        self.camera = scenario.camera
        self.ground = GroundMap(scenario, self.palette)
        self.light_id = self.palette.id_of("traffic_light") if scenario.lights else None
        cam = self.camera
        self.focal = (cam.width / 2) / math.tan(math.radians(cam.fov_deg) / 2)
        pitch = math.radians(cam.pitch_deg)
        self._sin, self._cos = math.sin(pitch), math.cos(pitch)
        xn = (np.arange(cam.width) + 0.5 - cam.width / 2) / self.focal
        yn = (np.arange(cam.height) + 0.5 - cam.height / 2) / self.focal
        xn, yn = np.meshgrid(xn, yn)
        denom = self._sin + yn * self._cos
        self._hits = denom > 1e-9
        safe = np.where(self._hits, denom, 1.0)
        # ground offsets per meter of camera height, in the drone body frame
        self._fwd = (self._cos - yn * self._sin) / safe
        self._right = xn / safe

    def camera_height(self, world: WorldState) -> float:
        return world.drone.h + self.camera.mount

    def project(self, world: WorldState, point) -> tuple[float, float, float] | None:
        """Image coordinates (u, v) and depth of a 3D world point, or None behind the camera."""
        d = world.drone
        c, s = math.cos(d.heading), math.sin(d.heading)
        dx, dy = point[0] - d.x, point[1] - d.y
        fwd = dx * c + dy * s
        right = -dx * s + dy * c
        up = point[2] - self.camera_height(world)
        depth = fwd * self._cos - up * self._sin
        if depth <= MIN_LIGHT_DEPTH:
            return None
        down = -fwd * self._sin - up * self._cos
        u = self.camera.width / 2 + self.focal * right / depth
        v = self.camera.height / 2 + self.focal * down / depth
        return u, v, depth

    def ground_classes(self, world: WorldState) -> np.ndarray:
        cam_h = self.camera_height(world)
        cam = self.camera
        if cam_h <= 0:
            return np.zeros((cam.height, cam.width), dtype=np.uint8)
        d = world.drone
        c, s = math.cos(d.heading), math.sin(d.heading)
        fwd = self._fwd * cam_h
        right = self._right * cam_h
        gx = d.x + fwd * c - right * s
        gy = d.y + fwd * s + right * c
        out = self.ground.sample(gx, gy)
        out[~self._hits] = VOID_ID
        return out

    def light_projections(self, world: WorldState) -> list[LightProjection]:
        cam = self.camera
        out = []
        for idx, light in enumerate(self.scenario.lights):
            p = self.project(world, light.position)
            if p is None:
                continue
            u, v, depth = p
            hw = self.focal * light.size[0] / 2 / depth
            hh = self.focal * light.size[1] / 2 / depth
            # pixels whose centers fall inside the head's image rectangle
            x0 = max(0, int(math.ceil(u - hw - 0.5)))
            x1 = min(cam.width - 1, int(math.floor(u + hw - 0.5)))
            y0 = max(0, int(math.ceil(v - hh - 0.5)))
            y1 = min(cam.height - 1, int(math.floor(v + hh - 0.5)))
            if x0 > x1 or y0 > y1:
                continue
            out.append(LightProjection(idx, (x0, y0, x1, y1), depth))
        # far to near, so nearer heads are painted on top
        out.sort(key=lambda p: -p.depth)
        return out

    def render(self, world: WorldState, frame_index: int | None = None) -> tuple[SegmentationFrame, list[LightProjection]]:
        classes = self.ground_classes(world)
        projections = self.light_projections(world)
        for p in projections:
            x0, y0, x1, y1 = p.bbox
            classes[y0 : y1 + 1, x0 : x1 + 1] = self.light_id
        if self.scenario.pixel_noise > 0:
            rng = np.random.default_rng([self.scenario.seed, world.step_index])
            flip = rng.random(classes.shape) < self.scenario.pixel_noise
            classes[flip] = rng.integers(0, len(self.palette), int(flip.sum()), dtype=np.uint8)
        idx = world.step_index if frame_index is None else frame_index
        return SegmentationFrame(classes, self.palette, idx), projections


def render(world: WorldState, scenario: Scenario, palette: ClassPalette | None = None) -> SegmentationFrame:
    """One-shot render; build a :class:`Renderer` once when rendering many frames."""
    return Renderer(scenario, palette).render(world)[0]
