"""Street-world scenarios and their text format.

World frame: meters on the ground plane, ``x`` forward on the map and
``y`` to the right of ``x`` when viewed from above. Headings are measured
from +x toward +y, so a positive heading change is a right turn. Angles in
scenario files are degrees.

Grammar (one directive per line, ``#`` comments)::

    guidedog-scenario 1                      # required header
    name <text>
    seed <int>
    dt <seconds>
    max_steps <int>
    footprint <radius m>
    pixel_noise <probability>
    camera width=<px> height=<px> pitch=<deg> fov=<deg> mount=<m>
    start x=<m> y=<m> heading=<deg> altitude=<m>
    surface class=<name> polygon=<pts>
    strip class=<name> width=<m> path=<pts>
    obstacle class=<name> polygon=<pts>
    light kind=pedestrian|vehicle at=<x,y,z> facing=<deg> size=<w,h>
          schedule=<color:sec,...> offset=<sec|random>
    crosswalk polygon=<pts> light=<light index>
    goal polygon=<pts>
    centerline path=<pts>

``<pts>`` is a space-separated list of ``x,y`` vertices. A vertex token of
the form ``@cx,cy,r,a0,a1[,n]`` expands to ``n`` points (default 24) on the
circle of radius ``r`` about ``(cx, cy)`` from angle ``a0`` to ``a1``.
Surfaces and strips are painted in file order; obstacles are painted last.
"""

from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from shapely.geometry import LineString, Polygon

from ..errors import ParseError
from ..maskmodel import ClassPalette, default_palette

FORMAT_HEADER = "guidedog-scenario"
FORMAT_VERSION = 1
DEFAULT_DT = 1 / 11.7
COLORS = ("red", "green")


@dataclass(frozen=True)
class Camera:
    width: int = 320
    height: int = 240
    pitch_deg: float = 35.0
    fov_deg: float = 70.0
    mount: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera size must be positive")
        if not 10.0 < self.fov_deg < 170.0:
            raise ValueError("horizontal field of view must lie in (10, 170) degrees")


@dataclass(frozen=True)
class Light:
    kind: str
    position: tuple[float, float, float]
    facing: float  # radians, direction the lit face points
    schedule: tuple[tuple[str, float], ...]
    phase_offset: float = 0.0
    size: tuple[float, float] = (0.25, 0.6)
    random_offset: bool = False

    def __post_init__(self):
        if self.kind not in ("pedestrian", "vehicle"):
            raise ValueError(f"unknown light kind {self.kind!r}")
        if not self.schedule:
            raise ValueError("light schedule is empty")
        for color, dur in self.schedule:
            if color not in COLORS:
                raise ValueError(f"unknown light color {color!r}")
            if not dur > 0:
                raise ValueError("phase durations must be positive")

    @property
    def cycle(self) -> float:
        return sum(d for _, d in self.schedule)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float
    altitude: float


@dataclass(frozen=True)
class Surface:
    polygon: Polygon
    class_name: str


@dataclass(frozen=True)
class Crosswalk:
    polygon: Polygon
    light: int


@dataclass(frozen=True)
class Scenario:
    name: str
    surfaces: tuple[Surface, ...]
    obstacles: tuple[Surface, ...] = ()
    lights: tuple[Light, ...] = ()
    crosswalks: tuple[Crosswalk, ...] = ()
    start: Pose = Pose(0.0, 0.0, 0.0, 1.2)
    goal: Polygon | None = None
    centerline: LineString | None = None
    camera: Camera = Camera()
    seed: int = 0
    dt: float = DEFAULT_DT
    max_steps: int = 2000
    footprint: float = 0.1
    pixel_noise: float = 0.0
    source: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.surfaces:
            raise ValueError("a scenario needs at least one surface")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for cw in self.crosswalks:
            if not 0 <= cw.light < len(self.lights):
                raise ValueError(f"crosswalk refers to missing light {cw.light}")

    def painted(self) -> tuple[Surface, ...]:
        """All painted layers, bottom first."""
        return self.surfaces + self.obstacles

    def with_seed(self, seed: int) -> "Scenario":
        """Resolve seed-dependent settings such as randomized light offsets."""
        rng = np.random.default_rng(seed)
        lights = []
        for light in self.lights:
            if light.random_offset:
                light = replace(light, phase_offset=float(rng.uniform(0.0, light.cycle)))
            lights.append(light)
        return replace(self, seed=seed, lights=tuple(lights))


def _floats(text: str, n: int | None = None) -> tuple[float, ...]:
    vals = tuple(float(v) for v in text.split(","))
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def parse_points(tokens: list[str]) -> list[tuple[float, float]]:
    pts: list[tuple[float, float]] = []
    for tok in tokens:
        if tok.startswith("@"):
            vals = _floats(tok[1:])
            if len(vals) not in (5, 6):
                raise ValueError(f"arc needs cx,cy,r,a0,a1[,n], got {tok!r}")
            cx, cy, r, a0, a1 = vals[:5]
            n = int(vals[5]) if len(vals) == 6 else 24
            if n < 2 or r <= 0:
                raise ValueError(f"bad arc {tok!r}")
            for a in np.linspace(math.radians(a0), math.radians(a1), n):
                p = (cx + r * math.cos(a), cy + r * math.sin(a))
                if not pts or math.dist(p, pts[-1]) > 1e-9:
                    pts.append(p)
        else:
            p = _floats(tok, 2)
            if not pts or math.dist(p, pts[-1]) > 1e-9:
                pts.append(p)
    return pts


def _polygon(tokens: list[str]) -> Polygon:
    pts = parse_points(tokens)
    if len(pts) < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    poly = Polygon(pts)
    if not poly.is_valid or poly.area <= 0:
        raise ValueError("polygon is degenerate or self-intersecting")
    return poly


def _path(tokens: list[str]) -> LineString:
    pts = parse_points(tokens)
    if len(pts) < 2:
        raise ValueError("a path needs at least 2 points")
    return LineString(pts)


def _strip(path: LineString, width: float) -> Polygon:
    if not width > 0:
        raise ValueError("strip width must be positive")
    return path.buffer(width / 2, cap_style="flat", join_style="round")


def _kv(tokens: list[str]) -> dict[str, str]:
    """Split ``key=value`` tokens; trailing bare tokens continue the last list key."""
    out: dict[str, list[str]] = {}
    last = None
    for tok in tokens:
        if "=" in tok and not tok.startswith("@"):
            key, val = tok.split("=", 1)
            out[key] = [val] if val else []
            last = key
        elif last is not None:
            out[last].append(tok)
        else:
            raise ValueError(f"unexpected token {tok!r}")
    return {k: " ".join(v) for k, v in out.items()}


def _require(kv: dict, *keys: str):
    missing = [k for k in keys if k not in kv]
    if missing:
        raise ValueError(f"missing {', '.join(missing)}")
    return [kv[k] for k in keys]


def _schedule(text: str) -> tuple[tuple[str, float], ...]:
    out = []
    for part in text.split(","):
        color, _, dur = part.partition(":")
        out.append((color.strip(), float(dur)))
    return tuple(out)


def _class_name(name: str, palette: ClassPalette) -> str:
    if name not in palette:
        raise ValueError(f"class {name!r} is not in the palette")
    return name


def parse_scenario(text: str, path=None, palette: ClassPalette | None = None) -> Scenario:
    """Parse scenario text; surface classes are checked against ``palette``."""
    palette = palette or default_palette()
    lines = text.splitlines()
    header_seen = False
    fields_: dict = {}
    surfaces, obstacles, lights, crosswalks = [], [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            tokens = shlex.split(line)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, path) from None
        head, rest = tokens[0], tokens[1:]
        if not header_seen:
            if head != FORMAT_HEADER or rest != [str(FORMAT_VERSION)]:
                raise ParseError(f"expected header '{FORMAT_HEADER} {FORMAT_VERSION}'", lineno, path)
            header_seen = True
            continue
        try:
            if head == "name":
                fields_["name"] = " ".join(rest)
            elif head in ("seed", "max_steps"):
                fields_[head] = int(rest[0])
            elif head in ("dt", "footprint", "pixel_noise"):
                fields_[head] = float(rest[0])
            elif head == "camera":
                kv = _kv(rest)
                fields_["camera"] = Camera(
                    width=int(kv.get("width", 320)),
                    height=int(kv.get("height", 240)),
                    pitch_deg=float(kv.get("pitch", 35.0)),
                    fov_deg=float(kv.get("fov", 70.0)),
                    mount=float(kv.get("mount", 0.0)),
                )
            elif head == "start":
                kv = _kv(rest)
                x, y = (float(v) for v in _require(kv, "x", "y"))
                fields_["start"] = Pose(
                    x, y, math.radians(float(kv.get("heading", 0.0))), float(kv.get("altitude", 1.2))
                )
            elif head in ("surface", "obstacle"):
                kv = _kv(rest)
                cls, poly = _require(kv, "class", "polygon")
                target = surfaces if head == "surface" else obstacles
                target.append(Surface(_polygon(poly.split()), _class_name(cls, palette)))
            elif head == "strip":
                kv = _kv(rest)
                cls, width, pts = _require(kv, "class", "width", "path")
                surfaces.append(Surface(_strip(_path(pts.split()), float(width)), _class_name(cls, palette)))
            elif head == "light":
                kv = _kv(rest)
                kind, at, sched = _require(kv, "kind", "at", "schedule")
                offset = kv.get("offset", "0")
                lights.append(
                    Light(
                        kind=kind,
                        position=_floats(at, 3),
                        facing=math.radians(float(kv.get("facing", 0.0))),
                        schedule=_schedule(sched),
                        phase_offset=0.0 if offset == "random" else float(offset),
                        size=_floats(kv.get("size", "0.25,0.6"), 2),
                        random_offset=offset == "random",
                    )
                )
            elif head == "crosswalk":
                kv = _kv(rest)
                poly, light = _require(kv, "polygon", "light")
                crosswalks.append(Crosswalk(_polygon(poly.split()), int(light)))
            elif head == "goal":
                kv = _kv(rest)
                fields_["goal"] = _polygon(_require(kv, "polygon")[0].split())
            elif head == "centerline":
                kv = _kv(rest)
                fields_["centerline"] = _path(_require(kv, "path")[0].split())
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (ValueError, IndexError) as exc:
            raise ParseError(str(exc) or f"malformed {head!r} line", lineno, path) from None
    if not header_seen:
        raise ParseError("empty scenario file", None, path)
    try:
        return Scenario(
            name=fields_.pop("name", Path(path).stem if path else "scenario"),
            surfaces=tuple(surfaces),
            obstacles=tuple(obstacles),
            lights=tuple(lights),
            crosswalks=tuple(crosswalks),
            source=text,
            **fields_,
        )
    except ValueError as exc:
        raise ParseError(str(exc), None, path) from None


def load_scenario(path) -> Scenario:
    """Load a scenario file, or a bundled scenario by name (e.g. ``sidewalk_20m``)."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.parent == Path("."):
        res = resources.files("guidedog.data.scenarios").joinpath(f"{p.name}.scn")
        if res.is_file():
            return parse_scenario(res.read_text(), p.name)
    return parse_scenario(p.read_text(), str(p))


def bundled_scenarios() -> list[str]:
    root = resources.files("guidedog.data.scenarios")
    return sorted(r.name[:-4] for r in root.iterdir() if r.name.endswith(".scn"))
