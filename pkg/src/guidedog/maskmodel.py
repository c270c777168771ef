"""Class palettes, colorized segmentation frames and color decoding."""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidInput, InvalidPalette, ParseError

VOID_ID = 0
# class ids are stored as uint8; this value marks colors outside the palette
UNKNOWN_CODE = 255
MAX_CLASSES = UNKNOWN_CODE


@dataclass(frozen=True)
class PaletteEntry:
    class_id: int
    name: str
    color: tuple[int, int, int]
    walkable: bool = False
    traffic_light: bool = False


class ClassPalette:
    """Ordered set of semantic classes with their prediction colors.

    Entry 0 is the void class: unknown colors decode to it, and it is
    neither walkable nor a traffic light.
    """

    def __init__(self, entries: Iterable[PaletteEntry]):
        entries = sorted(entries, key=lambda e: e.class_id)
        if not entries:
            raise InvalidPalette("palette has no entries")
        ids = [e.class_id for e in entries]
        if len(entries) > MAX_CLASSES:
            raise InvalidPalette(f"at most {MAX_CLASSES} classes are supported")
        if ids != list(range(len(entries))):
            raise InvalidPalette(f"class ids must be contiguous from 0, got {ids}")
        colors = [tuple(e.color) for e in entries]
        if len(set(colors)) != len(colors):
            raise InvalidPalette("palette colors must be pairwise distinct")
        for e in entries:
            if len(e.color) != 3 or any(not 0 <= c <= 255 for c in e.color):
                raise InvalidPalette(f"bad color for class {e.name!r}: {e.color}")
        if entries[0].walkable or entries[0].traffic_light:
            raise InvalidPalette("void class 0 must be neither walkable nor traffic_light")
        if not any(e.walkable for e in entries):
            raise InvalidPalette("palette needs at least one walkable class")
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise InvalidPalette("palette class names must be unique")

        self.entries: tuple[PaletteEntry, ...] = tuple(entries)
        self.colors = np.array(colors, dtype=np.uint8)
        self.walkable_lut = np.array([e.walkable for e in entries], dtype=bool)
        self.traffic_light_lut = np.array([e.traffic_light for e in entries], dtype=bool)
        self._by_name = {e.name: e for e in entries}
        self._codes = _pack(self.colors)
        self._code_lut: np.ndarray | None = None

    @property
    def code_lut(self) -> np.ndarray:
        """Class id for every packed 24-bit color; ``UNKNOWN_CODE`` where unmatched."""
        if self._code_lut is None:
            lut = np.full(1 << 24, UNKNOWN_CODE, dtype=np.uint8)
            lut[self._codes] = np.arange(len(self.entries), dtype=np.uint8)
            self._code_lut = lut
        return self._code_lut

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, name: str) -> PaletteEntry:
        return self._by_name[name]

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def id_of(self, name: str) -> int:
        return self._by_name[name].class_id

    @property
    def walkable_ids(self) -> frozenset[int]:
        return frozenset(e.class_id for e in self.entries if e.walkable)

    @property
    def traffic_light_ids(self) -> frozenset[int]:
        return frozenset(e.class_id for e in self.entries if e.traffic_light)

    def lookup(self, selector: Callable[[PaletteEntry], bool]) -> np.ndarray:
        return np.array([bool(selector(e)) for e in self.entries], dtype=bool)

    def with_walkable(self, names: Iterable[str]) -> "ClassPalette":
        """Copy of this palette with the walkable set replaced by ``names``."""
        names = set(names)
        unknown = names - set(self._by_name)
        if unknown:
            raise InvalidPalette(f"unknown class names: {sorted(unknown)}")
        return ClassPalette(
            PaletteEntry(e.class_id, e.name, e.color, e.name in names, e.traffic_light)
            for e in self.entries
        )

    def to_text(self) -> str:
        lines = ["# class_id name R G B walkable traffic_light"]
        for e in self.entries:
            r, g, b = e.color
            lines.append(
                f"{e.class_id} {e.name} {r} {g} {b} {int(e.walkable)} {int(e.traffic_light)}"
            )
        return "\n".join(lines) + "\n"


def _pack(colors: np.ndarray) -> np.ndarray:
    c = colors.astype(np.uint32)
    return (c[..., 0] << 16) | (c[..., 1] << 8) | c[..., 2]


def parse_palette(text: str, path=None) -> ClassPalette:
    """Parse the line-oriented palette format.

    Each non-blank line is ``class_id name R G B walkable traffic_light``;
    ``#`` starts a comment. Names containing spaces may be quoted.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            tokens = shlex.split(line)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, path) from None
        if len(tokens) != 7:
            raise ParseError(f"expected 7 fields, got {len(tokens)}", lineno, path)
        try:
            cid, r, g, b, walk, light = (int(t) for t in (tokens[0], *tokens[2:]))
        except ValueError:
            raise ParseError("non-integer field", lineno, path) from None
        if walk not in (0, 1) or light not in (0, 1):
            raise ParseError("flags must be 0 or 1", lineno, path)
        entries.append(PaletteEntry(cid, tokens[1], (r, g, b), bool(walk), bool(light)))
    return ClassPalette(entries)


def load_palette(path=None) -> ClassPalette:
    """Load a palette file, or the bundled Mapillary-style default."""
    if path is None:
        text = resources.files("guidedog.data").joinpath("mapillary.palette").read_text()
        return parse_palette(text, "mapillary.palette")
    return parse_palette(Path(path).read_text(), str(path))


_DEFAULT_PALETTE: ClassPalette | None = None


def default_palette() -> ClassPalette:
    global _DEFAULT_PALETTE
    if _DEFAULT_PALETTE is None:
        _DEFAULT_PALETTE = load_palette()
    return _DEFAULT_PALETTE


@dataclass(frozen=True, eq=False)
class SegmentationFrame:
    """An H x W grid of class ids plus the palette that gives them meaning."""

    classes: np.ndarray
    palette: ClassPalette
    frame_index: int = 0
    unknown_pixels: int = field(default=0, compare=False)

    def __post_init__(self):
        classes = np.asarray(self.classes)
        if classes.ndim != 2 or classes.shape[0] == 0 or classes.shape[1] == 0:
            raise InvalidInput(f"class grid must be 2D and nonempty, got shape {classes.shape}")
        if classes.dtype.kind not in "iu":
            raise InvalidInput("class grid must hold integers")
        if classes.min() < 0 or classes.max() >= len(self.palette):
            raise InvalidInput("class grid references ids outside the palette")
        if classes.dtype != np.uint8 and len(self.palette) <= 256:
            classes = classes.astype(np.uint8)
        classes = classes.copy() if classes.flags.writeable else classes
        classes.flags.writeable = False
        object.__setattr__(self, "classes", classes)

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    def colorize(self) -> np.ndarray:
        return render_colors(self.classes, self.palette)


def render_colors(classes: np.ndarray, palette: ClassPalette) -> np.ndarray:
    """Colorize a class grid into an H x W x 3 uint8 image."""
    return palette.colors[np.asarray(classes)]


def decode_mask(
    image,
    palette: ClassPalette,
    tolerance: int = 0,
    frame_index: int = 0,
) -> SegmentationFrame:
    """Map each RGB pixel to the palette class with that exact color.

    Colors absent from the palette become the void class. With
    ``tolerance > 0`` an unmatched pixel takes the nearest palette color
    (Chebyshev distance) if that distance is within the tolerance.
    """
    if not isinstance(palette, ClassPalette):
        raise InvalidPalette("palette must be a ClassPalette")
    image = np.asarray(image)
    if image.size == 0 or image.ndim != 3 or image.shape[2] < 3:
        raise InvalidInput(f"expected a nonempty H x W x 3 image, got shape {image.shape}")
    if image.dtype != np.uint8:
        if image.min() < 0 or image.max() > 255:
            raise InvalidInput("color channels must lie in [0, 255]")
        image = image.astype(np.uint8)
    classes = np.take(palette.code_lut, _pack(image[..., :3]))
    missing = classes == UNKNOWN_CODE
    if not missing.any():
        return SegmentationFrame(classes, palette, frame_index)
    classes[missing] = VOID_ID
    if tolerance > 0:
        px = image[..., :3][missing].astype(np.int64)
        dist = np.abs(px[:, None, :] - palette.colors[None, :, :].astype(np.int64)).max(axis=2)
        best = dist.argmin(axis=1)
        ok = dist[np.arange(len(best)), best] <= tolerance
        filled = np.where(ok, best, VOID_ID)
        classes[missing] = filled
        missing_count = int((~ok).sum())
    else:
        missing_count = int(missing.sum())
    return SegmentationFrame(classes, palette, frame_index, unknown_pixels=missing_count)


def is_walkable(entry: PaletteEntry) -> bool:
    return entry.walkable


def is_traffic_light(entry: PaletteEntry) -> bool:
    return entry.traffic_light


def binary_mask(frame: SegmentationFrame, selector: Callable[[PaletteEntry], bool]) -> np.ndarray:
    """Boolean grid marking cells whose class satisfies ``selector``."""
    if selector is is_walkable:
        lut = frame.palette.walkable_lut
    elif selector is is_traffic_light:
        lut = frame.palette.traffic_light_lut
    else:
        lut = frame.palette.lookup(selector)
    return np.take(lut, frame.classes)


def read_mask_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def write_mask_image(path, rgb: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), "RGB").save(path, format="PNG")


def list_frame_files(directory) -> list[Path]:
    """PNG files of a frame directory in lexicographic (frame) order."""
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".png")


def frames_from_classes(grids: Sequence[np.ndarray], palette: ClassPalette) -> list[SegmentationFrame]:
    return [SegmentationFrame(g, palette, i) for i, g in enumerate(grids)]
