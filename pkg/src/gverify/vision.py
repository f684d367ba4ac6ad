"""HMI screenshot handling: loading, percentage crops, LED classification,
synthetic rendering and debug overlays.

Images are ``numpy.uint8`` arrays of shape ``(height, width, 3)`` in RGB
order. No function here modifies its input array.
"""

from __future__ import annotations

import io
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image as PILImage

from .errors import DecodeError, LayoutError

INDICATOR_NAMES = ("collet_clamped", "refx", "refz")
INDICATOR_LABELS = {"collet_clamped": "COLLET CLAMPED", "refx": "REF X", "refz": "REF Z"}


@dataclass(frozen=True)
class BBoxPct:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise ValueError(f"bbox {name}={value} outside [0, 100]")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("bbox width and height must be positive")
        # small epsilon so that e.g. 78 + 22 in floats is accepted
        if self.left + self.width > 100 + 1e-9 or self.top + self.height > 100 + 1e-9:
            raise ValueError("bbox extends past the image edge")

    @classmethod
    def parse(cls, text: str) -> "BBoxPct":
        """Parse ``left,top,width,height`` (percent)."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected left,top,width,height; got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.width, self.height)


FULL_BBOX = BBoxPct(0, 0, 100, 100)
DEFAULT_CLUSTER_BBOX = BBoxPct(78, 5, 22, 35)


@dataclass(frozen=True)
class IndicatorStates:
    collet_clamped: bool
    refx: bool
    refz: bool

    def __post_init__(self):
        for name in INDICATOR_NAMES:
            object.__setattr__(self, name, bool(getattr(self, name)))

    def as_tuple(self) -> tuple[bool, bool, bool]:
        return (self.collet_clamped, self.refx, self.refz)

    @classmethod
    def parse(cls, text: str) -> "IndicatorStates":
        """Parse the ``T/F/T`` shorthand used in scenario tables."""
        flags = text.split("/")
        if len(flags) != 3 or any(f not in ("T", "F") for f in flags):
            raise ValueError(f"expected e.g. 'T/F/T', got {text!r}")
        return cls(*(f == "T" for f in flags))

    def short(self) -> str:
        return "/".join("T" if v else "F" for v in self.as_tuple())


def _overlaps(a: BBoxPct, b: BBoxPct) -> bool:
    return (a.left < b.left + b.width and b.left < a.left + a.width
            and a.top < b.top + b.height and b.top < a.top + a.height)


@dataclass(frozen=True)
class IndicatorLayout:
    """Indicator boxes in percent of the cluster crop, plus the ON colour test."""

    boxes: dict = field(default_factory=lambda: {
        "collet_clamped": BBoxPct(8, 8, 24, 22.5),
        "refx": BBoxPct(8, 42, 20, 18),
        "refz": BBoxPct(8, 70, 20, 18),
    })
    on_color: tuple = (0, 200, 0)
    color_tolerance: int = 40
    min_on_fraction: float = 0.30

    def __post_init__(self):
        if set(self.boxes) != set(INDICATOR_NAMES):
            raise LayoutError(f"layout needs boxes for {INDICATOR_NAMES}")
        if not 0 <= self.color_tolerance <= 255:
            raise LayoutError("color_tolerance must be within 0..255")
        if not 0 < self.min_on_fraction <= 1:
            raise LayoutError("min_on_fraction must be in (0, 1]")
        names = list(INDICATOR_NAMES)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if _overlaps(self.boxes[a], self.boxes[b]):
                    raise LayoutError(f"indicator boxes {a} and {b} overlap")


DEFAULT_LAYOUT = IndicatorLayout()


def _round_pct(pct: float, size: int) -> int:
    # Decimal(str()) keeps e.g. 78.0 * 1280 / 100 exact before rounding.
    value = Decimal(str(pct)) * size / 100
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def bbox_to_rect(bbox: BBoxPct, width: int, height: int) -> tuple[int, int, int, int]:
    """Pixel rectangle ``(x, y, w, h)`` for a percentage box, clamped to the image."""
    x = min(_round_pct(bbox.left, width), width - 1)
    y = min(_round_pct(bbox.top, height), height - 1)
    w = max(1, _round_pct(bbox.width, width))
    h = max(1, _round_pct(bbox.height, height))
    return x, y, min(w, width - x), min(h, height - y)


def load_image(path) -> np.ndarray:
    """Read a raster file as RGB. Missing files raise OSError."""
    data = Path(path).read_bytes()
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
    except Exception as exc:
        raise DecodeError(f"{path}: not a supported raster image ({exc})") from exc
    return np.asarray(rgb, dtype=np.uint8).copy()


def save_image(image: np.ndarray, path) -> None:
    PILImage.fromarray(image, "RGB").save(path, format="PNG", compress_level=6)


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(image, "RGB").save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except Exception as exc:
        raise DecodeError(f"not a supported raster image ({exc})") from exc


def crop_pct(image: np.ndarray, bbox: BBoxPct) -> np.ndarray:
    height, width = image.shape[:2]
    x, y, w, h = bbox_to_rect(bbox, width, height)
    return image[y:y + h, x:x + w].copy()


def on_fraction(region: np.ndarray, on_color, tolerance: int) -> float:
    if region.size == 0:
        return 0.0
    diff = np.abs(region.astype(np.int16) - np.asarray(on_color, dtype=np.int16))
    hits = np.all(diff <= tolerance, axis=-1)
    return float(hits.mean())


def _indicator_rect(cluster_shape, box: BBoxPct, name: str) -> tuple[int, int, int, int]:
    height, width = cluster_shape[:2]
    x, y = _round_pct(box.left, width), _round_pct(box.top, height)
    w, h = max(1, _round_pct(box.width, width)), max(1, _round_pct(box.height, height))
    if x + w > width or y + h > height:
        raise LayoutError(f"{name} box {box.as_tuple()} exceeds cluster {width}x{height}")
    return x, y, w, h


def classify_indicators(cluster: np.ndarray, layout: IndicatorLayout = DEFAULT_LAYOUT) -> IndicatorStates:
    """Read the three LEDs; anything not clearly lit counts as off."""
    states = {}
    for name in INDICATOR_NAMES:
        x, y, w, h = _indicator_rect(cluster.shape, layout.boxes[name], name)
        frac = on_fraction(cluster[y:y + h, x:x + w], layout.on_color, layout.color_tolerance)
        states[name] = frac >= layout.min_on_fraction
    return IndicatorStates(**states)


def read_indicators(image: np.ndarray, cluster_bbox: BBoxPct = DEFAULT_CLUSTER_BBOX,
                    layout: IndicatorLayout = DEFAULT_LAYOUT) -> IndicatorStates:
    return classify_indicators(crop_pct(image, cluster_bbox), layout)


# 5x7 glyphs for the panel labels, one string per row.
_GLYPHS = {
    "A": ("01110", "10001", "10001", "11111", "10001", "10001", "10001"),
    "C": ("01110", "10001", "10000", "10000", "10000", "10001", "01110"),
    "D": ("11110", "10001", "10001", "10001", "10001", "10001", "11110"),
    "E": ("11111", "10000", "10000", "11110", "10000", "10000", "11111"),
    "F": ("11111", "10000", "10000", "11110", "10000", "10000", "10000"),
    "G": ("01110", "10001", "10000", "10111", "10001", "10001", "01111"),
    "I": ("01110", "00100", "00100", "00100", "00100", "00100", "01110"),
    "L": ("10000", "10000", "10000", "10000", "10000", "10000", "11111"),
    "M": ("10001", "11011", "10101", "10101", "10001", "10001", "10001"),
    "N": ("10001", "11001", "10101", "10011", "10001", "10001", "10001"),
    "O": ("01110", "10001", "10001", "10001", "10001", "10001", "01110"),
    "P": ("11110", "10001", "10001", "11110", "10000", "10000", "10000"),
    "R": ("11110", "10001", "10001", "11110", "10100", "10010", "10001"),
    "S": ("01111", "10000", "10000", "01110", "00001", "00001", "11110"),
    "T": ("11111", "00100", "00100", "00100", "00100", "00100", "00100"),
    "U": ("10001", "10001", "10001", "10001", "10001", "10001", "01110"),
    "X": ("10001", "10001", "01010", "00100", "01010", "10001", "10001"),
    "Z": ("11111", "00001", "00010", "00100", "01000", "10000", "11111"),
    " ": ("00000",) * 7,
}


def _draw_text(canvas: np.ndarray, text: str, x: int, y: int, color, scale: int = 2) -> None:
    for ch in text:
        glyph = _GLYPHS.get(ch, _GLYPHS[" "])
        for row, bits in enumerate(glyph):
            for col, bit in enumerate(bits):
                if bit == "1":
                    y0, x0 = y + row * scale, x + col * scale
                    canvas[y0:y0 + scale, x0:x0 + scale] = color
        x += 6 * scale


BACKGROUND = (30, 33, 40)
PANEL_COLOR = (48, 52, 60)
LISTING_COLOR = (22, 24, 28)
TEXT_COLOR = (225, 225, 225)
OFF_COLOR = (60, 60, 60)


def _paint(states: IndicatorStates, size: tuple[int, int], cluster_bbox: BBoxPct,
           layout: IndicatorLayout) -> np.ndarray:
    width, height = size
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = BACKGROUND

    # title bar and program listing pane on the left
    img[: max(1, height // 20)] = PANEL_COLOR
    _draw_text(img, "STATUS", 12, 8, TEXT_COLOR)
    lx, ly = width // 40, height // 10
    lw, lh = width // 2, height * 3 // 4
    img[ly:ly + lh, lx:lx + lw] = LISTING_COLOR
    for i in range(8):
        row = ly + 16 + i * 28
        if row + 14 > ly + lh:
            break
        img[row:row + 10, lx + 16:lx + 16 + (lw // 2) - 20 * (i % 3)] = (150, 150, 150)

    cx, cy, cw, ch = bbox_to_rect(cluster_bbox, width, height)
    img[cy:cy + ch, cx:cx + cw] = PANEL_COLOR
    cluster_shape = (ch, cw)
    for name in INDICATOR_NAMES:
        x, y, w, h = _indicator_rect(cluster_shape, layout.boxes[name], name)
        color = layout.on_color if getattr(states, name) else OFF_COLOR
        img[cy + y:cy + y + h, cx + x:cx + x + w] = color
        scale = 2 if cw >= 200 else 1
        label_x = cx + x + w + max(4, cw // 30)
        label_y = cy + y + max(0, (h - 7 * scale) // 2)
        if label_y + 7 * scale <= height:
            _draw_text(img, INDICATOR_LABELS[name], label_x, label_y, TEXT_COLOR, scale)
    # labels may spill past the crop; they never touch LED boxes
    img.flags.writeable = False
    return img


# Noise-free frames are reused across seeds; keyed by repr because the
# layout holds a dict and is not hashable.
_BASE_CACHE: "OrderedDict[str, np.ndarray]" = OrderedDict()
_BASE_CACHE_SIZE = 16
_BASE_LOCK = threading.Lock()


def _base_frame(states, size, cluster_bbox, layout) -> np.ndarray:
    key = repr((states, tuple(size), cluster_bbox, layout))
    with _BASE_LOCK:
        if key in _BASE_CACHE:
            _BASE_CACHE.move_to_end(key)
            return _BASE_CACHE[key]
    frame = _paint(states, tuple(size), cluster_bbox, layout)
    with _BASE_LOCK:
        _BASE_CACHE[key] = frame
        while len(_BASE_CACHE) > _BASE_CACHE_SIZE:
            _BASE_CACHE.popitem(last=False)
    return frame


def render_synthetic(states: IndicatorStates, noise_seed: Optional[int] = None, *,
                     size: tuple[int, int] = (1280, 800),
                     cluster_bbox: BBoxPct = DEFAULT_CLUSTER_BBOX,
                     layout: IndicatorLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """Paint a stand-in HMI screenshot with the three indicators set to ``states``.

    With a seed, uniform per-pixel noise of at most half the colour tolerance
    is added, which keeps classification exact.
    """
    base = _base_frame(states, size, cluster_bbox, layout)
    if noise_seed is None:
        return base.copy()
    amp = layout.color_tolerance // 2
    noise = np.random.default_rng(noise_seed).integers(-amp, amp + 1, size=base.shape, dtype=np.int16)
    noise += base
    np.clip(noise, 0, 255, out=noise)
    return noise.astype(np.uint8)


OVERLAY_COLOR = (255, 0, 255)


def debug_overlay(image: np.ndarray, boxes: Sequence[BBoxPct], thickness: int = 2,
                  color=OVERLAY_COLOR) -> np.ndarray:
    """Copy of ``image`` with a rectangle drawn just inside each box edge."""
    out = image.copy()
    height, width = image.shape[:2]
    for box in boxes:
        x, y, w, h = bbox_to_rect(box, width, height)
        t = min(thickness, w, h)
        out[y:y + t, x:x + w] = color
        out[y + h - t:y + h, x:x + w] = color
        out[y:y + h, x:x + t] = color
        out[y:y + h, x + w - t:x + w] = color
    return out
