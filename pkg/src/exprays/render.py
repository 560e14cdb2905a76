"""Escape-time images of the dynamical and parameter planes with curve overlays.

The exponential family escapes through the right half plane, so a point
counts as escaped once Re z exceeds the escape radius (or |z| overflows).
Images are written as binary PPM (P6).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .serialize import atomic_write_bytes, read_json

MAX_PIXELS = 8192
TWO_PI = 2.0 * math.pi

OVERLAY_COLORS = [
    (255, 64, 64),
    (64, 200, 255),
    (255, 220, 40),
    (80, 255, 120),
    (255, 110, 230),
    (255, 160, 40),
]


@dataclass(frozen=True)
class RenderSpec:
    plane: str                       # "dynamical" or "parameter"
    center: complex
    width: float
    height: float
    resolution: tuple[int, int]      # (pixels across, pixels down)
    c: complex = 0j                  # used by the dynamical plane
    max_iter: int = 200
    escape_radius: float = 50.0
    overlays: tuple = ()             # paths of JSON traces, or already loaded layers
    palette: str = "default"
    line_width: float = 1.0

    def __post_init__(self):
        if self.plane not in ("dynamical", "parameter"):
            raise ValueError(f"unknown plane {self.plane!r}")
        w, h = self.resolution
        if not (0 < w <= MAX_PIXELS and 0 < h <= MAX_PIXELS):
            raise ValueError(f"resolution must be within 1..{MAX_PIXELS} per side")
        if self.escape_radius < 50:
            raise ValueError("escape_radius must be at least 50")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("viewport width and height must be positive")
        if self.palette not in PALETTES:
            raise ValueError(f"unknown palette {self.palette!r}")


def parse_viewport(text: str):
    """"cx,cy,width,height" -> (center, width, height)."""
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("viewport needs cx,cy,width,height")
    cx, cy, w, h = parts
    return complex(cx, cy), w, h


def parse_resolution(text: str) -> tuple[int, int]:
    w, _, h = text.lower().partition("x")
    return int(w), int(h)


def _grid(spec: RenderSpec):
    w, h = spec.resolution
    center = spec.center
    if spec.plane == "dynamical":
        # f(z + 2 pi i) = f(z): reducing the center keeps translated views identical
        center = complex(center.real, math.remainder(center.imag, TWO_PI))
    dx, dy = spec.width / w, spec.height / h
    xs = center.real + (np.arange(w) - w / 2 + 0.5) * dx
    ys = center.imag - (np.arange(h) - h / 2 + 0.5) * dy
    return xs[None, :] + 1j * ys[:, None]


def escape_counts(spec: RenderSpec) -> np.ndarray:
    """Iterations until Re z > escape_radius; max_iter for points that never escape."""
    grid = _grid(spec)
    if spec.plane == "dynamical":
        z = grid.copy()
        c = np.full_like(grid, spec.c)
    else:
        c = grid.copy()
        z = grid.copy()
    counts = np.full(grid.shape, spec.max_iter, dtype=np.int32)
    active = np.ones(grid.shape, dtype=bool)
    R = spec.escape_radius
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(spec.max_iter):
            esc = active & ((z.real > R) | ~np.isfinite(z))
            counts[esc] = n
            active &= ~esc
            if not active.any():
                break
            za = z[active]
            z[active] = np.exp(za) + c[active]
        esc = active & ((z.real > R) | ~np.isfinite(z))
        counts[esc] = spec.max_iter - 1
    return counts


def _palette_default(counts: np.ndarray, max_iter: int) -> np.ndarray:
    x = np.sqrt(counts / float(max_iter))
    rgb = np.stack([
        0.5 + 0.5 * np.cos(2 * np.pi * (x * 3.0 + 0.0)),
        0.5 + 0.5 * np.cos(2 * np.pi * (x * 3.0 + 0.33)),
        0.5 + 0.5 * np.cos(2 * np.pi * (x * 3.0 + 0.67)),
    ], axis=-1)
    img = np.round(rgb * 255).astype(np.uint8)
    img[counts >= max_iter] = 0
    return img


def _palette_gray(counts: np.ndarray, max_iter: int) -> np.ndarray:
    v = np.round(255 * (1.0 - counts / float(max_iter))).astype(np.uint8)
    img = np.repeat(v[..., None], 3, axis=-1)
    img[counts >= max_iter] = 0
    return img


PALETTES = {"default": _palette_default, "gray": _palette_gray}


# overlays

@dataclass
class Layer:
    kind: str                                # "polyline" or "points"
    curves: list = field(default_factory=list)   # list of complex arrays


def load_layer(source) -> Layer:
    """A drawable layer from a JSON artifact (ray traces, graphs, puzzle levels, orbits)."""
    d = read_json(source) if not isinstance(source, dict) else source
    kind = d.get("kind")
    if kind in ("RayTrace", "PolyRayTrace"):
        return Layer("polyline", [np.array([complex(s["re"], s["im"]) for s in d["samples"]])])
    if kind == "ParamRayTrace":
        return Layer("polyline", [np.array([complex(s["c_re"], s["c_im"]) for s in d["samples"]])])
    if kind in ("RayGraph", "PuzzleLevel"):
        if "curves" not in d:
            raise ValueError(f"{kind} overlay needs curves (write it with --with-curves)")
        return Layer("polyline", [np.array([complex(x, y) for x, y in pts])
                                  for _, pts in sorted(d["curves"].items())])
    if kind == "OrbitSample":
        return Layer("points", [np.array([complex(p["re"], p["im"]) for p in d["points"]])])
    raise ValueError(f"cannot draw an artifact of kind {kind!r}")


def _to_pixels(spec: RenderSpec, z: np.ndarray):
    w, h = spec.resolution
    center = spec.center
    if spec.plane == "dynamical":
        center = complex(center.real, math.remainder(center.imag, TWO_PI))
        z = z - 1j * (spec.center.imag - center.imag)
    px = (z.real - center.real) / (spec.width / w) + w / 2 - 0.5
    py = -(z.imag - center.imag) / (spec.height / h) + h / 2 - 0.5
    return px, py


def _blend(img, alpha, color):
    a = alpha[..., None]
    col = np.array(color, dtype=np.float64)
    out = img.astype(np.float64) * (1 - a) + col * a
    return np.round(out).astype(np.uint8)


def _coverage_segments(shape, px, py, half_width):
    """Per-pixel coverage max over segments: 1 within half_width, linear falloff over 1 px."""
    h, w = shape
    cov = np.zeros(shape)
    reach = half_width + 1.0
    for i in range(len(px) - 1):
        x0, y0, x1, y1 = px[i], py[i], px[i + 1], py[i + 1]
        if not all(map(math.isfinite, (x0, y0, x1, y1))):
            continue
        lo_x = max(int(math.floor(min(x0, x1) - reach)), 0)
        hi_x = min(int(math.ceil(max(x0, x1) + reach)), w - 1)
        lo_y = max(int(math.floor(min(y0, y1) - reach)), 0)
        hi_y = min(int(math.ceil(max(y0, y1) + reach)), h - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue
        X, Y = np.meshgrid(np.arange(lo_x, hi_x + 1), np.arange(lo_y, hi_y + 1))
        dx, dy = x1 - x0, y1 - y0
        L2 = dx * dx + dy * dy
        if L2 == 0:
            d = np.hypot(X - x0, Y - y0)
        else:
            u = np.clip(((X - x0) * dx + (Y - y0) * dy) / L2, 0.0, 1.0)
            d = np.hypot(X - (x0 + u * dx), Y - (y0 + u * dy))
        a = np.clip(reach - d, 0.0, 1.0)
        sub = cov[lo_y:hi_y + 1, lo_x:hi_x + 1]
        np.maximum(sub, a, out=sub)
    return cov


def _coverage_points(shape, px, py, radius=1.5):
    h, w = shape
    cov = np.zeros(shape)
    for x0, y0 in zip(px, py):
        if not (math.isfinite(x0) and math.isfinite(y0)):
            continue
        lo_x, hi_x = max(int(x0 - radius - 1), 0), min(int(x0 + radius + 2), w - 1)
        lo_y, hi_y = max(int(y0 - radius - 1), 0), min(int(y0 + radius + 2), h - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue
        X, Y = np.meshgrid(np.arange(lo_x, hi_x + 1), np.arange(lo_y, hi_y + 1))
        a = np.clip(radius + 1.0 - np.hypot(X - x0, Y - y0), 0.0, 1.0)
        sub = cov[lo_y:hi_y + 1, lo_x:hi_x + 1]
        np.maximum(sub, a, out=sub)
    return cov


def render(spec: RenderSpec) -> np.ndarray:
    """RGB image (height x width x 3, uint8); deterministic in the spec."""
    counts = escape_counts(spec)
    img = PALETTES[spec.palette](counts, spec.max_iter)
    for i, src in enumerate(spec.overlays):
        layer = src if isinstance(src, Layer) else load_layer(src)
        color = OVERLAY_COLORS[i % len(OVERLAY_COLORS)]
        for pts in layer.curves:
            px, py = _to_pixels(spec, np.asarray(pts, dtype=complex))
            if layer.kind == "points":
                cov = _coverage_points(img.shape[:2], px, py)
            else:
                cov = _coverage_segments(img.shape[:2], px, py, spec.line_width / 2)
            img = _blend(img, cov, color)
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_ppm(path, img: np.ndarray) -> None:
    atomic_write_bytes(path, ppm_bytes(img))


def read_ppm(path) -> np.ndarray:
    data = open(path, "rb").read()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PPM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PPM is supported")
    body = data[m.end():]
    if len(body) != w * h * 3:
        raise ValueError("PPM pixel data has the wrong length")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)
