"""Escape-time images with ray and equipotential overlays.

The raster pipeline is pure numpy on float64 with a fixed operation
order, so a given polynomial, frame, and overlay set always produces
the same bytes.  Images are written as binary PPM; regression tests
compare files directly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .equipot import ComponentSeed, equipotential_trace
from .poly import Polynomial, escaping_criticals
from .rays import trace_ray

# overlay palette, RGB
RAY_COLOR = (200, 30, 30)
BROKEN_COLOR = (30, 140, 30)
CURVE_COLOR = (60, 60, 200)
MARKER_COLOR = (240, 170, 20)
INTERIOR = (24, 22, 30)


@dataclass(frozen=True)
class Frame:
    """Pixel grid over a rectangle in the plane.

    width is the real-axis span; the imaginary span follows from the
    pixel aspect.  Row 0 is the top of the image.
    """

    center: complex
    width: float
    px: int = 640
    py: int = 640

    @property
    def height(self) -> float:
        return self.width * self.py / self.px

    def to_pixel(self, z: complex) -> tuple:
        """Fractional pixel coordinates (col, row) of a point."""
        x = (z.real - self.center.real) / self.width + 0.5
        y = 0.5 - (z.imag - self.center.imag) / self.height
        return x * self.px - 0.5, y * self.py - 0.5

    def grid(self) -> np.ndarray:
        cols = (np.arange(self.px) + 0.5) / self.px - 0.5
        rows = 0.5 - (np.arange(self.py) + 0.5) / self.py
        re = self.center.real + self.width * cols
        im = self.center.imag + self.height * rows
        return re[None, :] + 1j * im[:, None]


def _horner(coeffs, Z):
    acc = np.full_like(Z, complex(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        acc = acc * Z + complex(c)
    return acc


def render_escape(P: Polynomial, frame: Frame, max_iter: int = 160) -> np.ndarray:
    """Escape-time shading: banded gray exterior, dark interior.

    The exterior shade follows the fractional part of the smoothed
    escape count, which traces equipotential bands like the printed
    figures; bounded points get the flat interior color.
    """
    R = max(P.escape_radius, 4.0)
    logR = math.log(R)
    D = P.degree
    Z = frame.grid()
    count = np.full(Z.shape, -1.0)
    alive = np.ones(Z.shape, bool)
    for n in range(max_iter):
        Z[alive] = _horner(P.coeffs, Z[alive])
        far = alive & (np.abs(Z) > R)
        if far.any():
            az = np.abs(Z[far])
            count[far] = n + 1.0 - np.log(np.log(az) / logR) / math.log(D)
            alive[far] = False
        if not alive.any():
            break
    img = np.empty(Z.shape + (3,), np.uint8)
    img[alive] = INTERIOR
    esc = ~alive
    if esc.any():
        v = count[esc]
        band = np.modf(v / 3.0)[0]
        shade = np.floor(250.0 - 95.0 * band - 40.0 / (1.0 + 0.25 * v))
        g = np.clip(shade, 0, 255).astype(np.uint8)
        img[esc] = np.stack([g, g, g], axis=-1)
    return img


def draw_polyline(img: np.ndarray, frame: Frame, points, color) -> None:
    """Rasterize a point sequence with integer line stepping."""
    py, px = img.shape[:2]
    col = np.array(color, np.uint8)
    last = None
    for z in points:
        x, y = frame.to_pixel(z)
        cur = (int(round(x)), int(round(y)))
        if last is not None and last != cur:
            x0, y0 = last
            x1, y1 = cur
            steps = max(abs(x1 - x0), abs(y1 - y0))
            # clip wild jumps instead of sweeping across the frame
            if steps <= 4 * max(px, py):
                for t in range(steps + 1):
                    xi = x0 + round(t * (x1 - x0) / steps) if steps else x0
                    yi = y0 + round(t * (y1 - y0) / steps) if steps else y0
                    if 0 <= xi < px and 0 <= yi < py:
                        img[yi, xi] = col
        elif last is None:
            xi, yi = cur
            if 0 <= xi < px and 0 <= yi < py:
                img[yi, xi] = col
        last = cur


def draw_marker(img: np.ndarray, frame: Frame, z: complex, color,
                size: int = 3) -> None:
    """Filled square marker centered on a point."""
    py, px = img.shape[:2]
    x, y = frame.to_pixel(z)
    cx, cy = int(round(x)), int(round(y))
    col = np.array(color, np.uint8)
    for dy in range(-size, size + 1):
        for dx in range(-size, size + 1):
            xi, yi = cx + dx, cy + dy
            if 0 <= xi < px and 0 <= yi < py:
                img[yi, xi] = col


def render_figure(P: Polynomial, frame: Frame, rays=(), potentials=(),
                  seed: ComponentSeed = None, mark_crashes: bool = True,
                  mark_landings: bool = True, s_min: float = 1e-6,
                  max_iter: int = 160) -> np.ndarray:
    """Escape-time base plus the standard overlay set.

    rays is a sequence of (angle, side) pairs; potentials lists level
    curve values traced around the seed's component (skipped without a
    seed).  Crash points and landing points are marked when found.
    """
    img = render_escape(P, frame, max_iter)
    for s in potentials:
        if seed is None:
            continue
        curve = equipotential_trace(P, seed, s, read_angles=False)
        pts = list(curve.points)
        if curve.closed and pts:
            pts.append(pts[0])
        draw_polyline(img, frame, pts, CURVE_COLOR)
    for angle, side in rays:
        tr = trace_ray(P, angle, side=side, s_min=s_min)
        draw_polyline(img, frame, [z for _s, z in tr.samples],
                      RAY_COLOR if side == "smooth" else BROKEN_COLOR)
        if mark_crashes:
            for c in tr.crashes:
                draw_marker(img, frame, c.location, MARKER_COLOR, 2)
        if mark_landings and tr.landing is not None:
            draw_marker(img, frame, tr.landing, MARKER_COLOR, 3)
    if mark_crashes:
        for c in escaping_criticals(P):
            draw_marker(img, frame, c.location, MARKER_COLOR, 2)
    return img


def write_ppm(path, img: np.ndarray) -> None:
    """Binary PPM (P6), the dependency-free bit-exact format."""
    py, px = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{px} {py}\n255\n".encode("ascii"))
        fh.write(img.astype(np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValueError(f"not a binary PPM: {magic!r}")
        line = fh.readline()
        while line.startswith(b"#"):
            line = fh.readline()
        px, py = (int(v) for v in line.split())
        maxval = int(fh.readline())
        if maxval != 255:
            raise ValueError("only 8-bit PPM supported")
        data = fh.read(px * py * 3)
    return np.frombuffer(data, np.uint8).reshape(py, px, 3).copy()
