"""Rod-model cell geometry: principal frame, quadratic midline and spherocylinder measures.

This is an approximation of a full bacterial coordinate-system fit. Each cell
gets a principal-axis frame from its pixel covariance and a degree-2 midline
``y = a x^2 + b x + c`` in that frame. The radius is the mean distance from
the outer contour to the midline clipped to the cylindrical section, and
surface/volume use the spherocylinder closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from skimage import measure

from .components import Component


@dataclass(frozen=True)
class CellFrame:
    centroid: np.ndarray
    major_axis: np.ndarray
    minor_axis: np.ndarray
    eigenvalues: tuple

    def to_frame(self, coords) -> tuple:
        """Map (row, col) points to (x along major axis, y along minor axis)."""
        d = np.asarray(coords, dtype=np.float64).reshape(-1, 2) - self.centroid
        return d @ self.major_axis, d @ self.minor_axis

    def to_image(self, x, y) -> np.ndarray:
        x, y = np.atleast_1d(x), np.atleast_1d(y)
        return self.centroid + np.outer(x, self.major_axis) + np.outer(y, self.minor_axis)


@dataclass(frozen=True)
class Midline:
    a: float
    b: float
    c: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.x_min > self.x_max:
            raise ValueError("midline domain is empty")

    def __call__(self, x):
        return (self.a * x + self.b) * x + self.c

    def slope(self, x):
        return 2 * self.a * x + self.b

    @property
    def coefficients(self) -> tuple:
        return self.a, self.b, self.c


@dataclass(frozen=True)
class CellMeasurements:
    length_um: float
    width_um: float
    area_um2: float
    radius_um: float
    circumference_um: float
    surface_area_um2: float
    volume_um3: float


def fit_cell_frame(c: Component) -> CellFrame:
    """Principal axes of the pixel centers (population covariance).

    The major axis points towards increasing column (then increasing row);
    an eigenvalue tie selects the column direction.
    """
    if c.area_px < 3:
        raise ValueError(f"component {c.id} has {c.area_px} pixels; at least 3 are needed")
    pts = c.coords.astype(np.float64)
    centroid = pts.mean(axis=0)
    cov = np.cov(pts, rowvar=False, bias=True)
    evals, evecs = np.linalg.eigh(cov)
    lo, hi = float(evals[0]), float(evals[1])
    if hi - lo <= 1e-12 * max(1.0, hi):
        major = np.array([0.0, 1.0])
    else:
        major = evecs[:, 1].copy()
        if major[1] < -1e-15 or (abs(major[1]) <= 1e-15 and major[0] < 0):
            major = -major
    minor = np.array([major[1], -major[0]])
    return CellFrame(centroid, major, minor, (hi, lo))


def fit_midline(c: Component, frame: CellFrame) -> Midline:
    """Least-squares parabola through the mean cross-section center of unit-width bins along x.

    Fewer than three bins fall back to the straight major axis.
    """
    x, y = frame.to_frame(c.coords)
    x_min, x_max = float(x.min()), float(x.max())
    bins = np.floor(x - x_min + 1e-9).astype(np.int64)
    counts = np.bincount(bins)
    filled = counts > 0
    if filled.sum() < 3:
        return Midline(0.0, 0.0, 0.0, x_min, x_max)
    xb = np.bincount(bins, weights=x)[filled] / counts[filled]
    yb = np.bincount(bins, weights=y)[filled] / counts[filled]
    a, b, c0 = np.polyfit(xb, yb, 2)
    return Midline(float(a), float(b), float(c0), x_min, x_max)


def arc_length(m: Midline, lo: float | None = None, hi: float | None = None) -> float:
    """Length of the midline curve over ``[lo, hi]`` (default: its domain)."""
    lo = m.x_min if lo is None else lo
    hi = m.x_max if hi is None else hi
    if hi <= lo:
        return 0.0
    if m.a == 0.0:
        return (hi - lo) * np.hypot(1.0, m.b)
    value, _ = integrate.quad(
        lambda t: np.sqrt(1.0 + (2 * m.a * t + m.b) ** 2), lo, hi, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return float(value)


def distance_to_midline(m: Midline, x, y, lo: float, hi: float, tol: float = 1e-10) -> np.ndarray:
    """Euclidean distance from frame points to the midline restricted to ``[lo, hi]``.

    Newton iteration on the stationarity condition of the squared distance,
    clamped to the interval, then compared against the two end points.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a, b = m.a, m.b
    t = np.clip(x, lo, hi)
    for _ in range(100):
        r = m(t) - y
        s = 2 * a * t + b
        g = (t - x) + r * s
        dg = 1 + s * s + 2 * a * r
        dg = np.where(dg > 1e-12, dg, 1.0)
        t_new = np.clip(t - g / dg, lo, hi)
        done = np.max(np.abs(t_new - t)) if t.size else 0.0
        t = t_new
        if done < tol:
            break
    d = np.hypot(t - x, m(t) - y)
    d_lo = np.hypot(lo - x, m(lo) - y)
    d_hi = np.hypot(hi - x, m(hi) - y)
    return np.minimum(d, np.minimum(d_lo, d_hi))


def outer_contour(c: Component) -> np.ndarray:
    """Closed marching-squares boundary polygon (row, col) around the component, at half-pixel offset."""
    r0, c0, r1, c1 = c.bbox
    patch = np.zeros((r1 - r0 + 3, c1 - c0 + 3), dtype=np.float64)
    patch[c.coords[:, 0] - r0 + 1, c.coords[:, 1] - c0 + 1] = 1.0
    contours = measure.find_contours(patch, 0.5)

    def enclosed(poly):
        yy, xx = poly[:, 0], poly[:, 1]
        return abs(np.dot(xx, np.roll(yy, 1)) - np.dot(yy, np.roll(xx, 1)))

    poly = max(contours, key=enclosed)
    return poly + np.array([r0 - 1, c0 - 1], dtype=np.float64)


def polygon_length(poly: np.ndarray) -> float:
    closed = poly if np.allclose(poly[0], poly[-1]) else np.vstack([poly, poly[:1]])
    return float(np.sum(np.hypot(*np.diff(closed, axis=0).T)))


def smooth_polygon(poly: np.ndarray, window: int = 3) -> np.ndarray:
    """Circular moving average of polygon vertices; removes the pixel-staircase zigzag."""
    pts = poly[:-1] if len(poly) > 1 and np.allclose(poly[0], poly[-1]) else poly
    if len(pts) < window:
        return pts
    half = window // 2
    return sum(np.roll(pts, s, axis=0) for s in range(-half, half + 1)) / window


def cell_radius(m: Midline, cx, cy, tip_lo: float, tip_hi: float, max_iter: int = 100):
    """Fixed point of: radius = mean contour distance to the midline section ``[tip_lo + r, tip_hi - r]``.

    Returns ``(radius, section_lo, section_hi)``.
    """
    r = float(np.mean(distance_to_midline(m, cx, cy, m.x_min, m.x_max)))
    lo = hi = 0.0
    for _ in range(max_iter):
        lo, hi = tip_lo + r, tip_hi - r
        if lo > hi:
            lo = hi = (tip_lo + tip_hi) / 2
        r_new = float(np.mean(distance_to_midline(m, cx, cy, lo, hi)))
        if abs(r_new - r) < 1e-9:
            r = r_new
            break
        r = r_new
    lo, hi = tip_lo + r, tip_hi - r
    if lo > hi:
        lo = hi = (tip_lo + tip_hi) / 2
    return r, lo, hi


def spherocylinder(radius: float, cylinder_length: float) -> tuple:
    """(surface area, volume) of a cylinder of the given length capped by two hemispheres."""
    r, lc = radius, max(cylinder_length, 0.0)
    surface = 2 * np.pi * r * lc + 4 * np.pi * r * r
    volume = np.pi * r * r * lc + (4.0 / 3.0) * np.pi * r**3
    return float(surface), float(volume)


def measure_cell(c: Component, m: Midline, frame: CellFrame, pixel_size_um: float = 1.0) -> CellMeasurements:
    """Length, width, area, radius, circumference, surface area and volume in micrometers."""
    if not pixel_size_um > 0:
        raise ValueError("pixel_size_um must be > 0")
    poly = outer_contour(c)
    pts = poly[:-1] if np.allclose(poly[0], poly[-1]) and len(poly) > 1 else poly
    cx, cy = frame.to_frame(pts)
    tip_lo, tip_hi = float(cx.min()), float(cx.max())

    r_px, lo, hi = cell_radius(m, cx, cy, tip_lo, tip_hi)
    cyl_px = arc_length(m, lo, hi)

    ps = pixel_size_um
    radius = r_px * ps
    cylinder = cyl_px * ps
    length = cylinder + 2 * radius
    surface, volume = spherocylinder(radius, cylinder)
    return CellMeasurements(
        length_um=length,
        width_um=2 * radius,
        area_um2=c.area_px * ps * ps,
        radius_um=radius,
        circumference_um=polygon_length(smooth_polygon(poly)) * ps,
        surface_area_um2=surface,
        volume_um3=volume,
    )


@dataclass(frozen=True)
class CellGeometry:
    frame: CellFrame
    midline: Midline
    measurements: CellMeasurements


def analyze_cell_geometry(c: Component, pixel_size_um: float = 1.0) -> CellGeometry:
    frame = fit_cell_frame(c)
    midline = fit_midline(c, frame)
    return CellGeometry(frame, midline, measure_cell(c, midline, frame, pixel_size_um))
