"""Per-cell fluorescence statistics and per-cluster metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .components import Component, ComponentSet
from .geometry import CellFrame
from .imaging import GrayImage

AXES = ("vertical", "horizontal")
AGGREGATES = ("mean", "max", "sum")


@dataclass(frozen=True)
class ClusterRecord:
    cluster_id: int
    size_um2: float
    center: tuple
    is_polar: bool
    mean_intensity: float
    std_intensity: float
    max_intensity: float
    sum_intensity: float


@dataclass(frozen=True)
class CellFluorStats:
    channel_name: str
    mean: float
    std: float
    cvi: float | None
    profiles: dict
    clusters: tuple = ()
    leading_cluster_index: int | None = None

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def has_clusters(self) -> bool:
        return self.n_clusters > 0


def _values(img, comp: Component) -> np.ndarray:
    pixels = img.pixels if isinstance(img, GrayImage) else np.asarray(img)
    return pixels[comp.coords[:, 0], comp.coords[:, 1]]


def cell_intensity_stats(cell: Component, fluor) -> tuple:
    """Population mean and standard deviation of the fluorescence over the cell's pixels."""
    v = _values(fluor, cell).astype(np.float64)
    return float(v.mean()), float(v.std())


def cvi(mean: float, std: float) -> float | None:
    """Mean divided by standard deviation (the inverse of the usual CV); None when std is 0."""
    if std == 0:
        return None
    return mean / std


def _frame_extent(cell: Component, frame: CellFrame, axis: str):
    x, y = frame.to_frame(cell.coords)
    proj = x if axis == "horizontal" else y
    return proj, float(proj.min()), float(proj.max())


def intensity_profile(cell: Component, frame: CellFrame, fluor, axis: str, agg: str, n: int = 20) -> np.ndarray:
    """Aggregate intensity in ``n`` equal-width bins along a cell-frame axis.

    ``horizontal`` is the major axis and ``vertical`` the minor axis. Empty
    bins are 0.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    if agg not in AGGREGATES:
        raise ValueError(f"agg must be one of {AGGREGATES}")
    if n < 2:
        raise ValueError("n must be >= 2")
    proj, lo, hi = _frame_extent(cell, frame, axis)
    v = _values(fluor, cell).astype(np.float64)
    if hi > lo:
        idx = np.minimum(((proj - lo) / (hi - lo) * n).astype(np.int64), n - 1)
    else:
        idx = np.zeros(proj.shape, dtype=np.int64)
    counts = np.bincount(idx, minlength=n)
    if agg == "sum":
        return np.bincount(idx, weights=v, minlength=n)
    if agg == "mean":
        sums = np.bincount(idx, weights=v, minlength=n)
        return np.divide(sums, counts, out=np.zeros(n), where=counts > 0)
    out = np.zeros(n)
    np.maximum.at(out, idx, v)
    # intensities are non-negative, so untouched bins stay 0
    return out


def normalized_position(point, cell: Component, frame: CellFrame) -> tuple:
    """(x, y) of an image point relative to the cell's extent along the major/minor axes, clipped to [0, 1]."""
    px, py = frame.to_frame(np.asarray(point, dtype=np.float64))
    out = []
    for p, axis in ((px[0], "horizontal"), (py[0], "vertical")):
        _, lo, hi = _frame_extent(cell, frame, axis)
        out.append(0.5 if hi == lo else float(np.clip((p - lo) / (hi - lo), 0.0, 1.0)))
    return tuple(out)


def is_polar(x: float, polar_low: float = 0.25, polar_high: float = 0.75) -> bool:
    return x < polar_low or x > polar_high


def cluster_metrics(
    cluster: Component,
    cell: Component,
    frame: CellFrame,
    fluor,
    pixel_size_um: float = 1.0,
    polar_low: float = 0.25,
    polar_high: float = 0.75,
) -> ClusterRecord:
    """Size, intensity statistics and normalised position of one cluster within one cell.

    The position is that of the brightest cluster pixel (ties: smallest
    (row, col)).
    """
    v = _values(fluor, cluster)
    tied = cluster.coords[v == v.max()]
    peak = tied[np.lexsort((tied[:, 1], tied[:, 0]))[0]]
    center = normalized_position(peak, cell, frame)
    vf = v.astype(np.float64)
    return ClusterRecord(
        cluster_id=cluster.id,
        size_um2=cluster.area_px * pixel_size_um * pixel_size_um,
        center=center,
        is_polar=is_polar(center[0], polar_low, polar_high),
        mean_intensity=float(vf.mean()),
        std_intensity=float(vf.std()),
        max_intensity=v.max().item(),
        sum_intensity=v.astype(np.int64).sum().item() if np.issubdtype(v.dtype, np.integer) else float(vf.sum()),
    )


def leading_cluster(clusters) -> int | None:
    """Index of the cluster with the highest max intensity; first wins ties."""
    if not clusters:
        return None
    best = 0
    for i, rec in enumerate(clusters):
        if rec.max_intensity > clusters[best].max_intensity:
            best = i
    return best


def cell_fluor_stats(
    cell: Component,
    frame: CellFrame,
    fluor,
    channel_name: str,
    clusters: ComponentSet | None = None,
    cluster_ids=(),
    pixel_size_um: float = 1.0,
    polar_low: float = 0.25,
    polar_high: float = 0.75,
    profile_points: int = 20,
) -> CellFluorStats:
    mean, std = cell_intensity_stats(cell, fluor)
    profiles = {
        (axis, agg): intensity_profile(cell, frame, fluor, axis, agg, profile_points)
        for axis in AXES
        for agg in AGGREGATES
    }
    records = tuple(
        cluster_metrics(clusters.get(kid), cell, frame, fluor, pixel_size_um, polar_low, polar_high)
        for kid in sorted(cluster_ids)
    ) if clusters is not None else ()
    return CellFluorStats(
        channel_name=channel_name,
        mean=mean,
        std=std,
        cvi=cvi(mean, std),
        profiles=profiles,
        clusters=records,
        leading_cluster_index=leading_cluster(records),
    )
