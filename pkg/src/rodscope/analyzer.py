"""Post-segmentation filtering of cells and fluorescence clusters.

Cells too small or too close to a neighbour are dropped, and clusters that do
not touch a surviving cell are treated as noise. The remaining clusters are
assigned to every cell they overlap.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigurationError, check_mask, check_non_negative, check_positive
from .components import ComponentSet, label_components, mask_from_components
from .geometry import analyze_cell_geometry

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisConfig:
    min_area_px: int = 30
    min_length_um: float = 0.0
    min_width_um: float = 0.0
    min_gap_px: float = 2.0
    pixel_size_um: float = 1.0
    polar_low: float = 0.25
    polar_high: float = 0.75
    profile_points: int = 20

    def __post_init__(self):
        for name in ("min_area_px", "min_length_um", "min_width_um", "min_gap_px"):
            check_non_negative(getattr(self, name), name)
        check_positive(self.pixel_size_um, "pixel_size_um")
        if not self.polar_low < self.polar_high:
            raise ConfigurationError("polar_low must be < polar_high")
        if self.profile_points < 2:
            raise ConfigurationError("profile_points must be >= 2")

    def replace(self, **changes) -> AnalysisConfig:
        params = asdict(self)
        params.update({k: v for k, v in changes.items() if v is not None})
        return AnalysisConfig(**params)


@dataclass(frozen=True)
class ClusterAssignment:
    cell_to_clusters: dict = field(default_factory=dict)
    cluster_to_cells: dict = field(default_factory=dict)

    def clusters_of(self, cell_id: int) -> tuple:
        return self.cell_to_clusters.get(cell_id, ())


def filter_by_size(cells: ComponentSet, cfg: AnalysisConfig) -> ComponentSet:
    """Keep cells with area >= min_area_px and, when enabled, measured length/width at or above the minimum."""
    keep = []
    measure = cfg.min_length_um > 0 or cfg.min_width_um > 0
    for c in cells:
        if c.area_px < cfg.min_area_px:
            continue
        if measure:
            if c.area_px < 3:
                continue
            m = analyze_cell_geometry(c, cfg.pixel_size_um).measurements
            if m.length_um < cfg.min_length_um or m.width_um < cfg.min_width_um:
                continue
        keep.append(c.id)
    return cells.subset(keep)


def boundary_pixels(cells: ComponentSet) -> tuple:
    """(coords, ids) of pixels with a 4-neighbour outside their own component."""
    lab = cells.label_image
    padded = np.pad(lab, 1, constant_values=0)
    center = padded[1:-1, 1:-1]
    edge = np.zeros(lab.shape, dtype=bool)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        edge |= padded[1 + dr: padded.shape[0] - 1 + dr, 1 + dc: padded.shape[1] - 1 + dc] != center
    edge &= lab > 0
    rows, cols = np.nonzero(edge)
    return np.stack([rows, cols], axis=1), lab[rows, cols]


def close_pairs(cells: ComponentSet, min_gap_px: float) -> set:
    """Id pairs whose background gap (nearest pixel-center distance minus one) is below ``min_gap_px``."""
    if len(cells) < 2 or min_gap_px <= 0:
        return set()
    coords, ids = boundary_pixels(cells)
    reach = float(min_gap_px) + 1.0
    tree = cKDTree(coords)
    pairs = tree.query_pairs(reach, output_type="ndarray")
    if pairs.size == 0:
        return set()
    i, j = pairs[:, 0], pairs[:, 1]
    d2 = np.sum((coords[i] - coords[j]) ** 2, axis=1)
    hit = (ids[i] != ids[j]) & (d2 < reach * reach)
    return {(int(min(a, b)), int(max(a, b))) for a, b in zip(ids[i][hit], ids[j][hit])}


def filter_by_proximity(cells: ComponentSet, cfg: AnalysisConfig) -> ComponentSet:
    """Drop both members of every pair closer than ``min_gap_px``; decided on the input set in one pass."""
    doomed = {cid for pair in close_pairs(cells, cfg.min_gap_px) for cid in pair}
    return cells.subset(cid for cid in cells.ids if cid not in doomed)


def filter_clusters(clusters: ComponentSet, cells: ComponentSet) -> ComponentSet:
    """Keep clusters sharing at least one pixel with a cell."""
    if clusters.dims != cells.dims:
        raise ValueError(f"dimension mismatch: clusters {clusters.dims} vs cells {cells.dims}")
    inside = cells.label_image > 0
    keep = [k.id for k in clusters if inside[k.coords[:, 0], k.coords[:, 1]].any()]
    return clusters.subset(keep)


def assign_clusters(clusters: ComponentSet, cells: ComponentSet) -> ClusterAssignment:
    """Map each cell to the clusters overlapping it (ascending id) and vice versa."""
    if clusters.dims != cells.dims:
        raise ValueError(f"dimension mismatch: clusters {clusters.dims} vs cells {cells.dims}")
    lc, lk = cells.label_image, clusters.label_image
    both = (lc > 0) & (lk > 0)
    pairs = sorted(set(zip(lc[both].tolist(), lk[both].tolist())))
    cell_to = {cid: [] for cid in cells.ids}
    clus_to = {kid: [] for kid in clusters.ids}
    for cid, kid in pairs:
        cell_to[cid].append(kid)
        clus_to[kid].append(cid)
    return ClusterAssignment(
        {k: tuple(v) for k, v in cell_to.items()},
        {k: tuple(v) for k, v in clus_to.items() if v},
    )


def filter_cells(cells: ComponentSet, cfg: AnalysisConfig) -> ComponentSet:
    """Size filter followed by the proximity filter."""
    return filter_by_proximity(filter_by_size(cells, cfg), cfg)


class CellAnalyzer(BaseEstimator, TransformerMixin):
    """Cell-mask post-processing as a transformer: mask in, filtered mask out.

    After ``fit`` the surviving components are available as ``cells_``.
    """

    def __init__(
        self,
        min_area_px=30,
        min_length_um=0.0,
        min_width_um=0.0,
        min_gap_px=2.0,
        pixel_size_um=1.0,
    ):
        self.min_area_px = min_area_px
        self.min_length_um = min_length_um
        self.min_width_um = min_width_um
        self.min_gap_px = min_gap_px
        self.pixel_size_um = pixel_size_um

    def _config(self) -> AnalysisConfig:
        return AnalysisConfig(
            min_area_px=self.min_area_px,
            min_length_um=self.min_length_um,
            min_width_um=self.min_width_um,
            min_gap_px=self.min_gap_px,
            pixel_size_um=self.pixel_size_um,
        )

    def fit(self, X, y=None):
        cells = X if isinstance(X, ComponentSet) else label_components(check_mask(X))
        self.cells_ = filter_cells(cells, self._config())
        self.n_removed_ = len(cells) - len(self.cells_)
        logger.debug("kept %d of %d cells", len(self.cells_), len(cells))
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "cells_")
        cells = X if isinstance(X, ComponentSet) else label_components(check_mask(X))
        return mask_from_components(filter_cells(cells, self._config()))

    def fit_transform(self, X, y=None, **fit_params) -> np.ndarray:
        return mask_from_components(self.fit(X).cells_)
