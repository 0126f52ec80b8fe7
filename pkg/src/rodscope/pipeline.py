"""Frame-level orchestration: manifests and the mask-to-database analysis flow."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_mask
from .analyzer import AnalysisConfig, assign_clusters, filter_cells, filter_clusters
from .components import ComponentSet, label_components
from .database import build_records
from .fluorescence import cell_fluor_stats
from .geometry import analyze_cell_geometry
from .imaging import GrayImage

logger = logging.getLogger(__name__)


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    image: str
    cluster_mask: str | None = None


@dataclass(frozen=True)
class FrameSpec:
    frame_id: int
    cell_image: str | None = None
    cell_mask: str | None = None
    channels: tuple = ()


@dataclass
class RunManifest:
    frames: list
    config: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> RunManifest:
        if not isinstance(data, dict) or not isinstance(data.get("frames", []), list):
            raise ManifestError("manifest must be an object with a 'frames' list")

        def resolve(p):
            if p is None:
                return None
            return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

        frames = []
        for index, raw in enumerate(data.get("frames", [])):
            channels = []
            for ch in raw.get("channels", []):
                if "name" not in ch or "image" not in ch:
                    raise ManifestError(f"frame {index}: every channel needs 'name' and 'image'")
                channels.append(ChannelSpec(ch["name"], resolve(ch["image"]), resolve(ch.get("cluster_mask"))))
            names = [c.name for c in channels]
            if len(set(names)) != len(names):
                raise ManifestError(f"frame {index}: duplicate channel names")
            frames.append(
                FrameSpec(
                    frame_id=int(raw.get("frame_id", index)),
                    cell_image=resolve(raw.get("cell_image")),
                    cell_mask=resolve(raw.get("cell_mask")),
                    channels=tuple(channels),
                )
            )
        ids = [f.frame_id for f in frames]
        if len(set(ids)) != len(ids):
            raise ManifestError("frame ids must be unique")
        if any(i < 0 for i in ids):
            raise ManifestError("frame ids must be >= 0")
        return cls(frames, dict(data.get("config", {})))

    @classmethod
    def load(cls, path) -> RunManifest:
        with open(path, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data, os.path.dirname(os.path.abspath(path)))

    def missing_paths(self) -> list:
        out = []
        for fr in self.frames:
            paths = [fr.cell_image, fr.cell_mask]
            for ch in fr.channels:
                paths += [ch.image, ch.cluster_mask]
            out += [p for p in paths if p is not None and not os.path.exists(p)]
        return out

    def channel_names(self) -> list:
        names = []
        for fr in self.frames:
            for ch in fr.channels:
                if ch.name not in names:
                    names.append(ch.name)
        return names


@dataclass
class FrameResult:
    frame_id: int
    cells: ComponentSet
    records: list
    n_labeled: int


def analyze_frame(cell_mask, channels=(), cfg: AnalysisConfig | None = None, frame_id: int = 0) -> FrameResult:
    """Filter cells, measure them and compute fluorescence fields for one frame.

    ``channels`` is a sequence of ``(name, image, cluster_mask)``; a ``None``
    cluster mask means the channel has no cluster analysis.
    """
    cfg = cfg or AnalysisConfig()
    cell_mask = check_mask(cell_mask, "cell mask")
    labeled = label_components(cell_mask)
    kept = filter_cells(labeled, cfg)
    small = [c.id for c in kept if c.area_px < 3]
    if small:
        logger.warning("frame %d: cells %s have fewer than 3 pixels and are skipped", frame_id, small)
        kept = kept.subset(cid for cid in kept.ids if cid not in set(small))

    geometry = {c.id: analyze_cell_geometry(c, cfg.pixel_size_um) for c in kept}
    stats_by_channel = {}
    for name, image, cluster_mask in channels:
        pixels = image.pixels if isinstance(image, GrayImage) else np.asarray(image)
        if pixels.shape != cell_mask.shape:
            raise ValueError(f"frame {frame_id}, channel {name!r}: image shape {pixels.shape} != mask shape {cell_mask.shape}")
        clusters, assignment = None, None
        if cluster_mask is not None:
            cluster_mask = check_mask(cluster_mask, f"{name} cluster mask")
            if cluster_mask.shape != cell_mask.shape:
                raise ValueError(f"frame {frame_id}, channel {name!r}: cluster mask shape mismatch")
            clusters = filter_clusters(label_components(cluster_mask), kept)
            assignment = assign_clusters(clusters, kept)
        stats_by_channel[name] = {
            c.id: cell_fluor_stats(
                c,
                geometry[c.id].frame,
                pixels,
                name,
                clusters,
                assignment.clusters_of(c.id) if assignment else (),
                cfg.pixel_size_um,
                cfg.polar_low,
                cfg.polar_high,
                cfg.profile_points,
            )
            for c in kept
        }
    measurements = {cid: g.measurements for cid, g in geometry.items()}
    records = build_records(kept, measurements, stats_by_channel, frame_id)
    return FrameResult(frame_id, kept, records, len(labeled))
