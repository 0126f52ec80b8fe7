"""Per-cell database rows and their CSV serialisation.

Column layout::

    Id, frame id, length, width, area, radius, circumference, surface area, volume,
    then per channel <name>:
        cell mean intensity, cell std intensity, cell intensity CVI,
        {vertical|horizontal} {mean|max|sum} intensity profile   (20 values joined by ';')
        number of clusters, has clusters,
        cluster <i> id/size/center/is polar/mean/std/max/sum intensity  for i = 1..max clusters
        leading cluster index   (1-based, refers to the cluster <i> columns)

Micrometer quantities are written with 6 significant digits, other floats in
shortest round-trip form, booleans as ``true``/``false`` and missing values as
empty fields.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

from .fluorescence import AGGREGATES, AXES
from .geometry import CellMeasurements

CELL_COLUMNS = (
    "Id",
    "frame id",
    "length",
    "width",
    "area",
    "radius",
    "circumference",
    "surface area",
    "volume",
)
MEASUREMENT_FIELDS = (
    "length_um",
    "width_um",
    "area_um2",
    "radius_um",
    "circumference_um",
    "surface_area_um2",
    "volume_um3",
)
CLUSTER_FIELDS = (
    "id",
    "size",
    "center",
    "is polar",
    "mean intensity",
    "std intensity",
    "max intensity",
    "sum intensity",
)


@dataclass(frozen=True)
class CellRecord:
    id: int
    frame_id: int
    measurements: CellMeasurements
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frame_id < 0:
            raise ValueError("frame_id must be >= 0")


@dataclass
class DatabaseTable:
    rows: list
    channel_names: list
    max_clusters: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records, channel_names=None) -> DatabaseTable:
        rows = sorted(records, key=lambda r: (r.frame_id, r.id))
        seen = set()
        for r in rows:
            if (r.frame_id, r.id) in seen:
                raise ValueError(f"duplicate cell id {r.id} in frame {r.frame_id}")
            seen.add((r.frame_id, r.id))
        if channel_names is None:
            channel_names = sorted({name for r in rows for name in r.channels})
        max_clusters = {
            name: max((r.channels[name].n_clusters for r in rows if name in r.channels), default=0)
            for name in channel_names
        }
        return cls(rows, list(channel_names), max_clusters)

    def header(self) -> list:
        cols = list(CELL_COLUMNS)
        for name in self.channel_names:
            cols += [
                f"{name} cell mean intensity",
                f"{name} cell std intensity",
                f"{name} cell intensity CVI",
            ]
            cols += [f"{name} {axis} {agg} intensity profile" for axis in AXES for agg in AGGREGATES]
            cols += [f"{name} number of clusters", f"{name} has clusters"]
            for i in range(1, self.max_clusters.get(name, 0) + 1):
                cols += [f"{name} cluster {i} {f}" for f in CLUSTER_FIELDS]
            cols.append(f"{name} leading cluster index")
        return cols

    def row_values(self, record: CellRecord) -> list:
        m = record.measurements
        values = [str(record.id), str(record.frame_id)]
        values += [fmt_um(getattr(m, f)) for f in MEASUREMENT_FIELDS]
        for name in self.channel_names:
            stats = record.channels.get(name)
            n_max = self.max_clusters.get(name, 0)
            if stats is None:
                values += [""] * (3 + 6 + 2 + 8 * n_max + 1)
                continue
            values += [fmt_num(stats.mean), fmt_num(stats.std), fmt_num(stats.cvi)]
            values += [
                ";".join(fmt_num(v) for v in stats.profiles[(axis, agg)])
                for axis in AXES
                for agg in AGGREGATES
            ]
            values += [str(stats.n_clusters), fmt_bool(stats.has_clusters)]
            for i in range(n_max):
                if i < stats.n_clusters:
                    c = stats.clusters[i]
                    values += [
                        str(c.cluster_id),
                        fmt_um(c.size_um2),
                        f"({c.center[0]:.4f}, {c.center[1]:.4f})",
                        fmt_bool(c.is_polar),
                        fmt_num(c.mean_intensity),
                        fmt_num(c.std_intensity),
                        fmt_num(c.max_intensity),
                        fmt_num(c.sum_intensity),
                    ]
                else:
                    values += [""] * len(CLUSTER_FIELDS)
            lead = stats.leading_cluster_index
            values.append("" if lead is None else str(lead + 1))
        return values


def fmt_um(x) -> str:
    return "" if x is None else f"{float(x):.6g}"


def fmt_num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, int) or (hasattr(x, "dtype") and x.dtype.kind in "iu"):
        return str(int(x))
    return repr(float(x))


def fmt_bool(x: bool) -> str:
    return "true" if x else "false"


def build_records(cells, measurements: dict, fluor_stats: dict, frame_id: int) -> list:
    """One CellRecord per cell, ascending id.

    ``measurements`` maps cell id to CellMeasurements; ``fluor_stats`` maps
    channel name to a dict of cell id to CellFluorStats.
    """
    ids = sorted(c.id if hasattr(c, "id") else int(c) for c in cells)
    if set(measurements) != set(ids):
        raise ValueError("measurement keys do not match cell ids")
    for name, per_cell in fluor_stats.items():
        if set(per_cell) != set(ids):
            raise ValueError(f"channel {name!r}: statistics keys do not match cell ids")
    return [
        CellRecord(
            id=cid,
            frame_id=frame_id,
            measurements=measurements[cid],
            channels={name: per_cell[cid] for name, per_cell in fluor_stats.items()},
        )
        for cid in ids
    ]


def write_csv(table: DatabaseTable, path_or_file) -> None:
    own = isinstance(path_or_file, (str, os.PathLike))
    f = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.header())
        for record in table.rows:
            writer.writerow(table.row_values(record))
    finally:
        if own:
            f.close()


def to_csv_string(table: DatabaseTable) -> str:
    buf = io.StringIO()
    write_csv(table, buf)
    return buf.getvalue()


def read_csv(path) -> list:
    """Parse an emitted database back into a list of dicts keyed by header."""
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
