"""4-connected component decomposition of binary masks."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage as ndi

from ._validation import check_mask

# neighbors (i±1, j), (i, j±1) only
FOUR_CONNECTIVITY = ndi.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class Component:
    """One connected set of foreground pixels.

    ``coords`` is an (N, 2) integer array of (row, col) pairs in raster order.
    """

    id: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 2)
        if coords.shape[0] == 0:
            raise ValueError("a component must contain at least one pixel")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def area_px(self) -> int:
        return self.coords.shape[0]

    @property
    def bbox(self) -> tuple:
        lo, hi = self.coords.min(axis=0), self.coords.max(axis=0)
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    @property
    def centroid(self) -> tuple:
        c = self.coords.mean(axis=0)
        return float(c[0]), float(c[1])

    @cached_property
    def pixel_set(self) -> frozenset:
        return frozenset(map(tuple, self.coords.tolist()))

    def __len__(self) -> int:
        return self.area_px

    def __repr__(self) -> str:
        return f"Component(id={self.id}, area_px={self.area_px}, bbox={self.bbox})"


class ComponentSet:
    """Immutable collection of disjoint components over an image of ``dims``.

    Components produced by :func:`label_components` carry ids 1..k in raster
    order of their first pixel. Subsets keep the original ids.
    """

    def __init__(self, dims, components=()):
        self.dims = (int(dims[0]), int(dims[1]))
        self._components = tuple(components)
        ids = [c.id for c in self._components]
        if len(set(ids)) != len(ids):
            raise ValueError("component ids must be unique")
        self._by_id = {c.id: c for c in self._components}

    def __len__(self) -> int:
        return len(self._components)

    def __iter__(self):
        return iter(self._components)

    def __getitem__(self, index) -> Component:
        return self._components[index]

    def __repr__(self) -> str:
        return f"ComponentSet(dims={self.dims}, n={len(self)})"

    @property
    def components(self) -> tuple:
        return self._components

    @property
    def ids(self) -> list:
        return [c.id for c in self._components]

    def get(self, component_id: int) -> Component:
        return self._by_id[component_id]

    @cached_property
    def label_image(self) -> np.ndarray:
        """int32 image holding each component's id, 0 for background."""
        out = np.zeros(self.dims, dtype=np.int32)
        for c in self._components:
            out[c.coords[:, 0], c.coords[:, 1]] = c.id
        out.setflags(write=False)
        return out

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([c.area_px for c in self._components], dtype=np.int64)

    def subset(self, keep_ids) -> ComponentSet:
        keep = set(keep_ids)
        return ComponentSet(self.dims, [c for c in self._components if c.id in keep])


def label_components(mask) -> ComponentSet:
    """Split ``mask`` into its maximal 4-connected foreground regions."""
    mask = check_mask(mask)
    labels, n = ndi.label(mask, structure=FOUR_CONNECTIVITY)
    if n == 0:
        return ComponentSet(mask.shape)
    # stable sort keeps raster order within each label
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n + 1)
    starts = np.cumsum(counts)
    order = order[counts[0]:]
    rows, cols = np.divmod(order, mask.shape[1])
    coords = np.stack([rows, cols], axis=1)
    bounds = starts[:-1] - counts[0]
    comps = [
        Component(i + 1, coords[bounds[i]: bounds[i] + counts[i + 1]]) for i in range(n)
    ]
    return ComponentSet(mask.shape, comps)


def mask_from_components(components: ComponentSet) -> np.ndarray:
    return components.label_image > 0
