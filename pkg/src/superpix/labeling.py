"""Posterior label assignment and connectivity postprocessing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from skimage.measure import label as _skimage_label

from .gmm import MixtureParams, _estep_full
from .grid import GridGeometry
from .imaging import FeatureImage

# Pixels are adjacent through edges only; diagonal contact does not connect.
CONNECTIVITY = 4


@dataclass
class LabelMap:
    """Per-pixel superpixel ids, shape (height, width)."""

    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self):
        if self.labels.shape != (self.height, self.width):
            raise ValueError("labels shape does not match dimensions")

    @property
    def num_labels(self) -> int:
        return int(len(np.unique(self.labels)))


@dataclass
class Region:
    """One 4-connected component of a label map."""

    label: int
    pixel_count: int
    mean_color: np.ndarray | None
    neighbors: set[int] = field(default_factory=set)


def assign_labels(features: FeatureImage, geom: GridGeometry,
                  params: MixtureParams) -> LabelMap:
    """Give each pixel the candidate superpixel with the highest density.

    The posterior's denominator is constant per pixel, so the density
    argmax realizes the posterior argmax; ties break toward the smaller
    superpixel index.
    """
    table, _ = _estep_full(features, geom, params)
    # Candidates are stored in ascending order and argmax takes the first
    # maximum, which is the documented tie-break.
    best = np.argmax(table.weights, axis=1)
    labels = table.candidates[np.arange(table.num_pixels), best]
    return LabelMap(geom.width, geom.height,
                    labels.reshape(geom.height, geom.width).astype(np.int32))


def _component_map(labels: np.ndarray) -> np.ndarray:
    """Component id per pixel; ids start at 0 and equal-label pixels share
    an id only when 4-connected."""
    return _skimage_label(labels, connectivity=1, background=-1) - 1


def _adjacency_pairs(comp: np.ndarray) -> np.ndarray:
    h_pairs = np.stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()], axis=1)
    v_pairs = np.stack([comp[:-1, :].ravel(), comp[1:, :].ravel()], axis=1)
    pairs = np.concatenate([h_pairs, v_pairs])
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return np.unique(pairs, axis=0)


def connected_components(label_map: LabelMap,
                         features: FeatureImage | None = None) -> list[Region]:
    """4-connected components with sizes, adjacency, and (when a feature
    image is supplied) mean color over member pixels."""
    comp = _component_map(label_map.labels)
    n = int(comp.max()) + 1
    counts = np.bincount(comp.ravel(), minlength=n)
    means = None
    if features is not None:
        color = features.features[:, 2:]
        flat = comp.ravel()
        means = np.stack(
            [np.bincount(flat, weights=color[:, c], minlength=n)
             for c in range(color.shape[1])], axis=1) / counts[:, None]
    regions = [Region(label=c, pixel_count=int(counts[c]),
                      mean_color=None if means is None else means[c])
               for c in range(n)]
    for a, b in _adjacency_pairs(comp):
        regions[a].neighbors.add(int(b))
        regions[b].neighbors.add(int(a))
    return regions


def min_region_size(geom: GridGeometry) -> int:
    """Quarter of the desired superpixel size, rounded up."""
    return math.ceil(geom.interval_x * geom.interval_y / 4)


def enforce_connectivity(label_map: LabelMap, features: FeatureImage,
                         geom: GridGeometry) -> LabelMap:
    """Merge small isolated components into color-nearest neighbors.

    Components are sorted once, ascending by size (ties by component id),
    and processed in that order; a component still smaller than a quarter
    of the grid cell is merged into the adjacent component whose current
    mean color is nearest in Euclidean distance. Merges transfer size and
    update the destination mean incrementally. The result is relabeled
    densely in row-major first-occurrence order.
    """
    comp = _component_map(label_map.labels)
    n = int(comp.max()) + 1
    counts = np.bincount(comp.ravel(), minlength=n).astype(np.int64).tolist()
    color = features.features[:, 2:]
    flat = comp.ravel()
    nchan = color.shape[1]
    means = (np.stack([np.bincount(flat, weights=color[:, c], minlength=n)
                       for c in range(nchan)], axis=1)
             / np.asarray(counts, dtype=np.float64)[:, None]).tolist()
    adjacency = [set() for _ in range(n)]
    for a, b in _adjacency_pairs(comp).tolist():
        adjacency[a].add(b)
        adjacency[b].add(a)

    threshold = min_region_size(geom)
    parent = list(range(n))

    def find(c: int) -> int:
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    order = sorted(range(n), key=lambda c: (counts[c], c))
    for c in order:
        if find(c) != c or counts[c] >= threshold:
            continue
        neighbor_roots = sorted({find(a) for a in adjacency[c]} - {c})
        if not neighbor_roots:
            continue
        mc = means[c]
        dst = None
        best = float("inf")
        for r in neighbor_roots:
            mr = means[r]
            dist = sum((mc[j] - mr[j]) ** 2 for j in range(nchan))
            if dist < best:
                best = dist
                dst = r
        parent[c] = dst
        total = counts[dst] + counts[c]
        md = means[dst]
        means[dst] = [(md[j] * counts[dst] + mc[j] * counts[c]) / total
                      for j in range(nchan)]
        counts[dst] = total
        counts[c] = 0
        adjacency[dst] |= adjacency[c]

    roots = np.fromiter((find(c) for c in range(n)), dtype=np.int64, count=n)
    merged = roots[comp]
    # Dense relabel by row-major first occurrence.
    uniq, first = np.unique(merged, return_index=True)
    rank = np.empty(len(uniq), dtype=np.int32)
    rank[np.argsort(first)] = np.arange(len(uniq), dtype=np.int32)
    remap = np.zeros(n, dtype=np.int32)
    remap[uniq] = rank
    return LabelMap(label_map.width, label_map.height, remap[merged])
