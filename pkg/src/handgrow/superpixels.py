"""SLIC over-segmentation and the superpixel adjacency graph.

The segmentation follows the canonical SLIC recipe: k-means in joint
Lab-xy space, fixed regular-grid initialization, a fixed 10 iterations,
and a connectivity pass that folds orphan fragments into their dominant
neighbor. Implemented with numba so a 640x360 frame segments in tens of
milliseconds; results are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from numba import njit

from .errors import ParameterError
from .imaging import (
    H_BINS,
    HIST_BINS,
    S_BINS,
    V_BINS,
    Frame,
    HsvFrame,
    histogram_from_counts,
    hsv_bin_indices,
    rgb_to_hsv,
)

SLIC_ITERATIONS = 10

AdjacencyGraph = list[set]


@dataclass
class SuperpixelMap:
    """Label map plus per-superpixel statistics for one frame."""

    labels: np.ndarray        # (height, width) int32, values in 0..count-1
    count: int
    centroids: np.ndarray     # (count, 2) float64, (x, y) pixel coordinates
    pixel_counts: np.ndarray  # (count,) int64
    histograms: np.ndarray    # (count, HIST_BINS) float64, smoothed
    bin_counts: np.ndarray    # (count, HIST_BINS) int64, raw stacked counts
    lambdas: np.ndarray = field(default=None)  # (count,) int64, filled by seeding

    def __post_init__(self):
        if self.lambdas is None:
            self.lambdas = np.zeros(self.count, dtype=np.int64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@njit(cache=True, fastmath=True)
def _slic_assign(L, A, B, centers, step, m2, labels, dists):
    h, w = L.shape
    k = centers.shape[0]
    dists[:] = np.inf
    for ci in range(k):
        cl = np.float32(centers[ci, 0])
        ca = np.float32(centers[ci, 1])
        cb = np.float32(centers[ci, 2])
        cy = np.float32(centers[ci, 3])
        cx = np.float32(centers[ci, 4])
        y0 = max(0, int(cy) - step)
        y1 = min(h, int(cy) + step + 1)
        x0 = max(0, int(cx) - step)
        x1 = min(w, int(cx) + step + 1)
        for y in range(y0, y1):
            dy = np.float32(y) - cy
            dy2 = dy * dy
            for x in range(x0, x1):
                dl = L[y, x] - cl
                da = A[y, x] - ca
                db = B[y, x] - cb
                dx = np.float32(x) - cx
                d = dl * dl + da * da + db * db + (dy2 + dx * dx) * m2
                take = d < dists[y, x]
                dists[y, x] = d if take else dists[y, x]
                labels[y, x] = ci if take else labels[y, x]


@njit(cache=True, fastmath=True)
def _slic_update(L, A, B, labels, k):
    h, w = L.shape
    sums = np.zeros((k, 5), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            ci = labels[y, x]
            sums[ci, 0] += L[y, x]
            sums[ci, 1] += A[y, x]
            sums[ci, 2] += B[y, x]
            sums[ci, 3] += y
            sums[ci, 4] += x
            counts[ci] += 1
    return sums, counts


@njit(cache=True)
def _assign_stragglers(labels, centers):
    # pixels no longer covered by any search window keep label -1; give them
    # the spatially nearest center (rare, only under extreme center drift)
    h, w = labels.shape
    k = centers.shape[0]
    for y in range(h):
        for x in range(w):
            if labels[y, x] >= 0:
                continue
            best = np.inf
            bi = 0
            for ci in range(k):
                dy = y - centers[ci, 3]
                dx = x - centers[ci, 4]
                d = dy * dy + dx * dx
                if d < best:
                    best = d
                    bi = ci
            labels[y, x] = bi


@njit(cache=True)
def _enforce_connectivity(labels, min_size):
    """Relabel 4-connected components consecutively; merge fragments smaller
    than min_size into the adjacent already-labeled neighbor with the most
    shared boundary (lowest label on ties)."""
    h, w = labels.shape
    out = np.full((h, w), -1, dtype=np.int32)
    qy = np.empty(h * w, dtype=np.int32)
    qx = np.empty(h * w, dtype=np.int32)
    dy4 = (-1, 0, 1, 0)
    dx4 = (0, -1, 0, 1)
    new_label = 0
    contact = np.zeros(h * w // max(1, min_size) + 8, dtype=np.int64)
    for sy in range(h):
        for sx in range(w):
            if out[sy, sx] >= 0:
                continue
            orig = labels[sy, sx]
            out[sy, sx] = new_label
            qy[0] = sy
            qx[0] = sx
            head, tail = 0, 1
            while head < tail:
                cy = qy[head]
                cx = qx[head]
                head += 1
                for i in range(4):
                    ny = cy + dy4[i]
                    nx = cx + dx4[i]
                    if 0 <= ny < h and 0 <= nx < w and out[ny, nx] < 0 and labels[ny, nx] == orig:
                        out[ny, nx] = new_label
                        qy[tail] = ny
                        qx[tail] = nx
                        tail += 1
            if tail < min_size and new_label > 0:
                # count contacts with already-assigned neighbor components
                if new_label > contact.shape[0]:
                    contact = np.zeros(new_label + 8, dtype=np.int64)
                contact[:new_label] = 0
                for i in range(tail):
                    cy = qy[i]
                    cx = qx[i]
                    for j in range(4):
                        ny = cy + dy4[j]
                        nx = cx + dx4[j]
                        if 0 <= ny < h and 0 <= nx < w:
                            nb = out[ny, nx]
                            if 0 <= nb < new_label:
                                contact[nb] += 1
                best = 0
                target = -1
                for lb in range(new_label):
                    if contact[lb] > best:
                        best = contact[lb]
                        target = lb
                if target >= 0:
                    for i in range(tail):
                        out[qy[i], qx[i]] = target
                else:
                    new_label += 1
            else:
                new_label += 1
    return out, new_label


def _slic_labels(rgb: np.ndarray, target_count: int, compactness: float) -> tuple[np.ndarray, int]:
    h, w = rgb.shape[:2]
    lab = cv2.cvtColor(rgb.astype(np.float32) / 255.0, cv2.COLOR_RGB2Lab)
    L = np.ascontiguousarray(lab[..., 0])
    A = np.ascontiguousarray(lab[..., 1])
    B = np.ascontiguousarray(lab[..., 2])
    step = max(2, int(round(np.sqrt(h * w / target_count))))
    ys = np.arange(step // 2, h, step)
    xs = np.arange(step // 2, w, step)
    centers = np.empty((len(ys) * len(xs), 5), dtype=np.float64)
    i = 0
    for y in ys:
        for x in xs:
            centers[i] = (L[y, x], A[y, x], B[y, x], y, x)
            i += 1
    labels = np.full((h, w), -1, dtype=np.int32)
    dists = np.empty((h, w), dtype=np.float32)
    m2 = np.float32((compactness / step) ** 2)
    for it in range(SLIC_ITERATIONS):
        _slic_assign(L, A, B, centers, step, m2, labels, dists)
        if labels.min() < 0:
            _assign_stragglers(labels, centers)
        if it < SLIC_ITERATIONS - 1:
            sums, counts = _slic_update(L, A, B, labels, centers.shape[0])
            nz = counts > 0
            centers[nz] = sums[nz] / counts[nz, None]
    return _enforce_connectivity(labels, (step * step) // 4)


def slic_segment(
    frame: Frame,
    target_count: int = 600,
    compactness: float = 10.0,
    hsv: HsvFrame | None = None,
) -> SuperpixelMap:
    """Over-segment a frame into roughly target_count superpixels.

    Deterministic for identical inputs. Pass a precomputed HsvFrame to
    avoid converting twice when the caller needs it anyway.
    """
    h, w = frame.height, frame.width
    if target_count < 16 or target_count > (h * w) // 16:
        raise ParameterError(
            f"superpixel target_count must be in [16, {h * w // 16}], got {target_count}"
        )
    if compactness <= 0:
        raise ParameterError("compactness must be positive")
    labels, count = _slic_labels(frame.pixels, target_count, compactness)
    if hsv is None:
        hsv = rgb_to_hsv(frame)
    return _build_map(labels, count, hsv)


def _build_map(labels: np.ndarray, count: int, hsv: HsvFrame) -> SuperpixelMap:
    flat = labels.ravel().astype(np.int64)
    pixel_counts = np.bincount(flat, minlength=count)
    h, w = labels.shape
    cols = np.tile(np.arange(w, dtype=np.float64), h)
    rows = np.repeat(np.arange(h, dtype=np.float64), w)
    centroids = np.stack([
        np.bincount(flat, weights=cols, minlength=count) / pixel_counts,
        np.bincount(flat, weights=rows, minlength=count) / pixel_counts,
    ], axis=1)
    hb, sb, vb = hsv_bin_indices(hsv)
    bin_counts = np.concatenate([
        np.bincount(flat * H_BINS + hb.ravel(), minlength=count * H_BINS).reshape(count, H_BINS),
        np.bincount(flat * S_BINS + sb.ravel(), minlength=count * S_BINS).reshape(count, S_BINS),
        np.bincount(flat * V_BINS + vb.ravel(), minlength=count * V_BINS).reshape(count, V_BINS),
    ], axis=1)
    total = bin_counts.sum(axis=1, keepdims=True).astype(np.float64)
    histograms = (bin_counts / total + 1e-6) / (1.0 + HIST_BINS * 1e-6)
    return SuperpixelMap(
        labels=labels,
        count=count,
        centroids=centroids,
        pixel_counts=pixel_counts,
        histograms=histograms,
        bin_counts=bin_counts,
    )


def build_adjacency(smap: SuperpixelMap) -> AdjacencyGraph:
    """Neighbor sets under 8-connectivity across the label map.

    Two superpixels are adjacent iff some pixel of one touches a pixel of
    the other, diagonals included. The graph is symmetric and irreflexive.
    """
    labels = smap.labels
    count = smap.count
    pairs = []
    for a, b in (
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
        (labels[:-1, :-1], labels[1:, 1:]),
        (labels[:-1, 1:], labels[1:, :-1]),
    ):
        diff = a != b
        lo = np.minimum(a[diff], b[diff]).astype(np.int64)
        hi = np.maximum(a[diff], b[diff]).astype(np.int64)
        pairs.append(lo * count + hi)
    codes = np.unique(np.concatenate(pairs))
    graph: AdjacencyGraph = [set() for _ in range(count)]
    for code in codes:
        a, b = divmod(int(code), count)
        graph[a].add(b)
        graph[b].add(a)
    return graph


def two_hop_neighborhood(graph: AdjacencyGraph, idx: int) -> set:
    """Neighbors plus neighbors-of-neighbors, excluding idx itself."""
    if not 0 <= idx < len(graph):
        raise ParameterError(f"superpixel id {idx} out of range 0..{len(graph) - 1}")
    hood = set(graph[idx])
    for n in graph[idx]:
        hood |= graph[n]
    hood.discard(idx)
    return hood


def save_label_map(smap: SuperpixelMap, path: str) -> None:
    """Write the label map as 16-bit grayscale PNG for debugging."""
    cv2.imwrite(str(path), smap.labels.astype(np.uint16))
