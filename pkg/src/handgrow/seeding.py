"""Seed superpixel discovery from the spatial spread of hand evidence.

Each superpixel counts the hand-related correspondences landing in it;
local peaks of that count (within two adjacency hops) that clear the
adaptive noise threshold become the seeds growing starts from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .motion import Correspondence
from .superpixels import AdjacencyGraph, SuperpixelMap, two_hop_neighborhood

SEED_NOISE_FACTOR = 0.1  # peaks survive only with lambda >= 0.1 * mu


@dataclass
class SeedSet:
    """Seed superpixel ids plus their fused scores once scoring ran."""

    ids: list[int]
    scores: dict[int, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)

    def __bool__(self) -> bool:
        return bool(self.ids)


def count_lambda(m_h: list[Correspondence], smap: SuperpixelMap) -> SuperpixelMap:
    """Fill per-superpixel hand-correspondence counts from M_h.

    Counts use the current-frame endpoint q of each correspondence, rounded
    to the containing pixel. The counts sum to len(m_h).
    """
    h, w = smap.shape
    lambdas = np.zeros(smap.count, dtype=np.int64)
    for c in m_h:
        col = min(max(int(c.q[0] + 0.5), 0), w - 1)
        row = min(max(int(c.q[1] + 0.5), 0), h - 1)
        lambdas[smap.labels[row, col]] += 1
    smap.lambdas = lambdas
    return smap


def detect_seeds(smap: SuperpixelMap, graph: AdjacencyGraph, mu: float) -> SeedSet:
    """Local-peak seed detection with the adaptive count threshold.

    A superpixel is a peak when no member of its two-hop neighborhood has a
    strictly larger count, and equal counts suppress the higher id so each
    local plateau yields a single peak. Peaks need lambda >= 0.1 * mu (and
    at least one correspondence) to survive; an empty result is the valid
    no-hand outcome.
    """
    lambdas = smap.lambdas
    threshold = SEED_NOISE_FACTOR * mu
    seeds: list[int] = []
    for k in np.flatnonzero(lambdas > 0):
        k = int(k)
        if lambdas[k] < threshold:
            continue
        lam = lambdas[k]
        is_peak = True
        for j in two_hop_neighborhood(graph, k):
            if lambdas[j] > lam or (lambdas[j] == lam and j < k):
                is_peak = False
                break
        if is_peak:
            seeds.append(k)
    return SeedSet(ids=seeds)
