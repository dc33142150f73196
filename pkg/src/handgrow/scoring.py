"""The four egocentric cues, their weighted fusion, and early rejection.

All cues map into (0, 1] via exponentials of distances: contrast and
appearance continuity use the symmetric KL divergence between smoothed
color histograms, location and position consistency use Euclidean
distance scaled by the frame diagonal. Fusion jointly maximizes contrast
and location over the seeds, then adds the best position-consistency and
appearance-continuity terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import symmetric_kl
from .superpixels import SuperpixelMap

KAPPA_CONTRAST = 0.3
KAPPA_LOCATION = 0.2
KAPPA_POSITION = 0.2
KAPPA_APPEARANCE = 0.3
EARLY_REJECT_MIN_CONTRAST = 0.5


def contrast_score(h_k: np.ndarray, h_u: np.ndarray) -> float:
    """exp(-(KL(h_k||h_u) + KL(h_u||h_k))) between smoothed histograms."""
    return float(np.exp(-symmetric_kl(h_k, h_u)))


def location_score(c_k, c_u, diagonal: float) -> float:
    """exp(-d/l) for centers d apart in a frame with diagonal l."""
    d = np.hypot(c_k[0] - c_u[0], c_k[1] - c_u[1])
    return float(np.exp(-d / diagonal))


def position_consistency_score(c_k, prev_centers: np.ndarray, diagonal: float) -> float:
    """Best exp(-d/l) against the previous frame's hand centers.

    The exponent is negative so nearer previous hands score higher; callers
    zero the fused term instead of calling this with no previous hands.
    """
    prev_centers = np.asarray(prev_centers, dtype=np.float64).reshape(-1, 2)
    if len(prev_centers) == 0:
        raise ValueError("position consistency needs at least one previous hand")
    d = np.linalg.norm(prev_centers - np.asarray(c_k, dtype=np.float64), axis=1)
    return float(np.exp(-d.min() / diagonal))


def appearance_continuity_score(h_k: np.ndarray, model: np.ndarray) -> float:
    """Same symmetric-KL exponential as contrast, against a pool model."""
    return float(np.exp(-symmetric_kl(h_k, model)))


@dataclass
class ScoringContext:
    """Frame-static inputs to the fused score.

    Histogram matrices are stacked row-wise; log histograms are cached so
    per-superpixel evaluation is a couple of vector ops.
    """

    seed_histograms: np.ndarray   # (T, 16)
    seed_log_hists: np.ndarray    # (T, 16)
    seed_centers: np.ndarray      # (T, 2)
    prev_hand_centers: np.ndarray  # (W, 2); empty when the previous frame had no hand
    model_histograms: np.ndarray  # (V, 16); empty when the pool is empty
    model_log_hists: np.ndarray   # (V, 16)
    diagonal: float
    prev_frame_no_hand: bool

    @classmethod
    def build(
        cls,
        seed_histograms: np.ndarray,
        seed_centers: np.ndarray,
        prev_hand_centers: np.ndarray,
        model_histograms: np.ndarray,
        diagonal: float,
        prev_frame_no_hand: bool,
    ) -> "ScoringContext":
        seed_histograms = np.atleast_2d(np.asarray(seed_histograms, dtype=np.float64))
        model_histograms = np.asarray(model_histograms, dtype=np.float64).reshape(-1, seed_histograms.shape[1])
        return cls(
            seed_histograms=seed_histograms,
            seed_log_hists=np.log(seed_histograms),
            seed_centers=np.asarray(seed_centers, dtype=np.float64).reshape(-1, 2),
            prev_hand_centers=np.asarray(prev_hand_centers, dtype=np.float64).reshape(-1, 2),
            model_histograms=model_histograms,
            model_log_hists=np.log(model_histograms) if len(model_histograms) else model_histograms,
            diagonal=float(diagonal),
            prev_frame_no_hand=bool(prev_frame_no_hand),
        )


def _contrast_vector(hist, log_hist, hists, log_hists) -> np.ndarray:
    # symmetric KL against every row: sum((p - q) * (log p - log q))
    d = ((hist - hists) * (log_hist - log_hists)).sum(axis=1)
    return np.exp(-d)


def fused_score(hist: np.ndarray, center, ctx: ScoringContext, log_hist: np.ndarray | None = None) -> float:
    """Weighted cue fusion for one superpixel described by (hist, center).

    The position-consistency term is zero after a no-hand frame and the
    appearance term is zero while the model pool is empty.
    """
    if len(ctx.seed_histograms) == 0:
        raise ValueError("fused_score requires a non-empty seed set")
    if log_hist is None:
        log_hist = np.log(hist)
    s1 = _contrast_vector(hist, log_hist, ctx.seed_histograms, ctx.seed_log_hists)
    d = np.linalg.norm(ctx.seed_centers - np.asarray(center, dtype=np.float64), axis=1)
    s2 = np.exp(-d / ctx.diagonal)
    score = float(np.max(KAPPA_CONTRAST * s1 + KAPPA_LOCATION * s2))
    if not ctx.prev_frame_no_hand and len(ctx.prev_hand_centers):
        score += KAPPA_POSITION * position_consistency_score(center, ctx.prev_hand_centers, ctx.diagonal)
    if len(ctx.model_histograms):
        d4 = ((hist - ctx.model_histograms) * (log_hist - ctx.model_log_hists)).sum(axis=1)
        score += KAPPA_APPEARANCE * float(np.exp(-d4).max())
    return score


def max_contrast(hist: np.ndarray, ctx: ScoringContext, log_hist: np.ndarray | None = None) -> float:
    """Best contrast score against any seed; the early-rejection statistic."""
    if log_hist is None:
        log_hist = np.log(hist)
    return float(_contrast_vector(hist, log_hist, ctx.seed_histograms, ctx.seed_log_hists).max())


def early_reject(hist: np.ndarray, ctx: ScoringContext) -> bool:
    """True when the superpixel's best seed contrast falls below 0.5."""
    return max_contrast(hist, ctx) < EARLY_REJECT_MIN_CONTRAST


class FrameScorer:
    """Cached per-superpixel scoring within one frame.

    Scores are frame-static, so each superpixel is evaluated at most once.
    With early rejection enabled, candidates whose best seed contrast is
    below the cutoff are marked rejected and skip the remaining cues.
    """

    def __init__(self, smap: SuperpixelMap, ctx: ScoringContext, early_rejection: bool = True):
        self.smap = smap
        self.ctx = ctx
        self.early_rejection = early_rejection
        self._log_hists = np.log(smap.histograms)
        self._scores = np.full(smap.count, np.nan)
        self._known = np.zeros(smap.count, dtype=bool)
        self._rejected = np.zeros(smap.count, dtype=bool)
        self.evaluated = 0

    def score(self, k: int) -> float | None:
        """Fused score of superpixel k, or None if early-rejected."""
        if self._known[k]:
            return None if self._rejected[k] else float(self._scores[k])
        self._known[k] = True
        self.evaluated += 1
        hist = self.smap.histograms[k]
        log_hist = self._log_hists[k]
        if self.early_rejection and max_contrast(hist, self.ctx, log_hist) < EARLY_REJECT_MIN_CONTRAST:
            self._rejected[k] = True
            return None
        s = fused_score(hist, self.smap.centroids[k], self.ctx, log_hist)
        self._scores[k] = s
        return s

    def seed_scores(self, seed_ids: list[int]) -> dict[int, float]:
        """Fused scores for the seeds themselves (never early-rejected)."""
        out = {}
        for k in seed_ids:
            s = fused_score(self.smap.histograms[k], self.smap.centroids[k], self.ctx, self._log_hists[k])
            self._scores[k] = s
            self._known[k] = True
            self._rejected[k] = False
            out[k] = s
        return out
