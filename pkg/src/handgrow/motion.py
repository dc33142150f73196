"""Cross-frame keypoint correspondences and their motion-based partition.

Matched ORB keypoints are split into obviously-false, camera-related and
hand-related sets: displacements beyond an adaptive threshold are noise,
RANSAC homography inliers follow the camera, and the leftovers are the
hand evidence that seeds detection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import InputError
from .imaging import Frame

# Pyramid depth for ORB. Successive egocentric frames differ by tiny scale
# changes only, while higher octaves add pixel-scale localization jitter
# that leaks background matches past the RANSAC inlier tolerance.
ORB_LEVELS = 4
MIN_TEXTURE_MATCHES = 8
FALSE_MATCH_FACTOR = 10.0  # theta = 10 * nu


@dataclass(frozen=True)
class Correspondence:
    """A matched keypoint pair: p in the previous frame, q in the current."""

    p: tuple[float, float]
    q: tuple[float, float]
    descriptor_distance: float = 0.0

    @property
    def displacement(self) -> float:
        return float(np.hypot(self.q[0] - self.p[0], self.q[1] - self.p[1]))


@dataclass
class MatchResult:
    correspondences: list[Correspondence]
    low_texture: bool = False

    def __len__(self) -> int:
        return len(self.correspondences)


@dataclass
class MotionPartition:
    """The full decomposition of one frame pair's correspondences."""

    all: list[Correspondence]
    false_set: list[Correspondence]
    candidates: list[Correspondence]
    camera: list[Correspondence]
    hand: list[Correspondence]
    homography: np.ndarray  # (3, 3), bottom-right entry 1
    no_camera_model: bool = False


@dataclass(frozen=True)
class VideoStatistics:
    """Adaptive per-video thresholds learned from all frame pairs."""

    nu: float     # median keypoint displacement, pixels
    theta: float  # false-correspondence cutoff, = 10 * nu
    mu: float     # mean per-frame hand-correspondence count


def endpoints(corrs: list[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    """Stack correspondences into (n, 2) arrays of p and q coordinates."""
    if not corrs:
        return np.empty((0, 2)), np.empty((0, 2))
    p = np.array([c.p for c in corrs], dtype=np.float64)
    q = np.array([c.q for c in corrs], dtype=np.float64)
    return p, q


def detect_and_match(prev: Frame, cur: Frame, max_features: int = 1000) -> MatchResult:
    """ORB keypoints matched mutually (cross-check) under Hamming distance.

    Frames yielding fewer than 8 matches come back as an empty result with
    the low_texture flag set; downstream treats that as no-hand evidence.
    """
    if prev.pixels.shape != cur.pixels.shape:
        raise InputError("detect_and_match requires frames of identical dimensions")
    if max_features < 50:
        raise InputError(f"max_features must be at least 50, got {max_features}")
    orb = cv2.ORB_create(nfeatures=max_features, nlevels=ORB_LEVELS)
    kp_p, des_p = orb.detectAndCompute(cv2.cvtColor(prev.pixels, cv2.COLOR_RGB2GRAY), None)
    kp_q, des_q = orb.detectAndCompute(cv2.cvtColor(cur.pixels, cv2.COLOR_RGB2GRAY), None)
    if des_p is None or des_q is None:
        return MatchResult([], low_texture=True)
    matcher = cv2.BFMatcher(cv2.NORM_HAMMING, crossCheck=True)
    matches = matcher.match(des_p, des_q)
    matches = sorted(matches, key=lambda m: m.queryIdx)
    corrs = [
        Correspondence(
            p=tuple(map(float, kp_p[m.queryIdx].pt)),
            q=tuple(map(float, kp_q[m.trainIdx].pt)),
            descriptor_distance=float(m.distance),
        )
        for m in matches
    ]
    if len(corrs) < MIN_TEXTURE_MATCHES:
        return MatchResult([], low_texture=True)
    return MatchResult(corrs)


def partition_false(
    corrs: list[Correspondence], theta: float
) -> tuple[list[Correspondence], list[Correspondence]]:
    """Split into (M_f, M_r): displacement strictly above theta is false."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    m_f = [c for c in corrs if c.displacement > theta]
    m_r = [c for c in corrs if c.displacement <= theta]
    return m_f, m_r


def hand_correspondences(
    m_r: list[Correspondence], m_c: list[Correspondence]
) -> list[Correspondence]:
    """M_h = M_r \\ M_c, preserving the order of M_r."""
    camera = set(m_c)
    return [c for c in m_r if c not in camera]


def _normalization_transform(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    d = np.linalg.norm(pts - centroid, axis=1).mean()
    s = np.sqrt(2.0) / d if d > 1e-12 else 1.0
    return np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])


def _dlt(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Normalized direct linear transform for the homography p -> q."""
    tp = _normalization_transform(p)
    tq = _normalization_transform(q)
    pn = (tp @ np.column_stack([p, np.ones(len(p))]).T).T
    qn = (tq @ np.column_stack([q, np.ones(len(q))]).T).T
    a = np.zeros((2 * len(p), 9))
    x, y = pn[:, 0], pn[:, 1]
    u, v = qn[:, 0], qn[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1.0
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1.0
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v
    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(tq) @ hn @ tp
    if abs(h[2, 2]) < 1e-12:
        raise np.linalg.LinAlgError("degenerate homography")
    return h / h[2, 2]


def _project(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.T
    return hom[:, :2] / hom[:, 2:3]


def symmetric_transfer_error(h: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Mean of forward and backward reprojection distances per point."""
    fwd = np.linalg.norm(_project(h, p) - q, axis=1)
    bwd = np.linalg.norm(_project(np.linalg.inv(h), q) - p, axis=1)
    return 0.5 * (fwd + bwd)


def ransac_homography(
    m_r: list[Correspondence],
    inlier_tol: float = 2.0,
    iterations: int = 500,
    seed: int = 0,
) -> tuple[np.ndarray, list[Correspondence], bool]:
    """Fit the camera homography by seeded 4-point RANSAC.

    Returns (homography, M_c, no_camera_model). With fewer than 4
    candidates (or no non-degenerate sample) the partition degrades:
    identity homography, empty M_c, and the flag set, so every candidate
    counts as hand evidence downstream.
    """
    identity = np.eye(3)
    if len(m_r) < 4:
        return identity, [], True
    p, q = endpoints(m_r)
    n = len(m_r)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(iterations, 4))
    distinct = np.array([len(set(row)) == 4 for row in idx])
    idx = idx[distinct]
    if len(idx) == 0:
        return identity, [], True

    h_all, valid = _batched_four_point(p, q, idx)
    if not valid.any():
        return identity, [], True
    errors = _batched_errors(h_all, p, q, valid)
    inliers = errors < inlier_tol
    counts = np.where(valid, inliers.sum(axis=1), -1)
    best = int(np.argmax(counts))
    if counts[best] < 4:
        return identity, [], True
    best_mask = inliers[best]
    m_c = [c for c, keep in zip(m_r, best_mask) if keep]
    pc, qc = p[best_mask], q[best_mask]
    try:
        h = _dlt(pc, qc)
    except np.linalg.LinAlgError:
        return identity, [], True
    return h, m_c, False


def _batched_four_point(p, q, idx):
    """Homographies for every 4-point sample at once (normalized DLT)."""
    m = len(idx)
    ps = p[idx]  # (m, 4, 2)
    qs = q[idx]
    ps_n, tp = _batched_normalize(ps)
    qs_n, tq = _batched_normalize(qs)
    a = np.zeros((m, 8, 9))
    x, y = ps_n[..., 0], ps_n[..., 1]
    u, v = qs_n[..., 0], qs_n[..., 1]
    a[:, 0::2, 0] = x
    a[:, 0::2, 1] = y
    a[:, 0::2, 2] = 1.0
    a[:, 0::2, 6] = -u * x
    a[:, 0::2, 7] = -u * y
    a[:, 0::2, 8] = -u
    a[:, 1::2, 3] = x
    a[:, 1::2, 4] = y
    a[:, 1::2, 5] = 1.0
    a[:, 1::2, 6] = -v * x
    a[:, 1::2, 7] = -v * y
    a[:, 1::2, 8] = -v
    _, _, vt = np.linalg.svd(a)
    hn = vt[:, -1, :].reshape(m, 3, 3)
    # undo normalization: H = Tq^-1 Hn Tp
    tq_inv = np.linalg.inv(tq)
    h = tq_inv @ hn @ tp
    hz = h[:, 2, 2]
    valid = np.isfinite(h).all(axis=(1, 2)) & (np.abs(hz) > 1e-12)
    hz_safe = np.where(np.abs(hz) > 1e-12, hz, 1.0)
    h = h / hz_safe[:, None, None]
    valid &= np.abs(np.linalg.det(h)) > 1e-9
    return h, valid


def _batched_normalize(pts):
    centroid = pts.mean(axis=1, keepdims=True)
    d = np.linalg.norm(pts - centroid, axis=2).mean(axis=1)
    s = np.where(d > 1e-12, np.sqrt(2.0) / np.maximum(d, 1e-12), 1.0)
    m = len(pts)
    t = np.zeros((m, 3, 3))
    t[:, 0, 0] = s
    t[:, 1, 1] = s
    t[:, 2, 2] = 1.0
    t[:, 0, 2] = -s * centroid[:, 0, 0]
    t[:, 1, 2] = -s * centroid[:, 0, 1]
    normed = (pts - centroid) * s[:, None, None]
    return normed, t


def _batched_errors(h_all, p, q, valid):
    m = len(h_all)
    n = len(p)
    errors = np.full((m, n), np.inf)
    hom_p = np.column_stack([p, np.ones(n)])
    hom_q = np.column_stack([q, np.ones(n)])
    h_v = h_all[valid]
    inv_v = np.linalg.inv(h_v)
    fwd = hom_p @ h_v.transpose(0, 2, 1)
    bwd = hom_q @ inv_v.transpose(0, 2, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fwd_xy = fwd[..., :2] / fwd[..., 2:3]
        bwd_xy = bwd[..., :2] / bwd[..., 2:3]
        err = 0.5 * (
            np.linalg.norm(fwd_xy - q[None], axis=2)
            + np.linalg.norm(bwd_xy - p[None], axis=2)
        )
    err = np.where(np.isfinite(err), err, np.inf)
    errors[valid] = err
    return errors


def partition_matches(
    corrs: list[Correspondence],
    theta: float,
    inlier_tol: float = 2.0,
    iterations: int = 500,
    seed: int = 0,
) -> MotionPartition:
    """Run the full false/camera/hand decomposition for one frame pair."""
    m_f, m_r = partition_false(corrs, theta)
    homography, m_c, degraded = ransac_homography(m_r, inlier_tol, iterations, seed)
    m_h = hand_correspondences(m_r, m_c)
    return MotionPartition(
        all=list(corrs),
        false_set=m_f,
        candidates=m_r,
        camera=m_c,
        hand=m_h,
        homography=homography,
        no_camera_model=degraded,
    )


def compute_video_statistics(
    all_matches: list[MatchResult],
    inlier_tol: float = 2.0,
    iterations: int = 500,
    seed: int = 0,
) -> VideoStatistics:
    """Two-pass adaptive statistics over every frame pair of a video.

    Pass one takes the median displacement nu over all correspondences and
    sets theta = 10 * nu; pass two partitions each pair with that theta and
    averages the per-frame hand-correspondence counts into mu.
    """
    displacements = [
        c.displacement for m in all_matches for c in m.correspondences
    ]
    if not displacements:
        raise InputError("degenerate video: no correspondences in any frame pair")
    nu = float(np.median(displacements))
    theta = FALSE_MATCH_FACTOR * nu
    hand_counts = []
    for m in all_matches:
        if not m.correspondences:
            hand_counts.append(0)
            continue
        part = partition_matches(m.correspondences, theta, inlier_tol, iterations, seed)
        hand_counts.append(len(part.hand))
    return VideoStatistics(nu=nu, theta=theta, mu=float(np.mean(hand_counts)))
