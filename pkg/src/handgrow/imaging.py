"""Frame ingestion, HSV conversion, and normalized region histograms.

Histograms are 16-bin stacked marginals (8 hue + 4 saturation + 4 value
bins), normalized to sum 1 over the whole vector and epsilon-smoothed so
KL divergences stay finite.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import InputError

H_BINS = 8
S_BINS = 4
V_BINS = 4
HIST_BINS = H_BINS + S_BINS + V_BINS
HIST_EPS = 1e-6

_IMAGE_EXTENSIONS = {".png", ".ppm"}


@dataclass(frozen=True)
class Frame:
    """One RGB video frame with its 0-based position in the sequence."""

    index: int
    pixels: np.ndarray  # (height, width, 3) uint8, RGB

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))


@dataclass(frozen=True)
class HsvFrame:
    """HSV view of a frame: H in [0, 360), S and V in [0, 1], float32."""

    index: int
    pixels: np.ndarray  # (height, width, 3) float32

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def load_frame_sequence(source: str | os.PathLike) -> list[Frame]:
    """Load a directory of PNG/PPM images as frames, ordered by filename.

    Raises InputError if the directory is missing, empty of images, a file
    fails to decode, or the images disagree on dimensions.
    """
    root = Path(source)
    if not root.is_dir():
        raise InputError(f"input directory does not exist: {root}")
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_EXTENSIONS)
    if not paths:
        raise InputError(f"no frames found in {root}")
    frames: list[Frame] = []
    shape = None
    for i, path in enumerate(paths):
        bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
        if bgr is None:
            raise InputError(f"could not read image: {path}")
        if shape is None:
            shape = bgr.shape
        elif bgr.shape != shape:
            raise InputError(
                f"frame dimension mismatch: {path.name} is "
                f"{bgr.shape[1]}x{bgr.shape[0]}, expected {shape[1]}x{shape[0]}"
            )
        frames.append(Frame(index=i, pixels=cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)))
    return frames


def frame_paths(source: str | os.PathLike) -> list[Path]:
    """Filenames that load_frame_sequence would read, in the same order."""
    root = Path(source)
    if not root.is_dir():
        raise InputError(f"input directory does not exist: {root}")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in _IMAGE_EXTENSIONS)


def rgb_to_hsv(frame: Frame) -> HsvFrame:
    """Convert a frame to HSV with H in degrees [0, 360) and S, V in [0, 1]."""
    rgb = frame.pixels.astype(np.float32) / 255.0
    hsv = cv2.cvtColor(rgb, cv2.COLOR_RGB2HSV)
    # cv2 can emit H == 360.0 for reds; fold it back onto 0
    h = hsv[..., 0]
    h[h >= 360.0] -= 360.0
    return HsvFrame(index=frame.index, pixels=hsv)


def hsv_bin_indices(hsv: HsvFrame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel bin index in each channel's marginal histogram.

    Uniform bin widths (45 degrees for H, 0.25 for S and V); a value on an
    edge falls into the higher bin except the channel maximum, which stays
    in the last bin.
    """
    px = hsv.pixels
    hb = np.minimum((px[..., 0] / 45.0).astype(np.int64), H_BINS - 1)
    sb = np.minimum((px[..., 1] * S_BINS).astype(np.int64), S_BINS - 1)
    vb = np.minimum((px[..., 2] * V_BINS).astype(np.int64), V_BINS - 1)
    return hb, sb, vb


def histogram_from_counts(counts: np.ndarray) -> np.ndarray:
    """Normalize stacked bin counts to sum 1, then epsilon-smooth.

    `counts` holds the raw per-bin pixel counts of the three concatenated
    marginals (so it sums to 3x the region's pixel count).
    """
    total = counts.sum()
    if total <= 0:
        raise ValueError("histogram requires a non-empty pixel region")
    p = counts.astype(np.float64) / total
    return (p + HIST_EPS) / (1.0 + HIST_BINS * HIST_EPS)


def region_histogram(hsv: HsvFrame, pixels: np.ndarray) -> np.ndarray:
    """16-bin smoothed histogram of the region given by (row, col) pairs.

    Duplicated coordinates count multiply, which leaves the normalized
    result unchanged; an empty region raises ValueError.
    """
    pixels = np.asarray(pixels)
    if pixels.size == 0:
        raise ValueError("region_histogram needs at least one pixel")
    rows, cols = pixels[:, 0], pixels[:, 1]
    hb, sb, vb = hsv_bin_indices(hsv)
    counts = np.concatenate([
        np.bincount(hb[rows, cols], minlength=H_BINS),
        np.bincount(sb[rows, cols], minlength=S_BINS),
        np.bincount(vb[rows, cols], minlength=V_BINS),
    ])
    return histogram_from_counts(counts)


def symmetric_kl(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p||q) + KL(q||p) with natural logarithms.

    Both inputs must be smoothed (strictly positive) distributions.
    """
    return float(np.dot(p - q, np.log(p) - np.log(q)))
