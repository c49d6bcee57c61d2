"""Fixation density maps from raw gaze events.

Per participant, fixations become a presence matrix at the video raster,
blurred with a Gaussian whose width covers ~1 degree of visual angle;
participant maps are averaged, resized to the shared 224x224 raster and
min-max normalized.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    AllBelowThreshold,
    NoParticipants,
    NotNormalized,
    OutOfBoundsFixation,
)

MAP_SIZE = 224
FWHM_PER_SIGMA = 2.355


@dataclass(frozen=True)
class ScreenGeometry:
    """Viewing geometry of the eye-tracking display."""

    distance_in: float
    screen_h_in: float
    screen_res_y: int
    visual_angle_deg: float = 1.0

    def __post_init__(self):
        for name in ("distance_in", "screen_h_in", "screen_res_y", "visual_angle_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SaliencyMap:
    video_id: str
    frame_index: int
    grid: np.ndarray
    normalized: bool = False


@dataclass
class BinaryFixationMap:
    video_id: str
    frame_index: int
    grid: np.ndarray = field(repr=False)


def pixels_per_degree(geom):
    """Pixels spanned by one degree of visual angle on the display.

    PPD = 2 * d * tan(theta/2) * (y / h): the on-screen extent of the
    angle in inches, converted to pixels by the vertical pixel density.
    """
    theta = math.radians(geom.visual_angle_deg)
    extent_in = 2.0 * geom.distance_in * math.tan(theta / 2.0)
    return extent_in * geom.screen_res_y / geom.screen_h_in


def blur_sigma(geom):
    """Gaussian sigma so that one visual degree is the FWHM of the blur."""
    return pixels_per_degree(geom) / FWHM_PER_SIGMA


def build_density_map(events_by_participant, video_dims, geom,
                      duration_weighted=False, out_size=MAP_SIZE):
    """Average participant fixation matrices into one normalized density map.

    events_by_participant maps participant_id -> iterable of FixationEvent
    for a single (video, frame). video_dims is (width, height) in pixels.
    Each participant contributes a presence matrix (1 at fixated pixels,
    or summed duration_ms when duration_weighted) blurred with
    sigma = blur_sigma(geom).
    """
    if not events_by_participant:
        raise NoParticipants("no participants for this frame")
    width, height = video_dims
    sigma = blur_sigma(geom)

    video_id = None
    frame_index = None
    acc = np.zeros((height, width), dtype=np.float64)
    for pid in sorted(events_by_participant):
        mat = np.zeros((height, width), dtype=np.float64)
        for ev in events_by_participant[pid]:
            if ev.x_px >= width or ev.y_px >= height:
                raise OutOfBoundsFixation(
                    f"fixation ({ev.x_px}, {ev.y_px}) outside {width}x{height}"
                )
            if duration_weighted:
                mat[ev.y_px, ev.x_px] += ev.duration_ms
            else:
                mat[ev.y_px, ev.x_px] = 1.0
            video_id = ev.video_id
            frame_index = ev.frame_index
        acc += kernels.gaussian_blur(mat, sigma)
    acc /= len(events_by_participant)

    grid = kernels.bilinear_resize(acc, out_size, out_size)
    return SaliencyMap(video_id or "", frame_index or 0, minmax_normalize(grid), True)


def minmax_normalize(grid):
    """Scale to [0, 1]; a constant map becomes all zeros."""
    grid = np.asarray(grid, dtype=np.float64)
    lo = grid.min()
    hi = grid.max()
    if hi == lo:
        return np.zeros_like(grid)
    return (grid - lo) / (hi - lo)


def binarize(smap, threshold=0.5):
    """Threshold a normalized map; raises when no pixel clears it."""
    if not smap.normalized:
        raise NotNormalized("binarize requires a min-max normalized map")
    mask = smap.grid >= threshold
    if not mask.any():
        raise AllBelowThreshold(
            f"no pixel >= {threshold} in {smap.video_id} frame {smap.frame_index}"
        )
    return BinaryFixationMap(smap.video_id, smap.frame_index, mask)
