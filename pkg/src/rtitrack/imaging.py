"""Per-frame imaging: fade-weighted RSS change, linear reconstruction, Gaussian denoising."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .geometry import ProjectionOperator, VoxelGrid


@dataclass(frozen=True, eq=False)
class Frame:
    """One time step: RSS in dBm per (link, channel); NaN marks a missing packet."""

    index: int
    timestamp: float
    rss: np.ndarray  # (M, K)


@dataclass(frozen=True, eq=False)
class RtiImage:
    intensities: np.ndarray  # (N,) row-major voxels
    frame: int = -1
    stage: str = "raw"  # raw | denoised | masked


def weighted_rss_change(rss: np.ndarray, mean_rss: np.ndarray, fade: np.ndarray):
    """Fade-weighted average of ``|r - r_mean|`` per link.

    NaN entries of ``rss`` are left out of both sums. Links whose available
    channels all have zero fade level fall back to the plain mean of
    ``|delta r|``; links with nothing available get 0.

    Returns ``(y, available)`` where ``available`` flags links that had at
    least one usable channel.
    """
    delta = np.abs(np.asarray(rss, dtype=float) - mean_rss)
    ok = ~np.isnan(delta)
    delta = np.where(ok, delta, 0.0)
    w = np.where(ok, fade, 0.0)
    wsum = w.sum(axis=1)
    num = (w * delta).sum(axis=1)
    n_ok = ok.sum(axis=1)
    y = np.zeros(len(delta))
    weighted = wsum > 0
    y[weighted] = num[weighted] / wsum[weighted]
    plain = ~weighted & (n_ok > 0)
    y[plain] = delta[plain].sum(axis=1) / n_ok[plain]
    return y, n_ok > 0


class RssChangeEstimator:
    """Stateful wrapper that fills dropped packets with the last value seen.

    A held value older than ``hold_frames`` frames is dropped from the
    weighted average. ``unavailable`` counts link-frames that ended up
    with no usable channel at all.
    """

    def __init__(self, mean_rss: np.ndarray, fade: np.ndarray, hold_frames: int = 10):
        self.mean_rss = np.asarray(mean_rss, dtype=float)
        self.fade = np.asarray(fade, dtype=float)
        self.hold_frames = hold_frames
        self._last = np.full(self.mean_rss.shape, np.nan)
        self._age = np.full(self.mean_rss.shape, np.iinfo(np.int64).max // 2, dtype=np.int64)
        self.unavailable = 0

    def __call__(self, frame: Frame) -> np.ndarray:
        rss = np.asarray(frame.rss, dtype=float)
        if rss.shape != self.mean_rss.shape:
            raise ValueError(f"frame has shape {rss.shape}, profile {self.mean_rss.shape}")
        seen = ~np.isnan(rss)
        self._last[seen] = rss[seen]
        self._age[seen] = 0
        self._age[~seen] += 1
        filled = np.where(self._age <= self.hold_frames, self._last, np.nan)
        y, available = weighted_rss_change(filled, self.mean_rss, self.fade)
        self.unavailable += int((~available).sum())
        return y


def estimate_image(projection: ProjectionOperator, y: np.ndarray, frame: int = -1) -> RtiImage:
    return RtiImage(projection.apply(y), frame, "raw")


def kernel_radius_voxels(r_g: float, p: float) -> int:
    return int(math.floor(r_g / p + 0.5))


@lru_cache(maxsize=16)
def gaussian_kernel(sigma_g: float, r_g: float, p: float) -> np.ndarray:
    """Truncated isotropic Gaussian on the voxel lattice, scaled to unit sum."""
    if not (sigma_g > 0 and r_g > 0 and p > 0):
        raise ValueError("sigma_g, r_g and p must be positive")
    k = kernel_radius_voxels(r_g, p)
    off = np.arange(-k, k + 1) * p
    xx, yy = np.meshgrid(off, off)
    g = np.exp(-(xx**2 + yy**2) / (2 * sigma_g**2)) / (2 * np.pi * sigma_g**2)
    g /= g.sum()
    g.setflags(write=False)
    return g


def gaussian_denoise(image: RtiImage, grid: VoxelGrid, sigma_g: float, r_g: float) -> RtiImage:
    """Convolve with the truncated Gaussian kernel; zero padding at the borders."""
    kernel = gaussian_kernel(float(sigma_g), float(r_g), float(grid.pixel_width))
    img = grid.to_image(image.intensities)
    out = ndimage.convolve(img, kernel, mode="constant", cval=0.0)
    return RtiImage(out.ravel(), image.frame, "denoised")
