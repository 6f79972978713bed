"""Empty-area calibration: reference RSS, fade levels and the image baseline."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import ProjectionOperator, VoxelGrid
from .imaging import Frame, estimate_image, gaussian_denoise, weighted_rss_change

log = logging.getLogger(__name__)

PROFILE_FORMAT = "rti-profile"
PROFILE_VERSION = 1
MIN_CALIBRATION_FRAMES = 30
RECOMMENDED_CALIBRATION_FRAMES = 100


class CalibrationIncomplete(ValueError):
    def __init__(self, missing: list[tuple[int, int]]):
        self.missing = missing
        shown = ", ".join(f"(link {l}, channel {c})" for l, c in missing[:20])
        more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
        super().__init__(f"no calibration samples for {shown}{more}")


class ProfileMismatch(ValueError):
    pass


def channel_frequency(c: int) -> int:
    """IEEE 802.15.4 carrier frequency in MHz for channels 11-26."""
    if int(c) != c or not 11 <= c <= 26:
        raise ValueError(f"channel must be an integer in [11, 26], got {c}")
    return 2405 + 5 * (int(c) - 11)


def fade_levels(gain: np.ndarray) -> np.ndarray:
    """Per-link offset of each channel's path gain above the link's weakest channel."""
    gain = np.asarray(gain, dtype=float)
    return gain - gain.min(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class CalibrationProfile:
    mean_rss: np.ndarray  # (M, K) dBm
    fade: np.ndarray  # (M, K) dB
    empty_baseline: float
    channels: tuple[int, ...]
    geometry_hash: str = ""
    n_frames: int = 0

    def to_json(self) -> str:
        doc = {
            "format": PROFILE_FORMAT,
            "version": PROFILE_VERSION,
            "geometry_hash": self.geometry_hash,
            "channels": list(self.channels),
            "n_frames": self.n_frames,
            "empty_baseline": float(self.empty_baseline),
            "mean_rss": self.mean_rss.tolist(),
            "fade": self.fade.tolist(),
        }
        return json.dumps(doc, separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path, expected_hash: str | None = None) -> "CalibrationProfile":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != PROFILE_FORMAT:
            raise ValueError(f"{path} is not a calibration profile")
        if doc.get("version") != PROFILE_VERSION:
            raise ValueError(f"unsupported profile version {doc.get('version')}")
        if expected_hash is not None and doc["geometry_hash"] != expected_hash:
            raise ProfileMismatch(
                f"profile was built for geometry {doc['geometry_hash'][:12]}, "
                f"config describes {expected_hash[:12]}"
            )
        return cls(
            mean_rss=np.array(doc["mean_rss"], dtype=float),
            fade=np.array(doc["fade"], dtype=float),
            empty_baseline=float(doc["empty_baseline"]),
            channels=tuple(doc["channels"]),
            geometry_hash=doc["geometry_hash"],
            n_frames=int(doc["n_frames"]),
        )


def mean_rss(frames: Iterable[Frame], channels: Sequence[int]) -> tuple[np.ndarray, int]:
    """Per (link, channel) average over frames, ignoring missing samples."""
    total = count = None
    n = 0
    for frame in frames:
        rss = np.asarray(frame.rss, dtype=float)
        if total is None:
            total = np.zeros(rss.shape)
            count = np.zeros(rss.shape, dtype=np.int64)
        ok = ~np.isnan(rss)
        total[ok] += rss[ok]
        count[ok] += 1
        n += 1
    if total is None:
        raise ValueError("calibration needs at least one frame")
    missing = [(int(l), int(channels[c])) for l, c in zip(*np.nonzero(count == 0))]
    if missing:
        raise CalibrationIncomplete(missing)
    return total / count, n


def calibrate(
    frames: Sequence[Frame],
    projection: ProjectionOperator,
    grid: VoxelGrid,
    channels: Sequence[int],
    *,
    sigma_g: float,
    r_g: float,
    tx_power: dict | None = None,
    geometry_hash: str = "",
) -> CalibrationProfile:
    """Build a profile from an empty-area trace.

    ``tx_power`` optionally maps channel to actual transmit power (dBm);
    without it the fade levels come straight from the mean RSS, which is
    equivalent when power depends on channel only.
    """
    frames = list(frames)
    if len(frames) < MIN_CALIBRATION_FRAMES:
        raise ValueError(
            f"calibration needs at least {MIN_CALIBRATION_FRAMES} frames, got {len(frames)}"
        )
    if len(frames) < RECOMMENDED_CALIBRATION_FRAMES:
        log.warning("only %d calibration frames; %d or more recommended",
                    len(frames), RECOMMENDED_CALIBRATION_FRAMES)
    rbar, n = mean_rss(frames, channels)
    gain = rbar
    if tx_power:
        gain = rbar - np.array([tx_power[c] for c in channels], dtype=float)[None, :]
    fade = fade_levels(gain)

    # missing samples are skipped rather than held so the baseline does not
    # depend on frame order
    maxima = np.empty(len(frames))
    for i, frame in enumerate(frames):
        y, _ = weighted_rss_change(frame.rss, rbar, fade)
        img = gaussian_denoise(estimate_image(projection, y), grid, sigma_g, r_g)
        maxima[i] = img.intensities.max()
    baseline = float(np.mean(np.sort(maxima)))
    return CalibrationProfile(rbar, fade, max(baseline, 0.0), tuple(channels), geometry_hash, n)
