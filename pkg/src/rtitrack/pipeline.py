"""Frame-by-frame composition of imaging, detection and tracking."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .calibration import CalibrationProfile, calibrate
from .config import RunConfig
from .detection import (
    ThresholdState,
    cap_voxels,
    hac_cluster,
    mask_image,
    select_cluster_heads,
    update_threshold,
)
from .geometry import ProjectionOperator, projection_for
from .imaging import Frame, RssChangeEstimator, estimate_image, gaussian_denoise
from .tracking import Tracker


@dataclass(frozen=True)
class TrackState:
    id: int
    status: str
    x: float
    y: float
    radius: float
    intersecting: bool


@dataclass(frozen=True)
class FrameResult:
    frame: int
    timestamp: float
    tracks: tuple[TrackState, ...]
    proc_ms: float
    threshold: float
    n_voxels: int
    n_observations: int
    assoc_cost: float
    deleted: tuple[int, ...] = ()

    def confirmed_positions(self) -> list[tuple[float, float]]:
        return [(t.x, t.y) for t in self.tracks if t.status == "confirmed"]


class Pipeline:
    """Owns all streaming state; feed it frames in index order.

    ``process`` returns a :class:`FrameResult`; the denoised image of the
    last frame is left in ``last_image`` for optional dumping.
    """

    def __init__(self, config: RunConfig, projection: ProjectionOperator, profile: CalibrationProfile):
        self.config = config
        self.grid = config.grid()
        if projection.n_voxels != self.grid.n_voxels:
            raise ValueError("projection does not match the configured grid")
        self.projection = projection
        self.profile = profile
        im, tr = config.imaging, config.tracking
        self.rss_change = RssChangeEstimator(profile.mean_rss, profile.fade, im.hold_frames)
        self.threshold = ThresholdState(
            profile.empty_baseline, beta=tr.beta, alpha_f=tr.alpha_f, empty_floor=tr.empty_threshold
        )
        self.entrance = config.entrance_region()
        self.tracker = Tracker(tr, self.entrance)
        self.last_image = None
        self._last_index = None

    @classmethod
    def build(cls, config: RunConfig, calibration_frames=None, profile=None, cache_dir=None):
        """Convenience constructor: projection from the config, profile from frames if needed."""
        im = config.imaging
        projection = projection_for(
            config.geometry(), config.grid(), excess=im.excess_path, sigma_x=im.sigma_x,
            sigma_n=im.sigma_n, delta_c=im.delta_c, cache_dir=cache_dir,
        )
        if profile is None:
            profile = calibrate(
                calibration_frames, projection, config.grid(), config.channels,
                sigma_g=im.sigma_g, r_g=im.kernel_radius, tx_power=config.tx_power,
                geometry_hash=config.geometry_hash(),
            )
        return cls(config, projection, profile)

    def process(self, frame: Frame) -> FrameResult:
        if self._last_index is not None and frame.index <= self._last_index:
            raise ValueError(f"frame {frame.index} after {self._last_index}: indices must increase")
        self._last_index = frame.index
        im, tr = self.config.imaging, self.config.tracking
        t0 = time.perf_counter()

        y = self.rss_change(frame)
        raw = estimate_image(self.projection, y, frame.index)
        den = gaussian_denoise(raw, self.grid, im.sigma_g, im.kernel_radius)

        tracks = self.tracker.tracks
        feeding = tracks.confirmed() if tr.threshold_tracks == "confirmed" else tracks.tracks
        level = update_threshold(self.threshold, [t.voxel for t in feeding], den)
        masked, voxels = mask_image(den, level)
        voxels = cap_voxels(voxels, masked.intensities, tr.max_cluster_voxels)
        clusters = hac_cluster(voxels, self.grid.centers[voxels], tr.cluster_threshold)
        observations = select_cluster_heads(
            clusters, masked, voxels, self.grid.centers,
            [t.gate() for t in tracks], self.entrance, tr.rho,
        )
        tracks = self.tracker.step(observations, frame.index)

        elapsed = (time.perf_counter() - t0) * 1e3
        self.last_image = den
        return FrameResult(
            frame=frame.index,
            timestamp=frame.timestamp,
            tracks=tuple(
                TrackState(t.id, t.status, t.position[0], t.position[1], t.radius, t.intersecting)
                for t in tracks
            ),
            proc_ms=elapsed,
            threshold=level,
            n_voxels=len(voxels),
            n_observations=len(observations),
            assoc_cost=self.tracker.last_assignment.cost,
            deleted=tuple(t.id for t in tracks.deleted),
        )

    def run(self, frames: Iterable[Frame]) -> Iterator[FrameResult]:
        for frame in frames:
            yield self.process(frame)


def argmax_positions(config: RunConfig, projection, profile, frames) -> np.ndarray:
    """Position of the brightest denoised voxel per frame (no tracking)."""
    grid = config.grid()
    im = config.imaging
    est = RssChangeEstimator(profile.mean_rss, profile.fade, im.hold_frames)
    out = []
    for frame in frames:
        den = gaussian_denoise(estimate_image(projection, est(frame)), grid, im.sigma_g, im.kernel_radius)
        out.append(grid.centers[int(np.argmax(den.intensities))])
    return np.array(out).reshape(-1, 2)
