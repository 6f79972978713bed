"""Run configuration: deployment geometry plus imaging and tracking parameters.

Defaults for the reconstruction and tracking parameters are the published
values; the remaining knobs (confirmation/deletion counts, Kalman noise)
are not published and carry our own defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import EntranceRegion, NetworkGeometry, VoxelGrid, build_grid, content_hash


@dataclass(frozen=True)
class ImagingParams:
    pixel_width: float = 0.1524  # p [m]
    excess_path: float = 0.02  # lambda [m]
    sigma_x: float = 0.2236  # voxel std [dB]
    sigma_n: float = 1.0  # noise std / regularization [dB]
    delta_c: float = 3.0  # correlation distance [m]
    sigma_g: float = 1.0  # Gaussian kernel std [m]
    kernel_radius: float = 0.75  # r_G [m]
    hold_frames: int = 10  # max age of a held RSS value


@dataclass(frozen=True)
class TrackingParams:
    beta: float = 0.80
    empty_threshold: float = 0.01  # T_e, floor of the empty-area threshold
    cluster_threshold: float = 1.25  # T_c [m]
    intersect_threshold: float = 2.0  # T_i [m]
    gate_radius: float = 2.0  # r [m]
    alpha_f: float = 0.9
    rho: float = 0.8
    window: int = 10  # m
    n_app: int = 3
    n_del: int = 10
    sigma_q: float = 0.15  # random-walk std per frame [m]
    sigma_m: float = 0.3  # measurement std [m]
    assoc: str = "gnn"
    max_cluster_voxels: int = 600
    threshold_tracks: str = "confirmed"  # which tracks feed the minimum intensity: confirmed | all

    def __post_init__(self):
        if self.assoc not in ("gnn", "snn"):
            raise ValueError(f"unknown association method {self.assoc!r}")
        if self.threshold_tracks not in ("confirmed", "all"):
            raise ValueError(f"threshold_tracks must be 'confirmed' or 'all', got {self.threshold_tracks!r}")
        if not 0 < self.n_app <= self.window:
            raise ValueError("need 0 < n_app <= window")


@dataclass(frozen=True)
class MetricsParams:
    ospa_g: tuple[float, ...] = (1.0, 2.5, 5.0)
    q: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    sensors: tuple[tuple[float, float], ...]
    bounds: tuple[float, float, float, float]
    channels: tuple[int, ...]
    entrance: tuple = ()  # polygons; empty means a perimeter band
    entrance_band: float = 1.0
    tx_power: dict | None = None  # optional per-channel transmit power [dBm]
    frame_rate: float = 10.0
    imaging: ImagingParams = field(default_factory=ImagingParams)
    tracking: TrackingParams = field(default_factory=TrackingParams)
    metrics: MetricsParams = field(default_factory=MetricsParams)

    def geometry(self) -> NetworkGeometry:
        return NetworkGeometry.from_sensors(np.array(self.sensors, dtype=float))

    def grid(self) -> VoxelGrid:
        return build_grid(self.bounds, self.imaging.pixel_width)

    def entrance_region(self) -> EntranceRegion:
        if self.entrance:
            return EntranceRegion(self.bounds, band=None, polygons=tuple(self.entrance))
        return EntranceRegion(self.bounds, band=self.entrance_band)

    def geometry_hash(self) -> str:
        """Identity of the deployment a calibration profile belongs to."""
        g = self.geometry()
        return content_hash(
            g.sensors, g.links, tuple(self.bounds), self.imaging.pixel_width,
            tuple(self.channels),
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_tracking(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, tracking=dataclasses.replace(self.tracking, **changes))

    def to_dict(self) -> dict:
        d = {
            "sensors": [list(map(float, s)) for s in self.sensors],
            "bounds": list(map(float, self.bounds)),
            "channels": list(map(int, self.channels)),
            "frame_rate": self.frame_rate,
        }
        if self.entrance:
            d["entrance"] = [[list(map(float, p)) for p in poly] for poly in self.entrance]
        else:
            d["entrance_band"] = self.entrance_band
        if self.tx_power:
            d["tx_power"] = {int(k): float(v) for k, v in self.tx_power.items()}
        d["imaging"] = dataclasses.asdict(self.imaging)
        d["tracking"] = dataclasses.asdict(self.tracking)
        d["metrics"] = {"ospa_g": list(self.metrics.ospa_g), "q": self.metrics.q}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("sensors", "bounds", "channels"):
            if key not in d:
                raise ValueError(f"config is missing {key!r}")
        metrics = dict(d.get("metrics") or {})
        if "ospa_g" in metrics:
            metrics["ospa_g"] = tuple(float(g) for g in metrics["ospa_g"])
        return cls(
            sensors=tuple(tuple(map(float, s)) for s in d["sensors"]),
            bounds=tuple(map(float, d["bounds"])),
            channels=tuple(int(c) for c in d["channels"]),
            entrance=tuple(
                tuple(tuple(map(float, p)) for p in poly) for poly in d.get("entrance", ())
            ),
            entrance_band=float(d.get("entrance_band", 1.0)),
            tx_power={int(k): float(v) for k, v in d["tx_power"].items()}
            if d.get("tx_power") else None,
            frame_rate=float(d.get("frame_rate", 10.0)),
            imaging=ImagingParams(**(d.get("imaging") or {})),
            tracking=TrackingParams(**(d.get("tracking") or {})),
            metrics=MetricsParams(**metrics),
        )


def load_sensors(path) -> tuple[tuple[float, float], ...]:
    """Sensor coordinates from a YAML list of pairs or an ``x,y`` per line text file."""
    text = Path(path).read_text()
    if Path(path).suffix in (".yaml", ".yml"):
        rows = yaml.safe_load(text)
    else:
        rows = [line.split(",") for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
    return tuple((float(r[0]), float(r[1])) for r in rows)


def load_config(path) -> RunConfig:
    """Read a YAML run config; ``geometry: <file>`` may stand in for inline ``sensors``."""
    with open(path) as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ValueError(f"{path}: a config file must be a mapping")
    if "geometry" in d:
        if "sensors" in d:
            raise ValueError(f"{path}: give either 'geometry' or 'sensors', not both")
        d = dict(d)
        d["sensors"] = load_sensors(Path(path).parent / d.pop("geometry"))
    return RunConfig.from_dict(d)


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
