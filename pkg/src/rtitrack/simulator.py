"""Synthetic multi-channel RSS traces with ground truth.

The forward model reuses the ellipse weights: each target adds a Gaussian
attenuation footprint to the voxel field, links see ``W x``, and every
channel scales that change by its fade level (anti-fade channels attenuate
the most). Gaussian noise, packet drops and 0.1 dB quantization are added
on top. The model is linear on purpose; it exercises the pipeline, not the
radio physics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

import numpy as np
import yaml

from .calibration import fade_levels
from .config import RunConfig, load_config
from .geometry import NetworkGeometry, VoxelGrid, ellipse_weights
from .imaging import Frame

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TargetScript:
    enter: int  # first active frame
    exit: int  # first inactive frame
    waypoints: tuple[tuple[float, float], ...]
    speed: float  # m/s

    def path_length(self) -> float:
        w = np.asarray(self.waypoints, dtype=float)
        return float(np.linalg.norm(np.diff(w, axis=0), axis=1).sum())

    def position(self, frame: int, frame_rate: float) -> tuple[float, float]:
        w = np.asarray(self.waypoints, dtype=float)
        seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
        s = (frame - self.enter) / frame_rate * self.speed
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        if s >= cum[-1]:
            return tuple(w[-1])
        k = int(np.searchsorted(cum, s, side="right") - 1)
        t = (s - cum[k]) / seg[k] if seg[k] > 0 else 0.0
        p = w[k] + t * (w[k + 1] - w[k])
        return float(p[0]), float(p[1])


@dataclass(frozen=True)
class Scenario:
    config: RunConfig
    targets: tuple[TargetScript, ...]
    n_frames: int
    name: str = "custom"
    calibration_frames: int = 150
    noise_db: float = 1.0
    attenuation: float = 5.0  # dB, peak of each target's footprint
    footprint_sigma: float = 0.3  # m
    fade_spread: float = 8.0  # dB
    drop_rate: float = 0.02
    bidirectional: bool = False  # only affects trace files, see traceio
    seed: int = 0

    @property
    def frame_rate(self) -> float:
        return self.config.frame_rate

    def validate(self) -> None:
        xmin, ymin, xmax, ymax = self.config.bounds
        for i, t in enumerate(self.targets):
            if not t.enter < t.exit:
                raise ValueError(f"target {i}: enter frame must precede exit frame")
            if not t.speed > 0:
                raise ValueError(f"target {i}: speed must be positive")
            w = np.asarray(t.waypoints, dtype=float)
            if w.ndim != 2 or len(w) < 1:
                raise ValueError(f"target {i}: needs at least one waypoint")
            if np.any(w[:, 0] < xmin) or np.any(w[:, 0] > xmax) or \
                    np.any(w[:, 1] < ymin) or np.any(w[:, 1] > ymax):
                raise ValueError(f"target {i}: waypoint outside the monitored area")
        if self.n_frames <= 0:
            raise ValueError("scenario needs at least one frame")

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


@dataclass(frozen=True, eq=False)
class ChannelModel:
    gain: np.ndarray  # (M, K) path gain [dB]
    fade: np.ndarray  # (M, K)
    mean_rss: np.ndarray  # (M, K) dBm
    sign: np.ndarray  # (M, K) +-1


def synthesize_fades(geometry: NetworkGeometry, channels, seed, *, spread: float = 8.0,
                     tx_power: dict | None = None) -> ChannelModel:
    """Random per-(link, channel) path gains with fade levels spread over ``[0, spread]`` dB."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K = len(channels)
    M = geometry.n_links
    if K < 2:
        log.warning("a single channel gives every link a zero fade level")
    d = np.maximum(geometry.link_lengths(), 0.1)
    base = -40.0 - 20.0 * np.log10(d)
    offsets = rng.uniform(0.0, spread, size=(M, K))
    gain = base[:, None] + offsets - spread
    fade = fade_levels(gain)
    power = np.array([tx_power[c] if tx_power else 4.5 for c in channels], dtype=float)
    # only the deepest-fade channel gets a random direction
    sign = -np.ones((M, K))
    deepest = fade == 0
    sign[deepest] = rng.choice([-1.0, 1.0], size=int(deepest.sum()))
    return ChannelModel(gain, fade, power[None, :] + gain, sign)


def target_field(positions, grid: VoxelGrid, attenuation: float, sigma: float) -> np.ndarray:
    """Sum of Gaussian footprints (peak ``attenuation``) over the voxel centers."""
    x = np.zeros(grid.n_voxels)
    for p in positions:
        d2 = ((grid.centers - np.asarray(p)) ** 2).sum(axis=1)
        x += attenuation * np.exp(-d2 / (2 * sigma**2))
    return x


@dataclass
class Simulation:
    """Lazily generated trace of a scenario. Iterating twice gives the same frames."""

    scenario: Scenario
    geometry: NetworkGeometry = field(init=False)
    grid: VoxelGrid = field(init=False)
    channels: ChannelModel = field(init=False)

    def __post_init__(self):
        sc = self.scenario
        sc.validate()
        cfg = sc.config
        self.geometry = cfg.geometry()
        self.grid = cfg.grid()
        self.W = ellipse_weights(self.geometry, self.grid, cfg.imaging.excess_path)
        ss = np.random.SeedSequence(sc.seed)
        self._fade_seq, self._calib_seq, self._trace_seq = ss.spawn(3)
        self.channels = synthesize_fades(
            self.geometry, cfg.channels, np.random.default_rng(self._fade_seq),
            spread=sc.fade_spread, tx_power=cfg.tx_power,
        )
        fmax = self.channels.fade.max(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(fmax > 0, self.channels.fade / fmax, 0.0)
        self._response = self.channels.sign * rel  # per-link channel response to y*

    def clean_change(self, positions) -> np.ndarray:
        """Noise-free link RSS change ``W x`` for targets at ``positions``."""
        sc = self.scenario
        x = target_field(positions, self.grid, sc.attenuation, sc.footprint_sigma)
        return self.W @ x

    def _frame(self, k: int, positions, rng, quiet: bool = False) -> Frame:
        sc = self.scenario
        ystar = self.clean_change(positions) if positions else np.zeros(self.geometry.n_links)
        delta = ystar[:, None] * self._response
        if sc.noise_db > 0 and not quiet:
            delta = delta + rng.normal(0.0, sc.noise_db, size=delta.shape)
        rss = np.round(self.channels.mean_rss + delta, 1)
        if sc.drop_rate > 0 and not quiet:
            rss[rng.random(rss.shape) < sc.drop_rate] = np.nan
        return Frame(k, k / sc.frame_rate, rss)

    def static_frame(self, positions, index: int = 0) -> Frame:
        """Noise- and drop-free frame with targets held at ``positions``."""
        return self._frame(index, list(positions), None, quiet=True)

    def calibration_frames(self) -> Iterator[Frame]:
        rng = np.random.default_rng(self._calib_seq)
        for k in range(self.scenario.calibration_frames):
            yield self._frame(k, [], rng)

    def truth(self) -> list[dict[int, tuple[float, float]]]:
        sc = self.scenario
        out = []
        for k in range(sc.n_frames):
            out.append({
                i: t.position(k, sc.frame_rate)
                for i, t in enumerate(sc.targets) if t.enter <= k < t.exit
            })
        return out

    def frames(self) -> Iterator[Frame]:
        rng = np.random.default_rng(self._trace_seq)
        for k, targets in enumerate(self.truth()):
            yield self._frame(k, list(targets.values()), rng)


def simulate(scenario: Scenario) -> tuple[list[Frame], list[dict]]:
    sim = Simulation(scenario)
    return list(sim.frames()), sim.truth()


def count_crossings(truth, radius: float = 0.5) -> int:
    """Number of times any two targets come within ``radius`` of each other."""
    close_before: set = set()
    events = 0
    for targets in truth:
        ids = sorted(targets)
        now = set()
        for a_i, a in enumerate(ids):
            for b in ids[a_i + 1:]:
                if math.dist(targets[a], targets[b]) < radius:
                    now.add((a, b))
        events += len(now - close_before)
        close_before = now
    return events


# ---------------------------------------------------------------------------
# preset layouts

def perimeter_sensors(bounds, n: int) -> list[tuple[float, float]]:
    """``n`` sensors evenly spaced along the rectangle boundary."""
    xmin, ymin, xmax, ymax = bounds
    w, h = xmax - xmin, ymax - ymin
    per = 2 * (w + h)
    out = []
    for i in range(n):
        s = (i + 0.5) * per / n
        if s < w:
            out.append((xmin + s, ymin))
        elif s < w + h:
            out.append((xmax, ymin + s - w))
        elif s < 2 * w + h:
            out.append((xmax - (s - w - h), ymax))
        else:
            out.append((xmin, ymax - (s - 2 * w - h)))
    return [(round(x, 4), round(y, 4)) for x, y in out]


def _tx_power(channels) -> dict[int, float]:
    # actual output drifts below the 4.5 dBm nominal across the band
    return {c: round(4.5 - 0.1 * (c - 11), 2) for c in channels}


def _loop_path(entry, corners, start, laps, exit_point, reverse=False):
    """entry -> corners[start] -> ``laps`` loops -> back to the start corner -> exit."""
    n = len(corners)
    step = -1 if reverse else 1
    pts = [entry]
    for k in range(int(laps * n) + 1):
        pts.append(corners[(start + step * k) % n])
    pts.append(exit_point)
    return tuple(pts)


@dataclass(frozen=True)
class _Layout:
    bounds: tuple
    sensors: tuple
    channels: tuple
    corners: tuple  # walking loop, counter-clockwise
    doors: tuple  # (door point, nearest loop corner index)
    entrance: tuple = ()


def _open_layout():
    b = (0.0, 0.0, 8.4, 8.33)  # ~70 m^2
    corners = ((2.0, 2.0), (6.4, 2.0), (6.4, 6.33), (2.0, 6.33))
    doors = (((0.3, 2.0), 0), ((8.1, 6.33), 2))
    return _Layout(b, tuple(perimeter_sensors(b, 30)), (11, 15, 18, 22, 26), corners, doors)


def _apartment_layout():
    b = (0.0, 0.0, 7.0, 8.25)
    corners = ((1.8, 1.8), (5.2, 1.8), (5.2, 6.45), (1.8, 6.45))
    doors = (((0.6, 0.6), 0), ((6.2, 7.75), 2))
    entrance = (
        ((0.0, 0.0), (1.5, 0.0), (1.5, 1.3), (0.0, 1.3)),  # main door
        ((5.2, 7.0), (7.0, 7.0), (7.0, 8.25), (5.2, 8.25)),  # balcony door
    )
    return _Layout(b, tuple(perimeter_sensors(b, 33)), (15, 20, 25, 26), corners, doors, entrance)


def _office_layout():
    b = (0.0, 0.0, 8.2, 8.2)  # ~67 m^2
    inner = ((2.9, 2.9), (5.3, 2.9), (4.1, 4.1), (2.9, 5.3), (5.3, 5.3))
    # corridor between the walls and the central desks, inside the 1 m perimeter band
    corners = ((0.9, 0.9), (7.3, 0.9), (7.3, 7.3), (0.9, 7.3))
    doors = (((0.2, 0.9), 0), ((8.0, 7.3), 2))
    sensors = tuple(perimeter_sensors(b, 27)) + inner
    return _Layout(b, sensors, (11, 15, 18, 22, 26), corners, doors)


_LAYOUTS = {"open": _open_layout, "apartment": _apartment_layout, "office": _office_layout}


def _build(name, layout: _Layout, n_targets, cross, laps, speed=1.2, lead=20, tail=30,
           stagger=None) -> Scenario:
    cfg = RunConfig(
        sensors=layout.sensors, bounds=layout.bounds, channels=layout.channels,
        entrance=layout.entrance, tx_power=_tx_power(layout.channels),
    )
    fps = cfg.frame_rate
    c = layout.corners
    loop_len = sum(math.dist(c[i], c[(i + 1) % len(c)]) for i in range(len(c)))
    if stagger is None:
        # spread same-direction walkers evenly around the loop
        group = math.ceil(n_targets / 2) if cross else n_targets
        stagger = loop_len / max(group, 1) / speed
    targets = []
    for i in range(n_targets):
        reverse = cross and i % 2 == 1
        door, corner = layout.doors[1] if reverse else layout.doors[0]
        rank = i // 2 if cross else i
        enter = lead + int(round((rank * stagger + (0.5 * stagger if reverse else 0.0)) * fps))
        wp = _loop_path(door, c, corner, laps, door, reverse=reverse)
        length = sum(math.dist(wp[k], wp[k + 1]) for k in range(len(wp) - 1))
        targets.append(TargetScript(enter, enter + int(math.ceil(length / speed * fps)), wp, speed))
    n_frames = max(t.exit for t in targets) + tail
    return Scenario(cfg, tuple(targets), n_frames, name=name)


PRESETS = {
    "open-1": lambda: _build("open-1", _open_layout(), 1, False, 2),
    "open-2-follow": lambda: _build("open-2-follow", _open_layout(), 2, False, 3),
    "open-2-cross": lambda: _build("open-2-cross", _open_layout(), 2, True, 4),
    "apartment-2-cross": lambda: _build("apartment-2-cross", _apartment_layout(), 2, True, 2),
    "office-1": lambda: _build("office-1", _office_layout(), 1, False, 1),
    "office-2": lambda: _build("office-2", _office_layout(), 2, False, 3),
    "office-3": lambda: _build("office-3", _office_layout(), 3, False, 3),
    "office-4": lambda: _build("office-4", _office_layout(), 4, False, 3),
    "office-2-cross": lambda: _build("office-2-cross", _office_layout(), 2, True, 3),
    "office-3-cross": lambda: _build("office-3-cross", _office_layout(), 3, True, 3),
    "office-4-cross": lambda: _build("office-4-cross", _office_layout(), 4, True, 3),
}


def scripted_paths(preset: str, seed: int = 0) -> Scenario:
    try:
        scenario = PRESETS[preset]()
    except KeyError:
        raise ValueError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}") from None
    scenario = scenario.with_seed(seed)
    scenario.validate()
    return scenario


_SCENARIO_KEYS = {
    "config", "preset", "targets", "n_frames", "name", "calibration_frames", "noise_db",
    "attenuation", "footprint_sigma", "fade_spread", "drop_rate", "bidirectional", "seed",
}


def scenario_from_dict(d: dict, base_dir=".") -> Scenario:
    """Build a scenario from a mapping (a parsed scenario file).

    Either ``preset`` names a starting scenario or ``config`` gives the
    deployment (inline mapping or a config file path relative to
    ``base_dir``). ``targets`` entries take ``waypoints``, ``speed``,
    ``enter`` and optionally ``exit``; a missing exit is the frame the walk
    ends. A missing ``n_frames`` runs 30 frames past the last exit.
    """
    unknown = set(d) - _SCENARIO_KEYS
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    base = scripted_paths(d["preset"]) if "preset" in d else None
    if "config" in d:
        c = d["config"]
        cfg = load_config(Path(base_dir) / c) if isinstance(c, str) else RunConfig.from_dict(c)
    elif base is not None:
        cfg = base.config
    else:
        raise ValueError("scenario needs a 'preset' or a 'config'")
    if "targets" in d:
        targets = []
        for i, t in enumerate(d["targets"]):
            wp = tuple(tuple(map(float, p)) for p in t["waypoints"])
            speed = float(t.get("speed", 1.0))
            enter = int(t.get("enter", 0))
            if "exit" in t:
                stop = int(t["exit"])
            else:
                length = TargetScript(enter, enter + 1, wp, speed).path_length()
                stop = enter + max(1, int(math.ceil(length / speed * cfg.frame_rate)))
            targets.append(TargetScript(enter, stop, wp, speed))
        targets = tuple(targets)
    elif base is not None:
        targets = base.targets
    else:
        raise ValueError("scenario needs 'targets'")
    n_frames = int(d.get("n_frames", max((t.exit for t in targets), default=0) + 30))
    if base is not None and "targets" not in d and "n_frames" not in d:
        n_frames = base.n_frames
    keep = {k: d[k] for k in _SCENARIO_KEYS - {"config", "preset", "targets", "n_frames"} if k in d}
    proto = base if base is not None else Scenario(cfg, targets, n_frames)
    scenario = replace(proto, config=cfg, targets=targets, n_frames=n_frames, **keep)
    scenario.validate()
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        d = yaml.safe_load(fh) or {}
    if not isinstance(d, dict):
        raise ValueError(f"{path}: a scenario file must be a mapping")
    return scenario_from_dict(d, path.parent)
