"""Track lifecycle, gated association and per-track random-walk Kalman filters."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .assignment import Assignment, assign
from .config import TrackingParams
from .detection import Observation, TrackGate

CANDIDATE = "candidate"
CONFIRMED = "confirmed"


def kf_predict(mean: np.ndarray, cov: np.ndarray, q_var: float):
    """Brownian motion: the mean stays, uncertainty grows by ``q_var * I``."""
    return np.array(mean, dtype=float), np.asarray(cov, dtype=float) + q_var * np.eye(2)


def kf_update(mean: np.ndarray, cov: np.ndarray, z, r_var: float):
    """Position measurement with identity model and noise ``r_var * I`` (Joseph form)."""
    mean = np.asarray(mean, dtype=float)
    P = np.asarray(cov, dtype=float)
    R = r_var * np.eye(2)
    S = P + R
    K = np.linalg.solve(S.T, P.T).T  # P S^-1
    innov = np.asarray(z, dtype=float) - mean
    I_K = np.eye(2) - K
    P_new = I_K @ P @ I_K.T + K @ R @ K.T
    return mean + K @ innov, (P_new + P_new.T) / 2


@dataclass
class Track:
    id: int
    mean: np.ndarray
    cov: np.ndarray
    radius: float
    intensity: float  # last assigned normalized intensity
    voxel: int  # voxel of the last assigned cluster head
    born: int
    window: int = 10
    status: str = CANDIDATE
    history: deque = field(default=None)
    miss_streak: int = 0
    intersecting: bool = False
    last_assigned: int = -1
    confirmed_at: int = -1

    def __post_init__(self):
        if self.history is None:
            self.history = deque(maxlen=self.window)

    @property
    def position(self) -> tuple[float, float]:
        return float(self.mean[0]), float(self.mean[1])

    @property
    def confirmed(self) -> bool:
        return self.status == CONFIRMED

    def gate(self) -> TrackGate:
        return TrackGate(self.position, self.radius, self.intensity)


@dataclass
class TrackSet:
    tracks: list[Track] = field(default_factory=list)
    next_id: int = 0
    deleted: list[Track] = field(default_factory=list)  # filled per step, for logging

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    def confirmed(self) -> list[Track]:
        return [t for t in self.tracks if t.confirmed]


def build_association(observations: Sequence[Observation], tracks: Sequence[Track]) -> np.ndarray:
    """Distance cost matrix, infinite outside each track's gate."""
    omega = np.full((len(observations), len(tracks)), np.inf)
    if not observations or not tracks:
        return omega
    obs = np.array([o.position for o in observations])
    pos = np.array([t.mean for t in tracks])
    radius = np.array([t.radius for t in tracks])
    dist = cdist(obs, pos)
    inside = dist < radius[None, :]
    omega[inside] = dist[inside]
    return omega


def step_lifecycle(
    trackset: TrackSet,
    assignment: Assignment,
    observations: Sequence[Observation],
    entrance,
    frame: int,
    params: TrackingParams,
) -> TrackSet:
    """Apply one frame's assignment: filter, spawn, confirm, delete, adapt gates."""
    q_var = params.sigma_q**2
    r_var = params.sigma_m**2
    track_for = {c: r for r, c in assignment.pairs}
    for col, track in enumerate(trackset.tracks):
        mean, cov = kf_predict(track.mean, track.cov, q_var)
        if col in track_for:
            obs = observations[track_for[col]]
            mean, cov = kf_update(mean, cov, obs.position, r_var)
            track.history.append(True)
            track.miss_streak = 0
            track.intensity = obs.intensity
            track.voxel = obs.voxel
            track.last_assigned = frame
        else:
            track.history.append(False)
            track.miss_streak += 1
        track.mean, track.cov = mean, cov
        if track.status == CANDIDATE and sum(track.history) >= params.n_app:
            track.status = CONFIRMED
            track.confirmed_at = frame

    trackset.deleted = [t for t in trackset.tracks if t.miss_streak >= params.n_del]
    survivors = [t for t in trackset.tracks if t.miss_streak < params.n_del]

    spare = [observations[r] for r in assignment.unassigned_rows]
    if spare:
        born_ok = entrance.contains(np.array([o.position for o in spare]))
        for obs, ok in zip(spare, born_ok):
            if not ok:
                continue
            survivors.append(
                Track(
                    id=trackset.next_id,
                    mean=np.array(obs.position, dtype=float),
                    cov=(params.gate_radius / 2) ** 2 * np.eye(2),
                    radius=params.gate_radius,
                    intensity=obs.intensity,
                    voxel=obs.voxel,
                    born=frame,
                    window=params.window,
                    last_assigned=frame,
                )
            )
            trackset.next_id += 1

    _adapt_gates(survivors, params)
    trackset.tracks = survivors
    return trackset


def _adapt_gates(tracks: list[Track], params: TrackingParams) -> None:
    if not tracks:
        return
    pos = np.array([t.mean for t in tracks])
    dist = cdist(pos, pos)
    np.fill_diagonal(dist, np.inf)
    near = (dist < params.intersect_threshold).any(axis=1)
    for t, close in zip(tracks, near):
        t.intersecting = bool(close)
        t.radius = 2 * params.gate_radius if close else params.gate_radius


class Tracker:
    """Association plus lifecycle for a stream of per-frame observations."""

    def __init__(self, params: TrackingParams, entrance):
        self.params = params
        self.entrance = entrance
        self.tracks = TrackSet()
        self.last_assignment: Assignment | None = None

    def step(self, observations: Sequence[Observation], frame: int) -> TrackSet:
        omega = build_association(observations, self.tracks.tracks)
        self.last_assignment = assign(omega, self.params.assoc)
        return step_lifecycle(
            self.tracks, self.last_assignment, observations, self.entrance, frame, self.params
        )
