"""From a denoised image to a handful of observations.

Dynamic thresholding keeps the voxels around the tracked targets,
average-linkage agglomerative clustering groups them into blobs, and each
blob's brightest voxel becomes a candidate observation if it is either in
the entrance region or close and bright enough relative to a track.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist, pdist, squareform

from .imaging import RtiImage


@dataclass
class ThresholdState:
    empty_baseline: float
    beta: float = 0.80
    alpha_f: float = 0.9
    empty_floor: float = 0.01
    filtered: float | None = None  # I_f; None while no target is tracked
    threshold: float = float("nan")

    def empty_threshold(self) -> float:
        return max(2.0 * self.empty_baseline, self.empty_floor)


def update_threshold(
    state: ThresholdState, track_voxels: Sequence[int], image: RtiImage
) -> float:
    """Set the voxel threshold for this frame from the tracked targets' intensities.

    ``track_voxels`` holds, for every confirmed track, the voxel of its most
    recently assigned cluster head; the denoised ``image`` is read there.
    """
    if len(track_voxels):
        i_min = float(np.min(image.intensities[np.asarray(track_voxels, dtype=int)]))
        if state.filtered is None:
            state.filtered = i_min
        else:
            state.filtered = state.alpha_f * state.filtered + (1 - state.alpha_f) * i_min
        # a lost target can read a negative intensity; never go below the empty floor
        state.threshold = max(state.beta * state.filtered, state.empty_floor)
    else:
        state.filtered = None
        state.threshold = state.empty_threshold()
    return state.threshold


def mask_image(image: RtiImage, threshold: float) -> tuple[RtiImage, np.ndarray]:
    keep = image.intensities > threshold
    masked = np.where(keep, image.intensities, 0.0)
    voxels = np.flatnonzero(masked > 0)
    return RtiImage(masked, image.frame, "masked"), voxels


def cap_voxels(voxels: np.ndarray, intensities: np.ndarray, limit: int) -> np.ndarray:
    """Keep the ``limit`` brightest voxels (lower index wins ties), in index order."""
    if len(voxels) <= limit:
        return voxels
    order = np.lexsort((voxels, -intensities[voxels]))
    return np.sort(voxels[order[:limit]])


def _average_linkage(points: np.ndarray, threshold: float) -> list[list[int]]:
    """Agglomerate with the Lance-Williams average-linkage update.

    Clusters live in slots ordered by their smallest member and a merge keeps
    the lower slot. Each slot caches its nearest higher slot, so the global
    minimum is the lexicographically lowest closest pair. Average linkage is
    reducible (a merged cluster is never closer to a third one than the
    nearer of its parts), so only slots whose cached neighbour took part in
    the merge need a rescan.
    """
    n = len(points)
    if n == 1:
        return [[0]]
    D = squareform(pdist(points))
    D[np.tril_indices(n)] = np.inf  # only the upper triangle is read
    size = np.ones(n)
    members = [[i] for i in range(n)]
    nn = np.argmin(D, axis=1)
    nn_d = D[np.arange(n), nn]
    alive = np.ones(n, dtype=bool)
    for _ in range(n - 1):
        a = int(np.argmin(nn_d))
        if not nn_d[a] <= threshold:
            break
        b = int(nn[a])
        # distances to the merged cluster, for every other live slot
        da = np.minimum(D[a], D[:, a])
        db = np.minimum(D[b], D[:, b])
        row = (size[a] * da + size[b] * db) / (size[a] + size[b])
        alive[b] = False
        row[~alive] = np.inf
        row[a] = np.inf
        lower = np.arange(n) < a
        D[:a, a] = row[:a]
        D[a, a + 1:] = row[a + 1:]
        D[a, :a] = np.inf
        D[:, b] = np.inf
        D[b, :] = np.inf
        nn_d[b] = np.inf
        size[a] += size[b]
        members[a].extend(members[b])
        members[b] = []
        # a row below a sees a new value at column a; take it if it now wins the tie-break
        better = lower & alive & ((row < nn_d) | ((row == nn_d) & (a < nn)))
        nn[better] = a
        nn_d[better] = row[better]
        stale = alive & ((nn == a) | (nn == b)) & ~better
        stale[a] = True
        for i in np.flatnonzero(stale):
            j = int(np.argmin(D[i]))
            nn[i] = j
            nn_d[i] = D[i, j]
    return [sorted(m) for m in members if m]


def hac_cluster(voxels: Sequence[int], positions: np.ndarray, threshold: float) -> list[list[int]]:
    """Partition ``voxels`` by average-linkage HAC, stopping above ``threshold``.

    The average linkage of two clusters is at least their closest pair
    distance, so clusters never grow across components of the
    "closer than threshold" graph; each component is clustered on its own.
    Returns clusters as sorted lists of voxel ids, ordered by smallest id.
    """
    voxels = np.asarray(voxels, dtype=int)
    n = len(voxels)
    if n == 0:
        return []
    order = np.argsort(voxels, kind="stable")
    voxels = voxels[order]
    pts = np.asarray(positions, dtype=float)[order]
    if n == 1:
        return [[int(voxels[0])]]
    close = cdist(pts, pts) <= threshold
    i, j = np.nonzero(np.triu(close, 1))
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    n_comp, label = connected_components(graph, directed=False)
    clusters = []
    for comp in range(n_comp):
        idx = np.flatnonzero(label == comp)
        for local in _average_linkage(pts[idx], threshold):
            clusters.append([int(v) for v in voxels[idx[local]]])
    clusters.sort(key=lambda c: c[0])
    return clusters


@dataclass(frozen=True)
class Observation:
    voxel: int
    position: tuple[float, float]
    intensity: float  # normalized to the brightest unmasked voxel
    raw_intensity: float
    in_entrance: bool


@dataclass(frozen=True)
class TrackGate:
    """What head selection needs to know about one track."""

    position: tuple[float, float]
    radius: float
    intensity: float  # last assigned normalized intensity


def cluster_heads(clusters, masked: RtiImage, voxels: np.ndarray):
    """Brightest voxel per cluster (lowest id on ties) and the normalized intensities."""
    x = masked.intensities
    peak = x[voxels].max() if len(voxels) else 1.0
    heads = []
    for members in clusters:
        m = np.asarray(members)
        heads.append(int(m[np.argmax(x[m])]))
    return heads, x / peak


def select_cluster_heads(
    clusters: Sequence[Sequence[int]],
    masked: RtiImage,
    voxels: np.ndarray,
    centers: np.ndarray,
    gates: Sequence[TrackGate],
    entrance,
    rho: float = 0.8,
) -> list[Observation]:
    if not clusters:
        return []
    heads, norm = cluster_heads(clusters, masked, voxels)
    head_pos = centers[heads]
    in_entrance = entrance.contains(head_pos)
    if gates:
        tpos = np.array([g.position for g in gates])
        radius = np.array([g.radius for g in gates])
        tint = np.array([g.intensity for g in gates])
        dist = cdist(head_pos, tpos)
    out = []
    for k, h in enumerate(heads):
        keep = bool(in_entrance[k])
        if not keep and gates:
            chi = dist[k] < radius
            keep = bool(chi.any()) and norm[h] >= rho * tint[chi].min()
        if keep:
            out.append(
                Observation(
                    voxel=h,
                    position=(float(head_pos[k, 0]), float(head_pos[k, 1])),
                    intensity=float(norm[h]),
                    raw_intensity=float(masked.intensities[h]),
                    in_entrance=bool(in_entrance[k]),
                )
            )
    return out
