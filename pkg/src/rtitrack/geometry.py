"""Network geometry, voxel grid, link weights and the image reconstruction operator."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NetworkGeometry:
    """Sensor positions and the undirected links between them."""

    sensors: np.ndarray  # (R, 2) meters
    links: np.ndarray  # (M, 2) sensor index pairs, tx < rx

    def __post_init__(self):
        sensors = np.asarray(self.sensors, dtype=float)
        links = np.asarray(self.links, dtype=int).reshape(-1, 2)
        if sensors.ndim != 2 or sensors.shape[1] != 2:
            raise ValueError("sensors must be an (R, 2) array")
        if len(sensors) < 3:
            raise ValueError(f"need at least 3 sensors, got {len(sensors)}")
        if len(np.unique(sensors, axis=0)) != len(sensors):
            raise ValueError("sensor positions must be distinct")
        if np.any(links[:, 0] == links[:, 1]):
            raise ValueError("a link needs two different sensors")
        if links.min(initial=0) < 0 or links.max(initial=0) >= len(sensors):
            raise ValueError("link refers to an unknown sensor")
        sensors.setflags(write=False)
        links.setflags(write=False)
        object.__setattr__(self, "sensors", sensors)
        object.__setattr__(self, "links", links)

    @classmethod
    def from_sensors(cls, sensors) -> "NetworkGeometry":
        """All R(R-1)/2 sensor pairs, ordered lexicographically."""
        sensors = np.asarray(sensors, dtype=float)
        links = np.array(list(combinations(range(len(sensors)), 2)), dtype=int)
        return cls(sensors, links)

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def n_links(self) -> int:
        return len(self.links)

    def link_lengths(self) -> np.ndarray:
        tx = self.sensors[self.links[:, 0]]
        rx = self.sensors[self.links[:, 1]]
        return np.linalg.norm(tx - rx, axis=1)

    def link_index(self) -> dict[tuple[int, int], int]:
        """Map (a, b) with a < b to link row."""
        return {(int(a), int(b)): l for l, (a, b) in enumerate(self.links)}


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Row-major pixel grid anchored at the south-west corner of ``bounds``."""

    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    pixel_width: float
    nx: int
    ny: int
    centers: np.ndarray = field(repr=False)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def to_image(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x).reshape(self.shape)


def build_grid(bounds: Sequence[float], p: float) -> VoxelGrid:
    xmin, ymin, xmax, ymax = (float(b) for b in bounds)
    if not p > 0:
        raise ValueError(f"pixel width must be positive, got {p}")
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate bounds {bounds}")
    # the small slack keeps exact multiples (1.0 / 0.5) from gaining an extra column
    nx = math.ceil((xmax - xmin) / p - 1e-9)
    ny = math.ceil((ymax - ymin) / p - 1e-9)
    jj, ii = np.meshgrid(np.arange(nx), np.arange(ny))
    centers = np.column_stack(
        [xmin + (jj.ravel() + 0.5) * p, ymin + (ii.ravel() + 0.5) * p]
    )
    centers.setflags(write=False)
    return VoxelGrid((xmin, ymin, xmax, ymax), float(p), nx, ny, centers)


def ellipse_area(d: np.ndarray | float, excess: float) -> np.ndarray:
    """Area of the ellipse with foci ``d`` apart and major axis ``d + excess``."""
    a = (np.asarray(d, dtype=float) + excess) / 2.0
    b = np.sqrt(a**2 - (np.asarray(d) / 2.0) ** 2)
    return np.pi * a * b


def ellipse_weights(
    geometry: NetworkGeometry, grid: VoxelGrid, excess: float
) -> scipy.sparse.csr_matrix:
    """Sparse M x N link weight matrix of the ellipse model.

    A voxel gets weight ``1/A_l`` when its center lies strictly inside the
    ellipse of link ``l`` (foci at the two sensors, excess path ``excess``),
    and zero otherwise.
    """
    if not excess > 0:
        raise ValueError(f"excess path length must be positive, got {excess}")
    d = geometry.link_lengths()
    if np.any(d <= 0):
        raise ValueError("zero-length link")
    area = ellipse_area(d, excess)
    to_sensor = cdist(geometry.sensors, grid.centers)  # (R, N)
    rows, cols = [], []
    # chunk over links to keep the temporary small for big networks
    chunk = 128
    for start in range(0, geometry.n_links, chunk):
        sl = slice(start, start + chunk)
        tx, rx = geometry.links[sl, 0], geometry.links[sl, 1]
        path = to_sensor[tx] + to_sensor[rx]
        r, c = np.nonzero(path < (d[sl] + excess)[:, None])
        rows.append(r + start)
        cols.append(c)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = 1.0 / area[rows]
    W = scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(geometry.n_links, grid.n_voxels)
    )
    W.sort_indices()
    return W


def prior_covariance(grid: VoxelGrid, sigma_x: float, delta_c: float) -> np.ndarray:
    """Exponentially decaying voxel covariance ``sigma_x^2 exp(-dist/delta_c)``."""
    if not (sigma_x > 0 and delta_c > 0):
        raise ValueError("sigma_x and delta_c must be positive")
    dist = cdist(grid.centers, grid.centers)
    return sigma_x**2 * np.exp(-dist / delta_c)


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Precomputed N x M regularized least-squares operator."""

    matrix: np.ndarray
    sigma_n: float
    sigma_x: float = float("nan")
    delta_c: float = float("nan")

    @property
    def n_voxels(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_links(self) -> int:
        return self.matrix.shape[1]

    def apply(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_links,):
            raise ValueError(f"expected {self.n_links} link values, got shape {y.shape}")
        return self.matrix @ y


def build_projection(W, C_x: np.ndarray, sigma_n: float, **meta) -> ProjectionOperator:
    """Solve ``(W^T W + C_x^{-1} sigma_n^2) Pi = W^T`` by Cholesky factorizations."""
    if not sigma_n > 0:
        raise ValueError(
            "sigma_n must be positive; an unregularized inverse is not supported"
        )
    C_x = np.asarray(C_x, dtype=float)
    if not np.allclose(C_x, C_x.T):
        raise ValueError("prior covariance must be symmetric")
    Wd = W.toarray() if scipy.sparse.issparse(W) else np.asarray(W, dtype=float)
    n = C_x.shape[0]
    if Wd.shape[1] != n:
        raise ValueError(f"W has {Wd.shape[1]} columns but C_x is {n} x {n}")
    try:
        c_fac = scipy.linalg.cho_factor(C_x, lower=True)
        C_inv = scipy.linalg.cho_solve(c_fac, np.eye(n))
        A = Wd.T @ Wd + sigma_n**2 * C_inv
        A = (A + A.T) / 2.0
        a_fac = scipy.linalg.cho_factor(A, lower=True)
        Pi = scipy.linalg.cho_solve(a_fac, Wd.T)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"regularized normal matrix is not SPD: {exc}") from exc
    Pi.setflags(write=False)
    return ProjectionOperator(Pi, float(sigma_n), **meta)


def content_hash(*parts) -> str:
    """Stable sha256 over arrays and scalars, used to key cached artifacts."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(str(arr.dtype).encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        else:
            h.update(repr(part).encode())
        h.update(b"|")
    return h.hexdigest()


def projection_for(geometry, grid, *, excess, sigma_x, sigma_n, delta_c, cache_dir=None):
    """Build (or load from ``cache_dir``) the operator for one deployment."""
    key = content_hash(
        geometry.sensors, geometry.links, grid.bounds, grid.pixel_width,
        excess, sigma_x, sigma_n, delta_c,
    )
    path = Path(cache_dir) / f"projection-{key[:20]}.npy" if cache_dir else None
    if path is not None and path.exists():
        Pi = np.load(path)
        if Pi.shape == (grid.n_voxels, geometry.n_links):
            log.debug("loaded cached projection %s", path)
            Pi.setflags(write=False)
            return ProjectionOperator(Pi, sigma_n, sigma_x, delta_c)
        log.warning("ignoring cached projection with wrong shape: %s", path)
    W = ellipse_weights(geometry, grid, excess)
    C_x = prior_covariance(grid, sigma_x, delta_c)
    op = build_projection(W, C_x, sigma_n, sigma_x=sigma_x, delta_c=delta_c)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npy")
        np.save(tmp, op.matrix)
        tmp.replace(path)
    return op


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd rule; points on an edge may fall either way."""
    pts = np.atleast_2d(points)
    poly = np.asarray(polygon, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < x_at)
        xj, yj = xi, yi
    return inside


@dataclass(frozen=True)
class EntranceRegion:
    """Where tracks may be born: polygons, or an inner band along the bounds."""

    bounds: tuple[float, float, float, float]
    band: float | None = 1.0
    polygons: tuple = ()

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts), dtype=bool)
        if self.band is not None:
            xmin, ymin, xmax, ymax = self.bounds
            x, y = pts[:, 0], pts[:, 1]
            edge = np.minimum.reduce([x - xmin, xmax - x, y - ymin, ymax - y])
            out |= edge < self.band
        for poly in self.polygons:
            out |= points_in_polygon(pts, np.asarray(poly))
        return out
