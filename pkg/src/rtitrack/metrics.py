"""Set-based tracking metrics: cardinality error, OMAT, OSPA, Q95 and coverage."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .assignment import hungarian


class UndefinedMetric(ValueError):
    pass


def _points(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1, 2)


def cardinality_error(estimated: Sequence[int], true: Sequence[int]) -> float:
    if len(estimated) != len(true):
        raise ValueError(f"sequence lengths differ: {len(estimated)} vs {len(true)}")
    if len(true) == 0:
        raise ValueError("no frames")
    est = np.asarray(estimated)
    tru = np.asarray(true)
    return float(np.mean(est != tru))


def omat(T, Z, q: float = 2.0) -> float:
    """Optimal mass transfer distance between two non-empty point sets.

    For equal sizes this is the q-mean of distances under the best
    one-to-one pairing (the RMSE when q = 2). For unequal sizes each set
    carries total mass 1 spread evenly over its points; replicating both to
    lcm(|T|, |Z|) copies makes the transport problem a balanced assignment.
    """
    T, Z = _points(T), _points(Z)
    if len(T) == 0 or len(Z) == 0:
        raise UndefinedMetric("OMAT is undefined when a set is empty")
    L = math.lcm(len(T), len(Z))
    Tr = np.repeat(T, L // len(T), axis=0)
    Zr = np.repeat(Z, L // len(Z), axis=0)
    C = cdist(Tr, Zr) ** q
    pairs = hungarian(C)
    total = sum(C[i, j] for i, j in pairs)
    return float((total / L) ** (1.0 / q))


def ospa(T, Z, g: float, q: float = 2.0) -> float:
    """Optimal subpattern assignment distance with cut-off ``g``."""
    if not g > 0:
        raise ValueError("cut-off g must be positive")
    T, Z = _points(T), _points(Z)
    if len(T) > len(Z):
        T, Z = Z, T
    n, m = len(T), len(Z)
    if m == 0:
        return 0.0
    penalty = g**q * (m - n)
    matched = 0.0
    if n:
        C = np.minimum(cdist(T, Z), g) ** q
        matched = sum(C[i, j] for i, j in hungarian(C))
    return float(((matched + penalty) / m) ** (1.0 / q))


def q95(series: Sequence[float]) -> float:
    """Nearest-rank 95th percentile."""
    x = np.sort(np.asarray(series, dtype=float))
    if len(x) == 0:
        raise ValueError("empty series")
    rank = math.ceil(0.95 * len(x))
    return float(x[max(rank, 1) - 1])


def target_coverage(
    truth: Sequence[Mapping[int, tuple[float, float]]],
    estimates: Sequence[Sequence[tuple[float, float]]],
    radius: float = 1.0,
) -> dict[int, float]:
    """Fraction of each target's active frames with an estimate within ``radius``."""
    hits: dict[int, int] = {}
    active: dict[int, int] = {}
    for targets, est in zip(truth, estimates):
        E = _points(est)
        for tid, pos in targets.items():
            active[tid] = active.get(tid, 0) + 1
            if len(E) and np.min(np.linalg.norm(E - np.asarray(pos), axis=1)) <= radius:
                hits[tid] = hits.get(tid, 0) + 1
    return {tid: hits.get(tid, 0) / n for tid, n in sorted(active.items())}


@dataclass
class MetricsReport:
    n_frames: int
    cardinality_error: float
    mean_omat: float
    q95: float
    omat_frames: int  # frames where both sets were non-empty
    omat_excluded: int
    ospa: dict[str, float]
    coverage: dict[str, float]
    timing_ms: dict[str, float] = field(default_factory=dict)
    omat_series: list[float] = field(default_factory=list, repr=False)

    def to_dict(self, include_series: bool = False) -> dict:
        d = asdict(self)
        if not include_series:
            d.pop("omat_series")
        return d

    def table(self) -> str:
        lines = [
            f"frames                 {self.n_frames}",
            f"cardinality error      {self.cardinality_error:.4f}",
            f"mean OMAT [m]          {self.mean_omat:.3f}",
            f"Q95 [m]                {self.q95:.3f}",
            f"OMAT frames / excluded {self.omat_frames} / {self.omat_excluded}",
        ]
        for g, v in self.ospa.items():
            lines.append(f"OSPA g={g:<5}          {v:.3f}")
        if self.coverage:
            worst = min(self.coverage.values())
            lines.append(f"worst target coverage  {worst:.3f}")
        for k, v in self.timing_ms.items():
            lines.append(f"{k:<22} {v:.2f}")
        return "\n".join(lines)


def evaluate(
    truth: Sequence[Mapping[int, tuple[float, float]]],
    estimates: Sequence[Sequence[tuple[float, float]]],
    *,
    ospa_g: Sequence[float] = (1.0, 2.5, 5.0),
    q: float = 2.0,
    proc_ms: Sequence[float] | None = None,
    coverage_radius: float = 1.0,
) -> MetricsReport:
    """Per-frame aligned truth (id -> position) vs confirmed-track positions."""
    if len(truth) != len(estimates):
        raise ValueError(f"{len(truth)} truth frames vs {len(estimates)} estimate frames")
    series = []
    ospa_sum = {g: 0.0 for g in ospa_g}
    for targets, est in zip(truth, estimates):
        Z = _points(list(targets.values()))
        T = _points(est)
        if len(T) and len(Z):
            series.append(omat(T, Z, q))
        for g in ospa_g:
            ospa_sum[g] += ospa(T, Z, g, q)
    n = len(truth)
    timing = {}
    if proc_ms is not None and len(proc_ms):
        timing = {"max_Tp_ms": float(np.max(proc_ms)), "mean_Tp_ms": float(np.mean(proc_ms))}
    return MetricsReport(
        n_frames=n,
        cardinality_error=cardinality_error([len(e) for e in estimates], [len(t) for t in truth]),
        mean_omat=float(np.mean(series)) if series else float("nan"),
        q95=q95(series) if series else float("nan"),
        omat_frames=len(series),
        omat_excluded=n - len(series),
        ospa={f"{g:g}": ospa_sum[g] / n for g in ospa_g},
        coverage={str(k): v for k, v in target_coverage(truth, estimates, coverage_radius).items()},
        timing_ms=timing,
        omat_series=series,
    )
