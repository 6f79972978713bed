"""Optimal (Hungarian) and greedy one-to-one assignment on cost matrices.

Infinite entries mark forbidden pairs. Both solvers return an
:class:`Assignment` listing the chosen (row, column) pairs and what was
left over; a forbidden pair is never part of the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]  # (row, column), sorted by row
    unassigned_rows: tuple[int, ...]
    unassigned_cols: tuple[int, ...]
    cost: float

    def __len__(self) -> int:
        return len(self.pairs)

    def col_of(self) -> dict[int, int]:
        return dict(self.pairs)


def _finish(cost: np.ndarray, pairs) -> Assignment:
    pairs = tuple(sorted((int(r), int(c)) for r, c in pairs))
    rows = {r for r, _ in pairs}
    cols = {c for _, c in pairs}
    total = float(sum(cost[r, c] for r, c in pairs))
    return Assignment(
        pairs,
        tuple(r for r in range(cost.shape[0]) if r not in rows),
        tuple(c for c in range(cost.shape[1]) if c not in cols),
        total,
    )


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost assignment of every row (or column, if fewer) of a finite matrix.

    Shortest augmenting path with dual potentials, O(n^2 m) for an n x m
    matrix with n <= m.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2:
        raise ValueError("cost must be 2-D")
    if C.size == 0:
        return []
    if not np.all(np.isfinite(C)):
        raise ValueError("hungarian() needs a finite matrix; use assign_gnn for gated costs")
    transposed = C.shape[0] > C.shape[1]
    if transposed:
        C = C.T
    n, m = C.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j]: row (1-based) holding column j; 0 = free
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    pairs = [(p[j] - 1, j - 1) for j in range(1, m + 1) if p[j]]
    if transposed:
        pairs = [(c, r) for r, c in pairs]
    return sorted(pairs)


def assign_gnn(cost: np.ndarray) -> Assignment:
    """Global nearest neighbour: most feasible pairs, then least total cost."""
    C = np.asarray(cost, dtype=float)
    if C.size == 0:
        return _finish(C.reshape(C.shape if C.ndim == 2 else (0, 0)), [])
    finite = np.isfinite(C)
    if not finite.any():
        return _finish(C, [])
    vals = C[finite]
    # a forbidden pair costs more than any feasible assignment could
    spread = float(vals.max() - min(vals.min(), 0.0))
    big = (min(C.shape) + 1) * (spread + 1.0) + abs(float(vals.max()))
    pairs = hungarian(np.where(finite, C, big))
    return _finish(C, [(r, c) for r, c in pairs if finite[r, c]])


def assign_snn(cost: np.ndarray) -> Assignment:
    """Greedy nearest neighbour: repeatedly take the cheapest remaining feasible pair."""
    C = np.asarray(cost, dtype=float)
    if C.size == 0:
        return _finish(C.reshape(C.shape if C.ndim == 2 else (0, 0)), [])
    rows, cols = np.nonzero(np.isfinite(C))
    order = np.lexsort((cols, rows, C[rows, cols]))
    used_r, used_c, pairs = set(), set(), []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        pairs.append((r, c))
    return _finish(C, pairs)


def assign(cost: np.ndarray, method: str = "gnn") -> Assignment:
    if method == "gnn":
        return assign_gnn(cost)
    if method == "snn":
        return assign_snn(cost)
    raise ValueError(f"unknown association method {method!r}")
