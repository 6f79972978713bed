import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rtitrack.assignment import assign, assign_gnn, assign_snn, hungarian


def brute_force(C):
    """Most feasible pairs first, then least cost; exhaustive over injections."""
    n, m = C.shape
    if n > m:
        return brute_force(C.T)
    best = (0, 0.0)
    for cols in itertools.permutations(range(m), n):
        feas = [C[r, c] for r, c in enumerate(cols) if np.isfinite(C[r, c])]
        if (-len(feas), sum(feas)) < (-best[0], best[1]):
            best = (len(feas), sum(feas))
    return best


def random_gated(rng, n, m):
    C = rng.uniform(0, 10, size=(n, m))
    C[rng.random((n, m)) < rng.uniform(0, 0.6)] = np.inf
    return C


def test_examples():
    a = assign_gnn(np.array([[1.0, 2.0], [3.0, 1.0]]))
    assert a.pairs == ((0, 0), (1, 1)) and a.cost == 2
    assert assign_snn(np.array([[1.0, 2.0], [3.0, 1.0]])).cost == 2
    a = assign_gnn(np.array([[1.0, np.inf], [np.inf, np.inf]]))
    assert a.pairs == ((0, 0),) and a.unassigned_rows == (1,) and a.unassigned_cols == (1,)
    g = assign_gnn(np.array([[1.0, 1.1], [1.2, 100.0]]))
    s = assign_snn(np.array([[1.0, 1.1], [1.2, 100.0]]))
    assert s.pairs == ((0, 0), (1, 1)) and s.cost == pytest.approx(101)
    assert g.pairs == ((0, 1), (1, 0)) and g.cost == pytest.approx(2.3)
    assert assign_snn(np.zeros((0, 3))).pairs == ()
    assert assign_gnn(np.zeros((0, 0))).pairs == ()
    D = np.ones((4, 4)) - np.eye(4)
    assert assign_gnn(D).cost == 0 and assign_gnn(D).pairs == tuple((i, i) for i in range(4))
    with pytest.raises(ValueError):
        assign(D, "mht")


def test_gnn_matches_brute_force(rng):
    for _ in range(400):
        C = random_gated(rng, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
        a = assign_gnn(C)
        n_ref, cost_ref = brute_force(C)
        assert len(a) == n_ref
        assert a.cost == pytest.approx(cost_ref, abs=1e-9)


def test_hungarian_matches_scipy(rng):
    from scipy.optimize import linear_sum_assignment
    for _ in range(200):
        C = rng.uniform(0, 5, size=(int(rng.integers(1, 9)), int(rng.integers(1, 9))))
        r, c = linear_sum_assignment(C)
        assert sum(C[i, j] for i, j in hungarian(C)) == pytest.approx(C[r, c].sum())


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_assignments_are_one_to_one_and_feasible(n, m, seed):
    C = random_gated(np.random.default_rng(seed), n, m)
    for a in (assign_gnn(C), assign_snn(C)):
        rows = [r for r, _ in a.pairs]
        cols = [c for _, c in a.pairs]
        assert len(set(rows)) == len(rows) and len(set(cols)) == len(cols)
        assert all(np.isfinite(C[r, c]) for r, c in a.pairs)
        assert set(rows) | set(a.unassigned_rows) == set(range(n))


def euclidean_instance(rng, n_obs, n_tracks):
    obs = rng.uniform(0, 8, size=(n_obs, 2))
    trk = rng.uniform(0, 8, size=(n_tracks, 2))
    return np.linalg.norm(obs[:, None] - trk[None], axis=2)


def test_snn_within_twice_gnn_on_distance_matrices(rng):
    for _ in range(2000):
        k = int(rng.integers(1, 6))
        C = euclidean_instance(rng, k, k)
        assert assign_snn(C).cost <= 2 * assign_gnn(C).cost + 1e-9


def test_snn_bound_fails_on_arbitrary_costs():
    # not a metric instance; greedy can be arbitrarily worse
    C = np.array([[1.0, 1.1], [1.2, 100.0]])
    assert assign_snn(C).cost > 2 * assign_gnn(C).cost
