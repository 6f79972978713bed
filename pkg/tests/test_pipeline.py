import numpy as np
import pytest

from rtitrack.assignment import assign_gnn, assign_snn
from rtitrack.pipeline import Pipeline, argmax_positions
from rtitrack.simulator import Simulation
from rtitrack.tracking import Tracker, build_association

from conftest import small_config, walk_scenario


def _run(sc, cache_dir, cfg=None):
    sim = Simulation(sc)
    pipe = Pipeline.build(cfg or sc.config, list(sim.calibration_frames()), cache_dir=cache_dir)
    return pipe, list(pipe.run(sim.frames())), sim.truth()


def test_single_walker_is_tracked(cache_dir):
    pipe, results, truth = _run(walk_scenario(), cache_dir)
    err = []
    for r, t in zip(results, truth):
        conf = r.confirmed_positions()
        if t and conf:
            err.append(np.linalg.norm(np.subtract(conf[0], t[0])))
    assert len(err) > 0.7 * sum(1 for t in truth if t)
    assert np.median(err) < 0.6
    assert all(not r.confirmed_positions() for r in results[:10])


def test_empty_area_has_no_confirmed_tracks(cache_dir):
    from dataclasses import replace
    sc = replace(walk_scenario(noise_db=1.0, drop_rate=0.02), targets=())
    _, results, _ = _run(sc, cache_dir)
    assert all(not r.confirmed_positions() for r in results)


def test_rejects_out_of_order_frames(cache_dir):
    sc = walk_scenario()
    sim = Simulation(sc)
    pipe = Pipeline.build(sc.config, list(sim.calibration_frames()), cache_dir=cache_dir)
    frames = list(sim.frames())
    pipe.process(frames[3])
    with pytest.raises(ValueError):
        pipe.process(frames[2])


def test_deterministic(cache_dir):
    a = [(r.frame, r.tracks, r.threshold) for r in _run(walk_scenario(), cache_dir)[1]]
    b = [(r.frame, r.tracks, r.threshold) for r in _run(walk_scenario(), cache_dir)[1]]
    assert a == b


def test_greedy_cost_within_twice_optimal_per_frame(cache_dir, monkeypatch):
    seen = []
    original = Tracker.step

    def spy(self, observations, frame):
        omega = build_association(observations, self.tracks.tracks)
        g, s = assign_gnn(omega), assign_snn(omega)
        if len(g) == len(s):
            seen.append((g.cost, s.cost))
        return original(self, observations, frame)

    monkeypatch.setattr(Tracker, "step", spy)
    cfg = small_config(assoc="snn")
    _run(walk_scenario(cfg), cache_dir, cfg)
    assert seen and all(s <= 2 * g + 1e-9 for g, s in seen)


def test_argmax_noiseless(cache_dir):
    sc = walk_scenario(noise_db=0.0)
    sim = Simulation(sc)
    pipe = Pipeline.build(sc.config, list(sim.calibration_frames()), cache_dir=cache_dir)
    truth = sim.truth()
    frames = [f for f, t in zip(sim.frames(), truth) if t]
    pos = argmax_positions(sc.config, pipe.projection, pipe.profile, frames)
    true = np.array([t[0] for t in truth if t])
    assert np.mean(np.linalg.norm(pos - true, axis=1) <= 2 * sc.config.imaging.pixel_width) >= 0.9
