"""Shared helpers for the experiment scripts: run a preset in-process and score it."""

from __future__ import annotations

import os

import numpy as np

from rtitrack.metrics import evaluate
from rtitrack.pipeline import Pipeline
from rtitrack.simulator import Simulation, scripted_paths

CACHE = os.environ.get("RTI_CACHE_DIR", os.path.expanduser("~/.cache/rtitrack"))


def prepare(preset: str, seed: int):
    """Scenario, truth, frames and a calibrated base pipeline for one seed."""
    sc = scripted_paths(preset, seed)
    sim = Simulation(sc)
    base = Pipeline.build(sc.config, list(sim.calibration_frames()), cache_dir=CACHE)
    return sc, sim.truth(), list(sim.frames()), base


def score(config, base, frames, truth):
    pipe = Pipeline(config, base.projection, base.profile)
    results = list(pipe.run(frames))
    ms = [r.proc_ms for r in results]
    return evaluate(truth, [r.confirmed_positions() for r in results],
                    ospa_g=config.metrics.ospa_g, q=config.metrics.q, proc_ms=ms)


def mean_of(reports, key):
    if key in ("max_Tp_ms", "mean_Tp_ms"):
        vals = [r.timing_ms[key] for r in reports]
        return float(np.max(vals) if key == "max_Tp_ms" else np.mean(vals))
    if key == "coverage":
        return float(min(min(r.coverage.values()) for r in reports))
    return float(np.mean([getattr(r, key) for r in reports]))
