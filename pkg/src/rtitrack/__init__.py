"""Multi-channel radio tomographic imaging with multi-target tracking."""

from .config import ImagingParams, MetricsParams, RunConfig, TrackingParams, load_config, save_config
from .pipeline import FrameResult, Pipeline
from .simulator import PRESETS, Scenario, Simulation, scripted_paths

__all__ = [
    "ImagingParams", "MetricsParams", "RunConfig", "TrackingParams", "load_config", "save_config",
    "FrameResult", "Pipeline", "PRESETS", "Scenario", "Simulation", "scripted_paths",
]
__version__ = "0.1.0"
