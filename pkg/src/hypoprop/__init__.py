"""Multi-hypothesis proposal tracking and mask merging for video object segmentation."""

from .model import BBox, HypothesisForest, HypothesisNode, Params, Proposal, TrackPath, validate_params
from .pipeline import PipelineResult, run_pipeline
from .scenario import ScenarioError, ScenarioFrame, ScenarioStream, load_scenario, save_scenario
from .synth import SynthConfig, synth_scenario

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "HypothesisForest",
    "HypothesisNode",
    "Params",
    "PipelineResult",
    "Proposal",
    "ScenarioError",
    "ScenarioFrame",
    "ScenarioStream",
    "SynthConfig",
    "TrackPath",
    "load_scenario",
    "run_pipeline",
    "save_scenario",
    "synth_scenario",
    "validate_params",
]
