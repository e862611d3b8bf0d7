"""Deterministic multimodal speaker diarization for subtitle-timed media.

Maps every subtitle line of a program to a speaker by fusing face clusters
(visual anchors), timbre embeddings, and an external turn scorer, then
recovers off-screen speakers and scores the result with DER/JER/SPKE.
"""

from .config import PipelineConfig
from .features import GroundTruth, LineFeatures, SynthConfig, TurnScoreRecord, synth_program
from .model import Assignment, Line, Origin, Program, SpeakerId, Stage
from .pipeline import DiarizationResult, MetricReport, run_pipeline, sweep

__all__ = [
    "Assignment",
    "DiarizationResult",
    "GroundTruth",
    "Line",
    "LineFeatures",
    "MetricReport",
    "Origin",
    "PipelineConfig",
    "Program",
    "SpeakerId",
    "Stage",
    "SynthConfig",
    "TurnScoreRecord",
    "run_pipeline",
    "sweep",
    "synth_program",
]

__version__ = "0.1.0"
