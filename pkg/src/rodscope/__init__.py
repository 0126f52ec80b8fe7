"""Object-level segmentation evaluation and rod-shaped cell analysis for fluorescence microscopy."""

__version__ = "0.1.0"

from .analyzer import AnalysisConfig, CellAnalyzer
from .components import Component, ComponentSet, label_components, mask_from_components
from .evaluation import EvalConfig, EvalReport, ExperimentalScorer, GroundTruthPair
from .imaging import GrayImage, load_image
from .pipeline import analyze_frame
from .thresholding import ThresholdSegmenter

__all__ = [
    "AnalysisConfig",
    "CellAnalyzer",
    "Component",
    "ComponentSet",
    "EvalConfig",
    "EvalReport",
    "ExperimentalScorer",
    "GrayImage",
    "GroundTruthPair",
    "ThresholdSegmenter",
    "analyze_frame",
    "label_components",
    "load_image",
    "mask_from_components",
]
