"""Skeleton-based meeting engagement detection.

Skeleton streams go through a bank of 16 binary posture and motion
classifiers, a one-vs-rest linear SVM trained with SMO, an Action override
driven by hand speed, and team-level aggregation.
"""
__version__ = "0.1.0"

from .features import ClassifierThresholds, FeatureBank, FeatureVector, WindowMeasures
from .pipeline import EngagementClassifier, FrameResult, PipelineConfig, process_stream
from .skeleton import Joint, SkeletonFrame, SkeletonStream, parse_stream, serialize_stream
from .states import EngagementState
from .svm import MulticlassModel, OneVsRestSMO, SMOClassifier, TrainParams
from .team import TeamSnapshot, aggregate, align_streams

__all__ = [
    "ClassifierThresholds",
    "EngagementClassifier",
    "EngagementState",
    "FeatureBank",
    "FeatureVector",
    "FrameResult",
    "Joint",
    "MulticlassModel",
    "OneVsRestSMO",
    "PipelineConfig",
    "SMOClassifier",
    "SkeletonFrame",
    "SkeletonStream",
    "TeamSnapshot",
    "TrainParams",
    "WindowMeasures",
    "aggregate",
    "align_streams",
    "parse_stream",
    "process_stream",
    "serialize_stream",
]
