"""Edge-box proposal tracker: full-frame tracking-by-detection on
instance-specific objectness proposals, with structured-SVM and NCC cores."""

from .edgebox import EdgeStructures, Proposal, ProposalConfig, box_objectness, generate_pool
from .geometry import Box, LocalSampleConfig, clip_to_frame, iou, sample_local
from .tracker import EdgeBoxTracker, run, smoothness

__all__ = [
    "Box",
    "EdgeBoxTracker",
    "EdgeStructures",
    "LocalSampleConfig",
    "Proposal",
    "ProposalConfig",
    "box_objectness",
    "clip_to_frame",
    "generate_pool",
    "iou",
    "run",
    "sample_local",
    "smoothness",
]

__version__ = "0.1.0"
