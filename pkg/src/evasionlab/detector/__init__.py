from .estimator import GatedConvDetector
from .model import (PAD_INDEX, DetectorConfig, bytes_to_ids, detector_forward,
                    detector_score, detector_score_batch, init_detector_params)
from .oracle import DetectionOracle

__all__ = [
    "GatedConvDetector", "PAD_INDEX", "DetectorConfig", "bytes_to_ids",
    "detector_forward", "detector_score", "detector_score_batch",
    "init_detector_params", "DetectionOracle",
]
