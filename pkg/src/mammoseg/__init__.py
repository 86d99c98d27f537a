"""Mammogram breast extraction, level-set ROI detection and texture classification."""
from .raster import GrayImage, BinaryMask, LabelMap, OverlayImage, read_pgm, write_pgm
from .breast import extract_breast
from .levelset import SpeedParams, Schedule, detect, fast_march
from .features import RoiBox, FeatureVector, compute_glcm, feature_vector
from .classifiers import AcrLabel, TrainingSet, knn_classify, mlp_train, mlp_classify, evaluate
from .config import PipelineConfig, load_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "GrayImage", "BinaryMask", "LabelMap", "OverlayImage", "read_pgm", "write_pgm",
    "extract_breast", "SpeedParams", "Schedule", "detect", "fast_march",
    "RoiBox", "FeatureVector", "compute_glcm", "feature_vector",
    "AcrLabel", "TrainingSet", "knn_classify", "mlp_train", "mlp_classify", "evaluate",
    "PipelineConfig", "load_config", "BACKEND",
]
