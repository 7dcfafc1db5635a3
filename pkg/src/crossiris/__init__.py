"""Cross-sensor iris recognition: images to iris codes, matching, and biometric evaluation."""

from .encoder import IrisCode, LogGaborParams, encode, load_code, save_code
from .estimators import IdentityMatcher, IrisEncoder, MislabelDetector
from .evaluation import EvalReport, ScoreSet, evaluate, eer, operating_points, roc, roc_auc
from .exceptions import DataError, IoError, IrisError
from .iso_image import EyeImage, ImageKind, PupilDescriptor, load_image, save_image
from .matcher import Aggregation, DigitalIdentity, cross_match, hamming_similarity, similarity_matrix
from .pipeline import PipelineConfig, encode_image, run_pipeline
from .sigset import SigSet, parse_sigset
from .synth import SynthConfig, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "Aggregation", "DataError", "DigitalIdentity", "EvalReport", "EyeImage", "IdentityMatcher",
    "ImageKind", "IoError", "IrisCode", "IrisEncoder", "IrisError", "LogGaborParams",
    "MislabelDetector", "PipelineConfig", "PupilDescriptor", "ScoreSet", "SigSet", "SynthConfig",
    "cross_match", "encode", "encode_image", "eer", "evaluate", "generate_dataset",
    "hamming_similarity", "load_code", "load_image", "operating_points", "parse_sigset", "roc",
    "roc_auc", "run_pipeline", "save_code", "save_image", "similarity_matrix",
]
