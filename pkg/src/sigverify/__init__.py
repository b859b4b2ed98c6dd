"""On-line signature verification with intelligent enrollment.

Pipeline: tablet channels -> normalization and derived channels -> DCT
features -> pairwise quadratic discriminant scores -> calibrated common or
individual thresholds, with consistency-checked enrollment and failure to
enroll management.
"""

from .calibration import SystemParameters, adjust_system, individual_threshold
from .corpus import Corpus, GeneratorConfig, generate_synthetic_corpus, load_corpus, save_corpus, split_corpus
from .enrollment import (
    EnrollmentMode,
    EnrollmentSession,
    EnrollmentTemplate,
    SessionState,
    consistency_check,
    enroll_step,
    fuse,
    signature_features,
    verify,
)
from .features import dct_coefficients, extract_features
from .matcher import PairSample, TrainedMatcher, build_pairs, finalize, score, select_features, train, train_matcher
from .metrics import CostModel, ScoreSets, compute_rates, dcf, det_curve, eer, min_dcf
from .model_io import ModelEntry, ModelFile, load_model, save_model
from .signals import ChannelSet, RawSignature, derive_channels, normalize
from .simulation import SimulationConfig, SimulationReport, emit_report, run_simulation

__version__ = "0.1.0"
