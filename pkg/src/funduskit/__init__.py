"""funduskit: batch toolkit for retinal fundus image pipelines.

Preprocessing and quality gating of fundus photographs, person-grouped
dataset splitting, left/right prediction fusion, and bootstrap-based
statistical evaluation, wired together by a file-interfaced CLI so a
training harness can plug in through the shared formats.
"""

from .bootstrap import BootstrapConfig, BootstrapResult, bootstrap_ci
from .dataset import (
    ClassWeights,
    ParticipantRecord,
    SplitAssignment,
    aggregate_measurements,
    binarize_smoking,
    class_weights,
    grouped_split,
    load_manifest,
    stratified_split,
    undersample_majority,
)
from .fusion import PredictionRecord, fuse_all, fuse_pair
from .imaging import (
    AugmentSpec,
    EnhanceParams,
    ImageBuffer,
    MaskBounds,
    PreprocessConfig,
    RangeTag,
    augment,
    crop_resize,
    detect_mask,
    gaussian_blur,
    graham_enhance,
    normalize,
    preprocess,
)
from .metrics import baseline_continuous, mae, pr_auc, r2, roc_auc, threshold_metrics
from .quality import (
    ContingencyTable2x2,
    QualityScore,
    apply_threshold,
    chi_square_independence,
    filter_both_eyes_good,
)
from .reports import MetricReport, subgroup_report

__version__ = "0.1.0"
