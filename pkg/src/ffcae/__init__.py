"""Unsupervised change detection for bi-temporal hyperspectral image pairs.

One convolutional autoencoder with twin-kernel encoder branches learns to
reconstruct both images of a co-registered pair; the code-layer feature
maps are entropy-filtered, differenced (absolute difference or spectral
angle), and clustered into changed/unchanged pixels. Evaluation,
cross-method ranking, and Tukey HSD significance testing are included.
"""

from .analysis import (
    ChangeMap,
    DifferenceImage,
    FeatureSelection,
    compute_change_map,
    decide_change,
    diff_ad,
    diff_sam,
    image_entropy,
    kmeans2,
    select_feature_maps,
)
from .cube import (
    GroundTruth,
    HyperCube,
    SceneSpec,
    drop_zero_entropy_bands,
    informative_band_mask,
    normalize_bands,
    synthesize_pair,
)
from .metrics import (
    ConfusionMatrix,
    MetricReport,
    compute_metrics,
    confusion,
    textbook_miss_rate,
)
from .model import (
    FfcaeConfig,
    FfcaeModel,
    build_model,
    decode,
    encode,
    extract_dfm,
    load_model,
    save_model,
    train,
)
from .ranking import (
    RankTable,
    ScoreCube,
    TukeyResult,
    mse_from_ranks,
    rank_methods,
    rank_sse,
    tukey_hsd,
)
from .storage import load_cube, load_ground_truth, read_pgm, save_cube, write_pgm

__version__ = "0.1.0"

__all__ = [
    "ChangeMap",
    "ConfusionMatrix",
    "DifferenceImage",
    "FeatureSelection",
    "FfcaeConfig",
    "FfcaeModel",
    "GroundTruth",
    "HyperCube",
    "MetricReport",
    "RankTable",
    "SceneSpec",
    "ScoreCube",
    "TukeyResult",
    "build_model",
    "compute_change_map",
    "compute_metrics",
    "confusion",
    "decide_change",
    "decode",
    "diff_ad",
    "diff_sam",
    "drop_zero_entropy_bands",
    "encode",
    "extract_dfm",
    "image_entropy",
    "informative_band_mask",
    "kmeans2",
    "load_cube",
    "load_ground_truth",
    "load_model",
    "mse_from_ranks",
    "normalize_bands",
    "rank_methods",
    "rank_sse",
    "read_pgm",
    "save_cube",
    "save_model",
    "select_feature_maps",
    "synthesize_pair",
    "textbook_miss_rate",
    "train",
    "tukey_hsd",
    "write_pgm",
]
