"""Patch-level anomaly detection over a nearest-neighbor memory bank.

Normal images are represented as a bank of patch feature vectors.  At
inference each query patch retrieves its nearest bank entry and the
retrieved distance, normalized by the entry's stored local density, is
the patch's anomaly score; the image score is the grid maximum.  The
package also ships K-NN family baseline scorers, greedy k-center bank
subsampling, a synthetic-defect generator for self-supervised training
data, AUROC/throughput evaluation, binary tensor and manifest file
formats, and a command-line front end.
"""

from .bank import (
    LocalDensityBank,
    MemoryBank,
    PatchFeatureSet,
    aggregate_hierarchies,
    build_memory_bank,
    learn_local_density,
    load_bank,
    load_memory_bank,
    save_bank,
    save_memory_bank,
)
from .coreset import CoresetSelection, apply_selection, cover_radius, greedy_kcenter
from .estimator import MemoryBankDetector
from .exceptions import (
    DataError,
    FormatError,
    GenerationError,
    PatchBankError,
    PlacementError,
)
from .metrics import BenchmarkRecord, auroc, benchmark_fps, evaluate_dataset
from .scoring import (
    METHODS,
    AnomalyResult,
    PatchScoreGrid,
    ScorerConfig,
    kthnn_score,
    knn_score,
    ldknn_score_patch,
    ldof_score,
    lof_score,
    nearest_neighbor,
    score_image,
    score_patches,
    upsample_map,
)
from .synth import (
    DefectConfig,
    ShapeMask,
    SynthSample,
    bezier_curve_points,
    derive_rng,
    fuse_defect,
    gen_bezier_blob,
    gen_bezier_clump,
    gen_bezier_scar,
    gen_cutpaste_fill,
    gen_noise_fill,
    gen_rect_shape,
    generate_samples,
    label_for,
    make_sample,
    place_defect,
)
from .tensor_io import (
    FeatureTensor,
    ManifestRow,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "AnomalyResult",
    "BenchmarkRecord",
    "CoresetSelection",
    "DataError",
    "DefectConfig",
    "FeatureTensor",
    "FormatError",
    "GenerationError",
    "LocalDensityBank",
    "ManifestRow",
    "MemoryBank",
    "MemoryBankDetector",
    "METHODS",
    "PatchBankError",
    "PatchFeatureSet",
    "PatchScoreGrid",
    "PlacementError",
    "ScorerConfig",
    "ShapeMask",
    "SynthSample",
    "aggregate_hierarchies",
    "apply_selection",
    "auroc",
    "benchmark_fps",
    "bezier_curve_points",
    "build_memory_bank",
    "cover_radius",
    "derive_rng",
    "evaluate_dataset",
    "fuse_defect",
    "gen_bezier_blob",
    "gen_bezier_clump",
    "gen_bezier_scar",
    "gen_cutpaste_fill",
    "gen_noise_fill",
    "gen_rect_shape",
    "generate_samples",
    "greedy_kcenter",
    "kthnn_score",
    "knn_score",
    "label_for",
    "ldknn_score_patch",
    "ldof_score",
    "learn_local_density",
    "load_bank",
    "load_memory_bank",
    "lof_score",
    "make_sample",
    "nearest_neighbor",
    "place_defect",
    "read_manifest",
    "read_tensor",
    "save_bank",
    "save_memory_bank",
    "score_image",
    "score_patches",
    "upsample_map",
    "write_manifest",
    "write_tensor",
]
