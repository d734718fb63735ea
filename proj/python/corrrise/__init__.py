"""CorrRISE saliency maps for face verification, with deletion/insertion metrics.

Images are float arrays in [0, 1] shaped (H, W) or (H, W, C). Saliency maps are (H, W).
"""

from ._corrrise import (
    Backend,
    BackendError,
    ConfigError,
    ContractError,
    DataError,
    DegenerateInputError,
    Error,
    FormatError,
    UnsupportedOperation,
    auc,
    baseline_saliency,
    calibrate_threshold,
    constant_backend,
    correlation_map,
    cosine_similarity,
    deletion_curve,
    explain_pair,
    generate_masks,
    insertion_curve,
    load_backend,
    load_saliency,
    localization_suite,
    onnx_backend,
    pearson,
    save_saliency,
    split_signed,
    toy_suite,
    verification_accuracy,
)

__version__ = "0.1.0"
