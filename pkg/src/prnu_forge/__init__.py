"""PRNU sensor fingerprinting, source attribution and DCT-domain de-identification."""
from .deident import (
    DCTAnonymizer,
    DCTSpoofer,
    SpoofConfig,
    anonymize,
    baseline_inject,
    baseline_remove,
    baseline_substitute,
    spoof,
    target_high_field,
)
from .denoise import ResidualExtractor, enhance_residual, extract_residual
from .identify import AttributionResult, PRNUClassifier, accuracy, attribute, ncc
from .imgcore import (
    DatasetManifest,
    SensorManifest,
    load_image,
    load_manifest,
    save_image,
)
from .prnu import (
    ReferencePattern,
    Scheme,
    build_reference,
    estimate_enhanced,
    estimate_mle,
    estimate_phase,
    estimate_reference,
    zero_mean,
)
from .transform import compute_alpha, dct2, high_select, idct2

__version__ = "0.1.0"

__all__ = [
    "AttributionResult", "DCTAnonymizer", "DCTSpoofer", "DatasetManifest", "PRNUClassifier",
    "ReferencePattern", "ResidualExtractor", "Scheme", "SensorManifest", "SpoofConfig",
    "accuracy", "anonymize", "attribute", "baseline_inject", "baseline_remove",
    "baseline_substitute", "build_reference", "compute_alpha", "dct2", "enhance_residual",
    "estimate_enhanced", "estimate_mle", "estimate_phase", "estimate_reference",
    "extract_residual", "high_select", "idct2", "load_image", "load_manifest", "ncc",
    "save_image", "spoof", "target_high_field", "zero_mean",
]
