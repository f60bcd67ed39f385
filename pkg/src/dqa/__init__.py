"""Diagnostic quality assessment for compressed and reconstructed ECGs.

The package covers the full study pipeline: signal ingestion and
clinical-grid rendering geometry (:mod:`dqa.signal_io`), a low-dimensional
beat model fitted by separable nonlinear least squares
(:mod:`dqa.beat_model`), waveform distortion measures
(:mod:`dqa.distortion_metrics`), chance-corrected agreement statistics
(:mod:`dqa.agreement_stats`), blinded randomized study construction
(:mod:`dqa.study_builder`), the rating service raters connect to
(:mod:`dqa.session_service`), and the agreement analyses over collected
responses (:mod:`dqa.analysis_report`).
"""

from .agreement_stats import ContingencyTable, KappaResult, contingency, kappa
from .beat_model import (
    BasisConfig,
    BeatModelFit,
    IllConditionedError,
    fit_beat,
    reconstruct,
    segment,
)
from .distortion_metrics import DistortionResult, WaveletConfig, evaluate, prd
from .signal_io import (
    Record,
    RenderSpec,
    Strip,
    extract_strip,
    load_record,
    render_params,
    save_record,
)
from .study_builder import (
    BlindingKey,
    QuestionnaireSchema,
    StudyConfig,
    StudyManifest,
    StudyRecord,
    build_study,
    validate_study,
)

__version__ = "0.1.0"

__all__ = [
    "BasisConfig",
    "BeatModelFit",
    "BlindingKey",
    "ContingencyTable",
    "DistortionResult",
    "IllConditionedError",
    "KappaResult",
    "QuestionnaireSchema",
    "Record",
    "RenderSpec",
    "Strip",
    "StudyConfig",
    "StudyManifest",
    "StudyRecord",
    "WaveletConfig",
    "build_study",
    "contingency",
    "evaluate",
    "extract_strip",
    "fit_beat",
    "kappa",
    "load_record",
    "prd",
    "reconstruct",
    "render_params",
    "save_record",
    "segment",
    "validate_study",
    "__version__",
]
