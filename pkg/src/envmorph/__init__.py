"""envmorph: perceptually grounded temporal-envelope morphing toolkit."""

from .envelope import (
    FRAME_COUNT,
    FRAME_RATE,
    AudioClip,
    Envelope,
    ExtractionConfig,
    analytic_magnitude,
    extract_envelope,
    load_envelope,
    lowpass,
    resample_frames,
    rmse,
    save_envelope,
)
from .errors import (
    CheckpointMissing,
    CorruptCheckpoint,
    CorruptFile,
    EnvMorphError,
    GenerationExhausted,
    InvalidArgument,
    InvalidExpectation,
    InvalidMap,
    InvalidSpec,
    NumericFailure,
    TemplateMissing,
)

__version__ = "0.1.0"
