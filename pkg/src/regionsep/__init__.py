"""Query-by-region music source separation with hyperellipsoidal queries."""

from .geometry import Hyperellipsoid, contains, interpolate, mahalanobis, to_query_vector
from .precompute import (PrecomputeConfig, QuerySpec, enclosing_ellipsoid,
                         excluding_radii, precompute_clip, sample_training_query,
                         single_source_query, validation_query)
from .signal import AudioChunk, Spectrogram, StftConfig, dbrms, istft, snr, stft

__all__ = [
    "AudioChunk", "Spectrogram", "StftConfig", "stft", "istft", "dbrms", "snr",
    "Hyperellipsoid", "mahalanobis", "contains", "to_query_vector", "interpolate",
    "QuerySpec", "PrecomputeConfig", "enclosing_ellipsoid", "excluding_radii",
    "precompute_clip", "sample_training_query", "validation_query",
    "single_source_query",
]

__version__ = "0.1.0"
