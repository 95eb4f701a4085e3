"""Dense automatic annotation of sign language video from subtitles."""

__version__ = "0.1.0"

from .core import (
    FeatureSequence,
    FeatureWindow,
    Source,
    SpotterConfig,
    Spotting,
    SubtitleRecord,
    VoteVector,
)
from .errors import ConfigError, ContractError, DensifyError, FormatError

__all__ = [
    "ConfigError",
    "ContractError",
    "DensifyError",
    "FeatureSequence",
    "FeatureWindow",
    "FormatError",
    "Source",
    "SpotterConfig",
    "Spotting",
    "SubtitleRecord",
    "VoteVector",
]
