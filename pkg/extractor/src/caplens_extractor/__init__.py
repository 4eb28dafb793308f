"""Image embedding extractor for the caplens analysis toolkit."""

__version__ = "0.1.0"

from .extract import (
    BACKBONES,
    ExtractorConfig,
    ExtractorError,
    ExtractResult,
    build_encoder,
    extract,
    read_id_mapping,
)
from .store import write_store

__all__ = [
    "BACKBONES",
    "ExtractResult",
    "ExtractorConfig",
    "ExtractorError",
    "build_encoder",
    "extract",
    "read_id_mapping",
    "write_store",
]
