"""caplens: linguistic property annotation and visual predictability analysis
for multilingual image-caption corpora."""

__version__ = "0.1.0"

from .corpus import (
    CaptionRecord,
    Corpus,
    ImageRecord,
    Language,
    ObjectAnnotation,
    Origin,
    align_multilingual,
    import_coco,
    load_canonical,
    merge,
    write_canonical,
)
from .annotators import Outcome, Property, PropertyLabel, annotate_corpus
from .conllu import DepSentence, DepToken, attach_parses, parse_conllu
from .errors import CaplensError

__all__ = [
    "CaplensError",
    "CaptionRecord",
    "Corpus",
    "DepSentence",
    "DepToken",
    "ImageRecord",
    "Language",
    "ObjectAnnotation",
    "Origin",
    "Outcome",
    "Property",
    "PropertyLabel",
    "align_multilingual",
    "annotate_corpus",
    "attach_parses",
    "import_coco",
    "load_canonical",
    "merge",
    "parse_conllu",
    "write_canonical",
]
