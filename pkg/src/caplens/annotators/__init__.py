"""Rule-based linguistic property annotators."""

from .labels import (
    PARSE_LANGUAGES,
    SUPPORTED_LANGUAGES,
    Outcome,
    Property,
    PropertyLabel,
    read_labels,
    write_labels,
)
from .lexicons import Lexicons, load_default
from .numerals import recognize_numerals
from .rules import (
    COPULAR_LEMMAS,
    annotate_corpus,
    annotate_negation,
    annotate_numeral,
    annotate_passive,
    annotate_quantifier,
    annotate_root_pos,
    annotate_transitivity,
)

__all__ = [
    "COPULAR_LEMMAS",
    "Lexicons",
    "Outcome",
    "PARSE_LANGUAGES",
    "Property",
    "PropertyLabel",
    "SUPPORTED_LANGUAGES",
    "annotate_corpus",
    "annotate_negation",
    "annotate_numeral",
    "annotate_passive",
    "annotate_quantifier",
    "annotate_root_pos",
    "annotate_transitivity",
    "load_default",
    "read_labels",
    "recognize_numerals",
    "write_labels",
]
