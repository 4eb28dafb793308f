"""Word lists backing the annotation rules.

The lists ship as UTF-8 data files (one entry per line; number tables as
``word value`` pairs) so native speakers can audit them without reading
code. Everything is NFC-normalized on load.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..corpus import Language


def _read_lines(name: str) -> tuple[str, ...]:
    text = (
        resources.files(__package__)
        .joinpath("data", name)
        .read_text(encoding="utf-8")
    )
    return tuple(
        unicodedata.normalize("NFC", line.strip())
        for line in text.splitlines()
        if line.strip()
    )


def _read_numbers(name: str) -> dict[str, int]:
    table = {}
    for line in _read_lines(name):
        word, value = line.rsplit(" ", 1)
        table[word] = int(value)
    return table


@dataclass(frozen=True)
class Lexicons:
    negation: dict[Language, tuple[str, ...]]
    negation_exclusions_zh: tuple[str, ...]
    quantifiers: dict[Language, tuple[str, ...]]
    passive_exclusions_zh: tuple[str, ...]
    number_words: dict[Language, dict[str, int]]
    counters_ja: frozenset[str]


@lru_cache(maxsize=1)
def load_default() -> Lexicons:
    return Lexicons(
        negation={
            Language.EN: _read_lines("negation_en.txt"),
            Language.DE: _read_lines("negation_de.txt"),
            Language.ZH: _read_lines("negation_zh.txt"),
        },
        negation_exclusions_zh=_read_lines("negation_exclusions_zh.txt"),
        quantifiers={
            Language.EN: _read_lines("quantifiers_en.txt"),
            Language.ZH: _read_lines("quantifiers_zh.txt"),
            Language.JA: _read_lines("quantifiers_ja.txt"),
        },
        passive_exclusions_zh=_read_lines("passive_exclusions_zh.txt"),
        number_words={
            Language.EN: _read_numbers("numbers_en.txt"),
            Language.DE: _read_numbers("numbers_de.txt"),
            Language.ZH: _read_numbers("numbers_zh.txt"),
            Language.JA: _read_numbers("numbers_ja.txt"),
        },
        counters_ja=frozenset(_read_lines("counters_ja.txt")),
    )
