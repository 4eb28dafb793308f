"""Numeral recognition for English, German, Chinese and Japanese captions.

Recognition is deliberately table-driven and exhaustively unit-testable
rather than delegating to an off-the-shelf recognizer:

* Arabic digit runs count in every language. Full-width digits are folded to
  ASCII, thousands groups (``1,000`` / ``1.000`` for German) are joined, and
  leading zeros are allowed. English digit runs with an ordinal suffix
  (``2nd``) are not numerals.
* English and German use the shipped number-word tables, including compounds
  (``twenty-one``, ``einundzwanzig``, ``zweihundert``).
* Chinese composes 一二两三四五六七八九 with 十/百/千.
* Japanese composes the same characters minus 一 and 两; 一 is excluded
  entirely because common non-numeral words contain it. A Japanese numeral
  only counts when followed by a counter character or standing alone
  (not embedded between Han ideographs).

Word ordinals (``first``, ``zweite``) are absent from the tables on purpose:
they order rather than count.
"""

from __future__ import annotations

import re

from ..corpus import CaptionRecord, Language
from ..errors import UnsupportedLanguageError
from .lexicons import Lexicons, load_default

_FULLWIDTH_DIGITS = str.maketrans("０１２３４５６７８９", "0123456789")

# Digit runs with optional thousands grouping; longest alternative first.
_DIGITS_COMMA = re.compile(r"\d{1,3}(?:,\d{3})+|\d+")
_DIGITS_DOT = re.compile(r"\d{1,3}(?:\.\d{3})+|\d+")

_EN_TOKEN = re.compile(r"(?P<num>\d{1,3}(?:,\d{3})+|\d+)(?P<ord>st|nd|rd|th)?|(?P<word>[a-z']+)")
_DE_TOKEN = re.compile(r"(?P<num>\d{1,3}(?:\.\d{3})+|\d+)|(?P<word>[a-zäöüß]+)")

_CJK_MULTIPLIERS = {"十": 10, "百": 100, "千": 1000}


def _is_han(ch: str) -> bool:
    return "一" <= ch <= "鿿"


def _digit_value(run: str) -> int:
    return int(run.replace(",", "").replace(".", ""))


# --------------------------------------------------------------------------
# English
# --------------------------------------------------------------------------

def _word_kind(value: int) -> str:
    if value >= 100:
        return "mult"
    if value >= 20:
        return "ten"
    if value >= 10:
        return "teen"
    return "unit"


_NEXT_ALLOWED = {
    "start": {"unit", "teen", "ten", "mult"},
    "unit": {"mult"},
    "teen": {"mult"},
    "ten": {"unit", "mult"},
    "mult": {"unit", "teen", "ten", "mult"},
}


def _recognize_en(text: str, table: dict[str, int]) -> list[int]:
    text = text.lower().replace("’", "'").replace("-", " ")
    values: list[int] = []
    group: list[int] = []
    state = "start"

    def flush() -> None:
        nonlocal group, state
        if group:
            total = current = 0
            for v in group:
                if v >= 100:
                    current = (current or 1) * v
                    if v >= 1000:
                        total += current
                        current = 0
                else:
                    current += v
            values.append(total + current)
        group = []
        state = "start"

    for match in _EN_TOKEN.finditer(text):
        if match.group("num") is not None:
            flush()
            if match.group("ord") is None:
                values.append(_digit_value(match.group("num")))
            continue
        word = match.group("word").strip("'")
        value = table.get(word)
        if value is None:
            flush()
            continue
        if _word_kind(value) not in _NEXT_ALLOWED[state]:
            flush()
        group.append(value)
        state = _word_kind(value)
    flush()
    return values


# --------------------------------------------------------------------------
# German
# --------------------------------------------------------------------------

def _parse_de_word(token: str, table: dict[str, int]) -> int | None:
    """Decompose a German compound number word; None if not a numeral."""
    if token in table:
        return table[token]
    if "tausend" in token:
        pre, _, post = token.partition("tausend")
        pv = _parse_de_word(pre, table) if pre else 1
        if pv is None or pv >= 1000:
            return None
        if post.startswith("und"):
            post = post[3:]
        qv = _parse_de_word(post, table) if post else 0
        if qv is None or qv >= 1000:
            return None
        return pv * 1000 + qv
    if "hundert" in token:
        pre, _, post = token.partition("hundert")
        pv = _parse_de_word(pre, table) if pre else 1
        if pv is None or pv > 9:
            return None
        if post.startswith("und"):
            post = post[3:]
        qv = _parse_de_word(post, table) if post else 0
        if qv is None or qv >= 100:
            return None
        return pv * 100 + qv
    if "und" in token:
        pre, _, post = token.partition("und")
        pv = table.get(pre)
        qv = table.get(post)
        if pv is None or qv is None:
            return None
        if 1 <= pv <= 9 and 20 <= qv <= 90 and qv % 10 == 0:
            return pv + qv
    return None


def _recognize_de(text: str, table: dict[str, int]) -> list[int]:
    values = []
    for match in _DE_TOKEN.finditer(text.lower()):
        if match.group("num") is not None:
            values.append(_digit_value(match.group("num")))
            continue
        value = _parse_de_word(match.group("word"), table)
        if value is not None:
            values.append(value)
    return values


# --------------------------------------------------------------------------
# Chinese and Japanese
# --------------------------------------------------------------------------

def _cjk_run_values(run: str, digits: dict[str, int]) -> list[int]:
    """Compose one maximal CJK numeral run into values.

    A digit directly following another digit starts a new numeral, so
    enumeration patterns like 三四 yield two values.
    """
    values = []
    total = current = 0
    started = False
    for ch in run:
        if ch in _CJK_MULTIPLIERS:
            total += (current or 1) * _CJK_MULTIPLIERS[ch]
            current = 0
            started = True
        else:
            if current != 0:
                values.append(total + current)
                total = 0
            current = digits[ch]
            started = True
    if started:
        values.append(total + current)
    return values


def _recognize_zh(text: str, table: dict[str, int]) -> list[int]:
    digits = {w: v for w, v in table.items() if v < 10}
    alphabet = set(digits) | set(_CJK_MULTIPLIERS)
    text = text.translate(_FULLWIDTH_DIGITS)
    values = []
    events: list[tuple[int, list[int]]] = []
    for match in _DIGITS_COMMA.finditer(text):
        events.append((match.start(), [_digit_value(match.group())]))
    i = 0
    while i < len(text):
        if text[i] in alphabet:
            j = i
            while j < len(text) and text[j] in alphabet:
                j += 1
            events.append((i, _cjk_run_values(text[i:j], digits)))
            i = j
        else:
            i += 1
    for _, vals in sorted(events, key=lambda e: e[0]):
        values.extend(vals)
    return values


def _recognize_ja(
    text: str, table: dict[str, int], counters: frozenset[str]
) -> list[int]:
    digits = {w: v for w, v in table.items() if v < 10}
    alphabet = set(digits) | set(_CJK_MULTIPLIERS)
    text = text.translate(_FULLWIDTH_DIGITS)

    def counted(start: int, end: int) -> bool:
        nxt = text[end] if end < len(text) else ""
        if nxt in counters:
            return True
        prev = text[start - 1] if start > 0 else ""
        return not _is_han(prev) and not _is_han(nxt)

    events: list[tuple[int, list[int]]] = []
    for match in _DIGITS_COMMA.finditer(text):
        if counted(match.start(), match.end()):
            events.append((match.start(), [_digit_value(match.group())]))
    i = 0
    while i < len(text):
        if text[i] in alphabet:
            j = i
            while j < len(text) and text[j] in alphabet:
                j += 1
            if counted(i, j):
                events.append((i, _cjk_run_values(text[i:j], digits)))
            i = j
        else:
            i += 1
    values = []
    for _, vals in sorted(events, key=lambda e: e[0]):
        values.extend(vals)
    return values


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def recognize_numerals(
    text: str, language: Language, lexicons: Lexicons | None = None
) -> list[int]:
    """All numeral values found in ``text``, in order of occurrence.

    Values of 1 are included here; the annotator applies the >= 2 rule.
    """
    lex = lexicons or load_default()
    table = lex.number_words.get(language)
    if table is None:
        raise UnsupportedLanguageError(f"no numeral rules for {language!r}")
    if language is Language.EN:
        return _recognize_en(text, table)
    if language is Language.DE:
        return _recognize_de(text, table)
    if language is Language.ZH:
        return _recognize_zh(text, table)
    if language is Language.JA:
        return _recognize_ja(text, table, lex.counters_ja)
    raise UnsupportedLanguageError(f"no numeral rules for {language}")
