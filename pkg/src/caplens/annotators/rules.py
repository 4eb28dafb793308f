"""Caption-level annotation rules for the five linguistic properties.

Each ``annotate_*`` function is a pure function of a caption (and, where the
rule is syntactic, its dependency parse) returning a ternary
:class:`PropertyLabel`: positive, negative, or filtered. Filtered labels are
excluded from probability computations downstream; they are neither 0 nor 1.

``annotate_corpus`` applies one property to a whole corpus, turning
per-caption rule preconditions (missing parse, unsupported language) into
filtered labels with reasons instead of raising.
"""

from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from typing import Iterable, Mapping

from ..conllu import PASSIVE_RELATIONS, DepSentence, ParseIndex, children, roots
from ..corpus import CaptionRecord, Corpus, Language
from ..errors import CaplensError, UnsupportedLanguageError
from .labels import (
    PARSE_LANGUAGES,
    SUPPORTED_LANGUAGES,
    Outcome,
    Property,
    PropertyLabel,
)
from .lexicons import Lexicons, load_default
from .numerals import recognize_numerals

#: Root lemmas treated as copular per language: no activity is described.
COPULAR_LEMMAS = {Language.EN: "be", Language.DE: "sein", Language.ZH: "有"}

_WORD = re.compile(r"[a-z']+")


def _require_language(property: Property, language: Language) -> None:
    if language not in SUPPORTED_LANGUAGES[property]:
        raise UnsupportedLanguageError(
            f"{property.value} rules do not cover language {language.value!r}"
        )


def _exclusion_spans(text: str, exclusions: Iterable[str]) -> list[tuple[int, int]]:
    spans = []
    for word in exclusions:
        start = text.find(word)
        while start != -1:
            spans.append((start, start + len(word)))
            start = text.find(word, start + 1)
    return spans


def _suppressed(start: int, end: int, spans: list[tuple[int, int]]) -> bool:
    return any(start >= s and end <= e for s, e in spans)


# --------------------------------------------------------------------------
# Numerals
# --------------------------------------------------------------------------

def annotate_numeral(
    caption: CaptionRecord, lexicons: Lexicons | None = None
) -> tuple[PropertyLabel, list[int]]:
    """Positive iff the caption contains a numeral with integer value >= 2.

    Value-1 forms (*one*, *ein(e)*, 一, the digit 1) never count. Returns the
    label together with the counted values in order of occurrence.
    """
    _require_language(Property.NUM, caption.language)
    values = [
        v for v in recognize_numerals(caption.text, caption.language, lexicons) if v >= 2
    ]
    if values:
        label = PropertyLabel(
            caption.caption_id,
            Property.NUM,
            Outcome.POSITIVE,
            detail=",".join(str(v) for v in values),
        )
    else:
        label = PropertyLabel(caption.caption_id, Property.NUM, Outcome.NEGATIVE)
    return label, values


# --------------------------------------------------------------------------
# Quantifiers
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _phrase_pattern(phrase: str) -> re.Pattern[str]:
    return re.compile(r"\b" + re.escape(phrase).replace("\\ ", r"\s+") + r"\b")


def annotate_quantifier(
    caption: CaptionRecord, lexicons: Lexicons | None = None
) -> PropertyLabel:
    """Positive iff a quantifier from the language's list occurs.

    English uses word-boundary phrase matching on lowercased text; Chinese
    and Japanese use substring matching on the NFC text. German has no list.
    """
    _require_language(Property.QUANT, caption.language)
    lex = lexicons or load_default()
    entries = lex.quantifiers[caption.language]
    if caption.language is Language.EN:
        text = caption.text.lower()
        for phrase in entries:
            if _phrase_pattern(phrase).search(text):
                return PropertyLabel(
                    caption.caption_id, Property.QUANT, Outcome.POSITIVE, detail=phrase
                )
    else:
        for entry in entries:
            if entry in caption.text:
                return PropertyLabel(
                    caption.caption_id, Property.QUANT, Outcome.POSITIVE, detail=entry
                )
    return PropertyLabel(caption.caption_id, Property.QUANT, Outcome.NEGATIVE)


# --------------------------------------------------------------------------
# Negation
# --------------------------------------------------------------------------

def annotate_negation(
    caption: CaptionRecord,
    parse: DepSentence | None = None,
    lexicons: Lexicons | None = None,
) -> PropertyLabel:
    """Negation-word matching: En word tokens, De lemmas, Zh longest match.

    Chinese matches are suppressed when they fall inside an entry of the
    exclusion list (别着, 不小心, 不一样). German requires a parse for
    lemmas; without one the caption is filtered with reason ``no-parse``.
    """
    _require_language(Property.NEG, caption.language)
    lex = lexicons or load_default()
    entries = lex.negation[caption.language]

    if caption.language is Language.EN:
        text = caption.text.lower().replace("’", "'")
        for m in _WORD.finditer(text):
            token = m.group().strip("'")
            if token in entries:
                return PropertyLabel(
                    caption.caption_id, Property.NEG, Outcome.POSITIVE, detail=token
                )
        return PropertyLabel(caption.caption_id, Property.NEG, Outcome.NEGATIVE)

    if caption.language is Language.DE:
        if parse is None:
            return PropertyLabel(
                caption.caption_id, Property.NEG, Outcome.FILTERED, detail="no-parse"
            )
        entry_set = set(entries)
        for token in parse.tokens:
            if token.lemma.lower() in entry_set:
                return PropertyLabel(
                    caption.caption_id,
                    Property.NEG,
                    Outcome.POSITIVE,
                    detail=token.lemma.lower(),
                )
        return PropertyLabel(caption.caption_id, Property.NEG, Outcome.NEGATIVE)

    # Chinese: longest-match scan with exclusion suppression.
    text = caption.text
    spans = _exclusion_spans(text, lex.negation_exclusions_zh)
    by_length = sorted(entries, key=len, reverse=True)
    for i in range(len(text)):
        for entry in by_length:
            if text.startswith(entry, i) and not _suppressed(i, i + len(entry), spans):
                return PropertyLabel(
                    caption.caption_id, Property.NEG, Outcome.POSITIVE, detail=entry
                )
    return PropertyLabel(caption.caption_id, Property.NEG, Outcome.NEGATIVE)


# --------------------------------------------------------------------------
# Verbal vs nominal root
# --------------------------------------------------------------------------

def annotate_root_pos(
    caption: CaptionRecord, parse: DepSentence | None
) -> PropertyLabel:
    """Positive = verbal root, negative = nominal root.

    Captions are filtered unless they have exactly one root whose UPOS is
    VERB, NOUN or PROPN. Copular roots (lemma *be*/*sein*/有) are nominal
    even when tagged VERB, as no activity is described.
    """
    _require_language(Property.VERB, caption.language)
    if parse is None:
        return PropertyLabel(
            caption.caption_id, Property.VERB, Outcome.FILTERED, detail="no-parse"
        )
    root_tokens = roots(parse)
    if len(root_tokens) != 1:
        return PropertyLabel(
            caption.caption_id,
            Property.VERB,
            Outcome.FILTERED,
            detail=f"root-count={len(root_tokens)}",
        )
    root = root_tokens[0]
    if root.upos not in ("VERB", "NOUN", "PROPN"):
        return PropertyLabel(
            caption.caption_id,
            Property.VERB,
            Outcome.FILTERED,
            detail=f"root-pos={root.upos}",
        )
    if root.lemma == COPULAR_LEMMAS[caption.language]:
        return PropertyLabel(caption.caption_id, Property.VERB, Outcome.NEGATIVE)
    if root.upos == "VERB":
        return PropertyLabel(
            caption.caption_id, Property.VERB, Outcome.POSITIVE, detail=root.form
        )
    return PropertyLabel(caption.caption_id, Property.VERB, Outcome.NEGATIVE)


# --------------------------------------------------------------------------
# Transitivity
# --------------------------------------------------------------------------

def annotate_transitivity(
    caption: CaptionRecord, parse: DepSentence | None
) -> PropertyLabel:
    """Positive = transitive: the root verb has a direct-object child.

    Filtered when the root is not a single verb or is copular. Parser edge
    cases are corrected per language: a German root with a PTKVZ-tagged
    child is intransitive (separated verb prefix, not an object-taking
    verb); a Chinese root whose lemma ends in 在, or that is followed by a
    token with lemma 在 or a lemma starting with 向, is intransitive.
    """
    _require_language(Property.TRAN, caption.language)
    if parse is None:
        return PropertyLabel(
            caption.caption_id, Property.TRAN, Outcome.FILTERED, detail="no-parse"
        )
    root_tokens = roots(parse)
    if len(root_tokens) != 1:
        return PropertyLabel(
            caption.caption_id,
            Property.TRAN,
            Outcome.FILTERED,
            detail=f"root-count={len(root_tokens)}",
        )
    root = root_tokens[0]
    if root.upos != "VERB":
        return PropertyLabel(
            caption.caption_id,
            Property.TRAN,
            Outcome.FILTERED,
            detail=f"root-pos={root.upos}",
        )
    if root.lemma == COPULAR_LEMMAS[caption.language]:
        return PropertyLabel(
            caption.caption_id, Property.TRAN, Outcome.FILTERED, detail="copular-root"
        )

    if caption.language is Language.DE:
        if any(t.xpos == "PTKVZ" for t in children(parse, root.index)):
            return PropertyLabel(caption.caption_id, Property.TRAN, Outcome.NEGATIVE)
    if caption.language is Language.ZH:
        if root.lemma.endswith("在"):
            return PropertyLabel(caption.caption_id, Property.TRAN, Outcome.NEGATIVE)
        if root.index < len(parse.tokens):
            following = parse.tokens[root.index]
            if following.lemma == "在" or following.lemma.startswith("向"):
                return PropertyLabel(
                    caption.caption_id, Property.TRAN, Outcome.NEGATIVE
                )

    objects = children(parse, root.index, "obj")
    if objects:
        return PropertyLabel(
            caption.caption_id, Property.TRAN, Outcome.POSITIVE, detail=objects[0].form
        )
    return PropertyLabel(caption.caption_id, Property.TRAN, Outcome.NEGATIVE)


# --------------------------------------------------------------------------
# Passive voice
# --------------------------------------------------------------------------

def annotate_passive(
    caption: CaptionRecord,
    parse: DepSentence | None = None,
    lexicons: Lexicons | None = None,
) -> PropertyLabel:
    """En/De: passive dependency relation present. Zh: 被 outside 被子."""
    _require_language(Property.PASS, caption.language)
    if caption.language in (Language.EN, Language.DE):
        if parse is None:
            return PropertyLabel(
                caption.caption_id, Property.PASS, Outcome.FILTERED, detail="no-parse"
            )
        for token in parse.tokens:
            if token.deprel in PASSIVE_RELATIONS:
                return PropertyLabel(
                    caption.caption_id,
                    Property.PASS,
                    Outcome.POSITIVE,
                    detail=token.deprel,
                )
        return PropertyLabel(caption.caption_id, Property.PASS, Outcome.NEGATIVE)

    lex = lexicons or load_default()
    text = caption.text
    spans = _exclusion_spans(text, lex.passive_exclusions_zh)
    start = text.find("被")
    while start != -1:
        if not _suppressed(start, start + 1, spans):
            return PropertyLabel(
                caption.caption_id, Property.PASS, Outcome.POSITIVE, detail="被"
            )
        start = text.find("被", start + 1)
    return PropertyLabel(caption.caption_id, Property.PASS, Outcome.NEGATIVE)


# --------------------------------------------------------------------------
# Corpus-level driver
# --------------------------------------------------------------------------

def _annotate_one(
    caption: CaptionRecord, parse: DepSentence | None, property: Property
) -> PropertyLabel:
    if caption.language not in SUPPORTED_LANGUAGES[property]:
        return PropertyLabel(
            caption.caption_id, property, Outcome.FILTERED, detail="unsupported-language"
        )
    if caption.language in PARSE_LANGUAGES[property] and parse is None:
        return PropertyLabel(
            caption.caption_id, property, Outcome.FILTERED, detail="no-parse"
        )
    try:
        if property is Property.NUM:
            return annotate_numeral(caption)[0]
        if property is Property.QUANT:
            return annotate_quantifier(caption)
        if property is Property.NEG:
            return annotate_negation(caption, parse)
        if property is Property.VERB:
            return annotate_root_pos(caption, parse)
        if property is Property.TRAN:
            return annotate_transitivity(caption, parse)
        return annotate_passive(caption, parse)
    except CaplensError as exc:
        return PropertyLabel(
            caption.caption_id, property, Outcome.FILTERED, detail=str(exc)
        )


def _annotate_batch(
    batch: list[tuple[CaptionRecord, DepSentence | None]], property: Property
) -> list[PropertyLabel]:
    return [_annotate_one(caption, parse, property) for caption, parse in batch]


def annotate_corpus(
    corpus: Corpus,
    parses: ParseIndex | Mapping[str, DepSentence] | None,
    property: Property,
    jobs: int = 1,
) -> dict[str, PropertyLabel]:
    """Label every caption of the corpus for one property.

    Per-caption rule failures become filtered labels with reasons. Output is
    keyed and ordered by caption id, independent of worker scheduling.
    """
    lookup: Mapping[str, DepSentence]
    if parses is None:
        lookup = {}
    elif isinstance(parses, ParseIndex):
        lookup = parses.sentences
    else:
        lookup = parses
    ordered = [corpus.captions[cid] for cid in sorted(corpus.captions)]
    pairs = [(c, lookup.get(c.caption_id)) for c in ordered]

    if jobs <= 1 or len(pairs) < 2 * jobs:
        labels = _annotate_batch(pairs, property)
    else:
        chunk = (len(pairs) + jobs - 1) // jobs
        batches = [pairs[i : i + chunk] for i in range(0, len(pairs), chunk)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_annotate_batch, batches, [property] * len(batches))
        labels = [label for batch in results for label in batch]
    return {label.caption_id: label for label in labels}
