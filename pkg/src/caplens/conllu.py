"""CoNLL-U dependency parse reader and tree accessors.

Parses the CoNLL-U v2 subset produced by running a dependency parser over
caption text: tab-separated token lines, blank-line sentence separation and a
mandatory ``# caption_id = <id>`` comment per sentence. Multiword-token range
lines (``3-4``) and empty nodes (``5.1``) are skipped so rules operate on
syntactic words only; enhanced-dependency columns are ignored.

Dependency relation matching uses a fixed alias table so corpora parsed with
UD v1 label inventories behave like v2 ones: ``{obj, dobj}``,
``{aux:pass, auxpass}`` and ``{nsubj:pass, nsubjpass}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator

from .corpus import Corpus
from .errors import CaplensError

log = logging.getLogger(__name__)

_ALIAS_SETS = (
    frozenset({"obj", "dobj"}),
    frozenset({"aux:pass", "auxpass"}),
    frozenset({"nsubj:pass", "nsubjpass"}),
)
_ALIASES: dict[str, frozenset[str]] = {
    name: group for group in _ALIAS_SETS for name in group
}

#: Relations marking passive voice in UD v1/v2 label inventories.
PASSIVE_RELATIONS = frozenset({"aux:pass", "auxpass", "nsubj:pass", "nsubjpass"})


class ConlluError(CaplensError):
    """Malformed CoNLL-U input; message names the sentence or line."""


@dataclass(frozen=True)
class DepToken:
    index: int
    form: str
    lemma: str
    upos: str
    xpos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class DepSentence:
    caption_id: str
    tokens: tuple[DepToken, ...]


def _validate(sentence: DepSentence, where: str) -> None:
    n = len(sentence.tokens)
    for pos, token in enumerate(sentence.tokens, start=1):
        if token.index != pos:
            raise ConlluError(
                f"{where}: token indices not contiguous "
                f"(expected {pos}, got {token.index})"
            )
        if not 0 <= token.head <= n:
            raise ConlluError(f"{where}: head {token.head} out of range 1..{n}")
        if token.head == token.index:
            raise ConlluError(f"{where}: token {token.index} is its own head")
    # Walk each token to the root; a revisit means a head cycle.
    for token in sentence.tokens:
        seen = set()
        cur = token.index
        while cur != 0:
            if cur in seen:
                raise ConlluError(f"{where}: cyclic head links through token {cur}")
            seen.add(cur)
            cur = sentence.tokens[cur - 1].head


def parse_conllu(stream: IO[str] | Iterable[str]) -> list[DepSentence]:
    """Parse a CoNLL-U text stream into one :class:`DepSentence` per block."""
    sentences: list[DepSentence] = []
    caption_id: str | None = None
    tokens: list[DepToken] = []
    block_start = 1

    def flush(where: str) -> None:
        nonlocal caption_id, tokens
        if caption_id is None and not tokens:
            return
        if caption_id is None:
            raise ConlluError(f"{where}: sentence without '# caption_id =' comment")
        sentence = DepSentence(caption_id, tuple(tokens))
        _validate(sentence, where)
        sentences.append(sentence)
        caption_id = None
        tokens = []

    lineno = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            flush(f"block at line {block_start}")
            block_start = lineno + 1
            continue
        if line.startswith("#"):
            comment = line[1:].strip()
            if comment.startswith("caption_id"):
                _, _, value = comment.partition("=")
                caption_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue  # multiword-token range or empty node
        try:
            tokens.append(
                DepToken(
                    index=int(cols[0]),
                    form=cols[1],
                    lemma=cols[2],
                    upos=cols[3],
                    xpos=cols[4],
                    head=int(cols[6]),
                    deprel=cols[7],
                )
            )
        except ValueError as exc:
            raise ConlluError(f"line {lineno}: {exc}") from exc
    flush(f"block at line {block_start}")
    return sentences


def parse_conllu_file(path: str | Path) -> list[DepSentence]:
    with Path(path).open("r", encoding="utf-8") as fp:
        return parse_conllu(fp)


def serialize(sentence: DepSentence) -> str:
    """Render the supported field subset back to a CoNLL-U block."""
    lines = [f"# caption_id = {sentence.caption_id}"]
    for t in sentence.tokens:
        lines.append(
            "\t".join(
                (
                    str(t.index),
                    t.form,
                    t.lemma,
                    t.upos,
                    t.xpos,
                    "_",
                    str(t.head),
                    t.deprel,
                    "_",
                    "_",
                )
            )
        )
    return "\n".join(lines) + "\n\n"


def roots(sentence: DepSentence) -> list[DepToken]:
    """All tokens attached to the artificial root (head = 0)."""
    return [t for t in sentence.tokens if t.head == 0]


def children(
    sentence: DepSentence, index: int, deprel_filter: str | None = None
) -> list[DepToken]:
    """Dependents of the token at ``index``, optionally filtered by relation.

    The filter matches exactly, except for relations in the alias table
    (``obj``/``dobj`` etc.) which match any member of their alias set.
    """
    if not 1 <= index <= len(sentence.tokens):
        raise ConlluError(
            f"token index {index} out of range 1..{len(sentence.tokens)}"
        )
    accepted = _ALIASES.get(deprel_filter, frozenset({deprel_filter}))
    return [
        t
        for t in sentence.tokens
        if t.head == index and (deprel_filter is None or t.deprel in accepted)
    ]


@dataclass
class ParseIndex:
    """Caption-id keyed parse lookup plus attachment statistics."""

    sentences: dict[str, DepSentence]
    n_captions: int
    n_unknown: int = 0
    n_duplicates: int = 0

    @property
    def coverage(self) -> float:
        if self.n_captions == 0:
            return 0.0
        return len(self.sentences) / self.n_captions

    def get(self, caption_id: str) -> DepSentence | None:
        return self.sentences.get(caption_id)


def attach_parses(corpus: Corpus, sentences: Iterable[DepSentence]) -> ParseIndex:
    """Index parses by caption id against a corpus.

    Unknown caption ids are skipped with a warning and counted; a duplicate
    caption id in the stream replaces the earlier parse (last wins).
    """
    index: dict[str, DepSentence] = {}
    n_unknown = 0
    n_duplicates = 0
    for sentence in sentences:
        if sentence.caption_id not in corpus.captions:
            log.warning("parse for unknown caption id %s skipped", sentence.caption_id)
            n_unknown += 1
            continue
        if sentence.caption_id in index:
            log.warning("duplicate parse for caption id %s; last wins", sentence.caption_id)
            n_duplicates += 1
        index[sentence.caption_id] = sentence
    return ParseIndex(
        sentences=index,
        n_captions=len(corpus.captions),
        n_unknown=n_unknown,
        n_duplicates=n_duplicates,
    )
