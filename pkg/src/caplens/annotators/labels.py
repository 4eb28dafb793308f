"""Label types shared by annotators and downstream statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping

from ..corpus import Language
from ..errors import CaplensError


class Property(Enum):
    NUM = "num"
    QUANT = "quant"
    NEG = "neg"
    PASS = "pass"
    TRAN = "tran"
    VERB = "verb"


class Outcome(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    FILTERED = "filtered"


#: Languages each property's rules cover. Japanese is restricted to numerals
#: and quantifiers; German quantifiers have no word list.
SUPPORTED_LANGUAGES: dict[Property, frozenset[Language]] = {
    Property.NUM: frozenset({Language.EN, Language.DE, Language.ZH, Language.JA}),
    Property.QUANT: frozenset({Language.EN, Language.ZH, Language.JA}),
    Property.NEG: frozenset({Language.EN, Language.DE, Language.ZH}),
    Property.PASS: frozenset({Language.EN, Language.DE, Language.ZH}),
    Property.TRAN: frozenset({Language.EN, Language.DE, Language.ZH}),
    Property.VERB: frozenset({Language.EN, Language.DE, Language.ZH}),
}

#: Languages for which a property needs a dependency parse.
PARSE_LANGUAGES: dict[Property, frozenset[Language]] = {
    Property.NUM: frozenset(),
    Property.QUANT: frozenset(),
    Property.NEG: frozenset({Language.DE}),
    Property.PASS: frozenset({Language.EN, Language.DE}),
    Property.TRAN: frozenset({Language.EN, Language.DE, Language.ZH}),
    Property.VERB: frozenset({Language.EN, Language.DE, Language.ZH}),
}


@dataclass(frozen=True)
class PropertyLabel:
    caption_id: str
    property: Property
    outcome: Outcome
    detail: str | None = None

    def __post_init__(self) -> None:
        if self.outcome is Outcome.POSITIVE and not self.detail:
            raise CaplensError(
                f"positive label for {self.caption_id} must carry a detail"
            )


def write_labels(labels: Mapping[str, PropertyLabel], path: str | Path) -> None:
    """Write labels as JSONL, sorted by caption id."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fp:
        for caption_id in sorted(labels):
            label = labels[caption_id]
            record: dict = {
                "caption_id": label.caption_id,
                "property": label.property.value,
                "outcome": label.outcome.value,
            }
            if label.detail is not None:
                record["detail"] = label.detail
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_labels(path: str | Path) -> dict[str, PropertyLabel]:
    labels: dict[str, PropertyLabel] = {}
    with Path(path).open("r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                label = PropertyLabel(
                    caption_id=record["caption_id"],
                    property=Property(record["property"]),
                    outcome=Outcome(record["outcome"]),
                    detail=record.get("detail"),
                )
            except (KeyError, ValueError) as exc:
                raise CaplensError(f"{path}:{lineno}: bad label record: {exc}") from exc
            labels[label.caption_id] = label
    return labels
