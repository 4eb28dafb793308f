"""Per-image property probabilities, expectations and correlations.

For an image with captions c_1..c_N and annotation outcomes, the property
expression probability is the fraction of positive outcomes among the
non-filtered captions. Filtered captions are excluded from both numerator
and denominator; an image whose captions are all filtered carries no
probability and is dropped from expectations.

All reductions use exact compensated summation (``math.fsum``), so results
are independent of input ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .annotators.labels import Outcome, Property, PropertyLabel
from .corpus import Corpus, Language, Origin
from .errors import CaplensError


class EmptyGroupError(CaplensError):
    """An expectation was requested over an empty image set."""


class ConstantInputError(CaplensError):
    """Pearson correlation is undefined for a constant input list."""


def scope_string(
    languages: set[Language] | None = None, origins: set[Origin] | None = None
) -> str:
    """Human-readable scope tag, e.g. ``all``, ``en``, ``de:translated``."""
    lang = "all" if not languages else "+".join(sorted(l.value for l in languages))
    if origins and len(origins) == 1:
        return f"{lang}:{next(iter(origins)).value}"
    return lang


@dataclass(frozen=True)
class PropertyProbability:
    image_id: str
    property: Property
    language_scope: str
    n_captions: int
    n_positive: int

    @property
    def value(self) -> float:
        return self.n_positive / self.n_captions

    def __post_init__(self) -> None:
        if self.n_captions < 1:
            raise CaplensError(
                f"image {self.image_id}: probability needs >= 1 countable caption"
            )
        if not 0 <= self.n_positive <= self.n_captions:
            raise CaplensError(
                f"image {self.image_id}: positive count {self.n_positive} "
                f"outside 0..{self.n_captions}"
            )


@dataclass(frozen=True)
class ExpectationResult:
    group_key: str
    n_images: int
    value: float


@dataclass(frozen=True)
class CorrelationResult:
    language_pair: tuple[str, str]
    property: Property
    n_images: int
    r: float


def property_probability(
    image_id: str,
    property: Property,
    labels: Iterable[PropertyLabel],
    language_scope: str = "all",
) -> PropertyProbability | None:
    """Probability for one image from its caption labels; None if nothing counts."""
    n_captions = 0
    n_positive = 0
    for label in labels:
        if label.outcome is Outcome.FILTERED:
            continue
        n_captions += 1
        if label.outcome is Outcome.POSITIVE:
            n_positive += 1
    if n_captions == 0:
        return None
    return PropertyProbability(image_id, property, language_scope, n_captions, n_positive)


def image_probabilities(
    corpus: Corpus,
    labels: Mapping[str, PropertyLabel],
    property: Property,
    languages: set[Language] | None = None,
    origins: set[Origin] | None = None,
) -> dict[str, PropertyProbability]:
    """Per-image probabilities over captions in scope, keyed by image id.

    Images with zero countable captions in scope are absent from the result.
    """
    scope = scope_string(languages, origins)
    out: dict[str, PropertyProbability] = {}
    for image_id in sorted(corpus.images):
        in_scope = [
            labels[c.caption_id]
            for c in corpus.captions_for_image(image_id)
            if c.caption_id in labels
            and (languages is None or c.language in languages)
            and (origins is None or c.origin in origins)
        ]
        prob = property_probability(image_id, property, in_scope, scope)
        if prob is not None:
            out[image_id] = prob
    return out


def expectation(
    probabilities: Iterable[PropertyProbability] | Iterable[float], group_key: str
) -> ExpectationResult:
    """Arithmetic mean of probabilities over an image set."""
    values = [
        p.value if isinstance(p, PropertyProbability) else float(p)
        for p in probabilities
    ]
    if not values:
        raise EmptyGroupError(f"empty image set for group {group_key!r}")
    return ExpectationResult(group_key, len(values), math.fsum(values) / len(values))


def prevalence_table(
    corpus: Corpus,
    annotations: Mapping[Property, Mapping[str, PropertyLabel]],
) -> dict[tuple[Language, Property], ExpectationResult]:
    """One expectation cell per supported (language, property) pair.

    ``annotations`` must contain a label map for every property appearing as
    a key; a missing property is an error naming it.
    """
    from .annotators.labels import SUPPORTED_LANGUAGES

    table: dict[tuple[Language, Property], ExpectationResult] = {}
    for language in sorted(corpus.languages, key=lambda l: l.value):
        for property in Property:
            if language not in SUPPORTED_LANGUAGES[property]:
                continue
            if property not in annotations:
                raise CaplensError(
                    f"prevalence table needs annotations for property "
                    f"{property.value!r}"
                )
            probs = image_probabilities(
                corpus, annotations[property], property, languages={language}
            )
            if not probs:
                continue
            table[(language, property)] = expectation(
                probs.values(), f"{language.value}:{property.value}"
            )
    return table


def write_probabilities(
    probabilities: Mapping[str, PropertyProbability], path
) -> None:
    """Write per-image probabilities as JSONL, sorted by image id."""
    import json
    from pathlib import Path

    with Path(path).open("w", encoding="utf-8", newline="\n") as fp:
        for image_id in sorted(probabilities):
            p = probabilities[image_id]
            fp.write(
                json.dumps(
                    {
                        "image_id": p.image_id,
                        "property": p.property.value,
                        "scope": p.language_scope,
                        "n_captions": p.n_captions,
                        "n_positive": p.n_positive,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_probabilities(path) -> dict[str, PropertyProbability]:
    import json
    from pathlib import Path

    out: dict[str, PropertyProbability] = {}
    with Path(path).open("r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                p = PropertyProbability(
                    image_id=record["image_id"],
                    property=Property(record["property"]),
                    language_scope=record["scope"],
                    n_captions=int(record["n_captions"]),
                    n_positive=int(record["n_positive"]),
                )
            except (KeyError, ValueError) as exc:
                raise CaplensError(
                    f"{path}:{lineno}: bad probability record: {exc}"
                ) from exc
            out[p.image_id] = p
    return out


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient.

    Requires equal lengths >= 2 and non-constant inputs. Uses exact
    compensated summation, so the result is invariant to input ordering.
    """
    if len(xs) != len(ys):
        raise CaplensError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise CaplensError("pearson needs at least 2 points")
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    syy = math.fsum((y - mean_y) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInputError("correlation undefined for constant input")
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
