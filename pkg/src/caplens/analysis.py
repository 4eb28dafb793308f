"""Corpus analyses over object annotations and multilingual alignment.

Covers class-conditioned numeral expectations, the bounding-box count curve
used to locate the subitizability threshold, cross-lingual agreement, and
the original-vs-translated caption comparison.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .annotators.labels import Property
from .corpus import Corpus
from .errors import CaplensError
from .stats import CorrelationResult, PropertyProbability, pearson


@dataclass(frozen=True)
class ClassExpectation:
    class_name: str
    n_images: int
    expectation: float


@dataclass(frozen=True)
class CountCurvePoint:
    k: int
    n_images: int
    e_num: float
    e_quant: float


@dataclass(frozen=True)
class CountCurve:
    points: tuple[CountCurvePoint, ...]
    peak_k: int | None  # argmax of e_num over emitted points; ties -> smaller k


def _annotated_images(corpus: Corpus, datasets: set[str] | None) -> list[str]:
    return [
        image_id
        for image_id in sorted(corpus.images)
        if corpus.images[image_id].object_annotations is not None
        and (datasets is None or corpus.images[image_id].dataset_name in datasets)
    ]


def class_expectations(
    corpus: Corpus,
    probabilities: Mapping[str, PropertyProbability],
    *,
    min_instances: int = 2,
    datasets: set[str] | None = None,
) -> list[ClassExpectation]:
    """Expected probability per object class, over images instantiating it.

    Images with fewer than ``min_instances`` boxes of a class are excluded
    from that class's image set, so classes that typically occur alone are
    not penalized. ``datasets`` restricts the analysis to fine-grained
    annotation sources (coarse class inventories are excluded by
    configuration). Result is sorted by descending expectation.
    """
    members: dict[str, list[float]] = {}
    annotated = _annotated_images(corpus, datasets)
    if not annotated:
        raise CaplensError("no images with object annotations in scope")
    for image_id in annotated:
        prob = probabilities.get(image_id)
        if prob is None:
            continue
        counts = Counter(
            o.class_name for o in corpus.images[image_id].object_annotations
        )
        for class_name, count in counts.items():
            if count >= min_instances:
                members.setdefault(class_name, []).append(prob.value)
    out = [
        ClassExpectation(name, len(vals), math.fsum(vals) / len(vals))
        for name, vals in members.items()
    ]
    out.sort(key=lambda e: (-e.expectation, e.class_name))
    return out


def count_curve(
    corpus: Corpus,
    num_probabilities: Mapping[str, PropertyProbability],
    quant_probabilities: Mapping[str, PropertyProbability],
    *,
    min_bucket: int = 100,
    datasets: set[str] | None = None,
) -> CountCurve:
    """Numeral/quantifier expectations as a function of bounding-box count.

    Buckets partition the annotated images (that carry both probabilities)
    by their exact number of labeled boxes; buckets smaller than
    ``min_bucket`` are dropped from the output.
    """
    buckets: dict[int, list[str]] = {}
    for image_id in _annotated_images(corpus, datasets):
        if image_id not in num_probabilities or image_id not in quant_probabilities:
            continue
        k = len(corpus.images[image_id].object_annotations)
        buckets.setdefault(k, []).append(image_id)
    points = []
    for k in sorted(buckets):
        ids = buckets[k]
        if len(ids) < min_bucket:
            continue
        e_num = math.fsum(num_probabilities[i].value for i in ids) / len(ids)
        e_quant = math.fsum(quant_probabilities[i].value for i in ids) / len(ids)
        points.append(CountCurvePoint(k, len(ids), e_num, e_quant))
    peak_k = None
    best = -math.inf
    for point in points:
        if point.e_num > best:
            best = point.e_num
            peak_k = point.k
    return CountCurve(points=tuple(points), peak_k=peak_k)


def crosslingual_agreement(
    probabilities_a: Mapping[str, PropertyProbability],
    probabilities_b: Mapping[str, PropertyProbability],
    property: Property,
    pair: tuple[str, str],
) -> CorrelationResult:
    """Pearson r of per-image probabilities over images shared by both maps."""
    shared = sorted(set(probabilities_a) & set(probabilities_b))
    if len(shared) < 2:
        raise CaplensError(
            f"need >= 2 shared images for correlation, got {len(shared)}"
        )
    xs = [probabilities_a[i].value for i in shared]
    ys = [probabilities_b[i].value for i in shared]
    return CorrelationResult(
        language_pair=pair, property=property, n_images=len(shared), r=pearson(xs, ys)
    )


def translated_agreement(
    original: Mapping[str, PropertyProbability],
    translated: Mapping[str, PropertyProbability],
    english: Mapping[str, PropertyProbability],
    property: Property,
    language: str,
) -> tuple[CorrelationResult, CorrelationResult]:
    """Agreement of translated captions with English vs with originals.

    Both correlations are computed over the images shared by all three
    probability maps. Returns (english-translated, original-translated).
    """
    shared = sorted(set(original) & set(translated) & set(english))
    if len(shared) < 2:
        raise CaplensError(
            f"need >= 2 images shared by all three caption sets, got {len(shared)}"
        )
    orig = {i: original[i] for i in shared}
    trans = {i: translated[i] for i in shared}
    en = {i: english[i] for i in shared}
    r_en_translated = crosslingual_agreement(
        en, trans, property, ("en", f"{language}:translated")
    )
    r_orig_translated = crosslingual_agreement(
        orig, trans, property, (f"{language}:original", f"{language}:translated")
    )
    return r_en_translated, r_orig_translated
