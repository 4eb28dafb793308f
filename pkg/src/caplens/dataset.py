"""Balanced binary classification datasets with reproducible 5-fold splits.

Binarization uses the median probability as a threshold *above which* an
image counts as expressing the property: the comparison is a strict ``>``
and the median is the lower order statistic, so the threshold is always an
attained value. With heavily zero-skewed distributions (negation) this
leaves only the genuinely positive tail on the positive side.

All randomness flows from explicit seeds through ``numpy``'s PCG64
generator; the dataset manifest records the seed so builds are reproducible
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annotators.labels import Property
from .errors import CaplensError
from .stats import PropertyProbability


class DegenerateDataError(CaplensError):
    """Binarization would leave one class empty."""


@dataclass(frozen=True)
class LabeledImage:
    image_id: str
    label: bool
    probability: float


@dataclass(frozen=True)
class ClassificationDataset:
    property: Property
    scope: str
    threshold: float
    items: tuple[LabeledImage, ...]
    seed: int

    @property
    def n_positive(self) -> int:
        return sum(1 for item in self.items if item.label)

    @property
    def n_negative(self) -> int:
        return len(self.items) - self.n_positive

    def validate_balanced(self) -> None:
        if self.n_positive != self.n_negative:
            raise CaplensError(
                f"dataset not balanced: {self.n_positive} positive vs "
                f"{self.n_negative} negative"
            )
        ids = [item.image_id for item in self.items]
        if len(set(ids)) != len(ids):
            raise CaplensError("dataset contains duplicate image ids")


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [i for i, f in self.assignments.items() if f == fold]


def lower_median(values: Sequence[float]) -> float:
    """Lower median order statistic (no interpolation for even counts)."""
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def binarize(
    probabilities: Iterable[PropertyProbability],
) -> tuple[float, list[LabeledImage]]:
    """Median-threshold labels: positive iff value strictly above the median."""
    probs = sorted(probabilities, key=lambda p: p.image_id)
    if len({p.value for p in probs}) < 2:
        raise DegenerateDataError(
            "binarization needs at least 2 distinct probability values"
        )
    threshold = lower_median([p.value for p in probs])
    labels = [
        LabeledImage(p.image_id, p.value > threshold, p.value) for p in probs
    ]
    if not any(item.label for item in labels):
        raise DegenerateDataError("no probability exceeds the median threshold")
    return threshold, labels


def balance(
    labels: Sequence[LabeledImage],
    seed: int,
    *,
    property: Property,
    scope: str,
    threshold: float,
) -> ClassificationDataset:
    """Down-sample the majority class uniformly without replacement.

    Every minority-class item is preserved; with a fixed seed the selected
    subset is reproducible byte for byte. Items are returned sorted by
    image id.
    """
    positives = [item for item in labels if item.label]
    negatives = [item for item in labels if not item.label]
    if not positives or not negatives:
        raise DegenerateDataError("balance requires both classes non-empty")
    minority, majority = sorted((positives, negatives), key=len)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(majority), size=len(minority), replace=False)
    kept = minority + [majority[i] for i in sorted(chosen)]
    return ClassificationDataset(
        property=property,
        scope=scope,
        threshold=threshold,
        items=tuple(sorted(kept, key=lambda item: item.image_id)),
        seed=seed,
    )


def build_dataset(
    probabilities: Iterable[PropertyProbability],
    seed: int,
    *,
    property: Property,
    scope: str,
) -> ClassificationDataset:
    """binarize + balance in one step."""
    threshold, labels = binarize(probabilities)
    return balance(labels, seed, property=property, scope=scope, threshold=threshold)


def kfold(dataset: ClassificationDataset, k: int, seed: int) -> FoldSplit:
    """Stratified fold assignment: per-class seeded shuffle, then round-robin.

    The round-robin cursor runs continuously across classes, so total fold
    sizes differ by at most one and each fold is balanced to within +-1 per
    class.
    """
    if k < 2:
        raise CaplensError(f"k must be >= 2, got {k}")
    if len(dataset.items) < k:
        raise CaplensError(
            f"cannot split {len(dataset.items)} items into {k} folds"
        )
    rng = np.random.default_rng(seed)
    assignments: dict[str, int] = {}
    cursor = 0
    for wanted in (True, False):
        members = [item.image_id for item in dataset.items if item.label is wanted]
        for i in rng.permutation(len(members)):
            assignments[members[int(i)]] = cursor % k
            cursor += 1
    return FoldSplit(k=k, assignments=assignments)


# --------------------------------------------------------------------------
# Dataset manifest
# --------------------------------------------------------------------------

def write_dataset(dataset: ClassificationDataset, path: str | Path) -> None:
    """Serialize the dataset manifest (no timestamps: byte-reproducible)."""
    doc = {
        "format": "caplens-dataset",
        "version": 1,
        "property": dataset.property.value,
        "scope": dataset.scope,
        "threshold": dataset.threshold,
        "seed": dataset.seed,
        "items": [
            {"image_id": i.image_id, "label": i.label, "probability": i.probability}
            for i in dataset.items
        ],
    }
    with Path(path).open("w", encoding="utf-8", newline="\n") as fp:
        json.dump(doc, fp, ensure_ascii=False, indent=2)
        fp.write("\n")


def read_dataset(path: str | Path) -> ClassificationDataset:
    with Path(path).open("r", encoding="utf-8") as fp:
        doc = json.load(fp)
    if doc.get("format") != "caplens-dataset":
        raise CaplensError(f"{path}: not a caplens dataset manifest")
    return ClassificationDataset(
        property=Property(doc["property"]),
        scope=doc["scope"],
        threshold=float(doc["threshold"]),
        items=tuple(
            LabeledImage(i["image_id"], bool(i["label"]), float(i["probability"]))
            for i in doc["items"]
        ),
        seed=int(doc["seed"]),
    )
