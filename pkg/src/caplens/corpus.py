"""Data model for multilingual image-caption corpora.

A :class:`Corpus` holds image records, caption records and their referential
links. Corpora are immutable after construction and safe to share between
threads. The canonical on-disk form is JSONL with one record per line, typed
by a ``"kind"`` field, so corpora larger than memory can be streamed.

Image ids are namespaced as ``<source>:<original-id>`` where ``<source>``
names the shared image pool (e.g. ``flickr30k``). Caption sets from different
datasets that describe the same underlying images (Flickr30k and Multi30k,
MSCOCO and STAIR) therefore attach to a single image record after ``merge``.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

from .errors import CaplensError

log = logging.getLogger(__name__)


class Language(Enum):
    """Caption language. Values are the wire codes used in canonical JSONL."""

    EN = "en"
    DE = "de"
    ZH = "zh"
    JA = "ja"


class Origin(Enum):
    ORIGINAL = "original"
    TRANSLATED = "translated"


class CorpusFormatError(CaplensError):
    """Malformed canonical or COCO input; message carries the location."""


class IntegrityError(CaplensError):
    """A corpus invariant (unique ids, referential integrity) is violated."""


def _nfc(text: str) -> str:
    # NFC at load keeps CJK lexicon matching stable across input encodings.
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class ObjectAnnotation:
    """One labeled bounding box: x, y, width, height in pixels."""

    class_name: str
    bbox: tuple[float, float, float, float]
    iscrowd: bool = False

    def __post_init__(self) -> None:
        if not self.class_name:
            raise IntegrityError("object annotation with empty class name")
        if len(self.bbox) != 4:
            raise IntegrityError(f"bbox must have 4 entries, got {len(self.bbox)}")
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise IntegrityError(f"bbox width/height must be positive: {self.bbox}")


@dataclass(frozen=True)
class CaptionRecord:
    caption_id: str
    image_id: str
    language: Language
    text: str
    origin: Origin

    def __post_init__(self) -> None:
        if not self.caption_id or not self.image_id:
            raise IntegrityError("caption with empty id")
        if not self.text:
            raise IntegrityError(f"caption {self.caption_id} has empty text")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    dataset_name: str
    object_annotations: tuple[ObjectAnnotation, ...] | None = None

    def __post_init__(self) -> None:
        if not self.image_id:
            raise IntegrityError("image with empty id")


class Corpus:
    """Immutable collection of images and captions with referential integrity."""

    def __init__(
        self,
        name: str,
        images: Iterable[ImageRecord],
        captions: Iterable[CaptionRecord],
    ) -> None:
        self.name = name
        self.images: dict[str, ImageRecord] = {}
        self.captions: dict[str, CaptionRecord] = {}
        self._by_image: dict[str, list[str]] = {}
        for image in images:
            if image.image_id in self.images:
                raise IntegrityError(f"duplicate image id {image.image_id!r}")
            self.images[image.image_id] = image
        for caption in captions:
            if caption.caption_id in self.captions:
                raise IntegrityError(f"duplicate caption id {caption.caption_id!r}")
            if caption.image_id not in self.images:
                raise IntegrityError(
                    f"caption {caption.caption_id!r} references unknown image "
                    f"{caption.image_id!r}"
                )
            self.captions[caption.caption_id] = caption
            self._by_image.setdefault(caption.image_id, []).append(caption.caption_id)

    @property
    def languages(self) -> set[Language]:
        return {c.language for c in self.captions.values()}

    def captions_for_image(self, image_id: str) -> list[CaptionRecord]:
        return [self.captions[cid] for cid in self._by_image.get(image_id, [])]

    def subset(
        self,
        languages: set[Language] | None = None,
        origins: set[Origin] | None = None,
    ) -> "Corpus":
        """New corpus restricted to captions matching the given filters.

        Images are kept even when all their captions are filtered away, so
        object-annotation analyses still see the full image set.
        """
        captions = [
            c
            for c in self.captions.values()
            if (languages is None or c.language in languages)
            and (origins is None or c.origin in origins)
        ]
        return Corpus(self.name, self.images.values(), captions)

    def __repr__(self) -> str:
        return (
            f"<Corpus {self.name!r}: {len(self.images)} images, "
            f"{len(self.captions)} captions>"
        )


# --------------------------------------------------------------------------
# Canonical JSONL format
# --------------------------------------------------------------------------

def _parse_object(obj: dict, where: str) -> ObjectAnnotation:
    try:
        return ObjectAnnotation(
            class_name=_nfc(str(obj["class"])),
            bbox=tuple(float(v) for v in obj["bbox"]),
            iscrowd=bool(obj.get("iscrowd", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"{where}: bad object annotation: {exc}") from exc


def load_canonical(path: str | Path, name: str | None = None) -> Corpus:
    """Load a corpus from canonical JSONL.

    Raises :class:`CorpusFormatError` with the offending line number on
    malformed records, and :class:`IntegrityError` on duplicate or dangling
    ids.
    """
    path = Path(path)
    images: list[ImageRecord] = []
    captions: list[CaptionRecord] = []
    with path.open("r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{where}: invalid JSON: {exc}") from exc
            kind = record.get("kind")
            try:
                if kind == "image":
                    objects = record.get("objects")
                    images.append(
                        ImageRecord(
                            image_id=record["image_id"],
                            dataset_name=record["dataset"],
                            object_annotations=None
                            if objects is None
                            else tuple(_parse_object(o, where) for o in objects),
                        )
                    )
                elif kind == "caption":
                    captions.append(
                        CaptionRecord(
                            caption_id=record["caption_id"],
                            image_id=record["image_id"],
                            language=Language(record["lang"]),
                            text=_nfc(record["text"]),
                            origin=Origin(record["origin"]),
                        )
                    )
                else:
                    raise CorpusFormatError(f"{where}: unknown record kind {kind!r}")
            except KeyError as exc:
                raise CorpusFormatError(f"{where}: missing field {exc}") from exc
            except ValueError as exc:
                raise CorpusFormatError(f"{where}: {exc}") from exc
    return Corpus(name or path.stem, images, captions)


def write_canonical(corpus: Corpus, path: str | Path) -> None:
    """Write canonical JSONL: images sorted by id, then captions sorted by id.

    The writer is deterministic, so ``write(load(f))`` is byte-identical to
    ``f`` for any file this writer produced.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fp:
        for image_id in sorted(corpus.images):
            image = corpus.images[image_id]
            record: dict = {
                "kind": "image",
                "image_id": image.image_id,
                "dataset": image.dataset_name,
            }
            if image.object_annotations is not None:
                record["objects"] = [
                    {"class": o.class_name, "bbox": list(o.bbox)}
                    | ({"iscrowd": True} if o.iscrowd else {})
                    for o in image.object_annotations
                ]
            fp.write(json.dumps(record, ensure_ascii=False) + "\n")
        for caption_id in sorted(corpus.captions):
            caption = corpus.captions[caption_id]
            fp.write(
                json.dumps(
                    {
                        "kind": "caption",
                        "caption_id": caption.caption_id,
                        "image_id": caption.image_id,
                        "lang": caption.language.value,
                        "text": caption.text,
                        "origin": caption.origin.value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


# --------------------------------------------------------------------------
# COCO import
# --------------------------------------------------------------------------

def import_coco(
    captions_json: str | Path,
    instances_json: str | Path | None = None,
    *,
    language: Language,
    dataset_name: str,
    origin: Origin,
    image_source: str | None = None,
) -> Corpus:
    """Build a corpus from COCO-schema captions (and optionally instances).

    ``image_source`` names the shared image pool for id namespacing and
    defaults to ``dataset_name``; pass e.g. ``"mscoco"`` when importing a
    non-English caption set collected over MSCOCO images.

    Captions with empty text are skipped with a warning (they occur in the
    wild and would violate the caption invariant).
    """
    source = image_source or dataset_name
    with Path(captions_json).open("r", encoding="utf-8") as fp:
        doc = json.load(fp)
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise CorpusFormatError(
            f"{captions_json}: not a COCO captions file (need images/annotations)"
        )

    objects_by_image: dict[str, list[ObjectAnnotation]] = {}
    have_instances = instances_json is not None
    if have_instances:
        with Path(instances_json).open("r", encoding="utf-8") as fp:
            inst = json.load(fp)
        if "annotations" not in inst or "categories" not in inst:
            raise CorpusFormatError(
                f"{instances_json}: not a COCO instances file "
                "(need annotations/categories)"
            )
        categories: dict[int, str] = {}
        for cat in inst["categories"]:
            if "name" not in cat or not cat["name"]:
                raise CorpusFormatError(
                    f"{instances_json}: category id {cat.get('id')!r} has no name"
                )
            categories[cat["id"]] = _nfc(cat["name"])
        for ann in inst["annotations"]:
            try:
                cat_id = ann["category_id"]
                if cat_id not in categories:
                    raise CorpusFormatError(
                        f"{instances_json}: annotation references unknown "
                        f"category id {cat_id!r}"
                    )
                objects_by_image.setdefault(f"{source}:{ann['image_id']}", []).append(
                    ObjectAnnotation(
                        class_name=categories[cat_id],
                        bbox=tuple(float(v) for v in ann["bbox"]),
                        iscrowd=bool(ann.get("iscrowd", 0)),
                    )
                )
            except KeyError as exc:
                raise CorpusFormatError(
                    f"{instances_json}: instance annotation missing field {exc}"
                ) from exc

    images = []
    for img in doc["images"]:
        try:
            image_id = f"{source}:{img['id']}"
        except KeyError as exc:
            raise CorpusFormatError(f"{captions_json}: image missing {exc}") from exc
        images.append(
            ImageRecord(
                image_id=image_id,
                dataset_name=dataset_name,
                object_annotations=tuple(objects_by_image.get(image_id, ()))
                if have_instances
                else None,
            )
        )

    captions = []
    n_skipped = 0
    for ann in doc["annotations"]:
        try:
            text = _nfc(str(ann["caption"])).strip()
            if not text:
                n_skipped += 1
                continue
            captions.append(
                CaptionRecord(
                    caption_id=f"{dataset_name}:{ann['id']}",
                    image_id=f"{source}:{ann['image_id']}",
                    language=language,
                    text=text,
                    origin=origin,
                )
            )
        except KeyError as exc:
            raise CorpusFormatError(
                f"{captions_json}: caption annotation missing field {exc}"
            ) from exc
    if n_skipped:
        log.warning("%s: skipped %d empty captions", captions_json, n_skipped)
    return Corpus(dataset_name, images, captions)


# --------------------------------------------------------------------------
# Merge and alignment
# --------------------------------------------------------------------------

def merge(corpora: Sequence[Corpus]) -> Corpus:
    """Union of images (deduplicated by image id) and captions.

    When the same image id arrives with conflicting object annotations the
    first-seen set is kept and a warning is logged; annotations for the same
    underlying image are expected to be identical. Identical duplicate
    captions are deduplicated, conflicting ones are an error.
    """
    images: dict[str, ImageRecord] = {}
    captions: dict[str, CaptionRecord] = {}
    for corpus in corpora:
        for image in corpus.images.values():
            seen = images.get(image.image_id)
            if seen is None:
                images[image.image_id] = image
            elif (
                seen.object_annotations != image.object_annotations
                and image.object_annotations is not None
                and seen.object_annotations is not None
            ):
                log.warning(
                    "conflicting object annotations for image %s; keeping the "
                    "first-seen set (%s)",
                    image.image_id,
                    seen.dataset_name,
                )
            elif seen.object_annotations is None and image.object_annotations is not None:
                # Fill in annotations when the first-seen record had none.
                images[image.image_id] = ImageRecord(
                    seen.image_id, seen.dataset_name, image.object_annotations
                )
        for caption in corpus.captions.values():
            seen_c = captions.get(caption.caption_id)
            if seen_c is None:
                captions[caption.caption_id] = caption
            elif seen_c != caption:
                raise IntegrityError(
                    f"conflicting caption records for id {caption.caption_id!r}"
                )
    name = "+".join(dict.fromkeys(c.name for c in corpora)) or "empty"
    return Corpus(name, images.values(), captions.values())


def align_multilingual(
    corpus: Corpus, languages: set[Language]
) -> list[tuple[str, dict[Language, list[CaptionRecord]]]]:
    """Images having at least one caption in every requested language.

    Returns ``(image_id, {language: captions})`` tuples in deterministic
    image-id order. An empty result is valid.
    """
    if not languages:
        raise CaplensError("align_multilingual: empty language set")
    out = []
    for image_id in sorted(corpus.images):
        by_lang: dict[Language, list[CaptionRecord]] = {}
        for caption in corpus.captions_for_image(image_id):
            if caption.language in languages:
                by_lang.setdefault(caption.language, []).append(caption)
        if all(lang in by_lang for lang in languages):
            out.append((image_id, by_lang))
    return out
