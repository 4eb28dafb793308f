import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caplens.corpus import (
    CaptionRecord,
    Corpus,
    CorpusFormatError,
    ImageRecord,
    IntegrityError,
    Language,
    ObjectAnnotation,
    Origin,
    align_multilingual,
    import_coco,
    load_canonical,
    merge,
    write_canonical,
)


def make_corpus(name="test"):
    images = [
        ImageRecord("flickr30k:1", "flickr30k"),
        ImageRecord(
            "flickr30k:2",
            "flickr30k",
            (ObjectAnnotation("dog", (1.0, 2.0, 3.0, 4.0)),),
        ),
    ]
    captions = [
        CaptionRecord("flickr30k:c1", "flickr30k:1", Language.EN, "A dog runs", Origin.ORIGINAL),
        CaptionRecord("flickr30k:c2", "flickr30k:1", Language.DE, "Ein Hund", Origin.ORIGINAL),
        CaptionRecord("flickr30k:c3", "flickr30k:2", Language.EN, "Two dogs", Origin.ORIGINAL),
    ]
    return Corpus(name, images, captions)


class TestModelInvariants:
    def test_counts(self):
        corpus = make_corpus()
        assert len(corpus.images) == 2
        assert len(corpus.captions) == 3
        assert corpus.languages == {Language.EN, Language.DE}

    def test_empty_text_rejected(self):
        with pytest.raises(IntegrityError):
            CaptionRecord("c", "i", Language.EN, "", Origin.ORIGINAL)

    def test_bad_bbox_rejected(self):
        with pytest.raises(IntegrityError):
            ObjectAnnotation("dog", (0.0, 0.0, 0.0, 5.0))
        with pytest.raises(IntegrityError):
            ObjectAnnotation("", (0.0, 0.0, 1.0, 5.0))

    def test_dangling_caption_rejected(self):
        with pytest.raises(IntegrityError, match="unknown image"):
            Corpus(
                "bad",
                [ImageRecord("i1", "d")],
                [CaptionRecord("c1", "i2", Language.EN, "x", Origin.ORIGINAL)],
            )

    def test_duplicate_ids_rejected(self):
        with pytest.raises(IntegrityError, match="duplicate image"):
            Corpus("bad", [ImageRecord("i1", "d"), ImageRecord("i1", "d")], [])


class TestCanonical:
    def test_small_fixture_load(self, tmp_path):
        lines = [
            {"kind": "image", "image_id": "s:1", "dataset": "d"},
            {"kind": "image", "image_id": "s:2", "dataset": "d",
             "objects": [{"class": "cat", "bbox": [0.0, 0.0, 5.0, 5.0]}]},
            {"kind": "caption", "caption_id": "d:a", "image_id": "s:1",
             "lang": "en", "text": "A cat", "origin": "original"},
            {"kind": "caption", "caption_id": "d:b", "image_id": "s:1",
             "lang": "zh", "text": "一只猫", "origin": "original"},
            {"kind": "caption", "caption_id": "d:c", "image_id": "s:2",
             "lang": "ja", "text": "猫がいる", "origin": "original"},
        ]
        path = tmp_path / "c.jsonl"
        path.write_text("\n".join(json.dumps(l, ensure_ascii=False) for l in lines) + "\n")
        corpus = load_canonical(path)
        assert len(corpus.images) == 2
        assert len(corpus.captions) == 3
        assert corpus.images["s:2"].object_annotations[0].class_name == "cat"

    def test_dangling_reference_error(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(
            json.dumps({"kind": "caption", "caption_id": "c", "image_id": "nope",
                        "lang": "en", "text": "x", "origin": "original"}) + "\n"
        )
        with pytest.raises(IntegrityError, match="unknown image"):
            load_canonical(path)

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"kind":"image","image_id":"a","dataset":"d"}\nnot json\n')
        with pytest.raises(CorpusFormatError, match=":2"):
            load_canonical(path)

    def test_unknown_kind_reports_number(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"kind":"widget"}\n')
        with pytest.raises(CorpusFormatError, match="kind"):
            load_canonical(path)

    def test_round_trip_value_level(self, tmp_path):
        corpus = make_corpus()
        path = tmp_path / "c.jsonl"
        write_canonical(corpus, path)
        back = load_canonical(path, name=corpus.name)
        assert back.images == corpus.images
        assert back.captions == corpus.captions

    def test_round_trip_byte_exact(self, tmp_path):
        corpus = make_corpus()
        p1 = tmp_path / "a.jsonl"
        p2 = tmp_path / "b.jsonl"
        write_canonical(corpus, p1)
        write_canonical(load_canonical(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_nfc_normalization(self, tmp_path):
        # Decomposed e + combining acute must load as the composed form.
        decomposed = "café"
        path = tmp_path / "c.jsonl"
        path.write_text(
            json.dumps({"kind": "image", "image_id": "i", "dataset": "d"}) + "\n"
            + json.dumps({"kind": "caption", "caption_id": "c", "image_id": "i",
                          "lang": "en", "text": decomposed, "origin": "original"},
                         ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        corpus = load_canonical(path)
        assert corpus.captions["c"].text == "café"


def coco_fixture(tmp_path, with_instances=True):
    captions = {
        "images": [{"id": 10, "file_name": "10.jpg"}],
        "annotations": [
            {"id": 1, "image_id": 10, "caption": "A dog on grass"},
            {"id": 2, "image_id": 10, "caption": "Two dogs playing"},
        ],
    }
    cap_path = tmp_path / "captions.json"
    cap_path.write_text(json.dumps(captions))
    inst_path = None
    if with_instances:
        instances = {
            "images": [{"id": 10}],
            "annotations": [
                {"id": 5, "image_id": 10, "category_id": 18,
                 "bbox": [10.0, 20.0, 30.0, 40.0], "iscrowd": 0},
            ],
            "categories": [{"id": 18, "name": "dog"}],
        }
        inst_path = tmp_path / "instances.json"
        inst_path.write_text(json.dumps(instances))
    return cap_path, inst_path


class TestCocoImport:
    def test_minimal_fixture(self, tmp_path):
        cap, inst = coco_fixture(tmp_path)
        corpus = import_coco(
            cap, inst, language=Language.EN, dataset_name="mscoco", origin=Origin.ORIGINAL
        )
        assert len(corpus.images) == 1
        assert len(corpus.captions) == 2
        image = corpus.images["mscoco:10"]
        assert len(image.object_annotations) == 1
        assert image.object_annotations[0].class_name == "dog"
        assert image.object_annotations[0].bbox == (10.0, 20.0, 30.0, 40.0)

    def test_instances_omitted(self, tmp_path):
        cap, _ = coco_fixture(tmp_path, with_instances=False)
        corpus = import_coco(
            cap, language=Language.EN, dataset_name="mscoco", origin=Origin.ORIGINAL
        )
        assert all(i.object_annotations is None for i in corpus.images.values())

    def test_category_without_name(self, tmp_path):
        cap, inst = coco_fixture(tmp_path)
        doc = json.loads(inst.read_text())
        doc["categories"] = [{"id": 18}]
        inst.write_text(json.dumps(doc))
        with pytest.raises(CorpusFormatError, match="name"):
            import_coco(cap, inst, language=Language.EN, dataset_name="m",
                        origin=Origin.ORIGINAL)

    def test_schema_mismatch(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"foo": []}')
        with pytest.raises(CorpusFormatError, match="captions"):
            import_coco(bad, language=Language.EN, dataset_name="m",
                        origin=Origin.ORIGINAL)

    def test_image_source_namespacing(self, tmp_path):
        cap, _ = coco_fixture(tmp_path, with_instances=False)
        corpus = import_coco(
            cap, language=Language.DE, dataset_name="multi30k",
            origin=Origin.ORIGINAL, image_source="flickr30k",
        )
        assert "flickr30k:10" in corpus.images
        assert "multi30k:1" in corpus.captions


class TestMerge:
    def test_shared_image_union(self):
        en = Corpus(
            "flickr30k",
            [ImageRecord("flickr30k:1", "flickr30k")],
            [CaptionRecord("f:c1", "flickr30k:1", Language.EN, "dog", Origin.ORIGINAL)],
        )
        de = Corpus(
            "multi30k",
            [ImageRecord("flickr30k:1", "multi30k")],
            [CaptionRecord("m:c1", "flickr30k:1", Language.DE, "Hund", Origin.ORIGINAL)],
        )
        merged = merge([en, de])
        assert len(merged.images) == 1
        assert len(merged.captions) == 2
        assert merged.languages == {Language.EN, Language.DE}

    def test_disjoint_sizes_add(self):
        a = make_corpus("a")
        b = Corpus(
            "b",
            [ImageRecord("x:1", "x")],
            [CaptionRecord("x:c1", "x:1", Language.JA, "犬", Origin.ORIGINAL)],
        )
        merged = merge([a, b])
        assert len(merged.images) == len(a.images) + 1
        assert len(merged.captions) == len(a.captions) + 1

    def test_idempotent(self):
        corpus = make_corpus()
        merged = merge([corpus, corpus])
        assert merged.images == corpus.images
        assert merged.captions == corpus.captions

    def test_annotation_conflict_keeps_first(self, caplog):
        a = Corpus("a", [ImageRecord("i", "a", (ObjectAnnotation("dog", (0, 0, 1, 1)),))], [])
        b = Corpus("b", [ImageRecord("i", "b", (ObjectAnnotation("cat", (0, 0, 1, 1)),))], [])
        with caplog.at_level("WARNING"):
            merged = merge([a, b])
        assert merged.images["i"].object_annotations[0].class_name == "dog"
        assert "conflicting object annotations" in caplog.text


class TestAlign:
    def make_multilingual(self):
        images = [ImageRecord(f"s:{i}", "s") for i in (1, 2)]
        captions = [
            CaptionRecord("c1", "s:1", Language.EN, "dog", Origin.ORIGINAL),
            CaptionRecord("c2", "s:1", Language.DE, "Hund", Origin.ORIGINAL),
            CaptionRecord("c3", "s:1", Language.ZH, "狗", Origin.ORIGINAL),
            CaptionRecord("c4", "s:2", Language.EN, "cat", Origin.ORIGINAL),
            CaptionRecord("c5", "s:2", Language.DE, "Katze", Origin.ORIGINAL),
        ]
        return Corpus("s", images, captions)

    def test_all_languages_present(self):
        corpus = self.make_multilingual()
        aligned = align_multilingual(corpus, {Language.EN, Language.DE, Language.ZH})
        assert [image_id for image_id, _ in aligned] == ["s:1"]

    def test_missing_language_excluded(self):
        corpus = self.make_multilingual()
        aligned = align_multilingual(corpus, {Language.EN, Language.DE})
        assert [image_id for image_id, _ in aligned] == ["s:1", "s:2"]

    def test_subset_of_merge_and_order_invariant(self):
        corpus = self.make_multilingual()
        other = Corpus("t", [ImageRecord("t:9", "t")],
                       [CaptionRecord("c9", "t:9", Language.EN, "bird", Origin.ORIGINAL)])
        one = align_multilingual(merge([corpus, other]), {Language.EN, Language.DE})
        two = align_multilingual(merge([other, corpus]), {Language.EN, Language.DE})
        assert [i for i, _ in one] == [i for i, _ in two]
        assert set(i for i, _ in one) <= set(merge([corpus, other]).images)


ids = st.text(alphabet="abcdefgh0123456789:_-", min_size=1, max_size=12)
texts = st.text(min_size=1, max_size=40).filter(lambda s: s.strip())


@st.composite
def corpora(draw):
    image_ids = draw(st.lists(ids, min_size=1, max_size=5, unique=True))
    images = []
    for image_id in image_ids:
        if draw(st.booleans()):
            objects = tuple(
                ObjectAnnotation(
                    draw(st.sampled_from(["dog", "cat", "åäö人"])),
                    (0.0, 0.0, float(draw(st.integers(1, 50))), 2.5),
                    iscrowd=draw(st.booleans()),
                )
                for _ in range(draw(st.integers(0, 3)))
            )
        else:
            objects = None
        images.append(ImageRecord(image_id, "data", objects))
    n_caps = draw(st.integers(0, 6))
    captions = []
    for i in range(n_caps):
        captions.append(
            CaptionRecord(
                f"cap{i}",
                draw(st.sampled_from(image_ids)),
                draw(st.sampled_from(list(Language))),
                "é" + draw(texts),
                draw(st.sampled_from(list(Origin))),
            )
        )
    return Corpus("gen", images, captions)


@settings(max_examples=40, deadline=None)
@given(corpora())
def test_canonical_round_trip_property(tmp_path_factory, corpus):
    tmp = tmp_path_factory.mktemp("rt")
    path = tmp / "c.jsonl"
    write_canonical(corpus, path)
    back = load_canonical(path)
    assert back.images == corpus.images
    assert back.captions == corpus.captions
    path2 = tmp / "c2.jsonl"
    write_canonical(back, path2)
    assert path.read_bytes() == path2.read_bytes()
