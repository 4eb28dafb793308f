import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caplens.conllu import (
    ConlluError,
    DepSentence,
    DepToken,
    attach_parses,
    children,
    parse_conllu,
    roots,
    serialize,
)
from caplens.corpus import CaptionRecord, Corpus, ImageRecord, Language, Origin

SIMPLE = """\
# caption_id = cap1
1\tA\ta\tDET\tDT\t_\t2\tdet\t_\t_
2\tdog\tdog\tNOUN\tNN\t_\t3\tnsubj\t_\t_
3\truns\trun\tVERB\tVBZ\t_\t0\troot\t_\t_

"""

TWO_ROOTS = """\
# caption_id = cap2
1\tDogs\tdog\tNOUN\tNNS\t_\t0\troot\t_\t_
2\trunning\trun\tVERB\tVBG\t_\t0\troot\t_\t_

"""


def test_parse_simple_block():
    sentences = parse_conllu(io.StringIO(SIMPLE))
    assert len(sentences) == 1
    sentence = sentences[0]
    assert sentence.caption_id == "cap1"
    assert [t.form for t in sentence.tokens] == ["A", "dog", "runs"]
    rr = roots(sentence)
    assert len(rr) == 1 and rr[0].index == 3


def test_multi_root_representable():
    sentence = parse_conllu(io.StringIO(TWO_ROOTS))[0]
    assert len(roots(sentence)) == 2


def test_cyclic_heads_rejected():
    block = (
        "# caption_id = bad\n"
        "1\ta\ta\tX\tX\t_\t2\tdep\t_\t_\n"
        "2\tb\tb\tX\tX\t_\t1\tdep\t_\t_\n\n"
    )
    with pytest.raises(ConlluError, match="cyclic"):
        parse_conllu(io.StringIO(block))


def test_self_head_rejected():
    block = "# caption_id = bad\n1\ta\ta\tX\tX\t_\t1\tdep\t_\t_\n\n"
    with pytest.raises(ConlluError, match="own head"):
        parse_conllu(io.StringIO(block))


def test_missing_caption_id_rejected():
    block = "1\ta\ta\tX\tX\t_\t0\troot\t_\t_\n\n"
    with pytest.raises(ConlluError, match="caption_id"):
        parse_conllu(io.StringIO(block))


def test_non_contiguous_indices_rejected():
    block = (
        "# caption_id = bad\n"
        "1\ta\ta\tX\tX\t_\t0\troot\t_\t_\n"
        "3\tb\tb\tX\tX\t_\t1\tdep\t_\t_\n\n"
    )
    with pytest.raises(ConlluError, match="contiguous"):
        parse_conllu(io.StringIO(block))


def test_multiword_ranges_and_empty_nodes_skipped():
    block = (
        "# caption_id = mwt\n"
        "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tde\tde\tADP\t_\t_\t3\tcase\t_\t_\n"
        "2\tel\tel\tDET\t_\t_\t3\tdet\t_\t_\n"
        "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "3\tperro\tperro\tNOUN\t_\t_\t0\troot\t_\t_\n\n"
    )
    sentence = parse_conllu(io.StringIO(block))[0]
    assert [t.form for t in sentence.tokens] == ["de", "el", "perro"]


def eats_cake():
    return DepSentence(
        "c",
        (
            DepToken(1, "man", "man", "NOUN", "NN", 2, "nsubj"),
            DepToken(2, "eats", "eat", "VERB", "VBZ", 0, "root"),
            DepToken(3, "cake", "cake", "NOUN", "NN", 2, "obj"),
        ),
    )


class TestChildren:
    def test_obj_filter(self):
        sentence = eats_cake()
        kids = children(sentence, 2, "obj")
        assert [t.form for t in kids] == ["cake"]

    def test_leaf_is_empty(self):
        assert children(eats_cake(), 3) == []

    def test_legacy_dobj_matches_obj_filter(self):
        # UD v1 renamed: dobj -> obj. The alias set accepts both.
        sentence = DepSentence(
            "c",
            (
                DepToken(1, "eats", "eat", "VERB", "VBZ", 0, "root"),
                DepToken(2, "cake", "cake", "NOUN", "NN", 1, "dobj"),
            ),
        )
        assert [t.form for t in children(sentence, 1, "obj")] == ["cake"]
        assert [t.form for t in children(sentence, 1, "dobj")] == ["cake"]

    def test_index_out_of_range(self):
        with pytest.raises(ConlluError, match="out of range"):
            children(eats_cake(), 9)


def test_serialize_round_trip():
    sentence = eats_cake()
    back = parse_conllu(io.StringIO(serialize(sentence)))
    assert back == [sentence]


def test_empty_sentence_roots():
    assert roots(DepSentence("e", ())) == []


class TestAttach:
    def make_corpus(self, n=4):
        images = [ImageRecord("i", "d")]
        captions = [
            CaptionRecord(f"cap{k}", "i", Language.EN, "text", Origin.ORIGINAL)
            for k in range(n)
        ]
        return Corpus("c", images, captions)

    def sentence(self, caption_id):
        return DepSentence(
            caption_id, (DepToken(1, "x", "x", "NOUN", "NN", 0, "root"),)
        )

    def test_coverage(self):
        corpus = self.make_corpus(4)
        index = attach_parses(corpus, [self.sentence(f"cap{k}") for k in range(3)])
        assert index.coverage == pytest.approx(0.75)
        assert index.n_unknown == 0

    def test_duplicate_last_wins(self):
        corpus = self.make_corpus(2)
        first = self.sentence("cap0")
        second = DepSentence(
            "cap0", (DepToken(1, "y", "y", "VERB", "VB", 0, "root"),)
        )
        index = attach_parses(corpus, [first, second])
        assert index.n_duplicates == 1
        assert index.get("cap0").tokens[0].form == "y"

    def test_unknown_skipped_and_counted(self):
        corpus = self.make_corpus(2)
        index = attach_parses(corpus, [self.sentence("nope")])
        assert index.n_unknown == 1
        assert index.get("nope") is None


@st.composite
def dep_sentences(draw):
    n = draw(st.integers(1, 8))
    tokens = []
    for i in range(1, n + 1):
        head = draw(st.integers(0, i - 1))  # heads point left: always acyclic
        tokens.append(
            DepToken(
                i,
                draw(st.sampled_from(["a", "dog", "läuft", "跑", "犬"])),
                draw(st.sampled_from(["a", "dog", "laufen", "跑", "犬"])),
                draw(st.sampled_from(["NOUN", "VERB", "DET", "ADJ"])),
                draw(st.sampled_from(["NN", "VBZ", "PTKVZ", "_"])),
                head,
                draw(st.sampled_from(["root", "nsubj", "obj", "det", "aux:pass"])),
            )
        )
    return DepSentence(draw(st.sampled_from(["c1", "c2"])), tuple(tokens))


@settings(max_examples=60, deadline=None)
@given(dep_sentences())
def test_round_trip_property(sentence):
    assert parse_conllu(io.StringIO(serialize(sentence))) == [sentence]
