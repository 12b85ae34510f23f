import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from escrowdetect.corpus import Corpus, Label
from escrowdetect.features import (Category, FeatureDictionary, FeatureError, FeatureMatrix,
                                   NgramConfig, build_dictionary, extract_matrix, extract_page,
                                   fixed_slots, normalize_groups, pixel_bin_indices,
                                   raw_features, tag_sequence, url_tokens, vocabulary_richness)

from conftest import page, png_asset, site, text_site

UNIGRAMS = NgramConfig(orders={g: (1, 1) for g in ("chr", "pos", "word", "tag", "uchr", "utok")},
                       min_df=1)


def body(text):
    s = text_site("s", [text])
    return raw_features(s.pages[0], s, Category.BODY)


def test_word_length_bins():
    f = body("aa bb.")
    assert f["lex:total_words"] == 2
    assert f["wlen:2"] == 1.0
    assert all(f[f"wlen:{i}"] == 0.0 for i in range(1, 21) if i != 2 and f"wlen:{i}" in f)


def test_function_word_frequency():
    assert body("to be or not to be")["fw:to"] == pytest.approx(2 / 6)


def test_empty_page_is_all_zero():
    s = site("s", [page("p0000", "")])
    f = raw_features(s.pages[0], s, Category.BODY)
    assert set(fixed_slots(Category.BODY)) <= set(f)
    assert all(v == 0 for v in f.values())


def test_vocabulary_richness_hand_case():
    n, v, v1, v2, ttr, k, h, sichel = vocabulary_richness(["a", "a", "b"])
    assert (n, v, v1, v2) == (3, 2, 1, 1)
    assert k == pytest.approx(1e4 * (5 - 3) / 9)
    assert k == pytest.approx(2222.22, abs=0.005)
    assert h == pytest.approx(100 * math.log(3) / 0.5)
    assert h == pytest.approx(219.72, abs=0.005)
    assert sichel == 0.5 and ttr == pytest.approx(2 / 3)


def test_vocabulary_richness_degenerate_cases():
    assert vocabulary_richness([]) == (0.0,) * 8
    h = vocabulary_richness(["a", "b", "c"])[6]
    assert math.isfinite(h) and h > 1e6


def test_html_tag_ngrams():
    p = page("p0000", "<html><body></body></html>")
    s = site("s", [p])
    f = raw_features(s.pages[0], s, Category.HTML, NgramConfig(orders={"tag": (1, 2)}))
    assert f == {"tag:html": 1.0, "tag:body": 1.0, "tag:html body": 1.0}


def test_html_repeated_tags_and_tagless_page():
    assert tag_sequence(b"<table><tr><td><td><td></table>").count("td") == 3
    s = site("s", [page("p0000", "just words")])
    assert raw_features(s.pages[0], s, Category.HTML) == {}


def test_url_counts():
    s = site("s", [page("p0000", "", url="a.b/a")])
    f = raw_features(s.pages[0], s, Category.URL, UNIGRAMS)
    assert f["uchr:a"] == 2
    assert f["utok:a"] == 2 and f["utok:b"] == 1
    assert "utok:escrow" in {f"utok:{t}" for t in url_tokens("secure-escrow.com")}
    assert url_tokens("secure-escrow.com").count("escrow") == 1


def test_pixel_bins_at_cube_corners():
    black = np.zeros((1, 1, 3), np.uint8)
    white = np.full((1, 1, 3), 255, np.uint8)
    assert pixel_bin_indices(black).tolist() == [0]
    assert pixel_bin_indices(white).tolist() == [24 * 400 + 19 * 20 + 19] == [9999]


def image_features(rgb):
    img = png_asset("i0000", rgb)
    s = site("s", [page("p0000", "", images=["i0000"])], images=[img])
    return raw_features(s.pages[0], s, Category.IMAGE)


def test_single_pixel_images():
    f = image_features((0, 0, 0))
    assert f["pix:0000"] == 1.0 and not any(k.startswith("pix:") and k != "pix:0000" for k in f)
    assert image_features((255, 255, 255))["pix:9999"] == 1.0


def test_page_without_images():
    s = site("s", [page("p0000", "")])
    f = raw_features(s.pages[0], s, Category.IMAGE)
    assert f["imgagg:count"] == 0 and all(v == 0 for v in f.values())


def star():
    pages = [page("p0000", "<a href='p0001.html'>1</a><a href='p0002.html'>2</a>"),
             page("p0001", "leaf"), page("p0002", "leaf")]
    return site("s", pages, [("p0000", "p0001"), ("p0000", "p0002")])


def test_star_graph_root_and_leaf():
    s = star()
    root = raw_features(s.pages[0], s, Category.LINK)
    assert root["pstr:page_level"] == 0
    assert root["lnk:page_out_rel"] == 2
    assert root["pstr:out_level_1"] == 2
    leaf = raw_features(s.pages[1], s, Category.LINK)
    assert leaf["pstr:in_level_0"] == 1


def test_isolated_page_link_counts():
    s = site("s", [page("p0000", "nothing")])
    f = raw_features(s.pages[0], s, Category.LINK)
    assert f["pstr:page_level"] == 0
    assert all(f[k] == 0 for k in f if k.startswith("lnk:page_"))


def corpus_of(*texts, label=Label.FAKE):
    return Corpus(tuple(text_site(f"s{i}", [t], label) for i, t in enumerate(texts)))


def test_letter_ngram_dictionary():
    d = build_dictionary(corpus_of("ab"), Category.BODY,
                         NgramConfig(orders={"chr": (1, 2)}, min_df=1))
    assert [e for e in d.entries if e.startswith("chr:")] == ["chr:a", "chr:ab", "chr:b"]


def test_word_unigram_dictionary():
    d = build_dictionary(corpus_of("escrow", "escort"), Category.BODY, UNIGRAMS)
    assert [e for e in d.entries if e.startswith("word:")] == ["word:escort", "word:escrow"]


def test_min_df_drops_rare_ngrams():
    c = corpus_of("alpha", "alpha")
    d = build_dictionary(c, Category.BODY, NgramConfig(min_df=3))
    assert list(d.entries) == fixed_slots(Category.BODY)
    with pytest.raises(FeatureError):
        build_dictionary(Corpus(()), Category.BODY)


def test_duplicate_pages_give_identical_vectors():
    s = text_site("s", ["the escrow agent holds funds", "the escrow agent holds funds"])
    c = Corpus((s,))
    for cat in (Category.BODY, Category.HTML):
        d = build_dictionary(c, cat, NgramConfig(min_df=1))
        m = extract_matrix(c, d).dense()
        assert np.array_equal(m[0], m[1])


def test_extract_page_matches_matrix_row(fixture_corpus):
    d = build_dictionary(fixture_corpus, Category.URL)
    m = extract_matrix(fixture_corpus, d)
    s = fixture_corpus.sites[0]
    assert np.array_equal(extract_page(s.pages[0], s, d), m.row(s.site_id, s.pages[0].page_id))
    assert np.all(m.dense() >= 0)


def test_feature_matrix_round_trip(tmp_path):
    c = corpus_of("escrow escrow funds", "escrow agent")
    d = build_dictionary(c, Category.BODY, UNIGRAMS)
    m = extract_matrix(c, d)
    m.save(tmp_path / "m.tsv", header={"seed": 3})
    back = FeatureMatrix.load(tmp_path / "m.tsv")
    assert back.keys == m.keys and np.array_equal(back.dense(), m.dense())
    assert back.dictionary.content_hash == d.content_hash
    other = FeatureDictionary(Category.BODY, ("lex:total_words",))
    with pytest.raises(FeatureError):
        FeatureMatrix.load(tmp_path / "m.tsv", other)


def test_dictionary_text_round_trip(tmp_path):
    d = build_dictionary(corpus_of("escrow"), Category.BODY, UNIGRAMS)
    d.save(tmp_path / "d.txt")
    assert FeatureDictionary.load(tmp_path / "d.txt") == d
    text = (tmp_path / "d.txt").read_text().replace("word:escrow", "word:escr0w")
    with pytest.raises(ValueError, match="hash"):
        FeatureDictionary.from_text(text)


def test_group_normalisation_only_touches_ngrams():
    c = corpus_of("escrow escrow funds")
    d = build_dictionary(c, Category.BODY, UNIGRAMS)
    X = normalize_groups(extract_matrix(c, d).values, d).toarray()[0]
    words = d.groups["word"]
    assert X[words].sum() == pytest.approx(1.0)
    assert X[d.index["lex:total_words"]] == 3


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="abc .,!\n", max_size=60))
def test_body_features_are_finite_and_non_negative(text):
    f = body(text)
    assert all(math.isfinite(v) and v >= 0 for v in f.values())
