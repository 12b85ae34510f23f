import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from escrowdetect.features.dictionary import Category, FeatureDictionary
from escrowdetect.selection import (information_gain, information_gain_matrix, parse_policy,
                                    select_features)

import oracles

FFRR = ["fake", "fake", "real", "real"]


def test_independent_feature_has_zero_gain():
    assert information_gain([1, 0, 1, 0], FFRR) == pytest.approx(0.0, abs=1e-15)


def test_perfect_split_has_gain_one():
    assert information_gain([1, 1, 0, 0], FFRR) == pytest.approx(1.0)


def test_hand_entropy_case():
    assert information_gain([1, 1, 1, 0], FFRR) == pytest.approx(0.3113, abs=5e-5)
    assert information_gain([1, 1, 1, 0], FFRR) == pytest.approx(
        oracles.info_gain([1, 1, 1, 0], [1, 1, 0, 0]), abs=1e-12)


def test_single_class_labels_give_zero():
    assert information_gain([1, 0, 1], [1, 1, 1]) == 0.0


def test_label_encodings_agree():
    p = [1, 0, 1, 1, 0]
    a = information_gain(p, [True, False, False, True, True])
    b = information_gain(p, [1, -1, -1, 1, 1])
    c = information_gain(p, ["Fake", "real", "real", "fake", "FAKE"])
    assert a == b == c


def test_bad_inputs():
    with pytest.raises(ValueError):
        information_gain([1, 0], ["fake"])
    with pytest.raises(ValueError):
        information_gain([1], ["maybe"])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40))
def test_gain_matches_contingency_oracle(pairs):
    presence = [p for p, _ in pairs]
    labels = [y for _, y in pairs]
    got = information_gain(presence, labels)
    assert got == pytest.approx(oracles.info_gain(presence, labels), abs=1e-9)
    assert 0.0 <= got <= 1.0


def test_sparse_and_dense_matrix_agree():
    import scipy.sparse as sp

    rng = np.random.default_rng(1)
    P = (rng.random((30, 12)) < 0.3).astype(float)
    y = rng.random(30) < 0.5
    assert np.allclose(information_gain_matrix(P, y), information_gain_matrix(sp.csr_matrix(P), y))


def candidates(names):
    return FeatureDictionary(Category.URL, tuple(["url:count"] + names), {"stage": "candidate"})


def test_top_k_picks_the_informative_feature():
    d = candidates(["utok:good", "utok:noise"])
    X = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 1], [1, 0, 0]], float)
    sel, report = select_features(d, X, FFRR, "top_k=1")
    assert "utok:good" in sel.entries and "utok:noise" not in sel.entries
    assert "url:count" in sel.entries          # fixed slots always stay
    assert report.ranked[0][:2] == ("utok:good", pytest.approx(1.0))


def test_ties_broken_by_name():
    d = candidates(["utok:c", "utok:a", "utok:b"])
    X = np.array([[1, 1, 1, 1]] * 4, float)
    sel, _ = select_features(d, X, FFRR, ("top_k", 2))
    assert [n for n in sel.entries if n.startswith("utok:")] == ["utok:a", "utok:b"]


def test_min_ig_zero_keeps_everything():
    d = candidates(["utok:a", "utok:b"])
    X = np.array([[1, 1, 0], [1, 0, 0], [1, 1, 1], [1, 0, 1]], float)
    sel, _ = select_features(d, X, FFRR, "min_ig=0")
    assert set(sel.entries) == set(d.entries)


def test_k_above_candidate_count_is_noted():
    d = candidates(["utok:a"])
    X = np.ones((4, 2))
    sel, report = select_features(d, X, FFRR, "top_k=5")
    assert "utok:a" in sel.entries
    assert report.notes and "exceeds" in report.notes[0]
    assert "cutoff=top_k=5" in report.to_text()


def test_policy_parsing():
    assert parse_policy("top_k=7") == ("top_k", 7)
    assert parse_policy("min_ig=0.25") == ("min_ig", 0.25)
    with pytest.raises(ValueError):
        parse_policy("best=3")
    with pytest.raises(ValueError):
        select_features(candidates(["utok:a"]), np.ones((4, 5)), FFRR)
