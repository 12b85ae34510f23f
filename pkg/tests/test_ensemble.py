import numpy as np
import pytest

from escrowdetect.learners.ensemble import EnsembleError, combine_votes, train_ensemble

F, R = 1, -1


def test_majority_vote():
    assert combine_votes([[F], [F], [F], [R], [R]]).tolist() == [F]
    assert combine_votes([[R], [R], [R], [R], [F]]).tolist() == [R]


def test_even_split_and_abstain_go_to_fake():
    assert combine_votes([[F], [R]]).tolist() == [F]
    assert combine_votes([[0], [R], [F]]).tolist() == [F]


def test_mean_rule():
    votes = np.array([[F, R], [R, R]])
    scores = np.array([[2.0, -1.0], [-1.0, 0.5]])
    assert combine_votes(votes, scores, "mean").tolist() == [F, R]
    with pytest.raises(ValueError):
        combine_votes(votes, None, "mean")
    with pytest.raises(ValueError):
        combine_votes(votes, rule="median")


def test_failing_member_named():
    def train(cat):
        if cat == "image":
            raise RuntimeError("no pixels")
        return cat

    with pytest.raises(EnsembleError, match="image"):
        train_ensemble(["body", "image"], train, "svm")
    model = train_ensemble(["body", "url"], train, "svm")
    assert list(model.members) == ["body", "url"]
