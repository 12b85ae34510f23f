"""Per-category classifier ensembles combined by majority vote."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np


class EnsembleError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnsembleModel:
    """One trained member per feature category.

    ``rule='vote'``: majority of member labels, abstentions (label 0) count
    as Fake and an even split goes to Fake. ``rule='mean'``: sign of the
    mean member score, 0 -> Fake.
    """

    members: Mapping[str, object]
    technique: str
    rule: str = "vote"

    def combine(self, votes: np.ndarray, scores: np.ndarray | None = None) -> np.ndarray:
        return combine_votes(votes, scores, self.rule)


def combine_votes(votes, scores=None, rule: str = "vote") -> np.ndarray:
    """Combine an (n_members x n_instances) label array into +1/-1 labels."""
    votes = np.atleast_2d(np.asarray(votes))
    if rule == "mean":
        if scores is None:
            raise ValueError("score averaging needs member scores")
        mean = np.atleast_2d(np.asarray(scores, dtype=float)).mean(axis=0)
        return np.where(mean >= 0, 1, -1)
    if rule != "vote":
        raise ValueError(f"unknown ensemble rule {rule!r}")
    fake = np.sum(votes >= 0, axis=0)  # abstain (0) counts as Fake
    real = np.sum(votes < 0, axis=0)
    return np.where(fake >= real, 1, -1)


def train_ensemble(categories: Sequence[str], train_member: Callable[[str], object],
                   technique: str, rule: str = "vote") -> EnsembleModel:
    """Train ``train_member(category)`` for each category."""
    members = {}
    for cat in categories:
        try:
            members[cat] = train_member(cat)
        except Exception as exc:
            raise EnsembleError(f"ensemble member for category {cat!r} failed: {exc}") from exc
    return EnsembleModel(members, technique, rule)
