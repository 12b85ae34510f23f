"""Information-gain ranking of candidate n-gram features."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .features.dictionary import FeatureDictionary, group_of

log = logging.getLogger(__name__)


def _entropy2(p: np.ndarray) -> np.ndarray:
    """Binary entropy in bits, elementwise, with 0*log(0) = 0."""
    p = np.clip(p, 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def information_gain(presence: Sequence[bool], labels: Sequence[bool | int | str]) -> float:
    """IG (bits) of a binary class given a feature's presence/absence.

    ``labels`` may be booleans (True = Fake), +/-1, or label strings.
    """
    presence = np.asarray(presence, dtype=bool)
    y = _as_bool_labels(labels)
    if presence.shape != y.shape or presence.size == 0:
        raise ValueError("presence and labels must have the same non-zero length")
    return float(information_gain_matrix(presence[:, None], y)[0])


def _as_bool_labels(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype.kind in "US":
        lower = np.char.lower(arr.astype(str))
        if not np.isin(lower, ["fake", "real"]).all():
            raise ValueError("labels must be 'fake' or 'real'")
        return lower == "fake"
    if arr.dtype == bool:
        return arr
    return arr > 0


def information_gain_matrix(presence, labels) -> np.ndarray:
    """IG of every column of a (pages x features) presence matrix."""
    y = _as_bool_labels(labels)
    n = y.size
    if sp.issparse(presence):
        P = sp.csc_matrix(presence != 0, dtype=np.float64)
        n_present = np.asarray(P.sum(axis=0)).ravel()
        pos_present = np.asarray(P.T @ y.astype(np.float64)).ravel()
    else:
        P = np.asarray(presence) != 0
        n_present = P.sum(axis=0).astype(np.float64)
        pos_present = (P & y[:, None]).sum(axis=0).astype(np.float64)
    n_pos = float(y.sum())
    n_absent = n - n_present
    pos_absent = n_pos - pos_present
    h_class = _entropy2(np.array([n_pos / n]))[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        h_present = np.where(n_present > 0, _entropy2(pos_present / np.maximum(n_present, 1)), 0.0)
        h_absent = np.where(n_absent > 0, _entropy2(pos_absent / np.maximum(n_absent, 1)), 0.0)
    ig = h_class - (n_present / n) * h_present - (n_absent / n) * h_absent
    return np.clip(ig, 0.0, h_class)


@dataclass
class SelectionReport:
    category: str
    ranked: list[tuple[str, float, int]]  # (name, IG, document frequency)
    cutoff: str
    notes: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# category={self.category} cutoff={self.cutoff}\n")
        for note in self.notes:
            buf.write(f"# note: {note}\n")
        buf.write("feature\tinformation_gain\tdocument_frequency\n")
        for name, ig, df in self.ranked:
            buf.write(f"{name}\t{ig:.10f}\t{df}\n")
        return buf.getvalue()


def parse_policy(text: str) -> tuple[str, float]:
    """``top_k=N`` or ``min_ig=T`` -> (kind, value)."""
    kind, _, value = text.partition("=")
    kind = kind.strip()
    if kind not in ("top_k", "min_ig") or not value:
        raise ValueError(f"selection policy must be top_k=N or min_ig=T, got {text!r}")
    return kind, (int(value) if kind == "top_k" else float(value))


def select_features(candidates: FeatureDictionary, values, labels,
                    policy: str | tuple[str, float] = ("top_k", 500)
                    ) -> tuple[FeatureDictionary, SelectionReport]:
    """Keep all fixed slots plus the n-grams passing ``policy``.

    ``values`` is the (pages x candidates) matrix the IG is scored on; it
    must come from training pages only. ``top_k`` applies per n-gram group.
    IG ties are broken by name.
    """
    kind, threshold = parse_policy(policy) if isinstance(policy, str) else policy
    if values.shape[1] != len(candidates):
        raise ValueError("value matrix does not match the candidate dictionary")
    ig = information_gain_matrix(values, labels)
    present = values != 0
    df = np.asarray(present.sum(axis=0)).ravel().astype(int)
    names = candidates.entries
    ngram_idx = [i for i, n in enumerate(names) if candidates.is_ngram(n)]
    ranked = sorted(ngram_idx, key=lambda i: (-ig[i], names[i]))
    notes = []
    if kind == "min_ig":
        keep = [i for i in ranked if ig[i] >= threshold]
    else:
        k = int(threshold)
        by_group: dict[str, list[int]] = {}
        for i in ranked:
            by_group.setdefault(group_of(names[i]), []).append(i)
        keep = []
        for group, idx in by_group.items():
            if k > len(idx):
                notes.append(f"group {group}: k={k} exceeds {len(idx)} candidates, kept all")
            keep.extend(idx[:k])
    keep_names = {names[i] for i in keep}
    keep_names.update(n for n in names if not candidates.is_ngram(n))
    policy_text = f"{kind}={threshold:g}" if kind == "min_ig" else f"{kind}={int(threshold)}"
    selected = candidates.subset(keep_names, stage="selected", policy=policy_text)
    report = SelectionReport(candidates.category.value,
                             [(names[i], float(ig[i]), int(df[i])) for i in ranked],
                             policy_text, notes)
    return selected, report
