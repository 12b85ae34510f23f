"""Page tables, experimental conditions and the trainable detector.

A :class:`PageTable` holds everything the learners need about a set of
pages: labels, structural attributes and group-normalised feature
matrices per category. A :class:`Detector` couples one condition
(technique x kernel x feature set) with its trained state and can be saved
to / loaded from a single ``.npz`` file.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import __version__
from .corpus import Corpus, Label
from .features import (Category, FeatureDictionary, NgramConfig, align, build_dictionary,
                       normalize_groups, raw_table)
from .kernels import cosine_gram, linear_gram, pair_products, similarity_vectors
from .learners import (PcaModel, SvmModel, classify_projected, combine_votes,
                       decision_function, project, train_ensemble, train_kernel_pca,
                       train_pca, train_svm)
from .selection import select_features

log = logging.getLogger(__name__)

CONCAT = "concat"
FEATURE_SETS = ("body", "html", "url", "image", "link", "all")
TECHNIQUES = ("svm", "pca")
KERNELS = ("linear", "composite")
MODEL_FORMAT = 1


class ModelError(Exception):
    pass


def feature_set_categories(feature_set: str) -> tuple[str, ...]:
    if feature_set == "all":
        return tuple(c.value for c in Category)
    return (Category(feature_set).value,)


@dataclass(frozen=True)
class Condition:
    """One cell of the experiment grid plus its hyperparameters."""

    technique: str = "svm"
    kernel: str = "composite"
    feature_set: str = "all"
    C: float = 1.0
    smooth: float = 0.0
    include_self: bool = False
    all_mode: str = "per-category"
    ensemble_rule: str = "vote"

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise ValueError(f"technique must be one of {TECHNIQUES}")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(f"feature set must be one of {FEATURE_SETS}")
        if self.all_mode not in ("per-category", "concat"):
            raise ValueError("all_mode must be per-category or concat")

    @property
    def id(self) -> str:
        return f"{self.technique}-{self.kernel}-{self.feature_set}"

    @property
    def categories(self) -> tuple[str, ...]:
        return feature_set_categories(self.feature_set)

    @property
    def is_ensemble(self) -> bool:
        return self.kernel == "linear" and len(self.categories) > 1

    @property
    def kernel_categories(self) -> tuple[str, ...]:
        """Categories entering the composite similarity vector."""
        if len(self.categories) > 1 and self.all_mode == "concat":
            return (CONCAT,)
        return self.categories


@dataclass(frozen=True)
class FeatureConfig:
    ngram: NgramConfig = field(default_factory=NgramConfig)
    policy: str = "top_k=500"


# --- page tables ----------------------------------------------------------------

@dataclass
class PageTable:
    keys: list[tuple[str, str]]
    site_ids: np.ndarray
    labels: np.ndarray                 # +1 Fake, -1 Real, 0 Unknown
    attrs: np.ndarray                  # (n, 3): level, in-links, out-links
    features: dict[str, sp.csr_matrix]  # category -> group-normalised rows
    dictionaries: dict[str, FeatureDictionary]

    def __len__(self) -> int:
        return len(self.keys)

    def with_concat(self) -> "PageTable":
        if CONCAT not in self.features:
            cats = [c for c in (x.value for x in Category) if c in self.features]
            self.features[CONCAT] = sp.hstack([self.features[c] for c in cats]).tocsr()
        return self


def page_meta(corpus: Corpus) -> tuple[list, np.ndarray, np.ndarray, np.ndarray]:
    keys, sites, labels, attrs = [], [], [], []
    for site, page in corpus.pages():
        keys.append((site.site_id, page.page_id))
        sites.append(site.site_id)
        labels.append(site.label.sign)
        attrs.append((page.page_level, page.in_link_count, page.out_link_count))
    return (keys, np.asarray(sites, dtype=object), np.asarray(labels, dtype=int),
            np.asarray(attrs, dtype=float).reshape(-1, 3))


class RawCache:
    """Raw per-page feature dicts for a corpus, computed once per category."""

    def __init__(self, corpus: Corpus, ngram: NgramConfig | None = None):
        self.corpus = corpus
        self.ngram = ngram or NgramConfig()
        self._raw: dict[str, list] = {}

    def get(self, category: str) -> list:
        if category not in self._raw:
            self._raw[category] = raw_table(self.corpus, Category(category), self.ngram)
        return self._raw[category]


def fit_dictionaries(raw: RawCache, categories: Sequence[str], labels: np.ndarray,
                     rows: np.ndarray | None, config: FeatureConfig
                     ) -> dict[str, FeatureDictionary]:
    """Candidate dictionaries + IG selection using only ``rows`` (all if None)."""
    out = {}
    for cat in categories:
        table = raw.get(cat)
        if rows is not None:
            table = [table[i] for i in rows]
        cand = build_dictionary(raw.corpus, Category(cat), raw.ngram, raw=table)
        y = labels if rows is None else labels[rows]
        mask = y != 0
        values = align([t for t, m in zip(table, mask) if m], cand)
        selected, _ = select_features(cand, values, y[mask] > 0, config.policy)
        out[cat] = selected
    return out


def build_table(corpus: Corpus, dictionaries: Mapping[str, FeatureDictionary],
                raw: RawCache | None = None) -> PageTable:
    keys, sites, labels, attrs = page_meta(corpus)
    feats = {}
    for cat, d in dictionaries.items():
        rows = raw.get(cat) if raw is not None else raw_table(
            corpus, d.category, NgramConfig.from_dict(d.config.get("ngram", {})))
        feats[cat] = normalize_groups(align(rows, d), d)
    return PageTable(keys, sites, labels, attrs, feats, dict(dictionaries))


def featurize(corpus: Corpus, categories: Sequence[str], config: FeatureConfig | None = None,
              raw: RawCache | None = None) -> PageTable:
    """Dictionaries selected on the whole labelled corpus, then the table."""
    config = config or FeatureConfig()
    raw = raw or RawCache(corpus, config.ngram)
    _, _, labels, _ = page_meta(corpus)
    dicts = fit_dictionaries(raw, categories, labels, None, config)
    return build_table(corpus, dicts, raw)


# --- detector ---------------------------------------------------------------------

def _max_abs_scale(X: sp.csr_matrix) -> np.ndarray:
    m = np.asarray(abs(X).max(axis=0).todense()).ravel()
    m[m == 0] = 1.0
    return 1.0 / m


@dataclass
class _Member:
    """Trained learner on one representation."""

    model: SvmModel | PcaModel
    train_rows: np.ndarray | sp.csr_matrix | None = None  # rows kernels are taken against
    col_scale: np.ndarray | None = None


class Detector:
    """A condition plus its trained state."""

    def __init__(self, condition: Condition, dictionaries: Mapping[str, FeatureDictionary]):
        self.condition = condition
        self.dictionaries = dict(dictionaries)
        self.members: dict[str, _Member] = {}
        # composite-kernel reference set
        self.ref_attrs: np.ndarray | None = None
        self.ref_features: dict[str, sp.csr_matrix] = {}
        self.ref_site_ord: np.ndarray | None = None
        self.ref_sites: list[str] = []

    # -- training --------------------------------------------------------------------

    def fit(self, table: PageTable, rows: np.ndarray,
            products: Mapping[str, np.ndarray] | None = None) -> "Detector":
        rows = np.asarray(rows)
        y = table.labels[rows]
        if not (np.any(y > 0) and np.any(y < 0)):
            raise ModelError("training rows must contain both Real and Fake pages")
        cond = self.condition
        if cond.kernel == "composite":
            self._fit_reference(table, rows)
            X = self._train_vectors(table, rows, products)
            self.members["composite"] = self._fit_member(X, y, dense_kernel=True)
        else:
            def train_member(cat):
                F = table.features[cat][rows]
                scale = _max_abs_scale(F)
                member = self._fit_member((F @ sp.diags(scale)).tocsr(), y, dense_kernel=False)
                member.col_scale = scale
                return member

            ensemble = train_ensemble(cond.categories, train_member, cond.technique,
                                      cond.ensemble_rule)
            self.members.update(ensemble.members)
        return self

    def _fit_member(self, X, y, dense_kernel: bool) -> _Member:
        cond = self.condition
        if cond.technique == "svm":
            K = cosine_gram(X) if dense_kernel else linear_gram(X)
            model = train_svm(K, y, cond.C)
            sup = model.support
            return _Member(model, X[sup])
        if dense_kernel:
            model = train_kernel_pca(cosine_gram(X), y)
            return _Member(model, X)
        return _Member(train_pca(X, y))

    def _fit_reference(self, table: PageTable, rows: np.ndarray) -> None:
        sites = sorted(set(table.site_ids[rows]))
        ordinal = {s: i for i, s in enumerate(sites)}
        self.ref_sites = list(sites)
        self.ref_site_ord = np.asarray([ordinal[s] for s in table.site_ids[rows]])
        self.ref_attrs = table.attrs[rows].copy()
        if self.condition.kernel_categories == (CONCAT,):
            table.with_concat()
        self.ref_features = {c: table.features[c][rows] for c in self.condition.kernel_categories}

    def _products(self, attrs, feats, products, query_rows, ref_rows):
        out = []
        for c in self.condition.kernel_categories:
            if products is not None and c in products:
                out.append(products[c][np.ix_(query_rows, ref_rows)])
            else:
                out.append(pair_products(attrs, feats[c], self.ref_attrs, self.ref_features[c],
                                         smooth=self.condition.smooth))
        return out

    def _train_vectors(self, table, rows, products):
        P = self._products(table.attrs[rows], {c: table.features[c][rows]
                                               for c in self.condition.kernel_categories},
                           products, rows, rows)
        self_cols = np.full(rows.size, -1) if self.condition.include_self else np.arange(rows.size)
        self._train_rows_index = rows
        return similarity_vectors(P, self.ref_site_ord, len(self.ref_sites), self_cols,
                                  on_empty="self")

    # -- prediction ------------------------------------------------------------------

    def vectors(self, table: PageTable, rows: np.ndarray,
                products: Mapping[str, np.ndarray] | None = None,
                ref_rows: np.ndarray | None = None) -> np.ndarray:
        """Composite similarity vectors of ``rows`` against the reference set.

        ``products``/``ref_rows`` let callers pass precomputed pair products
        indexed by table rows (the reference set must come from the same table).
        """
        if self.condition.kernel_categories == (CONCAT,):
            table.with_concat()
        feats = {c: table.features[c][rows] for c in self.condition.kernel_categories}
        P = self._products(table.attrs[rows], feats, products if ref_rows is not None else None,
                           rows, ref_rows)
        return similarity_vectors(P, self.ref_site_ord, len(self.ref_sites), None)

    def decision(self, table: PageTable, rows: np.ndarray,
                 products: Mapping[str, np.ndarray] | None = None,
                 ref_rows: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(labels, scores) for table rows; positive score leans Fake."""
        rows = np.asarray(rows)
        if not self.members:
            raise ModelError("detector is not trained")
        cond = self.condition
        if cond.kernel == "composite":
            X = self.vectors(table, rows, products, ref_rows)
            return self._member_decision(self.members["composite"], X, dense_kernel=True)
        votes, scores = [], []
        for cat in cond.categories:
            m = self.members[cat]
            F = (table.features[cat][rows] @ sp.diags(m.col_scale)).tocsr()
            lab, sc = self._member_decision(m, F, dense_kernel=False)
            votes.append(np.where(sc == 0, 0, lab))
            scores.append(sc)
        if len(votes) == 1:
            return np.where(np.asarray(votes[0]) >= 0, 1, -1), scores[0]
        labels = combine_votes(np.asarray(votes), np.asarray(scores), cond.ensemble_rule)
        return labels, np.mean(scores, axis=0)

    def _member_decision(self, member: _Member, X, dense_kernel: bool):
        model = member.model
        if isinstance(model, SvmModel):
            if member.train_rows is None or member.train_rows.shape[0] == 0:
                margin = np.full(X.shape[0], model.bias)
            else:
                K = (cosine_gram(X, member.train_rows) if dense_kernel
                     else linear_gram(X, member.train_rows))
                margin = decision_function(model, K)
            return np.where(margin >= 0, 1, -1), margin
        if model.kind == "kernel":
            P = project(model, cosine_gram(X, member.train_rows))
        else:
            P = project(model, X)
        return classify_projected(model, P)

    # -- persistence ------------------------------------------------------------------

    def save(self, path: str | os.PathLike, extra: Mapping[str, object] | None = None) -> None:
        arrays: dict[str, np.ndarray] = {}

        def put_sparse(prefix, M):
            M = sp.csr_matrix(M)
            arrays[prefix + ".data"] = M.data
            arrays[prefix + ".indices"] = M.indices
            arrays[prefix + ".indptr"] = M.indptr
            arrays[prefix + ".shape"] = np.asarray(M.shape)

        members_meta = {}
        for name, m in self.members.items():
            p = f"m.{name}"
            model = m.model
            if isinstance(model, SvmModel):
                members_meta[name] = {"type": "svm", "bias": model.bias, "C": model.C,
                                      "iterations": model.iterations, "kkt_gap": model.kkt_gap}
                arrays[p + ".alpha"] = model.alpha
                arrays[p + ".y"] = model.y
            else:
                members_meta[name] = {"type": "pca", "kind": model.kind,
                                      "gram_mean": model.gram_mean}
                for attr in ("eigenvalues", "components", "projections", "labels",
                             "all_eigenvalues", "mean", "scale", "kept_columns",
                             "gram_col_mean"):
                    val = getattr(model, attr)
                    if val is not None:
                        arrays[f"{p}.{attr}"] = np.asarray(val)
            if m.train_rows is not None:
                if sp.issparse(m.train_rows):
                    put_sparse(p + ".rows", m.train_rows)
                    members_meta[name]["rows"] = "sparse"
                else:
                    arrays[p + ".rows"] = np.asarray(m.train_rows)
                    members_meta[name]["rows"] = "dense"
            if m.col_scale is not None:
                arrays[p + ".col_scale"] = m.col_scale
        if self.ref_attrs is not None:
            arrays["ref.attrs"] = self.ref_attrs
            arrays["ref.site_ord"] = self.ref_site_ord
            for c, M in self.ref_features.items():
                put_sparse(f"ref.f.{c}", M)
        meta = {
            "format": MODEL_FORMAT,
            "tool": f"escrowdetect {__version__}",
            "condition": asdict(self.condition),
            "dictionaries": {c: d.to_text() for c, d in self.dictionaries.items()},
            "dictionary_hashes": {c: d.content_hash for c, d in self.dictionaries.items()},
            "members": members_meta,
            "ref_sites": self.ref_sites,
            **(extra or {}),
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        with open(path, "wb") as fh:
            np.savez_compressed(fh, **arrays)

    @classmethod
    def load(cls, path: str | os.PathLike,
             dictionaries: Mapping[str, FeatureDictionary] | None = None) -> "Detector":
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
        meta = json.loads(arrays.pop("meta").tobytes().decode())
        if meta.get("format") != MODEL_FORMAT:
            raise ModelError(f"unsupported model format {meta.get('format')}")
        dicts = {c: FeatureDictionary.from_text(t) for c, t in meta["dictionaries"].items()}
        for c, d in dicts.items():
            if d.content_hash != meta["dictionary_hashes"][c]:
                raise ModelError(f"model dictionary for {c} is corrupt (hash mismatch)")
        if dictionaries is not None:
            for c, d in dictionaries.items():
                if c in dicts and d.content_hash != dicts[c].content_hash:
                    raise ModelError(f"dictionary {c} ({d.content_hash}) does not match the "
                                     f"model's ({dicts[c].content_hash})")
        det = cls(Condition(**meta["condition"]), dicts)

        def get_sparse(prefix):
            shape = tuple(arrays[prefix + ".shape"])
            return sp.csr_matrix((arrays[prefix + ".data"], arrays[prefix + ".indices"],
                                  arrays[prefix + ".indptr"]), shape=shape)

        for name, mm in meta["members"].items():
            p = f"m.{name}"
            if mm["type"] == "svm":
                model = SvmModel(arrays[p + ".alpha"], arrays[p + ".y"], mm["bias"], mm["C"],
                                 iterations=mm["iterations"], kkt_gap=mm["kkt_gap"])
            else:
                kw = {a: arrays.get(f"{p}.{a}") for a in
                      ("all_eigenvalues", "mean", "scale", "kept_columns", "gram_col_mean")}
                model = PcaModel(mm["kind"], arrays[p + ".eigenvalues"], arrays[p + ".components"],
                                 arrays[p + ".projections"], arrays[p + ".labels"],
                                 gram_mean=mm["gram_mean"], **kw)
            rows = None
            if mm.get("rows") == "sparse":
                rows = get_sparse(p + ".rows")
            elif mm.get("rows") == "dense":
                rows = arrays[p + ".rows"]
            det.members[name] = _Member(model, rows, arrays.get(p + ".col_scale"))
        if "ref.attrs" in arrays:
            det.ref_attrs = arrays["ref.attrs"]
            det.ref_site_ord = arrays["ref.site_ord"]
            det.ref_sites = list(meta["ref_sites"])
            det.ref_features = {c: get_sparse(f"ref.f.{c}")
                                for c in det.condition.kernel_categories}
        return det


def train_detector(corpus: Corpus, condition: Condition,
                   config: FeatureConfig | None = None,
                   dictionaries: Mapping[str, FeatureDictionary] | None = None) -> Detector:
    """Select features on the labelled corpus and train on all its pages."""
    config = config or FeatureConfig()
    raw = RawCache(corpus, config.ngram)
    if dictionaries is None:
        _, _, labels, _ = page_meta(corpus)
        dictionaries = fit_dictionaries(raw, condition.categories, labels, None, config)
    table = build_table(corpus, {c: dictionaries[c] for c in condition.categories}, raw)
    rows = np.flatnonzero(table.labels != 0)
    return Detector(condition, table.dictionaries).fit(table, rows)


def site_verdict(page_labels: Sequence[int]) -> str:
    """Fake iff strictly more than half the pages are predicted Fake."""
    page_labels = np.asarray(page_labels)
    if page_labels.size == 0:
        raise ModelError("cannot classify a site with no pages")
    return Label.FAKE.value if np.sum(page_labels > 0) * 2 > page_labels.size else Label.REAL.value
