"""Dictionary construction and page -> vector extraction for all categories."""
from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ..corpus import Corpus, WebPage, Website
from .dictionary import GROUP_ORDER, Category, FeatureDictionary, NgramConfig, group_of
from .pos import Tagger
from .structure import (image_fixed_slots, link_fixed_slots, raw_html, raw_image, raw_link,
                        raw_url)
from .text import body_fixed_slots, raw_body

log = logging.getLogger(__name__)


class FeatureError(Exception):
    pass


def fixed_slots(category: Category) -> list[str]:
    return {
        Category.BODY: body_fixed_slots,
        Category.HTML: list,
        Category.URL: list,
        Category.IMAGE: image_fixed_slots,
        Category.LINK: link_fixed_slots,
    }[Category(category)]()


def raw_features(page: WebPage, site: Website, category: Category,
                 config: NgramConfig | None = None,
                 tagger: Tagger | None = None) -> dict[str, float]:
    """All features of one category for one page, keyed by name."""
    config = config or NgramConfig()
    category = Category(category)
    if category is Category.BODY:
        return raw_body(page, config, tagger)
    if category is Category.HTML:
        return raw_html(page, config)
    if category is Category.URL:
        return raw_url(page, config)
    if category is Category.IMAGE:
        return raw_image(page, site.image_map())
    return raw_link(page, site)


def raw_table(corpus: Corpus, category: Category, config: NgramConfig | None = None,
              tagger: Tagger | None = None) -> list[dict[str, float]]:
    """``raw_features`` for every page of the corpus, in corpus order."""
    images = {s.site_id: s.image_map() for s in corpus.sites}
    out = []
    for site, page in corpus.pages():
        if Category(category) is Category.IMAGE:
            out.append(raw_image(page, images[site.site_id]))
        else:
            out.append(raw_features(page, site, category, config, tagger))
    return out


def _ordered(names: Iterable[str], category: Category) -> tuple[str, ...]:
    order = {g: i for i, g in enumerate(GROUP_ORDER[category])}
    fixed = fixed_slots(category)
    rank = {n: i for i, n in enumerate(fixed)}
    return tuple(sorted(set(names), key=lambda n: (order[group_of(n)], rank.get(n, -1), n)))


def build_dictionary(corpus: Corpus, category: Category, config: NgramConfig | None = None,
                     raw: Sequence[Mapping[str, float]] | None = None,
                     tagger: Tagger | None = None) -> FeatureDictionary:
    """Candidate dictionary: every fixed slot plus each n-gram present in at
    least ``config.min_df`` pages. Fixed slots keep their documented order,
    n-grams are sorted lexicographically within their group."""
    config = config or NgramConfig()
    category = Category(category)
    if not corpus.sites:
        raise FeatureError("cannot build a dictionary from an empty corpus")
    if raw is None:
        raw = raw_table(corpus, category, config, tagger)
    fixed = set(fixed_slots(category))
    df: dict[str, int] = {}
    for row in raw:
        for name, value in row.items():
            if value and name not in fixed:
                df[name] = df.get(name, 0) + 1
    kept = [n for n, c in df.items() if c >= config.min_df]
    entries = _ordered(list(fixed) + kept, category)
    return FeatureDictionary(category, entries, {"ngram": config.to_dict(), "stage": "candidate"})


def align(raw: Sequence[Mapping[str, float]], dictionary: FeatureDictionary) -> sp.csr_matrix:
    index = dictionary.index
    rows, cols, vals = [], [], []
    for r, feats in enumerate(raw):
        for name, value in feats.items():
            j = index.get(name)
            if j is not None and value:
                if value < 0:
                    raise FeatureError(f"negative feature value {name}={value}")
                rows.append(r)
                cols.append(j)
                vals.append(value)
    return sp.csr_matrix((np.asarray(vals, dtype=np.float64), (rows, cols)),
                         shape=(len(raw), len(dictionary)))


@dataclass
class FeatureMatrix:
    """Per-page feature rows aligned to one dictionary."""

    dictionary: FeatureDictionary
    keys: list[tuple[str, str]]  # (site_id, page_id)
    values: sp.csr_matrix

    def __post_init__(self):
        self.values = sp.csr_matrix(self.values, dtype=np.float64)
        if self.values.shape != (len(self.keys), len(self.dictionary)):
            raise FeatureError("feature matrix shape does not match keys/dictionary")

    def row(self, site_id: str, page_id: str) -> np.ndarray:
        i = self.keys.index((site_id, page_id))
        return self.values[i].toarray().ravel()

    def dense(self) -> np.ndarray:
        return self.values.toarray()

    def to_text(self, header: Mapping[str, object] | None = None) -> str:
        buf = io.StringIO()
        config = json.dumps(self.dictionary.config, sort_keys=True, separators=(",", ":"))
        meta = {"category": self.dictionary.category.value, "dict": self.dictionary.content_hash,
                **(header or {}), "config": config}
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        buf.write("\t".join(["site_id", "page_id", *self.dictionary.entries]) + "\n")
        dense = self.values.toarray()
        for (site_id, page_id), row in zip(self.keys, dense):
            cells = ["0" if v == 0 else repr(float(v)) for v in row]
            buf.write("\t".join([site_id, page_id, *cells]) + "\n")
        return buf.getvalue()

    def save(self, path: str | os.PathLike, header: Mapping[str, object] | None = None) -> None:
        Path(path).write_text(self.to_text(header), encoding="utf-8")

    @classmethod
    def load(cls, path: str | os.PathLike,
             dictionary: FeatureDictionary | None = None) -> "FeatureMatrix":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        meta = dict(tok.split("=", 1) for tok in lines[0][2:].split() if "=" in tok)
        names = lines[1].split("\t")[2:]
        if dictionary is None:
            dictionary = FeatureDictionary(Category(meta["category"]), tuple(names),
                                           json.loads(meta.get("config", "{}")))
        elif tuple(names) != dictionary.entries:
            raise FeatureError("feature matrix header does not match the dictionary")
        keys, rows = [], []
        for line in lines[2:]:
            if not line:
                continue
            cells = line.split("\t")
            keys.append((cells[0], cells[1]))
            rows.append([float(c) for c in cells[2:]])
        values = np.asarray(rows, dtype=np.float64).reshape(len(keys), len(names))
        return cls(dictionary, keys, sp.csr_matrix(values))


def extract_matrix(corpus: Corpus, dictionary: FeatureDictionary,
                   raw: Sequence[Mapping[str, float]] | None = None,
                   tagger: Tagger | None = None) -> FeatureMatrix:
    config = NgramConfig.from_dict(dictionary.config.get("ngram", {}))
    if raw is None:
        raw = raw_table(corpus, dictionary.category, config, tagger)
    keys = [(s.site_id, p.page_id) for s, p in corpus.pages()]
    return FeatureMatrix(dictionary, keys, align(raw, dictionary))


def extract_page(page: WebPage, site: Website, dictionary: FeatureDictionary,
                 tagger: Tagger | None = None) -> np.ndarray:
    """Dense vector of one page aligned to ``dictionary``."""
    config = NgramConfig.from_dict(dictionary.config.get("ngram", {}))
    feats = raw_features(page, site, dictionary.category, config, tagger)
    return align([feats], dictionary).toarray().ravel()


def normalize_groups(values: sp.spmatrix | np.ndarray,
                     dictionary: FeatureDictionary) -> sp.csr_matrix:
    """L1-normalise every n-gram group of every row (fixed slots untouched)."""
    X = sp.csr_matrix(values, dtype=np.float64, copy=True)
    X.sum_duplicates()
    nnz_rows = np.repeat(np.arange(X.shape[0]), np.diff(X.indptr))
    for group, idx in dictionary.groups.items():
        if not dictionary.is_ngram(group + ":"):
            continue
        indicator = np.zeros(X.shape[1])
        indicator[idx] = 1.0
        sums = X @ indicator
        inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        sel = indicator[X.indices] > 0
        X.data[sel] *= inv[nnz_rows[sel]]
    return X
