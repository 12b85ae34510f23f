"""Bootstrap / cross-validation protocol, site accuracy and significance tests.

Every run ``i`` draws its sites from ``default_rng([seed, i])`` and its
fold split from ``default_rng([seed, i, 1])``, so all conditions evaluated
for the same seed see identical samples and folds (paired comparisons).
"""
from __future__ import annotations

import io
import itertools
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .corpus import Corpus, Label
from .features import Category, NgramConfig
from .kernels import pair_products
from .pipeline import (CONCAT, Condition, Detector, FeatureConfig, PageTable, RawCache,
                       build_table, fit_dictionaries, page_meta)

log = logging.getLogger(__name__)

ROW_NAMES = {("svm", "linear"): "Linear SVM", ("svm", "composite"): "Kernel SVM",
             ("pca", "linear"): "PCA", ("pca", "composite"): "Kernel PCA"}


class EvaluationError(Exception):
    pass


# --- sampling and folds --------------------------------------------------------------

def bootstrap_sample(corpus: Corpus, n_real: int, n_fake: int,
                     rng: np.random.Generator) -> list[str]:
    """Site ids drawn uniformly without replacement within each label."""
    out = []
    for label, n in ((Label.REAL, n_real), (Label.FAKE, n_fake)):
        ids = sorted(s.site_id for s in corpus.by_label(label))
        if n > len(ids):
            raise EvaluationError(f"asked for {n} {label.value} sites but the corpus has "
                                  f"{len(ids)}")
        if n < 0:
            raise EvaluationError("sample sizes must be non-negative")
        picks = rng.choice(len(ids), size=n, replace=False)
        out.extend(ids[i] for i in sorted(picks))
    return out


def fold_assignment(n: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per item after a seeded shuffle; sizes differ by at most 1."""
    if folds < 2:
        raise EvaluationError("folds must be >= 2")
    if n < folds:
        raise EvaluationError(f"{n} items cannot fill {folds} folds")
    out = np.empty(n, dtype=int)
    out[rng.permutation(n)] = np.arange(n) % folds
    return out


def site_fold_assignment(site_ids: np.ndarray, labels: np.ndarray, folds: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Whole sites to folds, dealt round-robin per label (stratified)."""
    site_ids = np.asarray(site_ids)
    by_label: dict[int, list[str]] = {}
    for s, y in zip(site_ids, labels):
        by_label.setdefault(int(y), [])
        if s not in by_label[int(y)]:
            by_label[int(y)].append(s)
    n_sites = sum(len(v) for v in by_label.values())
    if n_sites < folds:
        raise EvaluationError(f"{n_sites} sites cannot fill {folds} site-level folds")
    fold_of = {}
    offset = 0
    for y in sorted(by_label):
        sites = sorted(by_label[y])
        for k, i in enumerate(rng.permutation(len(sites))):
            fold_of[sites[i]] = (offset + k) % folds
        offset += len(sites)
    return np.asarray([fold_of[s] for s in site_ids])


# --- metrics ---------------------------------------------------------------------------

def site_accuracy(predicted: Sequence[int], truth: Sequence[int],
                  site_ids: Sequence[str]) -> float:
    """Fraction of sites with strictly more than half their pages correct."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    site_ids = np.asarray(site_ids, dtype=object)
    if not (predicted.shape == truth.shape == site_ids.shape):
        raise EvaluationError("predictions, truth and site ids must align")
    if predicted.size == 0:
        raise EvaluationError("no predictions")
    _, inverse = np.unique(site_ids.astype(str), return_inverse=True)
    correct = np.bincount(inverse, weights=(predicted == truth).astype(float))
    total = np.bincount(inverse)
    return float(np.mean(correct * 2 > total))


def site_accuracy_from_groups(groups: Mapping[str, Sequence[tuple[int, int]]]) -> float:
    """Same metric from ``site -> [(predicted, true), ...]``; empty sites skipped."""
    good = n = 0
    for site, pairs in groups.items():
        if not pairs:
            warnings.warn(f"site {site} has no pages; excluded from site accuracy")
            continue
        hits = sum(1 for p, t in pairs if p == t)
        good += hits * 2 > len(pairs)
        n += 1
    if n == 0:
        raise EvaluationError("no sites with pages")
    return good / n


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test on a - b.

    Degenerate cases return sentinels: all differences zero gives (0, 1);
    constant nonzero differences give (+/-inf, 0).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError("paired samples must be 1-d and of equal length")
    if a.size < 2:
        raise EvaluationError("paired t-test needs at least two pairs")
    d = a - b
    if np.all(d == 0):
        return 0.0, 1.0
    sd = d.std(ddof=1)
    mean = d.mean()
    if sd == 0 or sd <= 1e-15 * abs(mean):
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(d.size))
    return float(t), float(2 * stats.t.sf(abs(t), d.size - 1))


def bonferroni_threshold(alpha: float, m: int) -> float:
    if m < 1:
        raise EvaluationError("number of comparisons must be >= 1")
    return alpha / m


def bonferroni_gate(p_values: Sequence[float], alpha: float = 0.01,
                    m: int | None = None) -> np.ndarray:
    """Significance flags ``p < alpha / m`` (m defaults to len(p_values))."""
    p = np.asarray(p_values, dtype=float)
    return p < bonferroni_threshold(alpha, p.size if m is None else m)


# --- cross-validation ------------------------------------------------------------------

@dataclass
class Workspace:
    """Per-corpus caches shared by all conditions and runs."""

    corpus: Corpus
    feature_config: FeatureConfig
    smooth: float = 0.0
    raw: RawCache = None
    _global_table: PageTable | None = None
    _products: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.raw is None:
            self.raw = RawCache(self.corpus, self.feature_config.ngram)
        keys, sites, labels, attrs = page_meta(self.corpus)
        self.keys, self.site_ids, self.labels, self.attrs = keys, sites, labels, attrs

    def global_table(self) -> PageTable:
        """Dictionaries selected once on the whole labelled corpus."""
        if self._global_table is None:
            cats = [c.value for c in Category]
            dicts = fit_dictionaries(self.raw, cats, self.labels, None, self.feature_config)
            self._global_table = build_table(self.corpus, dicts, self.raw)
        return self._global_table

    def products(self, category: str) -> np.ndarray:
        if category not in self._products:
            t = self.global_table()
            if category == CONCAT:
                t.with_concat()
            self._products[category] = pair_products(t.attrs, t.features[category],
                                                     smooth=self.smooth)
        return self._products[category]


def cross_validate(ws: Workspace, rows: np.ndarray, condition: Condition, folds: int,
                   rng: np.random.Generator, *, fold_by: str = "page",
                   leakage_safe: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-fold (labels, scores) for the given corpus rows."""
    rows = np.asarray(rows)
    y = ws.labels[rows]
    if fold_by == "page":
        fold = fold_assignment(rows.size, folds, rng)
    elif fold_by == "site":
        fold = site_fold_assignment(ws.site_ids[rows], y, folds, rng)
    else:
        raise EvaluationError("fold_by must be 'page' or 'site'")
    pred = np.zeros(rows.size, dtype=int)
    score = np.zeros(rows.size)
    for f in range(folds):
        test = np.flatnonzero(fold == f)
        train = np.flatnonzero(fold != f)
        ytr = y[train]
        if not (np.any(ytr > 0) and np.any(ytr < 0)):
            raise EvaluationError(f"fold {f}: training pages are all one class; "
                                  f"use fewer folds or more sites")
        if leakage_safe:
            table, tr, te, products = _fold_table(ws, rows, train, test, condition)
        else:
            table = ws.global_table()
            tr, te = rows[train], rows[test]
            products = ({c: ws.products(c) for c in condition.kernel_categories}
                        if condition.kernel == "composite" else None)
        det = Detector(condition, {c: table.dictionaries[c] for c in condition.categories})
        det.fit(table, tr, products)
        lab, sc = det.decision(table, te, products, ref_rows=tr if products else None)
        pred[test] = lab
        score[test] = sc
    return pred, score


def _fold_table(ws: Workspace, rows, train, test, condition):
    """Dictionaries and selection fit on training pages only."""
    tr_rows = rows[train]
    dicts = fit_dictionaries(ws.raw, condition.categories, ws.labels, tr_rows, ws.feature_config)
    table = build_table(ws.corpus, dicts, ws.raw)
    products = None
    if condition.kernel == "composite":
        if condition.kernel_categories == (CONCAT,):
            table.with_concat()
        sub = rows
        products = {}
        for c in condition.kernel_categories:
            P = np.zeros((len(table), len(table)))
            P[np.ix_(sub, sub)] = pair_products(table.attrs[sub], table.features[c][sub],
                                                smooth=condition.smooth)
            products[c] = P
    return table, tr_rows, rows[test], products


# --- experiment matrix -----------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    techniques: tuple[str, ...] = ("svm", "pca")
    kernels: tuple[str, ...] = ("linear", "composite")
    feature_sets: tuple[str, ...] = ("body", "html", "url", "image", "link", "all")
    runs: int = 50
    folds: int = 10
    n_real: int = 50
    n_fake: int = 50
    seed: int = 0
    C: float = 1.0
    C_composite: float | None = None   # defaults to C
    smooth: float = 0.0
    include_self: bool = False
    all_mode: str = "per-category"
    ensemble_rule: str = "vote"
    fold_by: str = "page"
    leakage_safe: bool = False
    alpha: float = 0.01
    comparisons: int = 25
    ngram: NgramConfig = field(default_factory=NgramConfig)
    policy: str = "top_k=500"

    def __post_init__(self):
        if self.runs < 1:
            raise EvaluationError("runs must be >= 1")
        if self.folds < 2:
            raise EvaluationError("folds must be >= 2")

    def C_for(self, kernel: str) -> float:
        if kernel == "composite" and self.C_composite is not None:
            return self.C_composite
        return self.C

    def conditions(self) -> list[Condition]:
        return [Condition(t, k, f, C=self.C_for(k), smooth=self.smooth,
                          include_self=self.include_self, all_mode=self.all_mode,
                          ensemble_rule=self.ensemble_rule)
                for t, k, f in itertools.product(self.techniques, self.kernels,
                                                 self.feature_sets)]


@dataclass
class RunResult:
    run: int
    sites: list[str]
    keys: list[tuple[str, str]]
    predicted: np.ndarray
    truth: np.ndarray
    accuracy: float


@dataclass
class ResultTable:
    conditions: list[Condition]
    runs: int
    values: dict[str, list[float]] = field(default_factory=dict)
    errors: dict[str, list[str]] = field(default_factory=dict)
    details: dict[str, list[RunResult]] = field(default_factory=dict, repr=False)

    def mean(self, cid: str) -> float:
        v = np.asarray(self.values[cid], dtype=float)
        return float(np.mean(v)) if v.size and not np.isnan(v).any() else math.nan

    def to_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("condition\ttechnique\tkernel\tfeature_set\trun\tsite_accuracy\n")
        for c in self.conditions:
            for r, v in enumerate(self.values[c.id]):
                buf.write(f"{c.id}\t{c.technique}\t{c.kernel}\t{c.feature_set}\t{r}\t{v!r}\n")
        return buf.getvalue()

    def summary(self) -> str:
        """Mean accuracy (%) by learner row and feature-set column."""
        sets = list(dict.fromkeys(c.feature_set for c in self.conditions))
        rows = list(dict.fromkeys((c.technique, c.kernel) for c in self.conditions))
        by = {(c.technique, c.kernel, c.feature_set): c for c in self.conditions}
        buf = io.StringIO()
        buf.write(f"Average site accuracy (%) over {self.runs} bootstrap runs\n")
        buf.write(f"{'':<12}" + "".join(f"{s.capitalize():>10}" for s in sets) + "\n")
        for t, k in rows:
            buf.write(f"{ROW_NAMES[(t, k)]:<12}")
            for s in sets:
                c = by.get((t, k, s))
                if c is None:
                    buf.write(f"{'':>10}")
                    continue
                m = self.mean(c.id)
                mark = "*" if c.is_ensemble else ""
                cell = "failed" if math.isnan(m) else f"{100 * m:.2f}{mark}"
                buf.write(f"{cell:>10}")
            buf.write("\n")
        if any(c.is_ensemble for c in self.conditions):
            buf.write("* ensemble of per-category linear models\n")
        for cid, errs in self.errors.items():
            for e in errs:
                buf.write(f"error {cid}: {e}\n")
        return buf.getvalue()


@dataclass
class Comparison:
    hypothesis: str
    a: str
    b: str
    t: float
    p: float
    threshold: float
    significant: bool


@dataclass
class SignificanceReport:
    alpha: float
    m: int
    comparisons: list[Comparison]

    @property
    def threshold(self) -> float:
        return bonferroni_threshold(self.alpha, self.m)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# alpha={self.alpha} m={self.m} threshold={self.threshold:.6g} "
                  f"tested={len(self.comparisons)}\n")
        buf.write("hypothesis\tcondition_a\tcondition_b\tt\tp\tthreshold\tverdict\n")
        for c in self.comparisons:
            verdict = "significant" if c.significant else "not significant"
            buf.write(f"{c.hypothesis}\t{c.a}\t{c.b}\t{c.t:.6g}\t{c.p:.6g}\t"
                      f"{c.threshold:.6g}\t{verdict}\n")
        return buf.getvalue()


def comparison_pairs(conditions: Sequence[Condition]) -> list[tuple[str, str, str]]:
    """(hypothesis, a, b) pairs over the conditions present.

    H1: all features vs each single category; H2: SVM vs PCA; H3: composite
    vs linear kernel.
    """
    ids = {c.id for c in conditions}
    out = []
    for c in conditions:
        if c.feature_set == "all":
            for s in ("body", "html", "url", "image", "link"):
                b = f"{c.technique}-{c.kernel}-{s}"
                if b in ids:
                    out.append(("H1", c.id, b))
    for c in conditions:
        if c.technique == "svm":
            b = f"pca-{c.kernel}-{c.feature_set}"
            if b in ids:
                out.append(("H2", c.id, b))
    for c in conditions:
        if c.kernel == "composite":
            b = f"{c.technique}-linear-{c.feature_set}"
            if b in ids:
                out.append(("H3", c.id, b))
    return out


def significance(table: ResultTable, alpha: float, m: int) -> SignificanceReport:
    thr = bonferroni_threshold(alpha, m)
    comps = []
    for hyp, a, b in comparison_pairs(table.conditions):
        va = np.asarray(table.values[a], dtype=float)
        vb = np.asarray(table.values[b], dtype=float)
        if table.runs < 2 or np.isnan(va).any() or np.isnan(vb).any():
            continue
        t, p = paired_t_test(va, vb)
        comps.append(Comparison(hyp, a, b, t, p, thr, p < thr))
    return SignificanceReport(alpha, m, comps)


def run_once(ws: Workspace, config: ExperimentConfig, conditions: Sequence[Condition],
             run: int) -> list[tuple[str, RunResult | None, str | None, float]]:
    """All conditions for bootstrap run ``run``: (id, result, error, seconds)."""
    sites = bootstrap_sample(ws.corpus, config.n_real, config.n_fake,
                             np.random.default_rng([config.seed, run]))
    site_set = set(sites)
    rows = np.asarray([i for i, k in enumerate(ws.keys) if k[0] in site_set])
    out = []
    for cond in conditions:
        t0 = time.perf_counter()
        try:
            pred, _ = cross_validate(ws, rows, cond, config.folds,
                                     np.random.default_rng([config.seed, run, 1]),
                                     fold_by=config.fold_by, leakage_safe=config.leakage_safe)
            truth = ws.labels[rows]
            acc = site_accuracy(pred, truth, ws.site_ids[rows])
            result = RunResult(run, sites, [ws.keys[i] for i in rows], pred, truth, acc)
            out.append((cond.id, result, None, time.perf_counter() - t0))
        except Exception as exc:  # recorded; the matrix carries on
            log.warning("run %d %s failed: %s", run, cond.id, exc)
            out.append((cond.id, None, f"run {run}: {exc}", time.perf_counter() - t0))
    return out


_POOL_STATE: dict = {}


def _pool_run(run: int):
    return run_once(_POOL_STATE["ws"], _POOL_STATE["config"], _POOL_STATE["conditions"], run)


def run_experiment_matrix(corpus: Corpus, config: ExperimentConfig,
                          progress: Callable[[str], None] | None = None,
                          workspace: Workspace | None = None, jobs: int = 1
                          ) -> tuple[ResultTable, SignificanceReport]:
    """Every condition over the same bootstrap samples and folds.

    With ``jobs > 1`` runs execute in forked worker processes; results are
    merged in run order, so the table does not depend on scheduling.
    """
    conditions = config.conditions()
    ws = workspace or Workspace(corpus, FeatureConfig(config.ngram, config.policy), config.smooth)
    if not config.leakage_safe:
        warnings.warn("dictionaries and IG selection are fit once on the whole corpus "
                      "(test pages included); use leakage_safe for per-fold selection")
        # warm the shared caches before any fork
        ws.global_table()
        for cond in conditions:
            if cond.kernel == "composite":
                for c in cond.kernel_categories:
                    ws.products(c)
    table = ResultTable(conditions, config.runs, {c.id: [] for c in conditions}, {})
    if jobs > 1 and config.runs > 1:
        import multiprocessing
        from concurrent.futures import ProcessPoolExecutor

        _POOL_STATE.update(ws=ws, config=config, conditions=conditions)
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            results = pool.map(_pool_run, range(config.runs))
            per_run = list(results)
        _POOL_STATE.clear()
    else:
        per_run = (run_once(ws, config, conditions, run) for run in range(config.runs))
    for run, outcome in enumerate(per_run):
        for cid, result, err, secs in outcome:
            acc = result.accuracy if result is not None else math.nan
            table.values[cid].append(acc)
            if result is not None:
                table.details.setdefault(cid, []).append(result)
            if err is not None:
                table.errors.setdefault(cid, []).append(err)
            if progress:
                progress(f"run {run} {cid} accuracy={acc:.4f} ({secs:.1f}s)")
    return table, significance(table, config.alpha, config.comparisons)
