import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from escrowdetect.corpus import Corpus, Label
from escrowdetect.evaluation import (EvaluationError, ExperimentConfig, ResultTable, Workspace,
                                     bonferroni_gate, bonferroni_threshold, bootstrap_sample,
                                     comparison_pairs, cross_validate, fold_assignment,
                                     paired_t_test, run_experiment_matrix, site_accuracy,
                                     site_accuracy_from_groups, site_fold_assignment)
from escrowdetect.features import NgramConfig
from escrowdetect.pipeline import Condition, FeatureConfig, RawCache, fit_dictionaries, page_meta

from conftest import text_site

import oracles


def labelled_corpus(n_fake=4, n_real=4):
    sites = [text_site(f"f{i}", ["escrow"] * 2, Label.FAKE) for i in range(n_fake)]
    sites += [text_site(f"r{i}", ["shop"] * 2, Label.REAL) for i in range(n_real)]
    return Corpus(tuple(sites))


# --- sampling ---------------------------------------------------------------------------

def test_bootstrap_takes_every_site_when_asked():
    c = labelled_corpus()
    ids = bootstrap_sample(c, 4, 1, np.random.default_rng(0))
    assert [i for i in ids if i.startswith("r")] == ["r0", "r1", "r2", "r3"]


def test_bootstrap_is_seeded():
    c = labelled_corpus()
    a = bootstrap_sample(c, 2, 2, np.random.default_rng([3, 1]))
    assert a == bootstrap_sample(c, 2, 2, np.random.default_rng([3, 1]))


def test_bootstrap_uniform_over_sites():
    c = labelled_corpus()
    rng = np.random.default_rng(11)
    counts = Counter(bootstrap_sample(c, 0, 1, rng)[0] for _ in range(1000))
    for sid in ("f0", "f1", "f2", "f3"):
        assert counts[sid] / 1000 == pytest.approx(0.25, abs=0.05)


def test_bootstrap_too_few_sites():
    with pytest.raises(EvaluationError, match="5 fake sites but the corpus has 4"):
        bootstrap_sample(labelled_corpus(), 1, 5, np.random.default_rng(0))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.integers(2, 12), st.integers(0, 1000))
def test_fold_sizes_differ_by_at_most_one(n, folds, seed):
    if n < folds:
        with pytest.raises(EvaluationError):
            fold_assignment(n, folds, np.random.default_rng(seed))
        return
    sizes = np.bincount(fold_assignment(n, folds, np.random.default_rng(seed)), minlength=folds)
    assert sizes.max() - sizes.min() <= 1 and sizes.sum() == n


def test_leave_one_out_when_folds_equal_pages():
    f = fold_assignment(7, 7, np.random.default_rng(0))
    assert sorted(f.tolist()) == list(range(7))


def test_site_folds_keep_sites_whole_and_stratify():
    sites = np.array(["a", "a", "b", "c", "c", "d"], dtype=object)
    labels = np.array([1, 1, 1, -1, -1, -1])
    f = site_fold_assignment(sites, labels, 2, np.random.default_rng(0))
    assert f[0] == f[1] and f[3] == f[4]
    for fold in (0, 1):
        assert set(labels[f == fold]) == {1, -1}


# --- metrics ----------------------------------------------------------------------------

def test_site_accuracy_strict_majority():
    # site fractions correct: 3/5, 1/2, 1/1
    pred = [1, 1, 1, -1, -1, 1, -1, 1]
    truth = [1, 1, 1, 1, 1, 1, 1, 1]
    sites = ["a"] * 5 + ["b"] * 2 + ["c"]
    assert site_accuracy(pred, truth, sites) == pytest.approx(2 / 3)
    assert site_accuracy(truth, truth, sites) == 1.0
    assert site_accuracy([-t for t in truth], truth, sites) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([-1, 1]), st.sampled_from([-1, 1]),
                          st.sampled_from("abcdef")), min_size=1, max_size=40))
def test_site_accuracy_matches_oracle(items):
    pred, truth, sites = zip(*items)
    assert site_accuracy(pred, truth, sites) == pytest.approx(
        oracles.site_accuracy(pred, truth, sites), abs=1e-15)


def test_site_accuracy_from_groups_skips_empty_sites():
    with pytest.warns(UserWarning, match="no pages"):
        acc = site_accuracy_from_groups({"a": [(1, 1)], "b": [], "c": [(1, -1)]})
    assert acc == 0.5
    with pytest.raises(EvaluationError):
        site_accuracy([1], [1, 1], ["a"])


def test_t_test_textbook_fixture():
    z = np.random.default_rng(0).normal(size=16)
    d = (z - z.mean()) / z.std(ddof=1) + 0.5
    t, p = paired_t_test(d, np.zeros(16))
    assert t == pytest.approx(2.0, abs=1e-12)
    assert p == pytest.approx(2 * stats.t.sf(2.0, 15), abs=1e-12)
    assert p == pytest.approx(0.0639, abs=1e-4)


def test_t_test_degenerate_cases():
    assert paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (0.0, 1.0)
    t, p = paired_t_test([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
    assert t == math.inf and p == 0.0
    with pytest.raises(EvaluationError):
        paired_t_test([1.0, 2.0], [1.0])


def test_t_test_sign_flips_with_order():
    a, b = [0.9, 0.8, 0.95, 0.7], [0.6, 0.8, 0.5, 0.65]
    t1, p1 = paired_t_test(a, b)
    t2, p2 = paired_t_test(b, a)
    assert t1 == -t2 and p1 == p2


def test_bonferroni_gate():
    assert bonferroni_threshold(0.01, 25) == pytest.approx(0.0004)
    assert bonferroni_gate([0.00039, 0.0004], 0.01, 25).tolist() == [True, False]
    assert bonferroni_gate([0.009, 0.011], 0.01, 1).tolist() == [True, False]
    with pytest.raises(EvaluationError):
        bonferroni_threshold(0.01, 0)


# --- cross-validation ---------------------------------------------------------------------

def separable_workspace():
    fc = FeatureConfig(NgramConfig(min_df=1), "top_k=50")
    return Workspace(labelled_corpus(), fc)


@pytest.mark.parametrize("technique,kernel", [("svm", "linear"), ("svm", "composite"),
                                              ("pca", "linear")])
def test_separable_pages_fully_recovered(technique, kernel):
    ws = separable_workspace()
    rows = np.arange(len(ws.keys))
    cond = Condition(technique, kernel, "body", C=1e5 if kernel == "composite" else 1.0)
    pred, _ = cross_validate(ws, rows, cond, 4, np.random.default_rng(0))
    assert np.array_equal(pred, ws.labels[rows])


def test_single_class_fold_is_reported():
    ws = separable_workspace()
    rows = np.flatnonzero(ws.labels > 0)
    rows = np.concatenate([rows, np.flatnonzero(ws.labels < 0)[:1]])
    with pytest.raises(EvaluationError, match="one class"):
        cross_validate(ws, rows, Condition("svm", "linear", "body"), len(rows),
                       np.random.default_rng(0))


def test_leakage_safe_dictionaries_exclude_test_only_ngrams():
    sites = [text_site("f0", ["escrow", "escrow"], Label.FAKE),
             text_site("f1", ["escrow", "zyxwvut"], Label.FAKE),
             text_site("r0", ["shop", "shop"], Label.REAL)]
    corpus = Corpus(tuple(sites))
    fc = FeatureConfig(NgramConfig(min_df=1), "min_ig=0")
    raw = RawCache(corpus, fc.ngram)
    _, _, labels, _ = page_meta(corpus)
    train = np.array([0, 1, 2, 4, 5])         # page 3 holds the only "zyxwvut"
    d = fit_dictionaries(raw, ["body"], labels, train, fc)["body"]
    assert "word:zyxwvut" not in d.entries
    full = fit_dictionaries(raw, ["body"], labels, None, fc)["body"]
    assert "word:zyxwvut" in full.entries


def test_leakage_safe_mode_runs():
    ws = separable_workspace()
    rows = np.arange(len(ws.keys))
    pred, _ = cross_validate(ws, rows, Condition("svm", "composite", "body", C=1e5), 2,
                             np.random.default_rng(0), leakage_safe=True, fold_by="site")
    assert np.array_equal(pred, ws.labels[rows])


# --- experiment matrix ------------------------------------------------------------------

def small_config(**kw):
    base = dict(techniques=("svm",), kernels=("linear", "composite"), feature_sets=("body",),
                runs=3, folds=2, n_real=3, n_fake=3, seed=5, C_composite=1e5,
                ngram=NgramConfig(min_df=1), policy="top_k=50")
    base.update(kw)
    return ExperimentConfig(**base)


def test_matrix_bookkeeping_and_determinism():
    c = labelled_corpus()
    table, report = run_experiment_matrix(c, small_config())
    assert isinstance(table, ResultTable)
    assert set(table.values) == {"svm-linear-body", "svm-composite-body"}
    for cid, vals in table.values.items():
        assert len(vals) == 3
        assert table.mean(cid) == pytest.approx(np.mean(vals))
    again, _ = run_experiment_matrix(c, small_config())
    assert again.to_tsv() == table.to_tsv()
    assert [(x.hypothesis, x.a, x.b) for x in report.comparisons] == \
        [("H3", "svm-composite-body", "svm-linear-body")]
    assert "Kernel SVM" in table.summary()


def test_cell_failures_are_recorded():
    c = labelled_corpus()
    table, _ = run_experiment_matrix(c, small_config(kernels=("linear",), folds=20))
    assert all(math.isnan(v) for v in table.values["svm-linear-body"])
    assert table.errors["svm-linear-body"]
    assert "failed" in table.summary()


def test_comparison_family():
    conds = ExperimentConfig().conditions()
    pairs = comparison_pairs(conds)
    assert len(conds) == 24
    assert sum(h == "H1" for h, _, _ in pairs) == 20
    assert sum(h == "H2" for h, _, _ in pairs) == 12
    assert sum(h == "H3" for h, _, _ in pairs) == 12
