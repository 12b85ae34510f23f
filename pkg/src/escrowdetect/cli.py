"""Command-line entry point.

Every flag can also be given in a ``--config`` file of ``key = value``
lines (key = flag name without the leading dashes); flags on the command
line win. Errors print one ``error: <Kind>: <message>`` line to stderr and
exit non-zero.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__

log = logging.getLogger("escrowdetect")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- provenance -------------------------------------------------------------------

def content_hash(path: str | os.PathLike) -> str:
    """sha256 (16 hex) of a file, or of every file under a directory."""
    p = Path(path)
    h = hashlib.sha256()
    if p.is_dir():
        for f in sorted(x for x in p.rglob("*") if x.is_file()):
            h.update(str(f.relative_to(p)).encode())
            h.update(b"\0")
            h.update(f.read_bytes())
    else:
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def header_fields(args, **inputs) -> dict[str, str]:
    hashes = ",".join(f"{k}:{content_hash(v)}" for k, v in inputs.items() if v is not None)
    return {"tool": f"escrowdetect-{__version__}", "seed": str(args.seed),
            "inputs": hashes or "-"}


def header_line(fields: dict[str, str], prefix: str = "#") -> str:
    return prefix + " " + " ".join(f"{k}={v}" for k, v in fields.items()) + "\n"


# --- config files -----------------------------------------------------------------

def read_config(path: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _truthy(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {value!r}")


def apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    """Turn config entries into parser defaults (so explicit flags win)."""
    actions = {a.dest: a for a in parser._actions}
    defaults = {}
    for key, value in config.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = _truthy(value)
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            try:
                defaults[key] = action.type(value) if action.type else value
            except ValueError as exc:
                raise UsageError(f"config key {key}: {exc}") from exc
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"config key {key}: {value!r} not in {list(action.choices)}")
        if action.required:
            action.required = False
    parser.set_defaults(**defaults)


# --- helpers ----------------------------------------------------------------------

def _csv(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _load_dicts(paths: Sequence[str] | None):
    from .features import FeatureDictionary

    out = {}
    for p in paths or ():
        d = FeatureDictionary.load(p)
        out[d.category.value] = d
    return out


def _dict_text(d, fields) -> str:
    return header_line({"generated": fields["tool"], "seed": fields["seed"],
                        "inputs": fields["inputs"]}) + d.to_text()


def _ngram(args):
    from .features import NgramConfig

    return NgramConfig(min_df=args.min_df)


def _labels_for(path: str) -> dict[str, str]:
    """site id -> label, from a corpus directory or a ``site<TAB>label`` file."""
    from .corpus import Label, load_corpus

    p = Path(path)
    if p.is_dir():
        return {s.site_id: s.label.value for s in load_corpus(p).sites}
    out = {}
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        out[cells[0]] = Label(cells[-1].strip().lower()).value
    return out


# --- subcommands --------------------------------------------------------------------

def cmd_fetch(args) -> int:
    from .corpus import write_site
    from .crawl import fetch_site

    site = fetch_site(args.url, args.max_depth, args.max_pages, label=args.label,
                      site_id=args.site_id, delay=args.delay, timeout=args.timeout,
                      source=args.source or args.url)
    out = write_site(site, args.out)
    for w in site.warnings:
        log.warning(w)
    print(f"fetched {len(site.pages)} pages, {len(site.images)} images -> {out}")
    return 0


def cmd_poll(args) -> int:
    from .crawl import SeenStore, poll_blacklist

    new = poll_blacklist(args.feed, SeenStore(args.seen), timeout=args.timeout)
    text = "".join(u + "\n" for u in new)
    if args.out:
        with open(args.out, "a", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_stats(args) -> int:
    from .corpus import corpus_stats, format_stats, load_corpus

    corpus = load_corpus(args.corpus)
    sys.stdout.write(header_line(header_fields(args, corpus=args.corpus)))
    text = format_stats(corpus_stats(corpus))
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    for w in corpus.warnings:
        log.warning(w)
    return 0


def cmd_extract(args) -> int:
    from .corpus import load_corpus
    from .features import Category, FeatureDictionary, build_dictionary, extract_matrix

    corpus = load_corpus(args.corpus)
    fields = header_fields(args, corpus=args.corpus)
    if Path(args.dict).exists():
        d = FeatureDictionary.load(args.dict)
        if d.category.value != args.category:
            raise UsageError(f"dictionary is for {d.category.value}, not {args.category}")
    else:
        d = build_dictionary(corpus, Category(args.category), _ngram(args))
        Path(args.dict).write_text(_dict_text(d, fields), encoding="utf-8")
        log.info("wrote candidate dictionary (%d entries) to %s", len(d), args.dict)
    m = extract_matrix(corpus, d)
    m.save(args.out, fields)
    print(f"{len(m.keys)} pages x {len(d)} features -> {args.out}")
    return 0


def cmd_select(args) -> int:
    from .features import FeatureMatrix
    from .selection import select_features

    m = FeatureMatrix.load(args.features)
    labels = _labels_for(args.labels)
    missing = sorted({s for s, _ in m.keys} - set(labels))
    if missing:
        raise UsageError(f"no label for sites {missing[:5]}")
    y = np.asarray([{"fake": 1, "real": -1}.get(labels[s], 0) for s, _ in m.keys])
    keep = np.flatnonzero(y != 0)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise UsageError("selection needs labelled Real and Fake pages")
    selected, report = select_features(m.dictionary, m.values[keep], y[keep] > 0, args.policy)
    fields = header_fields(args, features=args.features, labels=args.labels)
    Path(args.out_dict).write_text(_dict_text(selected, fields), encoding="utf-8")
    if args.report:
        Path(args.report).write_text(header_line(fields) + report.to_text(), encoding="utf-8")
    print(f"kept {len(selected)} of {len(m.dictionary)} features ({report.cutoff})")
    return 0


def _condition(args, technique=None, kernel=None, feature_set=None):
    from .pipeline import Condition

    return Condition(technique or args.technique, kernel or args.kernel,
                     feature_set or args.features, C=args.C, smooth=args.smooth,
                     include_self=args.include_self, all_mode=args.all_mode,
                     ensemble_rule=args.ensemble_rule)


def cmd_train(args) -> int:
    from .corpus import load_corpus
    from .pipeline import FeatureConfig, train_detector

    corpus = load_corpus(args.corpus)
    cond = _condition(args)
    dicts = _load_dicts(args.dict) or None
    if dicts is not None:
        missing = [c for c in cond.categories if c not in dicts]
        if missing:
            raise UsageError(f"missing dictionaries for {missing}")
    det = train_detector(corpus, cond, FeatureConfig(_ngram(args), args.policy), dicts)
    det.save(args.out, {"provenance": header_fields(args, corpus=args.corpus)})
    print(f"trained {cond.id} on {sum(len(s.pages) for s in corpus.sites)} pages -> {args.out}")
    return 0


def cmd_classify(args) -> int:
    from .corpus import Corpus, load_site
    from .pipeline import Detector, build_table, site_verdict

    det = Detector.load(args.model)
    site = load_site(args.site)
    if not site.pages:
        raise UsageError("site has no pages")
    table = build_table(Corpus((site,)), det.dictionaries)
    labels, scores = det.decision(table, np.arange(len(table)))
    verdict = site_verdict(labels)
    lines = [header_line(header_fields(args, model=args.model, site=args.site)),
             "page_id\tpredicted\tscore\n"]
    for (_, pid), lab, sc in zip(table.keys, labels, scores):
        lines.append(f"{pid}\t{'fake' if lab > 0 else 'real'}\t{sc:.6g}\n")
    n_fake = int(np.sum(labels > 0))
    lines.append(f"verdict\t{verdict}\t{n_fake}/{len(labels)} pages predicted fake\n")
    text = "".join(lines)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    from .corpus import load_corpus
    from .evaluation import ExperimentConfig, run_experiment_matrix

    corpus = load_corpus(args.corpus)
    config = ExperimentConfig(
        techniques=_csv(args.techniques), kernels=_csv(args.kernels),
        feature_sets=_csv(args.feature_sets), runs=args.runs, folds=args.folds,
        n_real=args.n_real, n_fake=args.n_fake, seed=args.seed, C=args.C,
        C_composite=args.C_composite, smooth=args.smooth, include_self=args.include_self,
        all_mode=args.all_mode, ensemble_rule=args.ensemble_rule, fold_by=args.fold_by,
        leakage_safe=args.leakage_safe, alpha=args.alpha, comparisons=args.comparisons,
        ngram=_ngram(args), policy=args.policy)
    table, report = run_experiment_matrix(
        corpus, config, progress=lambda m: print(m, file=sys.stderr, flush=True),
        jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    head = header_line(header_fields(args, corpus=args.corpus, config=args.config))
    (out / "results.tsv").write_text(head + table.to_tsv(), encoding="utf-8")
    (out / "summary.txt").write_text(head + table.summary(), encoding="utf-8")
    (out / "significance.tsv").write_text(head + report.to_text(), encoding="utf-8")
    if args.save_predictions:
        rows = ["condition\trun\tsite_id\tpage_id\tpredicted\ttrue\n"]
        for cid, results in table.details.items():
            for r in results:
                for (s, p), yp, yt in zip(r.keys, r.predicted, r.truth):
                    rows.append(f"{cid}\t{r.run}\t{s}\t{p}\t{int(yp)}\t{int(yt)}\n")
        (out / "predictions.tsv").write_text(head + "".join(rows), encoding="utf-8")
    sys.stdout.write(table.summary())
    return 0 if not table.errors else 3


def cmd_simmap(args) -> int:
    from .corpus import load_site
    from .pipeline import Detector
    from .simmap import similarity_map

    expected = None
    if args.model:
        det = Detector.load(args.model)
        dicts = det.dictionaries
        expected = {c: d.content_hash for c, d in dicts.items()}
        extra = _load_dicts(args.dict)
        if extra:
            for c, d in extra.items():
                if c in expected and d.content_hash != expected[c]:
                    raise UsageError(f"dictionary hash mismatch for {c}: {d.content_hash} "
                                     f"!= {expected[c]}")
    else:
        dicts = _load_dicts(args.dict)
        if not dicts:
            raise UsageError("simmap needs --model or at least one --dict")
    probe_site = load_site(args.probe_site)
    site = load_site(args.site)
    probe = probe_site.page(args.probe_page)
    cats = _csv(args.categories) if args.categories else tuple(dicts)
    smap = similarity_map(probe, probe_site, site, dicts, cats, expected_hashes=expected,
                          smooth=args.smooth)
    text = header_line(header_fields(args, probe=args.probe_site, site=args.site), "//")
    text += smap.to_dot()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    from .corpus import save_corpus
    from .synthetic import BenchmarkSpec, generate_benchmark

    spec = BenchmarkSpec(args.n_fake, args.n_real, args.templates, args.pages, args.seed)
    corpus = generate_benchmark(spec)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus.sites)} sites to {args.out}")
    return 0


# --- parser -------------------------------------------------------------------------

def _learner_flags(p):
    p.add_argument("--C", type=float, default=1.0, help="SVM box constraint")
    p.add_argument("--smooth", type=float, default=0.0,
                   help="floor each similarity factor at this value (0 = off)")
    p.add_argument("--include-self", action="store_true",
                   help="let a page match itself when scoring its own site")
    p.add_argument("--all-mode", choices=("per-category", "concat"), default="per-category",
                   help="how the 'all' feature set enters the composite kernel")
    p.add_argument("--ensemble-rule", choices=("vote", "mean"), default="vote")
    p.add_argument("--policy", default="top_k=500", help="top_k=N or min_ig=T")
    p.add_argument("--min-df", type=int, default=3, help="n-gram document frequency floor")


def build_parser() -> dict[str, argparse.ArgumentParser]:
    root = _Parser(prog="escrowdetect", description="Fake escrow website detection")
    root.add_argument("--version", action="version", version=f"escrowdetect {__version__}")
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parsers = {"": root}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="key = value file mirroring these flags")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)
        parsers[name] = p
        return p

    p = add("fetch", cmd_fetch, "crawl one site into a corpus directory")
    p.add_argument("--url", required=True)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--max-pages", type=int, default=200)
    p.add_argument("--out", required=True, help="corpus root")
    p.add_argument("--label", choices=("real", "fake", "unknown"), default="unknown")
    p.add_argument("--site-id")
    p.add_argument("--delay", type=float, default=1.0, help="seconds between requests")
    p.add_argument("--timeout", type=float, default=15.0)
    p.add_argument("--source", help="provenance note (defaults to the URL)")

    p = add("poll", cmd_poll, "print blacklist-feed URLs not seen before")
    p.add_argument("--feed", action="append", required=True)
    p.add_argument("--seen", required=True, help="file backing the seen-URL set")
    p.add_argument("--out", help="append new URLs to this file")
    p.add_argument("--timeout", type=float, default=15.0)

    p = add("stats", cmd_stats, "test-bed summary statistics")
    p.add_argument("--corpus", required=True)

    p = add("extract", cmd_extract, "feature matrix for one category")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", required=True,
                   help="dictionary file; built from the corpus and written if absent")
    p.add_argument("--category", required=True,
                   choices=("body", "html", "url", "image", "link"))
    p.add_argument("--out", required=True)
    p.add_argument("--min-df", type=int, default=3)

    p = add("select", cmd_select, "information-gain feature selection")
    p.add_argument("--features", required=True, help="matrix written by extract")
    p.add_argument("--labels", required=True, help="corpus dir or site<TAB>label file")
    p.add_argument("--policy", default="top_k=500")
    p.add_argument("--out-dict", required=True)
    p.add_argument("--report")

    p = add("train", cmd_train, "train a detector on a labelled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--technique", choices=("svm", "pca"), default="svm")
    p.add_argument("--kernel", choices=("linear", "composite"), default="composite")
    p.add_argument("--features", choices=("body", "html", "url", "image", "link", "all"),
                   default="all")
    p.add_argument("--dict", action="append",
                   help="selected dictionary per category (default: select on the corpus)")
    p.add_argument("--out", required=True, help="model file (.npz)")
    _learner_flags(p)

    p = add("classify", cmd_classify, "classify every page of a site and give a verdict")
    p.add_argument("--model", required=True)
    p.add_argument("--site", required=True, help="site directory")
    p.add_argument("--out")

    p = add("evaluate", cmd_evaluate, "bootstrap / cross-validation experiment matrix")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--techniques", default="svm,pca")
    p.add_argument("--kernels", default="linear,composite")
    p.add_argument("--feature-sets", default="body,html,url,image,link,all")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--n-real", type=int, default=50)
    p.add_argument("--n-fake", type=int, default=50)
    p.add_argument("--C-composite", type=float, help="C for composite-kernel cells")
    p.add_argument("--fold-by", choices=("page", "site"), default="page")
    p.add_argument("--leakage-safe", action="store_true",
                   help="fit dictionaries and selection inside each training fold")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--comparisons", type=int, default=25, help="Bonferroni m")
    p.add_argument("--jobs", type=int, default=1, help="parallel bootstrap runs")
    p.add_argument("--save-predictions", action="store_true")
    _learner_flags(p)

    p = add("simmap", cmd_simmap, "site map shaded by similarity to a probe page (DOT)")
    p.add_argument("--model", help="take dictionaries from this model")
    p.add_argument("--dict", action="append", help="dictionary file(s)")
    p.add_argument("--probe-site", required=True)
    p.add_argument("--probe-page", required=True)
    p.add_argument("--site", required=True)
    p.add_argument("--categories", help="comma list (default: all dictionaries)")
    p.add_argument("--smooth", type=float, default=0.0)
    p.add_argument("--out")

    p = add("synth", cmd_synth, "write the synthetic benchmark corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-fake", type=int, default=30)
    p.add_argument("--n-real", type=int, default=30)
    p.add_argument("--templates", type=int, default=5)
    p.add_argument("--pages", type=int, default=20)
    return parsers


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parsers = build_parser()
    root = parsers[""]
    argv = list(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    if command in parsers and any(a == "--config" or a.startswith("--config=") for a in argv):
        pre = _Parser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv[argv.index(command) + 1:])
        if known.config:
            apply_config(parsers[command], read_config(known.config))
    return root.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        logging.captureWarnings(True)
        return args.func(args)
    except SystemExit:
        raise
    except BaseException as exc:  # noqa: BLE001 - reported as a single line
        if isinstance(exc, KeyboardInterrupt):
            print("error: Interrupted: interrupted", file=sys.stderr)
            return 130
        msg = " ".join(str(exc).split()) or repr(exc)
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, UsageError) else 1


if __name__ == "__main__":
    sys.exit(main())
