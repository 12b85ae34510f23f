"""Body-text features: lexical measures, character and word n-grams,
word-length distribution, vocabulary richness, punctuation, function
words, POS-tag n-grams, document structure and misspellings."""
from __future__ import annotations

import gzip
import math
import re
from collections import Counter
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

from ..corpus import WebPage
from ..htmlscan import ScannedHtml, scan_html
from .dictionary import NgramConfig
from .pos import DEFAULT_TAGGER, Tagger


def _data_lines(name: str) -> list[str]:
    text = resources.files(__package__).joinpath("data", name).read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln and not ln.startswith("# ")]


LEXICAL = tuple(_data_lines("lexical.txt"))
PUNCTUATION = tuple(_data_lines("punctuation.txt"))
FUNCTION_WORDS = tuple(_data_lines("function_words.txt"))
DOC_STRUCTURE = tuple(ln.split("\t", 1)[0] for ln in _data_lines("document_structure.txt"))
RICHNESS = ("n_tokens", "n_types", "hapax", "dis", "ttr", "yule_k", "honore_h", "sichel_s")
WORD_LENGTH_BINS = 20
HONORE_FLOOR = 1e-6

assert len(LEXICAL) == 10 and len(PUNCTUATION) == 29
assert len(FUNCTION_WORDS) == 300 and len(DOC_STRUCTURE) == 64


@lru_cache(maxsize=1)
def english_words() -> frozenset[str]:
    raw = resources.files(__package__).joinpath("data", "words_en.txt.gz").read_bytes()
    return frozenset(gzip.decompress(raw).decode("ascii").split())


_WORD_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z]+)*")
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z]+)*|[^\sA-Za-z0-9]")
_ALNUM_RE = re.compile(r"[a-z0-9]+")
_SENT_SPLIT = re.compile(r"[.!?]+")


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text)


def ngrams(seq: Sequence[str], lo: int, hi: int, joiner: str = " ") -> Iterable[str]:
    for n in range(lo, hi + 1):
        for i in range(len(seq) - n + 1):
            yield joiner.join(seq[i:i + n])


def vocabulary_richness(tokens: Sequence[str]) -> tuple[float, ...]:
    """(N, V, V1, V2, V/N, Yule's K, Honore's H, Sichel's S) of a token list.

    Honore's H divides by ``1 - V1/V``; when every type is a hapax that term
    is clamped to ``HONORE_FLOOR``. An empty list gives all zeros.
    """
    n = len(tokens)
    if n == 0:
        return (0.0,) * 8
    freq = Counter(tokens)
    v = len(freq)
    spectrum = Counter(freq.values())
    v1, v2 = spectrum.get(1, 0), spectrum.get(2, 0)
    s2 = sum(i * i * vi for i, vi in spectrum.items())
    yule_k = 1e4 * (s2 - n) / (n * n)
    honore = 100.0 * math.log(n) / max(1.0 - v1 / v, HONORE_FLOOR)
    return (float(n), float(v), float(v1), float(v2), v / n, yule_k, honore, v2 / v)


# --- document structure ---------------------------------------------------------

_GREETING = re.compile(r"\b(hello|hi|dear|greetings|welcome)\b", re.I)
_FAREWELL = re.compile(r"\b(regards|sincerely|thank you|thanks|best wishes|yours truly)\b", re.I)
_URL_TEXT = re.compile(r"(https?://|www\.)\S+", re.I)
_EMAIL = re.compile(r"[\w.+-]+@[\w-]+\.[\w.-]+")
_PHONE = re.compile(r"(\+?\d[\d\s().-]{7,}\d)")
_COPYRIGHT = re.compile(r"(©|\(c\)|copyright)", re.I)
_ADDRESS = re.compile(r"\b(street|avenue|road|suite|p\.?\s?o\.? box|zip|postal)\b", re.I)
_CSS_COLOR = re.compile(r"(?<![-\w])color\s*:\s*([^;\"']+)", re.I)
_CSS_FONT = re.compile(r"font-family\s*:\s*([^;\"']+)", re.I)
_CSS_SIZE = re.compile(r"font-size\s*:", re.I)
_CSS_URL = re.compile(r"url\(", re.I)


def _count(tags: list[str], *names: str) -> int:
    return sum(1 for t in tags if t in names)


def document_structure(scanned: ScannedHtml, text: str) -> dict[str, float]:
    tags = scanned.tag_names
    attrs = [(t, dict(a)) for t, a in scanned.tags]
    styles = [a.get("style", "") for _, a in attrs if "style" in a]
    colors = [a["color"].strip().lower() for t, a in attrs if t == "font" and "color" in a]
    colors += [m.strip().lower() for s in styles for m in _CSS_COLOR.findall(s)]
    faces = {a["face"].strip().lower() for t, a in attrs if t == "font" and "face" in a}
    faces |= {m.strip().lower() for s in styles for m in _CSS_FONT.findall(s)}
    sizes = sum(1 for t, a in attrs if t == "font" and "size" in a)
    sizes += sum(len(_CSS_SIZE.findall(s)) for s in styles)
    input_types = [a.get("type", "text").lower() for t, a in attrs if t == "input"]
    metas = [(a.get("name", "").lower(), a.get("http-equiv", "").lower())
             for t, a in attrs if t == "meta"]
    hrefs = [a.get("href", "") for t, a in attrs if t == "a" and "href" in a]
    rels = [a.get("rel", "").lower() for t, a in attrs if t == "link"]
    title_words = len(words(scanned.title))
    f = {
        "has_greeting": bool(_GREETING.search(text)),
        "has_farewell": bool(_FAREWELL.search(text)),
        "has_url": bool(_URL_TEXT.search(text)),
        "has_email": bool(_EMAIL.search(text)),
        "has_phone": bool(_PHONE.search(text)),
        "has_copyright": bool(_COPYRIGHT.search(text)),
        "has_address": bool(_ADDRESS.search(text)),
        "paragraph_count": _count(tags, "p"),
        "line_break_count": _count(tags, "br"),
        **{f"h{i}_count": _count(tags, f"h{i}") for i in range(1, 7)},
        "font_tag_count": _count(tags, "font"),
        "font_color_count": len(colors),
        "distinct_font_colors": len(set(colors)),
        "distinct_font_faces": len(faces),
        "font_size_count": sizes,
        "bold_count": _count(tags, "b", "strong"),
        "italic_count": _count(tags, "i", "em"),
        "underline_count": _count(tags, "u"),
        "center_count": _count(tags, "center")
        + sum(1 for _, a in attrs if a.get("align", "").lower() == "center"),
        "table_count": _count(tags, "table"),
        "table_row_count": _count(tags, "tr"),
        "table_cell_count": _count(tags, "td", "th"),
        "list_count": _count(tags, "ul", "ol"),
        "list_item_count": _count(tags, "li"),
        "image_count": _count(tags, "img"),
        "anchor_count": len(hrefs),
        "mailto_count": sum(1 for h in hrefs if h.lower().startswith("mailto:")),
        "form_count": _count(tags, "form"),
        "input_count": len(input_types),
        "password_input_count": input_types.count("password"),
        "hidden_input_count": input_types.count("hidden"),
        "submit_count": sum(1 for t in input_types if t in ("submit", "image"))
        + sum(1 for t, a in attrs if t == "button" and a.get("type", "submit").lower() == "submit"),
        "select_count": _count(tags, "select"),
        "textarea_count": _count(tags, "textarea"),
        "button_count": _count(tags, "button"),
        "iframe_count": _count(tags, "iframe"),
        "frame_count": _count(tags, "frame", "frameset"),
        "script_count": _count(tags, "script"),
        "external_script_count": sum(1 for t, a in attrs if t == "script" and a.get("src")),
        "style_tag_count": _count(tags, "style"),
        "inline_style_count": len(styles),
        "link_tag_count": _count(tags, "link"),
        "meta_count": len(metas),
        "has_meta_refresh": any(eq == "refresh" for _, eq in metas),
        "has_meta_description": any(n == "description" for n, _ in metas),
        "has_meta_keywords": any(n == "keywords" for n, _ in metas),
        "has_title": bool(scanned.title),
        "title_word_count": title_words,
        "div_count": _count(tags, "div"),
        "span_count": _count(tags, "span"),
        "hr_count": _count(tags, "hr"),
        "blockquote_count": _count(tags, "blockquote"),
        "comment_count": scanned.comments,
        "embed_object_count": _count(tags, "embed", "object", "applet"),
        "has_favicon": any("icon" in r.split() for r in rels),
        "bgcolor_count": sum(1 for _, a in attrs if "bgcolor" in a),
        "background_image_count": sum(1 for _, a in attrs if "background" in a)
        + sum(len(_CSS_URL.findall(s)) for s in styles),
        "marquee_blink_count": _count(tags, "marquee", "blink"),
        "text_to_markup_ratio": len(text) / scanned.length if scanned.length else 0.0,
    }
    return {k: float(v) for k, v in f.items()}


def lexical_measures(text: str, toks: list[str]) -> dict[str, float]:
    total = len(text)
    n = len(toks)
    sentences = [s for s in (seg.strip() for seg in _SENT_SPLIT.split(text)) if words(s)]
    ratio = (lambda k: k / total) if total else (lambda k: 0.0)
    return {
        "total_words": float(n),
        "total_chars": float(total),
        "chars_per_word": sum(map(len, toks)) / n if n else 0.0,
        "digit_ratio": ratio(sum(c.isdigit() for c in text)),
        "uppercase_ratio": ratio(sum(c.isupper() for c in text)),
        "whitespace_ratio": ratio(sum(c.isspace() for c in text)),
        "alpha_ratio": ratio(sum(c.isalpha() for c in text)),
        "mean_sentence_words": (sum(len(words(s)) for s in sentences) / len(sentences)
                                if sentences else 0.0),
        "mean_sentence_chars": (sum(len(s) for s in sentences) / len(sentences)
                                if sentences else 0.0),
        "short_word_ratio": sum(1 for w in toks if len(w) < 4) / n if n else 0.0,
    }


def body_fixed_slots() -> list[str]:
    return ([f"lex:{k}" for k in LEXICAL]
            + [f"wlen:{i}" for i in range(1, WORD_LENGTH_BINS + 1)]
            + [f"rich:{k}" for k in RICHNESS]
            + [f"punc:{c}" for c in PUNCTUATION]
            + [f"fw:{w}" for w in FUNCTION_WORDS]
            + [f"doc:{k}" for k in DOC_STRUCTURE])


def raw_body(page: WebPage, config: NgramConfig, tagger: Tagger | None = None) -> dict[str, float]:
    """Every body-text feature of a page as ``name -> value`` (zeros omitted
    for n-gram groups, fixed slots always present)."""
    text = page.body_text
    toks = words(text)
    lower = [w.lower() for w in toks]
    n = len(toks)
    out: dict[str, float] = {f"lex:{k}": v for k, v in lexical_measures(text, toks).items()}

    lo, hi = config.order("chr")
    for run in _ALNUM_RE.findall(text.lower()):
        for g in ngrams(run, lo, hi, joiner=""):
            out[f"chr:{g}"] = out.get(f"chr:{g}", 0.0) + 1.0

    lengths = Counter(min(len(w), WORD_LENGTH_BINS) for w in toks)
    for i in range(1, WORD_LENGTH_BINS + 1):
        out[f"wlen:{i}"] = lengths.get(i, 0) / n if n else 0.0

    out.update({f"rich:{k}": v for k, v in zip(RICHNESS, vocabulary_richness(lower))})

    total = len(text)
    chars = Counter(text)
    for c in PUNCTUATION:
        out[f"punc:{c}"] = chars.get(c, 0) / total if total else 0.0

    wc = Counter(lower)
    for w in FUNCTION_WORDS:
        out[f"fw:{w}"] = wc.get(w, 0) / n if n else 0.0

    tagger = tagger or DEFAULT_TAGGER
    tags = tagger.tag(_TOKEN_RE.findall(text))
    lo, hi = config.order("pos")
    for g in ngrams(tags, lo, hi):
        out[f"pos:{g}"] = out.get(f"pos:{g}", 0.0) + 1.0

    structure = document_structure(scan_html(page.html_source), text)
    out.update({f"doc:{k}": structure[k] for k in DOC_STRUCTURE})

    lo, hi = config.order("word")
    for g in ngrams(lower, lo, hi):
        out[f"word:{g}"] = out.get(f"word:{g}", 0.0) + 1.0

    vocab = english_words()
    for w in lower:
        if len(w) >= 4 and w.isalpha() and w.isascii() and w not in vocab:
            out[f"miss:{w}"] = out.get(f"miss:{w}", 0.0) + 1.0
    return out
