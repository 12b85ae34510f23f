"""Synthetic escrow-site corpus with planted template duplication.

Fake sites are stamped out of a handful of shared templates: the same
layout, stylesheet, logo images, URL scheme and (brand-substituted) copy,
with a little per-site noise. Real sites are generated independently, each
with its own layout, vocabulary, images and link graph.
"""
from __future__ import annotations

import functools
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .corpus import Corpus, Website, ImageAsset, Label, WebPage, build_site, decode_image
from .features.text import english_words

FAKE_PHRASES = (
    "your payment is held securely until the buyer confirms delivery",
    "we are fully licensed and insured escrow agent",
    "please wire the funds to our trust account within 24 hours",
    "all transactions are protected by our guarantee",
    "contact our customer support team for immediate assistance",
    "the seller will ship the vehicle once funds are received",
    "we beleive in complete transparency for every transaction",
    "you will recieve a confirmation email after the transfer",
    "our agents garantee the safety of your money",
    "this service is free of charge for the buyer",
    "do not use credit cards western union or money gram only",
    "we are a member of the international escrow association",
)
BRAND_PARTS = ("secure", "safe", "trust", "global", "direct", "first", "prime", "union",
               "capital", "shield", "guard", "alliance", "pacific", "atlantic", "euro")
TLDS = ("com", "net", "org", "biz", "info")
LAYOUT_TAGS = ("div", "table", "section", "center", "span", "ul", "p", "font")


@dataclass(frozen=True)
class BenchmarkSpec:
    n_fake: int = 30
    n_real: int = 30
    n_templates: int = 5
    pages: int = 20
    seed: int = 7


def _png(rng: np.random.Generator, palette: np.ndarray, size: tuple[int, int]) -> bytes:
    w, h = size
    idx = rng.integers(0, len(palette), size=(h // 4 + 1, w // 4 + 1))
    arr = palette[idx].repeat(4, axis=0).repeat(4, axis=1)[:h, :w].astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def _jpeg(rng: np.random.Generator, size: tuple[int, int]) -> bytes:
    w, h = size
    base = rng.integers(0, 256, size=3)
    noise = rng.integers(-60, 60, size=(h, w, 3))
    arr = np.clip(base + noise, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, format="JPEG", quality=70)
    return buf.getvalue()


def _asset(image_id: str, ext: str, data: bytes) -> ImageAsset:
    asset, problem = decode_image(image_id, ext, data)
    assert problem is None, problem
    return asset


@functools.lru_cache(maxsize=1)
def _word_pool() -> tuple[str, ...]:
    # short words keep the generated text readable
    return tuple(sorted(w for w in english_words() if 3 <= len(w) <= 9))


class _Words:
    def __init__(self, rng: np.random.Generator, vocab_size: int):
        pool = _word_pool()
        picks = rng.choice(len(pool), size=vocab_size, replace=False)
        self.vocab = [pool[i] for i in sorted(picks)]
        self.common = ["the", "of", "and", "to", "a", "in", "for", "is", "on", "with",
                       "we", "our", "you", "your", "escrow", "payment", "service"]
        self.rng = rng

    def sentence(self, n: int) -> str:
        out = []
        for _ in range(n):
            if self.rng.random() < 0.35:
                out.append(self.common[self.rng.integers(len(self.common))])
            else:
                out.append(self.vocab[self.rng.integers(len(self.vocab))])
        s = " ".join(out)
        return s[0].upper() + s[1:] + self.rng.choice([".", ".", ".", "!", "?"])


def _tree_edges(rng, n: int, branching: int, cross: int) -> list[tuple[int, int]]:
    edges = []
    for i in range(1, n):
        parent = int(rng.integers(max(0, (i - 1) // branching - 1), (i - 1) // branching + 1))
        edges.append((min(parent, i - 1), i))
    for _ in range(cross):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges.append((int(a), int(b)))
    return edges


def _page_html(title: str, style: str, wrap: tuple[str, ...], nav: list[tuple[str, str]],
               paragraphs: list[str], images: list[str], footer: str) -> bytes:
    parts = ["<html><head><title>", title, "</title><style>", style, "</style></head><body>"]
    for tag in wrap:
        parts.append(f"<{tag} class=\"{tag}x\">")
    parts.append("<ul class=\"nav\">")
    for href, text in nav:
        parts.append(f"<li><a href=\"{href}\">{text}</a></li>")
    parts.append("</ul>")
    for src in images:
        parts.append(f"<img src=\"{src}\" alt=\"\">")
    for para in paragraphs:
        parts.append(f"<p>{para}</p>")
    for tag in reversed(wrap):
        parts.append(f"</{tag}>")
    parts.append(f"<div class=\"footer\">{footer}</div></body></html>")
    return "".join(parts).encode("utf-8")


def _assemble(site_id, root, paths, edges, html_for, images, externals):
    pages = []
    for i, path in enumerate(paths):
        out_targets = [paths[b] for a, b in edges if a == i]
        pages.append(WebPage(
            page_id=f"p{i:04d}", site_id=site_id, url=root + path, page_level=0,
            in_link_count=0, out_link_count=0,
            html_source=html_for(i, out_targets), body_text="",
            image_refs=tuple(sorted(images.get(i, ()))),
            external_links=tuple(externals.get(i, ()))))
    return pages


def _fake_template(rng: np.random.Generator, t: int) -> dict:
    words = _Words(rng, 400)
    palette = rng.integers(0, 256, size=(4, 3))
    n_para = 24
    paragraphs = []
    for _ in range(n_para):
        p = words.sentence(int(rng.integers(8, 16)))
        if rng.random() < 0.6:
            p += " " + FAKE_PHRASES[rng.integers(len(FAKE_PHRASES))].capitalize() + "."
        paragraphs.append(p)
    sections = ["index", "about", "how-it-works", "fees", "contact", "faq", "terms",
                "register", "login", "verify", "track", "agents"]
    return {
        "words": words,
        "palette": palette,
        "paragraphs": paragraphs,
        "style": f"body{{font-family:{rng.choice(['Verdana', 'Arial', 'Tahoma'])};"
                 f"color:#{rng.integers(0, 0xFFFFFF):06x}}}.nav li{{display:inline}}",
        "wrap": tuple(rng.choice(LAYOUT_TAGS, size=int(rng.integers(3, 6)))),
        "sections": sections,
        "ext": f"{rng.choice(['php', 'asp', 'htm'])}",
        "edges": _tree_edges(rng, 24, 5, 10),
        "logo_seed": int(rng.integers(1 << 31)),
    }


def fake_site(template: dict, site_id: str, rng: np.random.Generator, n_pages: int) -> Website:
    brand = "".join(str(x).capitalize() for x in rng.choice(BRAND_PARTS, size=2, replace=False))
    root = f"http://www.{brand.lower()}escrow.{rng.choice(TLDS)}/"
    n = n_pages + int(rng.integers(-2, 3))
    sections = template["sections"]
    paths = ["index." + template["ext"]] + [
        f"{sections[i % len(sections)]}{'' if i < len(sections) else i}.{template['ext']}"
        for i in range(1, n)]
    edges = [(a, b) for a, b in template["edges"] if a < n and b < n]
    logo_rng = np.random.default_rng(template["logo_seed"])
    assets = [
        _asset("i0000", "png", _png(logo_rng, template["palette"], (96, 40))),
        _asset("i0001", "png", _png(logo_rng, template["palette"], (32, 32))),
        _asset("i0002", "jpg", _jpeg(rng, (64, 48))),
    ]
    images = {i: ["i0000", "i0001"] + (["i0002"] if i % 4 == 0 else []) for i in range(n)}
    paras = template["paragraphs"]
    nav = [(paths[k], sections[k % len(sections)]) for k in range(min(6, n))]

    def html_for(i, out_targets):
        chosen = [paras[(i * 3 + k) % len(paras)].replace("escrow", f"{brand} escrow", 1)
                  for k in range(3)]
        if rng.random() < 0.3:
            chosen.append(template["words"].sentence(10))
        links = nav + [(t, t.split(".")[0]) for t in out_targets]
        return _page_html(f"{brand} Escrow - {paths[i].split('.')[0]}", template["style"],
                          template["wrap"], links, chosen,
                          [f"images/{im}" for im in images[i]],
                          f"Copyright {brand} Escrow Services Ltd")

    externals = {0: ("http://www.paypal.com/",), 1: ("http://www.ebay.com/",)}
    pages = _assemble(site_id, root, paths, edges, html_for, images, externals)
    return build_site(site_id, Label.FAKE, root + paths[0], pages, assets,
                      [(f"p{a:04d}", f"p{b:04d}") for a, b in edges], source="synthetic")


def real_site(site_id: str, rng: np.random.Generator, n_pages: int) -> Website:
    words = _Words(rng, 600)
    brand = "".join(w.capitalize() for w in rng.choice(words.vocab, size=2, replace=False))
    root = f"https://{brand.lower()}.{rng.choice(TLDS)}/"
    n = n_pages + int(rng.integers(-5, 6))
    ext = rng.choice(["html", "jsp", "aspx", ""])
    paths = [""] + [f"{'/'.join(rng.choice(words.vocab, size=int(rng.integers(1, 3))))}"
                    f"{'.' + ext if ext else '/'}" for _ in range(1, n)]
    # drop accidental duplicate paths
    seen = set()
    for i, p in enumerate(paths):
        while p in seen:
            p = f"{i}-{p}"
        seen.add(p)
        paths[i] = p
    edges = _tree_edges(rng, n, int(rng.integers(2, 6)), int(rng.integers(0, 3 * n)))
    palette = rng.integers(0, 256, size=(6, 3))
    n_img = int(rng.integers(1, 5))
    assets = []
    for k in range(n_img):
        if rng.random() < 0.5:
            assets.append(_asset(f"i{k:04d}", "png",
                                 _png(rng, palette, (int(rng.integers(16, 200)),
                                                     int(rng.integers(16, 120))))))
        else:
            assets.append(_asset(f"i{k:04d}", "jpg",
                                 _jpeg(rng, (int(rng.integers(16, 160)),
                                             int(rng.integers(16, 120))))))
    images = {i: sorted({assets[int(j)].image_id
                         for j in rng.integers(0, n_img, size=int(rng.integers(0, 3)))})
              for i in range(n)}
    style = (f"body{{font-family:{rng.choice(['Georgia', 'Helvetica', 'Times', 'Lucida'])};"
             f"margin:{rng.integers(0, 20)}px}}")
    wrap = tuple(rng.choice(LAYOUT_TAGS, size=int(rng.integers(1, 6))))
    nav = [(paths[k] or "/", words.vocab[int(rng.integers(len(words.vocab)))])
           for k in range(min(int(rng.integers(3, 8)), n))]

    def html_for(i, out_targets):
        paras = [" ".join(words.sentence(int(rng.integers(6, 20)))
                          for _ in range(int(rng.integers(1, 4))))
                 for _ in range(int(rng.integers(2, 7)))]
        links = nav + [(t or "/", t.split(".")[0] or "home") for t in out_targets]
        return _page_html(f"{brand} | {words.sentence(3)}", style, wrap, links, paras,
                          [f"img/{im}" for im in images[i]], f"{brand} {2000 + i}")

    externals = {i: (f"https://{rng.choice(words.vocab)}.com/",)
                 for i in range(n) if rng.random() < 0.2}
    pages = _assemble(site_id, root, paths, edges, html_for, images, externals)
    return build_site(site_id, Label.REAL, root + paths[0], pages, assets,
                      [(f"p{a:04d}", f"p{b:04d}") for a, b in edges], source="synthetic")


def generate_benchmark(spec: BenchmarkSpec | None = None) -> Corpus:
    """Deterministic synthetic corpus for a given spec (seeded)."""
    spec = spec or BenchmarkSpec()
    templates = [_fake_template(np.random.default_rng([spec.seed, 1, t]), t)
                 for t in range(spec.n_templates)]
    sites = []
    for k in range(spec.n_fake):
        t = templates[k % spec.n_templates]
        sites.append(fake_site(t, f"fake{k:03d}", np.random.default_rng([spec.seed, 2, k]),
                               spec.pages))
    for k in range(spec.n_real):
        sites.append(real_site(f"real{k:03d}", np.random.default_rng([spec.seed, 3, k]),
                               spec.pages))
    return Corpus(tuple(sites))
