"""Website / page / image data model and the on-disk corpus layout.

A corpus directory looks like::

    <root>/<label>/<site-id>/manifest
    <root>/<label>/<site-id>/pages/<page-id>.html
    <root>/<label>/<site-id>/images/<image-id>.<ext>

The manifest is tab-separated text, one record per line::

    root_url    <url>
    fetched_at  <iso timestamp>
    source      <feed name / provenance>
    page        <page-id> <url> <level> <fetched-at> <image-ids|->
    edge        <from-page-id> <to-page-id>
    external    <page-id> <url>
    image       <image-id> <ext> <width> <height> <size>
    warning     <text>

Levels and in/out link counts written in the manifest are informational;
both are recomputed from the edge list whenever a site is built.
"""
from __future__ import annotations

import enum
import io
import logging
import os
import re
import warnings
from collections import Counter, deque
from dataclasses import dataclass, field
from html import unescape
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

MANIFEST = "manifest"


class CorpusError(Exception):
    """Raised when a corpus directory cannot be loaded."""


class Label(str, enum.Enum):
    REAL = "real"
    FAKE = "fake"
    UNKNOWN = "unknown"

    @property
    def sign(self) -> int:
        """+1 for Fake, -1 for Real, 0 for Unknown."""
        return {Label.FAKE: 1, Label.REAL: -1}.get(self, 0)


@dataclass(frozen=True)
class ImageAsset:
    image_id: str
    extension: str
    width_px: int
    height_px: int
    file_size_bytes: int
    data: bytes = b""
    pixels: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.extension != self.extension.lower():
            raise ValueError(f"extension must be lowercase: {self.extension!r}")

    @property
    def file_name(self) -> str:
        return f"{self.image_id}.{self.extension}"


@dataclass(frozen=True)
class WebPage:
    page_id: str
    site_id: str
    url: str
    page_level: int
    in_link_count: int
    out_link_count: int
    html_source: bytes
    body_text: str
    image_refs: tuple[str, ...] = ()
    fetched_at: str = ""
    external_links: tuple[str, ...] = ()


@dataclass(frozen=True)
class Website:
    site_id: str
    label: Label
    root_url: str
    pages: tuple[WebPage, ...]
    images: tuple[ImageAsset, ...] = ()
    link_edges: tuple[tuple[str, str], ...] = ()
    fetched_at: str = ""
    source: str = ""
    warnings: tuple[str, ...] = ()

    def page(self, page_id: str) -> WebPage:
        for p in self.pages:
            if p.page_id == page_id:
                return p
        raise KeyError(page_id)

    def image_map(self) -> dict[str, ImageAsset]:
        return {im.image_id: im for im in self.images}


@dataclass(frozen=True)
class Corpus:
    sites: tuple[Website, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [s.site_id for s in self.sites]
        dup = [k for k, v in Counter(ids).items() if v > 1]
        if dup:
            raise CorpusError(f"duplicate site ids: {sorted(dup)}")

    @property
    def provenance(self) -> dict[str, tuple[str, str]]:
        return {s.site_id: (s.source, s.fetched_at) for s in self.sites}

    def site(self, site_id: str) -> Website:
        for s in self.sites:
            if s.site_id == site_id:
                return s
        raise KeyError(site_id)

    def by_label(self, label: Label) -> list[Website]:
        return [s for s in self.sites if s.label == label]

    def pages(self) -> Iterable[tuple[Website, WebPage]]:
        for s in self.sites:
            for p in s.pages:
                yield s, p


# --- visible text -----------------------------------------------------------

_SKIP_TEXT = {"script", "style", "noscript", "template"}
_BLOCK = {
    "p", "div", "br", "li", "tr", "td", "th", "table", "h1", "h2", "h3", "h4",
    "h5", "h6", "title", "ul", "ol", "hr", "blockquote", "pre", "section",
    "article", "header", "footer", "form", "center", "dd", "dt", "body",
}


class _TextParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TEXT:
            self._skip += 1
        elif tag in _BLOCK:
            self.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in _SKIP_TEXT:
            self._skip = max(0, self._skip - 1)
        elif tag in _BLOCK:
            self.parts.append(" ")

    def handle_data(self, data):
        if not self._skip:
            self.parts.append(data)


def decode_html(html: bytes) -> str:
    try:
        return html.decode("utf-8")
    except UnicodeDecodeError:
        return html.decode("latin-1")


def extract_text(html: bytes | str) -> str:
    """Visible text of an HTML document.

    Drops script/style content and tags, decodes entities, and collapses
    whitespace to single spaces. Never raises on malformed markup.
    """
    src = decode_html(html) if isinstance(html, bytes) else html
    parser = _TextParser()
    try:
        parser.feed(src)
        parser.close()
        text = "".join(parser.parts)
    except Exception:  # pragma: no cover - html.parser is tolerant already
        text = unescape(re.sub(r"<[^>]*>", " ", src))
    return " ".join(text.split())


# --- site construction ------------------------------------------------------

def bfs_levels(page_ids: Sequence[str], root_id: str,
               edges: Iterable[tuple[str, str]]) -> dict[str, int]:
    """Link-hop depth from the root; unreachable pages get max depth + 1."""
    adj: dict[str, list[str]] = {p: [] for p in page_ids}
    for a, b in edges:
        adj[a].append(b)
    level = {root_id: 0}
    queue = deque([root_id])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in level:
                level[nxt] = level[cur] + 1
                queue.append(nxt)
    unreachable = max(level.values()) + 1
    return {p: level.get(p, unreachable) for p in page_ids}


def build_site(site_id: str, label: Label | str, root_url: str,
               pages: Sequence[WebPage], images: Sequence[ImageAsset] = (),
               link_edges: Iterable[tuple[str, str]] = (), *,
               fetched_at: str = "", source: str = "",
               warnings: Sequence[str] = ()) -> Website:
    """Assemble a Website, enforcing its invariants.

    Pages are sorted by id; levels come from BFS over ``link_edges`` starting
    at the page whose URL equals ``root_url`` (first page if none matches);
    in/out counts are recounted from the edges; body text is re-extracted.
    """
    if not pages:
        raise CorpusError(f"site {site_id} has no pages")
    label = Label(label)
    pages = sorted(pages, key=lambda p: p.page_id)
    ids = [p.page_id for p in pages]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"site {site_id}: duplicate page ids")
    known = set(ids)
    edges = tuple((a, b) for a, b in link_edges)
    for a, b in edges:
        if a not in known or b not in known:
            raise CorpusError(f"site {site_id}: edge ({a}, {b}) references unknown page")
    root = next((p.page_id for p in pages if p.url == root_url), ids[0])
    levels = bfs_levels(ids, root, edges)
    outs = Counter(a for a, _ in edges)
    ins = Counter(b for _, b in edges)
    image_ids = {im.image_id for im in images}
    fixed = []
    for p in pages:
        missing = [r for r in p.image_refs if r not in image_ids]
        if missing:
            raise CorpusError(f"site {site_id}, page {p.page_id}: unknown images {missing}")
        fixed.append(WebPage(
            page_id=p.page_id, site_id=site_id, url=p.url,
            page_level=levels[p.page_id],
            in_link_count=ins[p.page_id], out_link_count=outs[p.page_id],
            html_source=p.html_source, body_text=extract_text(p.html_source),
            image_refs=tuple(p.image_refs), fetched_at=p.fetched_at,
            external_links=tuple(p.external_links)))
    return Website(site_id=site_id, label=label, root_url=root_url,
                   pages=tuple(fixed),
                   images=tuple(sorted(images, key=lambda im: im.image_id)),
                   link_edges=edges, fetched_at=fetched_at, source=source,
                   warnings=tuple(warnings))


def decode_image(image_id: str, extension: str, data: bytes,
                 width: int = 0, height: int = 0) -> tuple[ImageAsset, str | None]:
    """Decode raw image bytes into an ImageAsset.

    Returns the asset and a warning string when the bytes cannot be decoded
    (the asset is kept with ``pixels=None`` and the metadata dimensions).
    """
    from PIL import Image

    pixels = None
    problem = None
    try:
        with Image.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.uint8)
            height, width = pixels.shape[:2]
    except Exception as exc:
        problem = f"image {image_id}: undecodable ({type(exc).__name__})"
    asset = ImageAsset(image_id=image_id, extension=extension.lower(),
                       width_px=max(int(width), 1), height_px=max(int(height), 1),
                       file_size_bytes=max(len(data), 1), data=data, pixels=pixels)
    return asset, problem


# --- load / save ------------------------------------------------------------

def _clean(value: str) -> str:
    return value.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def write_site(site: Website, root: str | os.PathLike) -> Path:
    """Write one site under ``<root>/<label>/<site-id>/``."""
    site_dir = Path(root) / site.label.value / site.site_id
    (site_dir / "pages").mkdir(parents=True, exist_ok=True)
    (site_dir / "images").mkdir(parents=True, exist_ok=True)
    lines = [
        f"root_url\t{_clean(site.root_url)}",
        f"fetched_at\t{_clean(site.fetched_at)}",
        f"source\t{_clean(site.source)}",
    ]
    for p in site.pages:
        refs = ",".join(p.image_refs) or "-"
        lines.append(f"page\t{p.page_id}\t{_clean(p.url)}\t{p.page_level}\t"
                     f"{_clean(p.fetched_at)}\t{refs}")
        (site_dir / "pages" / f"{p.page_id}.html").write_bytes(p.html_source)
    for a, b in site.link_edges:
        lines.append(f"edge\t{a}\t{b}")
    for p in site.pages:
        for url in p.external_links:
            lines.append(f"external\t{p.page_id}\t{_clean(url)}")
    for im in site.images:
        lines.append(f"image\t{im.image_id}\t{im.extension}\t{im.width_px}\t"
                     f"{im.height_px}\t{im.file_size_bytes}")
        (site_dir / "images" / im.file_name).write_bytes(im.data)
    for w in site.warnings:
        lines.append(f"warning\t{_clean(w)}")
    (site_dir / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return site_dir


def save_corpus(corpus: Corpus, root: str | os.PathLike) -> None:
    Path(root).mkdir(parents=True, exist_ok=True)
    for site in corpus.sites:
        write_site(site, root)


def load_site(site_dir: str | os.PathLike, label: Label | str = Label.UNKNOWN) -> Website:
    """Load a single site directory (the label is not encoded in the manifest)."""
    return _read_site(Path(site_dir), label)[0]


def _read_site(site_dir: Path, label: Label | str) -> tuple[Website, list[str]]:
    manifest = site_dir / MANIFEST
    if not manifest.is_file():
        raise CorpusError(f"missing manifest in site directory {site_dir}")
    site_id = site_dir.name
    meta: dict[str, str] = {}
    page_rows, edges, images, notes = [], [], [], []
    externals: dict[str, list[str]] = {}
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        kind, *rest = line.split("\t")
        if kind in ("root_url", "fetched_at", "source"):
            meta[kind] = rest[0] if rest else ""
        elif kind == "page" and len(rest) >= 5:
            page_rows.append(rest)
        elif kind == "edge" and len(rest) == 2:
            edges.append((rest[0], rest[1]))
        elif kind == "external" and len(rest) == 2:
            externals.setdefault(rest[0], []).append(rest[1])
        elif kind == "image" and len(rest) == 5:
            images.append(rest)
        elif kind == "warning":
            notes.append(rest[0] if rest else "")
        else:
            raise CorpusError(f"{manifest}:{lineno}: malformed record {kind!r}")

    load_warnings = []
    assets = []
    for image_id, ext, width, height, _size in images:
        path = site_dir / "images" / f"{image_id}.{ext}"
        data = path.read_bytes() if path.is_file() else b""
        asset, problem = decode_image(image_id, ext, data, int(width), int(height))
        if problem:
            load_warnings.append(f"{site_id}: {problem}")
        assets.append(asset)

    pages = []
    for page_id, url, _level, fetched, refs in (r[:5] for r in page_rows):
        path = site_dir / "pages" / f"{page_id}.html"
        if not path.is_file():
            raise CorpusError(f"site {site_dir}: missing page file {path.name}")
        html = path.read_bytes()
        pages.append(WebPage(
            page_id=page_id, site_id=site_id, url=url, page_level=0,
            in_link_count=0, out_link_count=0, html_source=html, body_text="",
            image_refs=tuple(r for r in refs.split(",") if r and r != "-"),
            fetched_at=fetched, external_links=tuple(externals.get(page_id, ()))))
    if not pages:
        raise CorpusError(f"site directory {site_dir} lists no pages")
    site = build_site(site_id, label, meta.get("root_url", ""), pages, assets, edges,
                      fetched_at=meta.get("fetched_at", ""),
                      source=meta.get("source", ""), warnings=notes)
    for w in load_warnings:
        warnings.warn(w)
        log.warning(w)
    return site, load_warnings


def load_corpus(root_path: str | os.PathLike) -> Corpus:
    """Load every ``<label>/<site-id>`` directory under ``root_path``."""
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    sites, notes = [], []
    for label in Label:
        label_dir = root / label.value
        if not label_dir.is_dir():
            continue
        for site_dir in sorted(p for p in label_dir.iterdir() if p.is_dir()):
            site, problems = _read_site(site_dir, label)
            sites.append(site)
            notes.extend(problems)
    sites.sort(key=lambda s: s.site_id)
    return Corpus(sites=tuple(sites), warnings=tuple(notes))


# --- statistics -------------------------------------------------------------

@dataclass(frozen=True)
class StatsRow:
    label: str
    sites: int
    pages: int
    images: int
    pages_per_site: float
    images_per_site: float


def corpus_stats(corpus: Corpus) -> list[StatsRow]:
    """Test-bed summary per label (Real, Fake, plus Unknown if present)."""
    labels = [Label.REAL, Label.FAKE]
    if any(s.label == Label.UNKNOWN for s in corpus.sites):
        labels.append(Label.UNKNOWN)
    rows = []
    for label in labels:
        group = corpus.by_label(label)
        n_sites = len(group)
        n_pages = sum(len(s.pages) for s in group)
        n_images = sum(len(s.images) for s in group)
        rows.append(StatsRow(
            label=label.value, sites=n_sites, pages=n_pages, images=n_images,
            pages_per_site=round(n_pages / n_sites, 2) if n_sites else 0.0,
            images_per_site=round(n_images / n_sites, 2) if n_sites else 0.0))
    return rows


def format_stats(rows: Sequence[StatsRow]) -> str:
    head = f"{'Category':<12}{'# Sites':>9}{'# Pages':>10}{'# Images':>10}" \
           f"{'Pages/Site':>12}{'Images/Site':>13}"
    out = [head, "-" * len(head)]
    for r in rows:
        out.append(f"{r.label.title() + ' sites':<12}{r.sites:>9,}{r.pages:>10,}"
                   f"{r.images:>10,}{r.pages_per_site:>12.2f}{r.images_per_site:>13.2f}")
    out.append("")
    out.append("label\tsites\tpages\timages\tpages_per_site\timages_per_site")
    for r in rows:
        out.append(f"{r.label}\t{r.sites}\t{r.pages}\t{r.images}\t"
                   f"{r.pages_per_site:.2f}\t{r.images_per_site:.2f}")
    return "\n".join(out)
