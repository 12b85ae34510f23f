"""HTML tag n-grams, URL character/token n-grams, image colour and
metadata features, and site/page link structure."""
from __future__ import annotations

import re
from collections import Counter
from typing import Mapping

import numpy as np

from ..corpus import ImageAsset, WebPage, Website
from ..htmlscan import scan_html
from .dictionary import NgramConfig
from .text import ngrams

# --- HTML ---------------------------------------------------------------------


def tag_sequence(html: bytes) -> list[str]:
    """Opening-tag names in document order, case-folded, attributes dropped."""
    return scan_html(html).tag_names


def raw_html(page: WebPage, config: NgramConfig) -> dict[str, float]:
    lo, hi = config.order("tag")
    return {f"tag:{g}": float(c)
            for g, c in Counter(ngrams(tag_sequence(page.html_source), lo, hi)).items()}


# --- URL ----------------------------------------------------------------------

URL_SPLIT = re.compile(r"[/.\-_?=&]+")


def url_tokens(url: str) -> list[str]:
    return [t for t in URL_SPLIT.split(url.lower()) if t]


def raw_url(page: WebPage, config: NgramConfig) -> dict[str, float]:
    url = page.url.lower()
    out: Counter = Counter()
    lo, hi = config.order("uchr")
    out.update(f"uchr:{g}" for g in ngrams(url, lo, hi, joiner=""))
    lo, hi = config.order("utok")
    out.update(f"utok:{g}" for g in ngrams(url_tokens(url), lo, hi))
    return {k: float(v) for k, v in out.items()}


# --- images -------------------------------------------------------------------

PIXEL_BINS = 10_000
R_LEVELS, G_LEVELS, B_LEVELS = 25, 20, 20
EXTENSION_CLASSES = ("gif", "jpg", "png", "bmp", "ico", "svg", "webp", "other")
# Upper edges; values at or above the last edge fall into the final bin.
DIMENSION_EDGES = (16, 32, 64, 128, 256, 512, 1024)
SIZE_EDGES = (512, 1024, 4096, 16384, 65536, 262144, 1048576)
IMAGE_AGGREGATES = ("count", "total_bytes", "mean_bytes", "max_bytes",
                    "mean_width", "max_width", "mean_height", "max_height")


def pixel_bin_indices(pixels: np.ndarray) -> np.ndarray:
    """Colour-cube bin of every pixel: qR*400 + qG*20 + qB."""
    rgb = pixels.reshape(-1, 3).astype(np.int64)
    q_r = rgb[:, 0] * R_LEVELS // 256
    q_g = rgb[:, 1] * G_LEVELS // 256
    q_b = rgb[:, 2] * B_LEVELS // 256
    return q_r * (G_LEVELS * B_LEVELS) + q_g * B_LEVELS + q_b


def _bin(value: float, edges: tuple[int, ...]) -> int:
    for i, edge in enumerate(edges):
        if value < edge:
            return i
    return len(edges)


def image_fixed_slots() -> list[str]:
    return ([f"pix:{i:04d}" for i in range(PIXEL_BINS)]
            + [f"imgext:{e}" for e in EXTENSION_CLASSES]
            + [f"imgw:{i}" for i in range(8)]
            + [f"imgh:{i}" for i in range(8)]
            + [f"imgsz:{i}" for i in range(8)]
            + [f"imgagg:{k}" for k in IMAGE_AGGREGATES])


def raw_image(page: WebPage, images: Mapping[str, ImageAsset]) -> dict[str, float]:
    assets = [images[r] for r in dict.fromkeys(page.image_refs)]
    out: dict[str, float] = {}
    decoded = [a.pixels for a in assets if a.pixels is not None and a.pixels.size]
    if decoded:
        idx = np.concatenate([pixel_bin_indices(p) for p in decoded])
        counts = np.bincount(idx, minlength=PIXEL_BINS)
        for i in np.flatnonzero(counts):
            out[f"pix:{i:04d}"] = counts[i] / idx.size
    for a in assets:
        ext = {"jpeg": "jpg"}.get(a.extension, a.extension)
        cls = ext if ext in EXTENSION_CLASSES else "other"
        for key in (f"imgext:{cls}", f"imgw:{_bin(a.width_px, DIMENSION_EDGES)}",
                    f"imgh:{_bin(a.height_px, DIMENSION_EDGES)}",
                    f"imgsz:{_bin(a.file_size_bytes, SIZE_EDGES)}"):
            out[key] = out.get(key, 0.0) + 1.0
    sizes = [a.file_size_bytes for a in assets]
    widths = [a.width_px for a in assets]
    heights = [a.height_px for a in assets]
    n = len(assets)
    agg = {
        "count": n,
        "total_bytes": sum(sizes),
        "mean_bytes": sum(sizes) / n if n else 0,
        "max_bytes": max(sizes, default=0),
        "mean_width": sum(widths) / n if n else 0,
        "max_width": max(widths, default=0),
        "mean_height": sum(heights) / n if n else 0,
        "max_height": max(heights, default=0),
    }
    out.update({f"imgagg:{k}": float(v) for k, v in agg.items()})
    return out


# --- link structure -------------------------------------------------------------

LINKAGE = ("page_in_rel", "page_out_rel", "page_out_abs", "page_anchors",
           "site_rel_links", "site_out_abs", "site_anchors",
           "site_mean_in_degree", "site_mean_out_degree", "site_pages")
LEVEL_BINS = 10  # levels 0..8, then 9+
DEGREE_BINS = 4  # quartiles of degree / site max degree


def page_structure_names() -> list[str]:
    return (["page_level"]
            + [f"in_level_{i}" for i in range(LEVEL_BINS)]
            + [f"out_level_{i}" for i in range(LEVEL_BINS)]
            + ["in_degree_ratio", "out_degree_ratio"]
            + [f"in_degree_q{i}" for i in range(DEGREE_BINS)]
            + [f"out_degree_q{i}" for i in range(DEGREE_BINS)])


def link_fixed_slots() -> list[str]:
    return [f"lnk:{k}" for k in LINKAGE] + [f"pstr:{k}" for k in page_structure_names()]


def _anchor_count(page: WebPage) -> int:
    return len(scan_html(page.html_source).hrefs)


class _SiteGraph:
    """Per-site aggregates reused by every page of the site."""

    def __init__(self, site: Website):
        self.levels = {p.page_id: p.page_level for p in site.pages}
        self.incoming: dict[str, list[str]] = {p.page_id: [] for p in site.pages}
        self.outgoing: dict[str, list[str]] = {p.page_id: [] for p in site.pages}
        for a, b in site.link_edges:
            self.outgoing[a].append(b)
            self.incoming[b].append(a)
        n = len(site.pages)
        self.n_pages = n
        self.n_edges = len(site.link_edges)
        self.n_abs = sum(len(p.external_links) for p in site.pages)
        self.n_anchors = sum(_anchor_count(p) for p in site.pages)
        self.max_in = max((p.in_link_count for p in site.pages), default=0)
        self.max_out = max((p.out_link_count for p in site.pages), default=0)


_graph_cache: dict[int, tuple[Website, _SiteGraph]] = {}


def _site_graph(site: Website) -> _SiteGraph:
    hit = _graph_cache.get(id(site))
    if hit is None or hit[0] is not site:
        if len(_graph_cache) > 4096:
            _graph_cache.clear()
        hit = (site, _SiteGraph(site))
        _graph_cache[id(site)] = hit
    return hit[1]


def _quartile(ratio: float) -> int:
    return min(int(ratio * DEGREE_BINS), DEGREE_BINS - 1)


def raw_link(page: WebPage, site: Website) -> dict[str, float]:
    g = _site_graph(site)
    pid = page.page_id
    lnk = {
        "page_in_rel": page.in_link_count,
        "page_out_rel": page.out_link_count,
        "page_out_abs": len(page.external_links),
        "page_anchors": _anchor_count(page),
        "site_rel_links": g.n_edges,
        "site_out_abs": g.n_abs,
        "site_anchors": g.n_anchors,
        "site_mean_in_degree": g.n_edges / g.n_pages,
        "site_mean_out_degree": (g.n_edges + g.n_abs) / g.n_pages,
        "site_pages": g.n_pages,
    }
    out = {f"lnk:{k}": float(v) for k, v in lnk.items()}
    pstr = dict.fromkeys(page_structure_names(), 0.0)
    pstr["page_level"] = float(page.page_level)
    for src in g.incoming[pid]:
        pstr[f"in_level_{min(g.levels[src], LEVEL_BINS - 1)}"] += 1
    for dst in g.outgoing[pid]:
        pstr[f"out_level_{min(g.levels[dst], LEVEL_BINS - 1)}"] += 1
    in_ratio = page.in_link_count / g.max_in if g.max_in else 0.0
    out_ratio = page.out_link_count / g.max_out if g.max_out else 0.0
    pstr["in_degree_ratio"] = in_ratio
    pstr["out_degree_ratio"] = out_ratio
    if page.in_link_count:
        pstr[f"in_degree_q{_quartile(in_ratio)}"] = 1.0
    if page.out_link_count:
        pstr[f"out_degree_q{_quartile(out_ratio)}"] = 1.0
    out.update({f"pstr:{k}": v for k, v in pstr.items()})
    return out
