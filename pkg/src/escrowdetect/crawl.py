"""Site spider and blacklist-feed poller.

``fetch_site`` does a breadth-first crawl restricted to the root URL's host
and returns a :class:`~escrowdetect.corpus.Website` snapshot.
``poll_blacklist`` reads fraud-site feeds and reports URLs not seen before.
"""
from __future__ import annotations

import logging
import os
import posixpath
import re
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable
from urllib.parse import urldefrag, urljoin, urlparse

from .corpus import Label, WebPage, Website, build_site, decode_image, decode_html
from .htmlscan import scan_html

log = logging.getLogger(__name__)

USER_AGENT = "escrowdetect-spider/0.1"
IMAGE_EXTENSIONS = ("gif", "jpg", "jpeg", "png", "bmp", "ico", "svg", "webp")


class FetchError(Exception):
    """Raised when a site root cannot be retrieved."""


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def http_get(url: str, timeout: float = 15.0) -> tuple[bytes, str]:
    """GET ``url``; returns (body, final url). Raises FetchError on failure."""
    req = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read(), resp.geturl()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"{url}: HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise FetchError(f"{url}: {exc}") from exc


def normalize_url(url: str, base: str | None = None) -> str | None:
    url = url.strip()
    if base is not None:
        url = urljoin(base, url)
    url, _ = urldefrag(url)
    parsed = urlparse(url)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        return None
    path = parsed.path or "/"
    return parsed._replace(scheme=parsed.scheme.lower(), netloc=parsed.netloc.lower(),
                           path=path).geturl()


def _extension(url: str) -> str:
    ext = posixpath.splitext(urlparse(url).path)[1].lstrip(".").lower()
    if ext == "jpeg":
        ext = "jpg"
    return ext if re.fullmatch(r"[a-z0-9]{1,5}", ext or "") else "bin"


def fetch_site(root_url: str, max_depth: int = 3, max_pages: int = 200, *,
               label: Label | str = Label.UNKNOWN, site_id: str | None = None,
               delay: float = 1.0, timeout: float = 15.0, source: str = "",
               getter: Callable[[str], tuple[bytes, str]] | None = None) -> Website:
    """Breadth-first crawl of one site.

    Only URLs on the root's host are followed. Raw HTML is kept verbatim,
    referenced images are downloaded, and intra-site anchors become link
    edges. Failures on non-root pages are recorded as site warnings.
    """
    if max_depth < 1 or max_pages < 1:
        raise ValueError("max_depth and max_pages must be >= 1")
    get = getter or (lambda u: http_get(u, timeout))
    root = normalize_url(root_url)
    if root is None:
        raise FetchError(f"{root_url}: not an http(s) URL")
    host = urlparse(root).netloc

    html_by_url: dict[str, bytes] = {}
    when: dict[str, str] = {}
    links: dict[str, list[str]] = {}
    externals: dict[str, list[str]] = {}
    img_urls: dict[str, list[str]] = {}
    problems: list[str] = []
    queue = deque([(root, 0)])
    queued = {root}
    first = True
    while queue and len(html_by_url) < max_pages:
        url, depth = queue.popleft()
        if not first and delay > 0:
            time.sleep(delay)
        try:
            body, _ = get(url)
        except FetchError as exc:
            if first:
                raise
            problems.append(f"page fetch failed: {exc}")
            log.warning("page fetch failed: %s", exc)
            continue
        first = False
        html_by_url[url] = body
        when[url] = _now()
        scanned = scan_html(body)
        links[url], externals[url] = [], []
        for href in scanned.hrefs:
            target = normalize_url(href, url)
            if target is None:
                continue
            if urlparse(target).netloc != host:
                externals[url].append(target)
                continue
            links[url].append(target)
            if target not in queued and depth + 1 <= max_depth:
                queued.add(target)
                queue.append((target, depth + 1))
        img_urls[url] = [u for u in (normalize_url(s, url) for s in scanned.img_srcs) if u]

    ids = {u: f"p{i:04d}" for i, u in enumerate(html_by_url)}
    image_ids: dict[str, str] = {}
    assets = []
    for url in html_by_url:
        for src in img_urls[url]:
            if src in image_ids:
                continue
            try:
                data, _ = get(src)
            except FetchError as exc:
                problems.append(f"image fetch failed: {exc}")
                continue
            image_id = f"i{len(image_ids):04d}"
            image_ids[src] = image_id
            asset, problem = decode_image(image_id, _extension(src), data)
            if problem:
                problems.append(problem)
            assets.append(asset)

    pages = [WebPage(page_id=ids[u], site_id="", url=u, page_level=0, in_link_count=0,
                     out_link_count=0, html_source=html_by_url[u], body_text="",
                     image_refs=tuple(dict.fromkeys(image_ids[s] for s in img_urls[u]
                                                    if s in image_ids)),
                     fetched_at=when[u], external_links=tuple(externals[u]))
             for u in html_by_url]
    edges = [(ids[u], ids[t]) for u in html_by_url for t in links[u] if t in ids]
    sid = site_id or re.sub(r"[^a-z0-9.-]+", "_", host)
    return build_site(sid, label, root, pages, assets, edges, fetched_at=when[root],
                      source=source or f"spider {root}", warnings=problems)


class SeenStore:
    """Persistent set of already-reported URLs (one URL per line on disk)."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._urls: set[str] = set()
        if self.path is not None and self.path.exists():
            self._urls = {ln.strip() for ln in self.path.read_text().splitlines() if ln.strip()}

    def __contains__(self, url: str) -> bool:
        return url in self._urls

    def __len__(self) -> int:
        return len(self._urls)

    def add_all(self, urls: Iterable[str]) -> list[str]:
        """Add URLs; returns those that were new, in input order."""
        with self._lock:
            new = [u for u in dict.fromkeys(urls) if u not in self._urls]
            self._urls.update(new)
            if self.path is not None and new:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a") as fh:
                    fh.writelines(u + "\n" for u in new)
            return new


_URL_LINE = re.compile(r"^\s*(https?://\S+)\s*$", re.I)


def parse_feed(body: bytes, base: str) -> list[str]:
    """URLs listed in a feed body, either one per line or as anchors."""
    text = decode_html(body)
    found = []
    for line in text.splitlines():
        m = _URL_LINE.match(line)
        if m:
            found.append(m.group(1))
    for href in scan_html(body).hrefs:
        url = normalize_url(href, base)
        if url:
            found.append(url)
    out = []
    for u in found:
        n = normalize_url(u)
        if n:
            out.append(n)
    return list(dict.fromkeys(out))


def poll_blacklist(feed_urls: Iterable[str], seen_store: SeenStore, *,
                   getter: Callable[[str], tuple[bytes, str]] | None = None,
                   timeout: float = 15.0) -> list[str]:
    """Return feed URLs absent from ``seen_store`` and record them there.

    An unreachable feed is logged and skipped.
    """
    get = getter or (lambda u: http_get(u, timeout))
    candidates = []
    for feed in feed_urls:
        try:
            body, final = get(feed)
        except FetchError as exc:
            log.warning("feed unreachable: %s", exc)
            continue
        candidates.extend(parse_feed(body, final))
    return seen_store.add_all(candidates)
