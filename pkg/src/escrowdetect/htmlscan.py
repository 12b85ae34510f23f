"""Tolerant single-pass HTML scanner.

Collects opening tags (lower-cased, attributes kept separately), comment
count and title text. Falls back to a regex scan if ``html.parser`` chokes,
so callers never see a parse error.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from html.parser import HTMLParser

from .corpus import decode_html


@dataclass(frozen=True)
class ScannedHtml:
    tags: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    comments: int
    title: str
    length: int

    @property
    def tag_names(self) -> list[str]:
        return [t for t, _ in self.tags]

    def attr_values(self, tag: str | None, attr: str) -> list[str]:
        out = []
        for name, attrs in self.tags:
            if tag is not None and name != tag:
                continue
            out.extend(v for k, v in attrs if k == attr)
        return out

    @property
    def hrefs(self) -> list[str]:
        return [v for v in self.attr_values("a", "href") if v.strip()]

    @property
    def img_srcs(self) -> list[str]:
        return [v for v in self.attr_values("img", "src") if v.strip()]


class _Scanner(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.tags: list[tuple[str, tuple[tuple[str, str], ...]]] = []
        self.comments = 0
        self.title_parts: list[str] = []
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        self.tags.append((tag.lower(), tuple((k.lower(), v or "") for k, v in attrs)))
        if tag == "title":
            self._in_title = True

    def handle_endtag(self, tag):
        if tag == "title":
            self._in_title = False

    def handle_data(self, data):
        if self._in_title:
            self.title_parts.append(data)

    def handle_comment(self, data):
        self.comments += 1


_TAG_RE = re.compile(r"<\s*([a-zA-Z][a-zA-Z0-9]*)([^>]*)>")
_ATTR_RE = re.compile(r"""([a-zA-Z_:][-a-zA-Z0-9_:.]*)\s*(?:=\s*("[^"]*"|'[^']*'|[^\s>]+))?""")


def _regex_scan(src: str) -> ScannedHtml:
    tags = []
    for m in _TAG_RE.finditer(src):
        attrs = tuple((k.lower(), (v or "").strip("\"'")) for k, v in _ATTR_RE.findall(m.group(2)))
        tags.append((m.group(1).lower(), attrs))
    title = re.search(r"<title[^>]*>(.*?)</title", src, re.I | re.S)
    return ScannedHtml(tuple(tags), src.count("<!--"),
                       " ".join(title.group(1).split()) if title else "", len(src))


@lru_cache(maxsize=8192)
def scan_html(html: bytes) -> ScannedHtml:
    src = decode_html(html)
    parser = _Scanner()
    try:
        parser.feed(src)
        parser.close()
    except Exception:
        return _regex_scan(src)
    return ScannedHtml(tuple(parser.tags), parser.comments,
                       " ".join("".join(parser.title_parts).split()), len(src))
