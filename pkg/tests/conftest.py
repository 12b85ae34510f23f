import io
import warnings
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from escrowdetect.corpus import Label, WebPage, build_site, decode_image

DATA = Path(__file__).parent / "data"
FIXTURE_CORPUS = DATA / "fixture_corpus"


def page(pid, html, url=None, images=(), external=()):
    if isinstance(html, str):
        html = html.encode("utf-8")
    return WebPage(page_id=pid, site_id="", url=url or f"http://x.test/{pid}.html",
                   page_level=0, in_link_count=0, out_link_count=0, html_source=html,
                   body_text="", image_refs=tuple(images), external_links=tuple(external))


def site(site_id, pages, edges=(), label=Label.FAKE, images=(), root_url=None):
    root = root_url or pages[0].url
    return build_site(site_id, label, root, pages, images, edges)


def png_asset(image_id, rgb=(0, 0, 0), size=(1, 1), ext="png"):
    arr = np.zeros((size[1], size[0], 3), dtype=np.uint8)
    arr[:] = rgb
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, format="PNG")
    asset, problem = decode_image(image_id, ext, buf.getvalue())
    assert problem is None
    return asset


def text_site(site_id, texts, label=Label.FAKE):
    pages = [page(f"p{i:04d}", f"<html><body><p>{t}</p></body></html>") for i, t in enumerate(texts)]
    edges = [("p0000", p.page_id) for p in pages[1:]]
    return site(site_id, pages, edges, label=label)


@pytest.fixture(scope="session")
def fixture_corpus():
    from escrowdetect.corpus import load_corpus

    return load_corpus(FIXTURE_CORPUS)


@pytest.fixture(autouse=True)
def _quiet_known_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="dictionaries and IG selection")
        yield


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
