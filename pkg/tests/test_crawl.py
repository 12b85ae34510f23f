import functools
import http.server
import threading

import pytest

from escrowdetect.crawl import (FetchError, SeenStore, fetch_site, normalize_url, parse_feed,
                                poll_blacklist)


SITE = {
    "/": b"<html><body><a href='/a.html'>a</a> <a href='/b.html'>b</a>"
         b"<a href='http://elsewhere.test/'>x</a><img src='/logo.png'></body></html>",
    "/a.html": b"<html><body><a href='/b.html'>b</a><a href='/'>home</a></body></html>",
    "/b.html": b"<html><body><a href='/a.html'>a</a></body></html>",
    "/feed1.txt": b"http://one.test/\nhttp://two.test/\n",
    "/feed2.txt": b"http://two.test/\nhttp://three.test/\n",
}


def _png():
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (2, 2), (255, 0, 0)).save(buf, format="PNG")
    return buf.getvalue()


class Handler(http.server.BaseHTTPRequestHandler):
    def do_GET(self):
        body = _png() if self.path == "/logo.png" else SITE.get(self.path)
        if body is None:
            self.send_error(404)
            return
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def server():
    httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_address[1]}"
    httpd.shutdown()


crawl = functools.partial(fetch_site, delay=0, timeout=5)


def test_three_interlinked_pages(server):
    s = crawl(server + "/", max_depth=2)
    urls = {p.url.rsplit("/", 1)[1] or "/": p.page_id for p in s.pages}
    assert set(urls) == {"/", "a.html", "b.html"}
    root, a, b = urls["/"], urls["a.html"], urls["b.html"]
    assert sorted(s.link_edges) == sorted([(root, a), (root, b), (a, b), (a, root), (b, a)])
    assert s.page(root).page_level == 0
    assert s.page(root).external_links == ("http://elsewhere.test/",)
    assert len(s.images) == 1 and s.images[0].pixels.shape == (2, 2, 3)


def test_max_pages_one_keeps_only_root(server):
    s = crawl(server + "/", max_pages=1)
    assert len(s.pages) == 1 and s.pages[0].page_level == 0


def test_root_404_names_url(server):
    with pytest.raises(FetchError, match="missing.html"):
        crawl(server + "/missing.html")


def test_non_http_root_rejected():
    with pytest.raises(FetchError):
        fetch_site("ftp://x.test/", delay=0)


def test_url_normalisation():
    assert normalize_url("HTTP://X.Test#frag") == "http://x.test/"
    assert normalize_url("../b.html", "http://x.test/a/c.html") == "http://x.test/b.html"
    assert normalize_url("mailto:a@b") is None


def test_feed_parsing_lines_and_anchors():
    body = b"http://a.test/x\n<a href='http://b.test/'>b</a>\nhttp://a.test/x\n"
    assert parse_feed(body, "http://feed.test/") == ["http://a.test/x", "http://b.test/"]


def test_poll_deduplicates_and_persists(server, tmp_path):
    store = SeenStore(tmp_path / "seen.txt")
    new = poll_blacklist([server + "/feed1.txt", server + "/feed2.txt"], store)
    assert new == ["http://one.test/", "http://two.test/", "http://three.test/"]
    assert poll_blacklist([server + "/feed1.txt"], store) == []
    assert len(SeenStore(tmp_path / "seen.txt")) == 3


def test_poll_reports_only_unseen(server):
    store = SeenStore()
    store.add_all(["http://one.test/"])
    assert poll_blacklist([server + "/feed1.txt"], store) == ["http://two.test/"]
    assert len(store) == 2


def test_unreachable_feed_is_skipped(server, caplog):
    store = SeenStore()
    with caplog.at_level("WARNING"):
        new = poll_blacklist([server + "/nope.txt", server + "/feed2.txt"], store)
    assert new == ["http://two.test/", "http://three.test/"]
    assert "unreachable" in caplog.text
