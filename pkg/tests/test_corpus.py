import numpy as np
import pytest

from escrowdetect.corpus import (Corpus, CorpusError, Label, bfs_levels, build_site,
                                 corpus_stats, decode_image, extract_text, format_stats,
                                 load_corpus, load_site, save_corpus, write_site)

from conftest import page, png_asset, site


def star_site():
    pages = [page("p0000", "<html><body><a href='a'>a</a></body></html>", "http://x.test/"),
             page("p0001", "<p>one</p>"), page("p0002", "<p>two</p>")]
    edges = [("p0000", "p0001"), ("p0000", "p0002"), ("p0000", "p0001")]
    return site("s1", pages, edges, root_url="http://x.test/")


def test_levels_and_counts_from_edges():
    s = star_site()
    assert [p.page_level for p in s.pages] == [0, 1, 1]
    root = s.page("p0000")
    assert root.out_link_count == 3
    assert s.page("p0001").in_link_count == 2
    assert s.page("p0002").in_link_count == 1


def test_unreachable_pages_get_level_past_the_deepest():
    levels = bfs_levels(["a", "b", "c", "d"], "a", [("a", "b"), ("b", "c")])
    assert levels == {"a": 0, "b": 1, "c": 2, "d": 3}


def test_root_is_the_only_level_zero_page():
    s = star_site()
    assert [p.page_id for p in s.pages if p.page_level == 0] == ["p0000"]


def test_edge_to_unknown_page_rejected():
    with pytest.raises(CorpusError):
        site("s", [page("p0000", "x")], [("p0000", "p9999")])


def test_site_needs_pages():
    with pytest.raises(CorpusError):
        build_site("s", Label.FAKE, "http://x/", [])


def test_duplicate_site_ids_rejected():
    s = star_site()
    with pytest.raises(CorpusError):
        Corpus((s, s))


def test_text_extraction_skips_scripts_and_decodes_entities():
    html = "<html><head><style>p{}</style><script>var x=1;</script></head>" \
           "<body><p>Fish &amp; chips</p><div>more   text</div></body></html>"
    assert extract_text(html) == "Fish & chips more text"


def test_text_extraction_is_idempotent():
    text = extract_text("<p>a <b>b</b></p><p>c</p>")
    assert extract_text(text) == text


def test_malformed_html_is_kept():
    s = site("s", [page("p0000", b"<html><body><p>unclosed <b>bold")])
    assert s.pages[0].body_text == "unclosed bold"
    assert s.pages[0].html_source.startswith(b"<html>")


def test_undecodable_image_keeps_metadata():
    asset, problem = decode_image("i0", "png", b"not an image", width=5, height=7)
    assert asset.pixels is None and problem
    assert (asset.width_px, asset.height_px) == (5, 7)


def test_round_trip(tmp_path):
    img = png_asset("i0000", (10, 20, 30), (3, 2))
    p0 = page("p0000", "<p>hello</p>", "http://x.test/", images=["i0000"],
              external=["http://other.test/"])
    s = build_site("s1", Label.REAL, "http://x.test/", [p0, page("p0001", "<p>x</p>")],
                   [img], [("p0000", "p0001")], fetched_at="2007-01-01", source="feed")
    c = Corpus((s,))
    save_corpus(c, tmp_path)
    back = load_corpus(tmp_path)
    assert back.sites[0] == s
    assert np.array_equal(back.sites[0].images[0].pixels, img.pixels)
    assert back.provenance == {"s1": ("feed", "2007-01-01")}
    again = load_corpus(tmp_path)
    assert [p.page_level for p in again.sites[0].pages] == [p.page_level for p in s.pages]


def test_load_empty_directory(tmp_path):
    assert load_corpus(tmp_path).sites == ()


def test_missing_manifest_names_site(tmp_path):
    (tmp_path / "fake" / "broken").mkdir(parents=True)
    with pytest.raises(CorpusError, match="broken"):
        load_corpus(tmp_path)


def test_load_single_site(tmp_path):
    out = write_site(star_site(), tmp_path)
    assert len(load_site(out).pages) == 3


def _many_sites(label, n_sites, total_pages, total_images):
    sites = []
    base, extra = divmod(total_pages, n_sites)
    ibase, iextra = divmod(total_images, n_sites)
    for i in range(n_sites):
        n_pages = base + (i < extra)
        n_images = ibase + (i < iextra)
        imgs = [png_asset(f"i{k:04d}") for k in range(n_images)]
        pages = [page(f"p{k:04d}", "", f"http://{label.value}{i}.test/{k}") for k in range(n_pages)]
        sites.append(build_site(f"{label.value}{i:03d}", label, pages[0].url, pages, imgs))
    return sites


def test_stats_reproduce_test_bed_ratios():
    # 60 real sites / 19,812 pages and 350 fake sites / 29,764 images, scaled
    # down 10x for pages/images with the same per-site means
    real = _many_sites(Label.REAL, 6, 1981, 0)
    fake = _many_sites(Label.FAKE, 35, 35, 2976)
    rows = {r.label: r for r in corpus_stats(Corpus(tuple(real + fake)))}
    assert rows["real"].pages_per_site == pytest.approx(330.17, abs=0.01)
    assert rows["fake"].images_per_site == pytest.approx(85.03, abs=0.01)


def test_stats_exact_table_values():
    # full-size counts, metadata-only (no pixels needed for counting)
    real = _many_sites(Label.REAL, 60, 19812, 0)
    rows = {r.label: r for r in corpus_stats(Corpus(tuple(real)))}
    assert rows["real"].pages_per_site == 330.20


def test_stats_single_site_and_totals():
    s = build_site("a", Label.FAKE, "http://a/", [page("p0000", "", "http://a/")])
    rows = {r.label: r for r in corpus_stats(Corpus((s,)))}
    f = rows["fake"]
    assert (f.sites, f.pages, f.images, f.pages_per_site, f.images_per_site) == (1, 1, 0, 1.0, 0.0)
    assert rows["real"].sites == 0


def test_stats_totals_match_per_site_fold(fixture_corpus):
    rows = {r.label: r for r in corpus_stats(fixture_corpus)}
    for label in (Label.REAL, Label.FAKE):
        sites = fixture_corpus.by_label(label)
        assert rows[label.value].pages == sum(len(s.pages) for s in sites)
        assert rows[label.value].images == sum(len(s.images) for s in sites)
    text = format_stats(corpus_stats(fixture_corpus))
    assert "Fake sites" in text and "pages_per_site" in text
