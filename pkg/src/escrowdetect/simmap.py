"""Site maps shaded by a probe page's similarity to every node (DOT output)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import WebPage, Website
from .features import FeatureDictionary, extract_page, normalize_groups
from .kernels import pair_products


class SimilarityMapError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityMap:
    site_id: str
    probe: str
    nodes: tuple[tuple[str, int], ...]           # (page id, level)
    edges: tuple[tuple[str, str], ...]
    scores: tuple[float, ...]                    # one per node, in [0, 1]

    def gray(self, score: float) -> str:
        """0 -> white, 1 -> black; rounds toward white so only an exact match is black."""
        v = math.ceil(255 * (1.0 - min(max(score, 0.0), 1.0)))
        return f"#{v:02x}{v:02x}{v:02x}"

    def to_dot(self) -> str:
        lines = [f'digraph "{self.site_id}" {{',
                 f'  label="similarity of {self.probe} to {self.site_id}";',
                 "  node [shape=circle, style=filled, fontsize=8];"]
        for (pid, level), s in zip(self.nodes, self.scores):
            font = "white" if s > 0.5 else "black"
            lines.append(f'  "{pid}" [fillcolor="{self.gray(s)}", fontcolor={font}, '
                         f'level={level}, similarity={s:.6f}];')
        for a, b in self.edges:
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _vectors(pages: Sequence[tuple[WebPage, Website]], dictionaries, categories):
    out = {}
    for cat in categories:
        d = dictionaries[cat]
        rows = np.vstack([extract_page(p, s, d) for p, s in pages])
        out[cat] = normalize_groups(rows, d)
    return out


def similarity_map(probe: WebPage, probe_site: Website, site: Website,
                   dictionaries: Mapping[str, FeatureDictionary],
                   categories: Sequence[str] | None = None, *,
                   expected_hashes: Mapping[str, str] | None = None,
                   smooth: float = 0.0) -> SimilarityMap:
    """Page-pair similarity of ``probe`` to every page of ``site``.

    With several categories the node score is the mean over categories.
    ``expected_hashes`` (category -> dictionary hash, e.g. from a model file)
    guards against mixing extractions made with different dictionaries.
    """
    categories = list(categories or dictionaries)
    for cat in categories:
        if cat not in dictionaries:
            raise SimilarityMapError(f"no dictionary for category {cat}")
        if expected_hashes and expected_hashes.get(cat, dictionaries[cat].content_hash) \
                != dictionaries[cat].content_hash:
            raise SimilarityMapError(f"dictionary hash mismatch for {cat}: "
                                     f"{dictionaries[cat].content_hash} != "
                                     f"{expected_hashes[cat]}")
    probe_vec = _vectors([(probe, probe_site)], dictionaries, categories)
    site_vec = _vectors([(p, site) for p in site.pages], dictionaries, categories)
    pa = np.asarray([[probe.page_level, probe.in_link_count, probe.out_link_count]], float)
    sa = np.asarray([[p.page_level, p.in_link_count, p.out_link_count] for p in site.pages],
                    float)
    sims = np.zeros(len(site.pages))
    for cat in categories:
        sims += 1.0 - pair_products(pa, probe_vec[cat], sa, site_vec[cat], smooth=smooth)[0]
    sims /= len(categories)
    return SimilarityMap(site.site_id, f"{probe_site.site_id}/{probe.page_id}",
                         tuple((p.page_id, p.page_level) for p in site.pages),
                         tuple(site.link_edges), tuple(float(s) for s in sims))
