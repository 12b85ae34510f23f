"""Composite page-to-site similarity kernel and the plain linear kernel.

A page ``a`` is compared with every page ``k`` of a site through

    sim(a, k) = 1 - c(lv_a, lv_k) * c(in_a, in_k) * c(out_a, out_k) * mean_i c(a_i, k_i)

with ``c(u, v) = |u - v| / (u + v)`` (0 when u = v = 0). The average and
maximum of ``sim`` over a site's pages give one (ave, max) pair per site;
pages are represented by the concatenation of these pairs and compared
with the cosine (normalised inner product).

The scalar functions are the reference definitions; ``pair_products`` and
``similarity_vectors`` are the batched versions used for real workloads.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numba
import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class KernelError(ValueError):
    pass


def canberra_term(u: float, v: float) -> float:
    if u < 0 or v < 0:
        raise KernelError(f"canberra term needs non-negative inputs, got ({u}, {v})")
    s = u + v
    return 0.0 if s == 0 else abs(u - v) / s


@dataclass(frozen=True)
class PageVector:
    """Structural attributes and feature vector(s) of one page.

    ``features`` is a single vector or a mapping ``category -> vector``.
    """

    page_id: str
    site_id: str
    level: int
    in_links: int
    out_links: int
    features: np.ndarray | Mapping[str, np.ndarray]

    def vector(self, category: str | None = None) -> np.ndarray:
        if isinstance(self.features, Mapping):
            if category is None:
                raise KernelError("page carries several categories; name one")
            return np.asarray(self.features[category], dtype=float)
        return np.asarray(self.features, dtype=float)

    @property
    def key(self) -> tuple[str, str]:
        return (self.site_id, self.page_id)


def _smoothed(f: float, smooth: float) -> float:
    return max(f, smooth) if smooth > 0 else f


def pair_product(a: PageVector, k: PageVector, category: str | None = None,
                 smooth: float = 0.0) -> float:
    """The bracketed product of the similarity (``1 - sim``)."""
    x, y = a.vector(category), k.vector(category)
    if x.shape != y.shape or x.size == 0:
        raise KernelError(f"feature vectors must have equal non-zero length "
                          f"({x.size} vs {y.size})")
    feat = sum(canberra_term(float(u), float(v)) for u, v in zip(x, y)) / x.size
    factors = (canberra_term(a.level, k.level), canberra_term(a.in_links, k.in_links),
               canberra_term(a.out_links, k.out_links), feat)
    out = 1.0
    for f in factors:
        out *= _smoothed(f, smooth)
    return out


def page_pair_similarity(a: PageVector, k: PageVector, category: str | None = None,
                         smooth: float = 0.0) -> float:
    return 1.0 - pair_product(a, k, category, smooth)


def _eligible(a: PageVector, site_pages: Sequence[PageVector], exclude_self: bool):
    pages = [k for k in site_pages if not (exclude_self and k.key == a.key)]
    if not pages:
        raise KernelError(f"no eligible pages to compare page {a.page_id} against")
    return pages


def sim_ave(a: PageVector, site_pages: Sequence[PageVector], category: str | None = None,
            *, exclude_self: bool = True, smooth: float = 0.0) -> float:
    pages = _eligible(a, site_pages, exclude_self)
    return 1.0 - sum(pair_product(a, k, category, smooth) for k in pages) / len(pages)


def sim_max(a: PageVector, site_pages: Sequence[PageVector], category: str | None = None,
            *, exclude_self: bool = True, smooth: float = 0.0) -> float:
    pages = _eligible(a, site_pages, exclude_self)
    return max(page_pair_similarity(a, k, category, smooth) for k in pages)


def build_similarity_vector(a: PageVector, training_sites: Sequence[Sequence[PageVector]],
                            categories: Sequence[str | None] = (None,), *,
                            exclude_self: bool = True, smooth: float = 0.0) -> np.ndarray:
    """(ave, max) per site per category, site-major, in the given order."""
    out = []
    for site_pages in training_sites:
        for c in categories:
            out.append(sim_ave(a, site_pages, c, exclude_self=exclude_self, smooth=smooth))
            out.append(sim_max(a, site_pages, c, exclude_self=exclude_self, smooth=smooth))
    return np.asarray(out)


def composite_kernel(x1, x2) -> float:
    """Normalised inner product; a zero vector gives 0 (with a warning)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise KernelError("similarity vectors differ in length")
    n1, n2 = float(x1 @ x1), float(x2 @ x2)
    if n1 == 0 or n2 == 0:
        warnings.warn("composite kernel on a zero vector; returning 0")
        return 0.0
    return float(x1 @ x2) / math.sqrt(n1 * n2)


def linear_kernel(f1, f2) -> float:
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    if f1.shape != f2.shape:
        raise KernelError("feature vectors differ in length")
    return float(f1 @ f2)


def gram_matrix(vectors: Sequence, kernel: Callable[[object, object], float]) -> np.ndarray:
    """Symmetric kernel matrix; evaluates only the upper triangle."""
    n = len(vectors)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            K[i, j] = K[j, i] = kernel(vectors[i], vectors[j])
    return K


def cosine_gram(X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    """Batched composite kernel between rows of X and rows of Y (default X)."""
    X = np.asarray(X, dtype=float)
    nx = np.sqrt(np.einsum("ij,ij->i", X, X))
    if Y is None:
        Y, ny = X, nx
    else:
        Y = np.asarray(Y, dtype=float)
        ny = np.sqrt(np.einsum("ij,ij->i", Y, Y))
    if (nx == 0).any() or (ny == 0).any():
        warnings.warn("composite kernel on a zero vector; those entries are 0")
    inv_x = np.divide(1.0, nx, out=np.zeros_like(nx), where=nx > 0)
    inv_y = np.divide(1.0, ny, out=np.zeros_like(ny), where=ny > 0)
    K = (X * inv_x[:, None]) @ (Y * inv_y[:, None]).T
    if Y is X:
        K = (K + K.T) / 2
        np.fill_diagonal(K, np.where(nx > 0, 1.0, 0.0))
    return np.clip(K, -1.0, 1.0)


def linear_gram(X, Y=None) -> np.ndarray:
    X = sp.csr_matrix(X) if sp.issparse(X) else np.asarray(X, dtype=float)
    Y = X if Y is None else (sp.csr_matrix(Y) if sp.issparse(Y) else np.asarray(Y, dtype=float))
    K = X @ Y.T
    return K.toarray() if sp.issparse(K) else np.asarray(K)


# --- batched pair products ---------------------------------------------------------

@numba.njit(cache=True)
def _canberra_sums(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, symmetric, out):
    na = a_ptr.size - 1
    nb = b_ptr.size - 1
    for i in range(na):
        j0 = i if symmetric else 0
        for j in range(j0, nb):
            p, pe = a_ptr[i], a_ptr[i + 1]
            q, qe = b_ptr[j], b_ptr[j + 1]
            s = 0.0
            while p < pe and q < qe:
                ia, ib = a_idx[p], b_idx[q]
                if ia == ib:
                    x, y = a_val[p], b_val[q]
                    s += abs(x - y) / (x + y)
                    p += 1
                    q += 1
                elif ia < ib:
                    s += 1.0
                    p += 1
                else:
                    s += 1.0
                    q += 1
            s += (pe - p) + (qe - q)
            out[i, j] = s
            if symmetric:
                out[j, i] = s


def _prepared(X) -> sp.csr_matrix:
    X = sp.csr_matrix(X, dtype=np.float64, copy=True)
    if X.nnz and X.data.min() < 0:
        raise KernelError("feature values must be non-negative")
    X.eliminate_zeros()
    X.sum_duplicates()
    X.sort_indices()
    return X


def canberra_mean_matrix(XA, XB=None) -> np.ndarray:
    """Mean per-feature Canberra term between every row of XA and of XB."""
    A = _prepared(XA)
    B = A if XB is None else _prepared(XB)
    if A.shape[1] != B.shape[1] or A.shape[1] == 0:
        raise KernelError("feature matrices need the same non-zero width")
    out = np.zeros((A.shape[0], B.shape[0]))
    _canberra_sums(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data,
                   B.indptr.astype(np.int64), B.indices.astype(np.int64), B.data,
                   XB is None, out)
    return out / A.shape[1]


def structural_terms(attrs_a: np.ndarray, attrs_b: np.ndarray) -> np.ndarray:
    """(Na, Nb, 3) canberra terms of level / in-links / out-links."""
    a = np.asarray(attrs_a, dtype=float)[:, None, :]
    b = np.asarray(attrs_b, dtype=float)[None, :, :]
    s = a + b
    return np.divide(np.abs(a - b), s, out=np.zeros(np.broadcast_shapes(a.shape, b.shape)),
                     where=s > 0)


def pair_products(attrs_a, XA, attrs_b=None, XB=None, smooth: float = 0.0) -> np.ndarray:
    """Matrix of ``1 - sim`` between pages (rows of XA) and pages (rows of XB)."""
    same = XB is None
    feat = canberra_mean_matrix(XA, None if same else XB)
    struct = structural_terms(attrs_a, attrs_a if same else attrs_b)
    if smooth > 0:
        struct = np.maximum(struct, smooth)
        feat = np.maximum(feat, smooth)
    return struct[..., 0] * struct[..., 1] * struct[..., 2] * feat


def similarity_vectors(products: Sequence[np.ndarray], ref_sites: np.ndarray, n_sites: int,
                       self_cols: np.ndarray | None = None, *,
                       on_empty: str = "error") -> np.ndarray:
    """Assemble (ave, max) similarity vectors from pair-product matrices.

    ``products[c]`` is (queries x references) for category c; ``ref_sites``
    gives the site ordinal (0..n_sites-1) of each reference column.
    ``self_cols[i]`` is the reference column holding query i itself (or -1);
    that column is skipped for query i. When a site has no eligible page for
    a query, ``on_empty='error'`` raises and ``on_empty='self'`` scores the
    pair as a self-match (1.0).
    """
    n_cat = len(products)
    nq = products[0].shape[0]
    ref_sites = np.asarray(ref_sites)
    if self_cols is None:
        self_cols = np.full(nq, -1)
    out = np.empty((nq, 2 * n_cat * n_sites))
    rows = np.arange(nq)
    for j in range(n_sites):
        cols = np.flatnonzero(ref_sites == j)
        if cols.size == 0:
            raise KernelError(f"site ordinal {j} has no reference pages")
        pos = np.full(ref_sites.size, -1)
        pos[cols] = np.arange(cols.size)
        own = np.where(self_cols >= 0, pos[np.maximum(self_cols, 0)], -1)
        has_self = own >= 0
        count = cols.size - has_self.astype(int)
        empty = count == 0
        if empty.any() and on_empty == "error":
            raise KernelError(f"site ordinal {j}: query has no eligible pages")
        for c, P in enumerate(products):
            block = P[:, cols]
            own_val = np.where(has_self, block[rows, np.maximum(own, 0)], 0.0)
            mean = (block.sum(axis=1) - own_val) / np.maximum(count, 1)
            masked = block.copy()
            masked[rows[has_self], own[has_self]] = np.inf
            best = masked.min(axis=1)
            ave_v = np.where(empty, 1.0, 1.0 - mean)
            max_v = np.where(empty, 1.0, 1.0 - best)
            base = 2 * (j * n_cat + c)
            out[:, base] = ave_v
            out[:, base + 1] = max_v
    return out
