"""Ordered feature vocabularies per category."""
from __future__ import annotations

import enum
import hashlib
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class Category(str, enum.Enum):
    BODY = "body"
    HTML = "html"
    URL = "url"
    IMAGE = "image"
    LINK = "link"


CATEGORIES = tuple(Category)

# n-gram groups; everything else is a fixed slot.
NGRAM_GROUPS = frozenset({"chr", "pos", "word", "miss", "tag", "uchr", "utok"})

# Group order inside each category's vector.
GROUP_ORDER = {
    Category.BODY: ("lex", "chr", "wlen", "rich", "punc", "fw", "pos", "doc", "word", "miss"),
    Category.HTML: ("tag",),
    Category.URL: ("uchr", "utok"),
    Category.IMAGE: ("pix", "imgext", "imgw", "imgh", "imgsz", "imgagg"),
    Category.LINK: ("lnk", "pstr"),
}

DEFAULT_NGRAM_ORDERS = {"chr": (1, 3), "pos": (1, 3), "word": (1, 3), "miss": (1, 1),
                        "tag": (1, 3), "uchr": (1, 3), "utok": (1, 3)}


@dataclass(frozen=True)
class NgramConfig:
    orders: Mapping[str, tuple[int, int]] = field(
        default_factory=lambda: dict(DEFAULT_NGRAM_ORDERS))
    min_df: int = 3

    def order(self, group: str) -> tuple[int, int]:
        return tuple(self.orders.get(group, DEFAULT_NGRAM_ORDERS[group]))

    def to_dict(self) -> dict:
        return {"orders": {k: list(v) for k, v in sorted(self.orders.items())},
                "min_df": self.min_df}

    @classmethod
    def from_dict(cls, d: Mapping) -> "NgramConfig":
        return cls(orders={k: tuple(v) for k, v in d.get("orders", {}).items()},
                   min_df=int(d.get("min_df", 3)))


def group_of(name: str) -> str:
    return name.split(":", 1)[0]


@dataclass(frozen=True)
class FeatureDictionary:
    """Feature names for one category; vector index == entry index.

    Names are ``<group>:<key>``; ``config`` records how the entries were
    produced (n-gram orders, min_df, selection policy).
    """

    category: Category
    entries: tuple[str, ...]
    config: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "entries", tuple(self.entries))
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("duplicate feature names in dictionary")
        for name in self.entries:
            if "\t" in name or "\n" in name:
                raise ValueError(f"feature name contains tab/newline: {name!r}")

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.entries)}

    @cached_property
    def groups(self) -> dict[str, np.ndarray]:
        out: dict[str, list[int]] = {}
        for i, name in enumerate(self.entries):
            out.setdefault(group_of(name), []).append(i)
        return {g: np.asarray(ix, dtype=np.intp) for g, ix in out.items()}

    def is_ngram(self, name: str) -> bool:
        return group_of(name) in NGRAM_GROUPS

    @cached_property
    def content_hash(self) -> str:
        payload = json.dumps({"category": self.category.value, "entries": self.entries,
                              "config": self.config}, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = [f"# category={self.category.value}",
                 f"# config={json.dumps(self.config, sort_keys=True, default=str)}",
                 f"# hash={self.content_hash}"]
        lines.extend(self.entries)
        return "\n".join(lines) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "FeatureDictionary":
        meta, entries = {}, []
        for line in text.splitlines():
            if line.startswith("# ") and "=" in line and not entries:
                key, _, value = line[2:].partition("=")
                meta[key] = value
            elif line:
                entries.append(line)
        d = cls(Category(meta["category"]), tuple(entries), json.loads(meta.get("config", "{}")))
        if "hash" in meta and meta["hash"] != d.content_hash:
            raise ValueError("dictionary file content does not match its recorded hash")
        return d

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FeatureDictionary":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def subset(self, keep: Sequence[str], **config) -> "FeatureDictionary":
        keep_set = set(keep)
        return FeatureDictionary(self.category,
                                 tuple(n for n in self.entries if n in keep_set),
                                 {**self.config, **config})
