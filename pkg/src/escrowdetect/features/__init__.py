"""Fraud-cue feature extraction for the five page categories."""
from .dictionary import (CATEGORIES, Category, FeatureDictionary, NgramConfig,
                         NGRAM_GROUPS, group_of)
from .extract import (FeatureError, FeatureMatrix, align, build_dictionary, extract_matrix,
                      extract_page, fixed_slots, normalize_groups, raw_features, raw_table)
from .pos import DEFAULT_TAGGER, LexiconTagger, Tagger
from .structure import pixel_bin_indices, tag_sequence, url_tokens
from .text import vocabulary_richness

__all__ = [
    "CATEGORIES", "Category", "FeatureDictionary", "NgramConfig", "NGRAM_GROUPS", "group_of",
    "FeatureError", "FeatureMatrix", "align", "build_dictionary", "extract_matrix",
    "extract_page", "fixed_slots", "normalize_groups", "raw_features", "raw_table",
    "DEFAULT_TAGGER", "LexiconTagger", "Tagger", "pixel_bin_indices", "tag_sequence",
    "url_tokens", "vocabulary_richness",
]
