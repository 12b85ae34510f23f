"""Part-of-speech tagging.

Any object with ``tag(tokens) -> list[str]`` can be plugged into body-text
extraction. The default is a lexicon + suffix rule tagger over the 12-tag
universal tagset: NOUN VERB ADJ ADV PRON DET ADP NUM CONJ PRT . X
"""
from __future__ import annotations

import re
from typing import Protocol, Sequence

TAGSET = ("NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", ".", "X")


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


_LEXICON: dict[str, str] = {}
for _tag, _words_str in {
    "DET": "a an the this that these those every each some any no all both either neither "
           "another such what which whatever whichever",
    "PRON": "i me my mine myself you your yours yourself yourselves he him his himself she "
            "her hers herself it its itself we us our ours ourselves they them their theirs "
            "themselves who whom whose someone anyone everyone nobody somebody anybody "
            "everybody something anything everything nothing",
    "ADP": "of in on at by for with from to into onto upon about above below under over "
           "between among through during before after against within without across along "
           "around behind beyond near since until via per toward towards despite except",
    "CONJ": "and or but nor yet so because although though while whereas unless if whether",
    "PRT": "not n't 's up out off down away back",
    "ADV": "very too also just only even still already always never often sometimes soon "
           "now then here there again ever perhaps quite rather almost really well",
    "VERB": "is are was were be been being am do does did done doing have has had having "
            "will would shall should can could may might must get got make made take took "
            "send sent pay paid receive received buy bought sell sold ship shipped use used "
            "contact click please protect protects guarantee guarantees hold holds",
    "NUM": "one two three four five six seven eight nine ten hundred thousand million "
           "first second third",
}.items():
    for _w in _words_str.split():
        _LEXICON.setdefault(_w, _tag)

_SUFFIX_RULES = (
    ("ly", "ADV"),
    ("ing", "VERB"), ("ed", "VERB"), ("ize", "VERB"), ("ise", "VERB"), ("ate", "VERB"),
    ("ous", "ADJ"), ("ful", "ADJ"), ("ive", "ADJ"), ("able", "ADJ"), ("ible", "ADJ"),
    ("al", "ADJ"), ("ic", "ADJ"), ("less", "ADJ"), ("est", "ADJ"), ("ary", "ADJ"),
    ("tion", "NOUN"), ("sion", "NOUN"), ("ment", "NOUN"), ("ness", "NOUN"),
    ("ity", "NOUN"), ("ship", "NOUN"), ("ance", "NOUN"), ("ence", "NOUN"), ("er", "NOUN"),
)

_NUM_RE = re.compile(r"^\d+([.,]\d+)*$")


class LexiconTagger:
    """Closed-class lexicon first, then suffix rules, then NOUN."""

    def tag_word(self, token: str) -> str:
        if not token:
            return "X"
        if not any(c.isalnum() for c in token):
            return "."
        low = token.lower()
        if low in _LEXICON:
            return _LEXICON[low]
        if _NUM_RE.match(token):
            return "NUM"
        if not token.isascii() or not any(c.isalpha() for c in token):
            return "X"
        if len(low) > 4:
            for suffix, tag in _SUFFIX_RULES:
                if low.endswith(suffix):
                    return tag
        return "NOUN"

    def tag(self, tokens: Sequence[str]) -> list[str]:
        return [self.tag_word(t) for t in tokens]


DEFAULT_TAGGER = LexiconTagger()
