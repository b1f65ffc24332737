"""Tag vocabulary and per-item interest sets.

Questions carry their own tags. Repository descriptions are tokenized and
matched against the vocabulary of Stack Overflow tags, so interests on both
platforms live in one tag space.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Corpus, ItemRecord, Platform

_SPLIT = re.compile(r"[^a-z0-9+#.\-]+")
_TRAILING = ".-"
_LEADING = ".-+#"


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class TagVocabulary:
    tags: frozenset[str]
    built_from: int

    def __len__(self) -> int:
        return len(self.tags)

    def __contains__(self, tag: str) -> bool:
        return tag in self.tags


InterestSet = frozenset  # of normalized tag strings


def normalize_tag(tag: str) -> str:
    return tag.strip().lower()


def _clean_token(tok: str) -> str:
    tok = tok.rstrip(_TRAILING)
    body = tok.lstrip(_LEADING)
    # a single leading dot survives in front of a word: ".net"
    if body != tok and tok[len(tok) - len(body) - 1] == "." and body[:1].isalpha():
        return "." + body
    return body


def normalize_tokenize(text: str) -> list[str]:
    """Lowercased candidate keywords: unigrams, then hyphen-joined bigrams.

    >>> normalize_tokenize("Objective C bindings")
    ['objective', 'c', 'bindings', 'objective-c', 'c-bindings']
    """
    tokens = [t for t in (_clean_token(p) for p in _SPLIT.split(text.lower())) if t]
    return tokens + [f"{a}-{b}" for a, b in zip(tokens, tokens[1:])]


def build_vocabulary(corpus: Corpus) -> TagVocabulary:
    tags: set[str] = set()
    contributing = 0
    questions = 0
    for item in corpus.items.values():
        if item.platform is not Platform.STACKOVERFLOW:
            continue
        questions += 1
        normed = {normalize_tag(t) for t in item.raw_tags} - {""}
        if normed:
            contributing += 1
            tags |= normed
    if questions == 0:
        raise VocabularyError("corpus has no Stack Overflow questions to build a tag vocabulary from")
    return TagVocabulary(frozenset(tags), contributing)


def infer_question_interests(item: ItemRecord) -> InterestSet:
    if item.platform is not Platform.STACKOVERFLOW:
        raise ValueError(f"{item.item_id} is not a Stack Overflow question")
    return frozenset(normalize_tag(t) for t in item.raw_tags) - {""}


def infer_repo_interests(item: ItemRecord, vocab: TagVocabulary) -> InterestSet:
    if item.platform is not Platform.GITHUB:
        raise ValueError(f"{item.item_id} is not a GitHub repository")
    return frozenset(normalize_tokenize(item.text)) & vocab.tags


def item_interests(corpus: Corpus, vocab: TagVocabulary) -> dict[str, InterestSet]:
    out = {}
    for item_id in sorted(corpus.items):
        item = corpus.items[item_id]
        if item.platform is Platform.STACKOVERFLOW:
            out[item_id] = infer_question_interests(item)
        else:
            out[item_id] = infer_repo_interests(item, vocab)
    return out


def write_interests(interests: Mapping[str, Iterable[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for item_id in sorted(interests):
            rec = {"item_id": item_id, "tags": sorted(interests[item_id])}
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_interests(path: str | Path) -> dict[str, InterestSet]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rec = json.loads(line)
                out[rec["item_id"]] = frozenset(rec["tags"])
    return out
