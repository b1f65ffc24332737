"""Synthetic two-platform corpora with planted topic preferences.

Every topic owns a handful of made-up tags. Questions carry their topic's tags;
repository descriptions embed the same tags among filler words, so keyword
matching recovers them. Each user has one topic preference shared by both
platforms, which is the cross-platform signal the features are meant to pick up.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import (
    ACTIVITY_ORDER,
    AccountLink,
    Corpus,
    ItemRecord,
    ParseResult,
    Platform,
    as_utc,
    format_timestamp,
    link_accounts,
)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
FILLER = (
    "a", "an", "the", "for", "and", "with", "of", "in", "on", "to",
    "fast", "simple", "small", "minimal", "experimental", "lightweight", "modern",
    "library", "toolkit", "tools", "framework", "utilities", "project", "demo",
    "implementation", "collection", "wrapper", "helpers", "examples", "starter",
    "how", "do", "i", "use", "why", "does", "my", "fail", "when", "using",
)
DEFAULT_WINDOW = (datetime(2013, 10, 1, tzinfo=timezone.utc), datetime(2015, 4, 1, tzinfo=timezone.utc))


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    n_users: int = 500
    n_repos: int = 1000
    n_questions: int = 1000
    n_topics: int = 10
    tags_per_topic: int = 3
    user_affinity_sharpness: float = 4.0
    activity_rate: float = 8.0
    noise_rate: float = 0.15
    window: tuple[datetime, datetime] = DEFAULT_WINDOW
    seed: int = 7

    def __post_init__(self):
        for name in ("n_users", "n_repos", "n_questions", "n_topics", "tags_per_topic"):
            if getattr(self, name) < 1:
                raise SynthSpecError(f"{name} must be >= 1")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise SynthSpecError("noise_rate must lie in [0, 1]")
        if self.user_affinity_sharpness < 0:
            raise SynthSpecError("user_affinity_sharpness must be nonnegative")
        if self.activity_rate < 0:
            raise SynthSpecError("activity_rate must be nonnegative")
        window = (as_utc(self.window[0]), as_utc(self.window[1]))
        if not window[0] < window[1]:
            raise SynthSpecError("window must be non-empty")
        object.__setattr__(self, "window", window)

    @classmethod
    def from_mapping(cls, values: Mapping) -> "SynthSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise SynthSpecError(f"unknown synth spec fields: {sorted(unknown)}")
        kwargs = dict(values)
        if "window" in kwargs:
            kwargs["window"] = tuple(_to_datetime(v) for v in kwargs["window"])
        return cls(**kwargs)

    def to_json(self) -> dict:
        d = asdict(self)
        d["window"] = [format_timestamp(t) for t in self.window]
        return d


def _to_datetime(value) -> datetime:
    if isinstance(value, datetime):
        return as_utc(value)
    if hasattr(value, "year"):  # date
        return datetime(value.year, value.month, value.day, tzinfo=timezone.utc)
    return as_utc(str(value))


@dataclass
class GroundTruth:
    user_topics: dict[str, np.ndarray]
    item_topic: dict[str, int]
    topic_tags: list[tuple[str, ...]] = field(default_factory=list)

    def preferred_topic(self, user: str) -> int:
        return int(np.argmax(self.user_topics[user]))


def _pseudo_words(count: int, rng: np.random.Generator) -> list[str]:
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    banned = set(FILLER)
    pool = [
        "".join(p) for n in (2, 3) for p in itertools.product(syllables, repeat=n)
    ]
    pool = [w for w in pool if w not in banned]
    if count > len(pool):
        raise SynthSpecError(f"cannot generate {count} distinct tags (at most {len(pool)})")
    picks = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in picks]


def _preferences(n_users: int, n_topics: int, sharpness: float, rng: np.random.Generator) -> np.ndarray:
    base = rng.dirichlet(np.ones(n_topics), size=n_users)
    if np.isinf(sharpness):
        out = np.zeros_like(base)
        out[np.arange(n_users), base.argmax(axis=1)] = 1.0
        return out
    logits = sharpness * np.log(np.maximum(base, 1e-300))
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def _topics(n_items: int, n_topics: int, rng: np.random.Generator) -> np.ndarray:
    # every topic gets an item first so each topic's tags reach the vocabulary
    head = rng.permutation(n_topics)[: min(n_items, n_topics)]
    tail = rng.integers(0, n_topics, size=n_items - head.size)
    return np.concatenate([head, tail]).astype(np.int64)


def _sentence(tags: tuple[str, ...], rng: np.random.Generator) -> str:
    words = list(tags) + [FILLER[i] for i in rng.integers(0, len(FILLER), size=rng.integers(2, 6))]
    return " ".join(words[i] for i in rng.permutation(len(words)))


def generate_corpus(spec: SynthSpec) -> tuple[Corpus, GroundTruth]:
    rng = np.random.default_rng(spec.seed)
    words = _pseudo_words(spec.n_topics * spec.tags_per_topic, rng)
    topic_tags = [tuple(words[t * spec.tags_per_topic:(t + 1) * spec.tags_per_topic]) for t in range(spec.n_topics)]

    start, end = spec.window
    span_us = int((end - start).total_seconds() * 1_000_000)

    def timestamp() -> datetime:
        # whole seconds keep the canonical files compact
        sec = int(rng.integers(0, span_us // 1_000_000))
        return datetime.fromtimestamp(start.timestamp() + sec, tz=timezone.utc)

    repo_topic = _topics(spec.n_repos, spec.n_topics, rng)
    question_topic = _topics(spec.n_questions, spec.n_topics, rng)
    gh = ParseResult()
    so = ParseResult()
    item_topic: dict[str, int] = {}
    repo_ids = [f"gh:{i:06d}" for i in range(spec.n_repos)]
    question_ids = [f"so:{i:06d}" for i in range(spec.n_questions)]
    for item_id, t in zip(repo_ids, repo_topic):
        gh.items.append(ItemRecord(item_id, Platform.GITHUB, _sentence(topic_tags[t], rng), (), start))
        item_topic[item_id] = int(t)
    for item_id, t in zip(question_ids, question_topic):
        tags = topic_tags[t]
        so.items.append(ItemRecord(item_id, Platform.STACKOVERFLOW, _sentence(tags, rng), tags, start))
        item_topic[item_id] = int(t)

    by_topic = {
        Platform.GITHUB: [np.flatnonzero(repo_topic == t) for t in range(spec.n_topics)],
        Platform.STACKOVERFLOW: [np.flatnonzero(question_topic == t) for t in range(spec.n_topics)],
    }
    ids = {Platform.GITHUB: repo_ids, Platform.STACKOVERFLOW: question_ids}

    prefs = _preferences(spec.n_users, spec.n_topics, spec.user_affinity_sharpness, rng)
    links = []
    user_topics = {}
    for u in range(spec.n_users):
        canonical = f"u{u:05d}"
        login, so_id = f"dev{u:05d}", str(1000 + u)
        links.append(AccountLink(canonical, login, so_id))
        user_topics[canonical] = prefs[u]
        for activity in ACTIVITY_ORDER:
            platform = activity.platform
            pool = ids[platform]
            for _ in range(int(rng.poisson(spec.activity_rate))):
                if rng.random() < spec.noise_rate:
                    idx = int(rng.integers(0, len(pool)))
                else:
                    topic = int(rng.choice(spec.n_topics, p=prefs[u]))
                    members = by_topic[platform][topic]
                    idx = int(members[rng.integers(0, members.size)]) if members.size else int(rng.integers(0, len(pool)))
                raw_user = login if platform is Platform.GITHUB else so_id
                (gh if platform is Platform.GITHUB else so).activities.append(
                    (raw_user, pool[idx], activity, timestamp())
                )

    corpus = link_accounts(links, gh, so, window=spec.window)
    return corpus, GroundTruth(user_topics, item_topic, topic_tags)


def write_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for user in sorted(truth.user_topics):
            rec = {"user_id": user, "topic_weights": [float(x) for x in truth.user_topics[user]]}
            f.write(json.dumps(rec, sort_keys=True) + "\n")
        for item in sorted(truth.item_topic):
            f.write(json.dumps({"item_id": item, "topic": truth.item_topic[item]}, sort_keys=True) + "\n")


def read_ground_truth(path: str | Path) -> GroundTruth:
    users, items = {}, {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            if "user_id" in rec:
                users[rec["user_id"]] = np.asarray(rec["topic_weights"])
            else:
                items[rec["item_id"]] = rec["topic"]
    return GroundTruth(users, items)
