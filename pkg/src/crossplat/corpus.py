"""Activity corpus: dump parsers, account linkage, base users and time windows.

Item ids are namespaced by platform (``so:<post id>``, ``gh:<repo id>``) so a
single map can hold both platforms. Users that appear in the links file are
rewritten to their canonical id; everybody else keeps a platform-prefixed
synthetic id (``gh:<login>``, ``so:<user id>``).
"""

from __future__ import annotations

import bisect
import json
import logging
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping, Sequence

log = logging.getLogger(__name__)


class Platform(str, Enum):
    GITHUB = "github"
    STACKOVERFLOW = "stackoverflow"


class ActivityType(str, Enum):
    FORK = "fork"
    WATCH = "watch"
    ANSWER = "answer"
    FAVORITE = "favorite"

    @property
    def platform(self) -> Platform:
        if self in (ActivityType.FORK, ActivityType.WATCH):
            return Platform.GITHUB
        return Platform.STACKOVERFLOW


# fixed order used for feature columns and report tables
ACTIVITY_ORDER = (ActivityType.FORK, ActivityType.WATCH, ActivityType.ANSWER, ActivityType.FAVORITE)

ITEM_PREFIX = {Platform.GITHUB: "gh:", Platform.STACKOVERFLOW: "so:"}
USER_PREFIX = ITEM_PREFIX


class CorpusError(Exception):
    """Fatal problem with corpus input."""


class DumpReadError(CorpusError):
    """A dump stream could not be read; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class LinkValidationError(CorpusError):
    def __init__(self, offenders: dict[str, list[str]]):
        parts = [f"{kind}: {', '.join(sorted(vals))}" for kind, vals in sorted(offenders.items()) if vals]
        super().__init__("duplicate entries in links file: " + "; ".join(parts))
        self.offenders = offenders


# ---------------------------------------------------------------------------
# timestamps


def parse_timestamp(value: str) -> datetime:
    """Parse RFC 3339 / dump-style ISO timestamps; naive values are taken as UTC."""
    s = value.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def as_utc(value: datetime | str) -> datetime:
    if isinstance(value, str):
        return parse_timestamp(value)
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    platform: Platform
    text: str
    raw_tags: tuple[str, ...]
    created_at: datetime

    def __post_init__(self):
        if self.platform is Platform.GITHUB and self.raw_tags:
            raise ValueError(f"repository {self.item_id} cannot carry raw tags")

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "platform": self.platform.value,
            "text": self.text,
            "raw_tags": list(self.raw_tags),
            "created_at": format_timestamp(self.created_at),
        }

    @classmethod
    def from_json(cls, rec: Mapping) -> "ItemRecord":
        return cls(
            item_id=rec["item_id"],
            platform=Platform(rec["platform"]),
            text=rec.get("text", ""),
            raw_tags=tuple(rec.get("raw_tags", ())),
            created_at=parse_timestamp(rec["created_at"]),
        )


@dataclass(frozen=True, order=True)
class ActivityRecord:
    # field order doubles as the canonical sort order of a corpus
    timestamp: datetime
    user_id: str
    item_id: str
    activity: ActivityType

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "item_id": self.item_id,
            "activity": self.activity.value,
            "timestamp": format_timestamp(self.timestamp),
        }

    @classmethod
    def from_json(cls, rec: Mapping) -> "ActivityRecord":
        return cls(
            timestamp=parse_timestamp(rec["timestamp"]),
            user_id=rec["user_id"],
            item_id=rec["item_id"],
            activity=ActivityType(rec["activity"]),
        )


@dataclass(frozen=True)
class AccountLink:
    canonical_id: str
    github_login: str
    stackoverflow_user_id: str

    def to_json(self) -> dict:
        return {
            "canonical_id": self.canonical_id,
            "github_login": self.github_login,
            "stackoverflow_user_id": self.stackoverflow_user_id,
        }


# (platform user id, item id, activity, timestamp)
RawActivity = tuple[str, str, ActivityType, datetime]


@dataclass
class ParseResult:
    items: list[ItemRecord] = field(default_factory=list)
    activities: list[RawActivity] = field(default_factory=list)
    skipped: Counter = field(default_factory=Counter)

    @property
    def skip_count(self) -> int:
        return sum(self.skipped.values())

    def __iter__(self):
        # allows ``items, activities = parse_...(...)``
        return iter((self.items, self.activities))


@dataclass(frozen=True, eq=False)
class Corpus:
    """Immutable activity corpus over the half-open window ``[start, end)``.

    Use :meth:`build` to construct from loose records; the plain constructor
    expects activities already deduplicated and sorted.
    """

    items: Mapping[str, ItemRecord]
    activities: tuple[ActivityRecord, ...]
    links: tuple[AccountLink, ...]
    window: tuple[datetime, datetime]
    _times: tuple[datetime, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.items, MappingProxyType):
            object.__setattr__(self, "items", MappingProxyType(dict(self.items)))
        object.__setattr__(self, "activities", tuple(self.activities))
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "_times", tuple(a.timestamp for a in self.activities))

    def __reduce__(self):
        # mapping proxies do not pickle; worker processes get a plain dict back
        return (Corpus, (dict(self.items), self.activities, self.links, self.window))

    @classmethod
    def build(
        cls,
        items: Iterable[ItemRecord],
        activities: Iterable[ActivityRecord],
        links: Iterable[AccountLink] = (),
        window: tuple[datetime, datetime] | None = None,
    ) -> "Corpus":
        item_map: dict[str, ItemRecord] = {}
        for it in items:
            item_map.setdefault(it.item_id, it)
        earliest: dict[tuple[str, str, ActivityType], ActivityRecord] = {}
        for a in activities:
            item = item_map.get(a.item_id)
            if item is None:
                raise CorpusError(f"activity references unknown item {a.item_id!r}")
            if item.platform is not a.activity.platform:
                raise CorpusError(f"{a.activity.value} activity on {item.platform.value} item {a.item_id!r}")
            key = (a.user_id, a.item_id, a.activity)
            prev = earliest.get(key)
            if prev is None or a.timestamp < prev.timestamp:
                earliest[key] = a
        acts = sorted(earliest.values())
        if window is None:
            window = default_window(acts)
        else:
            window = (as_utc(window[0]), as_utc(window[1]))
            for a in acts:
                if not window[0] <= a.timestamp < window[1]:
                    raise CorpusError(f"activity at {format_timestamp(a.timestamp)} outside corpus window")
        return cls(item_map, tuple(acts), tuple(links), window)

    def __len__(self) -> int:
        return len(self.activities)

    def users(self) -> list[str]:
        return sorted({a.user_id for a in self.activities})

    def time_range(self, start: datetime, end: datetime) -> tuple[ActivityRecord, ...]:
        lo = bisect.bisect_left(self._times, start)
        hi = bisect.bisect_left(self._times, end)
        return self.activities[lo:hi]


def default_window(acts: Sequence[ActivityRecord]) -> tuple[datetime, datetime]:
    if not acts:
        epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
        return (epoch, epoch)
    return (acts[0].timestamp, acts[-1].timestamp + timedelta(microseconds=1))


# ---------------------------------------------------------------------------
# Stack Overflow dump


def split_tags(tags: str) -> list[str]:
    """``"<java><android>"`` -> ``["java", "android"]``."""
    return [t for t in tags.replace(">", "").split("<") if t]


def _iter_lines(stream: IO[bytes], label: str) -> Iterator[tuple[int, str]]:
    offset = 0
    while True:
        try:
            raw = stream.readline()
        except OSError as exc:
            raise DumpReadError(f"cannot read {label}: {exc}", offset) from exc
        if not raw:
            return
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DumpReadError(f"{label} is not valid UTF-8", offset + exc.start) from exc
        yield offset, line
        offset += len(raw)


def _iter_rows(stream: IO[bytes], label: str, skipped: Counter) -> Iterator[dict[str, str]]:
    # dumps carry exactly one <row .../> per line; everything else is framing
    for _, line in _iter_lines(stream, label):
        s = line.strip()
        if not s.startswith("<row"):
            continue
        try:
            yield ET.fromstring(s).attrib
        except ET.ParseError:
            skipped[f"{label}:malformed_row"] += 1


def parse_stackoverflow_posts(posts: IO[bytes], votes: IO[bytes] | None = None) -> ParseResult:
    """Parse ``Posts.xml`` (and optionally ``Votes.xml``) from a Stack Exchange dump.

    Questions become items, answers become Answer activities of their owner,
    and favorite votes (VoteTypeId 5) become Favorite activities.
    """
    result = ParseResult()
    skipped = result.skipped
    seen: set[str] = set()
    for row in _iter_rows(posts, "posts", skipped):
        kind = row.get("PostTypeId")
        try:
            if kind == "1":
                item_id = ITEM_PREFIX[Platform.STACKOVERFLOW] + row["Id"]
                tags = split_tags(row.get("Tags", ""))
                created = parse_timestamp(row["CreationDate"])
                if item_id in seen:
                    continue
                seen.add(item_id)
                title = row.get("Title", "")
                text = " ".join([title, *tags]).strip()
                result.items.append(ItemRecord(item_id, Platform.STACKOVERFLOW, text, tuple(tags), created))
            elif kind == "2":
                owner, parent = row.get("OwnerUserId"), row.get("ParentId")
                if not owner or not parent:
                    skipped["posts:answer_missing_owner_or_parent"] += 1
                    continue
                result.activities.append(
                    (owner, ITEM_PREFIX[Platform.STACKOVERFLOW] + parent, ActivityType.ANSWER,
                     parse_timestamp(row["CreationDate"]))
                )
        except (KeyError, ValueError):
            skipped["posts:malformed_row"] += 1
    if votes is not None:
        for row in _iter_rows(votes, "votes", skipped):
            if row.get("VoteTypeId") != "5":
                continue
            try:
                user, post = row.get("UserId"), row.get("PostId")
                if not user or not post:
                    skipped["votes:favorite_missing_user_or_post"] += 1
                    continue
                result.activities.append(
                    (user, ITEM_PREFIX[Platform.STACKOVERFLOW] + post, ActivityType.FAVORITE,
                     parse_timestamp(row["CreationDate"]))
                )
            except (KeyError, ValueError):
                skipped["votes:malformed_row"] += 1
    return result


# ---------------------------------------------------------------------------
# GitHub events

GITHUB_EVENT_TYPES = {
    "fork": ActivityType.FORK,
    "forkevent": ActivityType.FORK,
    "watch": ActivityType.WATCH,
    "watchevent": ActivityType.WATCH,
    "star": ActivityType.WATCH,
}


def parse_github_events(stream: IO[bytes]) -> ParseResult:
    """Parse a line-delimited JSON export of fork/watch events.

    Each line: ``{"type", "actor_login", "repo_id", "repo_description", "created_at"}``.
    A repository seen several times keeps its longest non-empty description and
    its earliest event time as ``created_at``.
    """
    result = ParseResult()
    skipped = result.skipped
    repos: dict[str, tuple[str, datetime]] = {}
    for _, line in _iter_lines(stream, "github events"):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            kind = str(rec["type"]).lower()
            login = str(rec["actor_login"])
            repo = str(rec["repo_id"])
            ts = parse_timestamp(rec["created_at"])
            desc = rec.get("repo_description") or ""
            if not login or not repo:
                raise ValueError("empty actor or repo")
        except (ValueError, KeyError, TypeError, AttributeError):
            skipped["github:malformed_line"] += 1
            continue
        activity = GITHUB_EVENT_TYPES.get(kind)
        if activity is None:
            skipped["github:unknown_event_type"] += 1
            continue
        item_id = ITEM_PREFIX[Platform.GITHUB] + repo
        prev = repos.get(item_id)
        if prev is None:
            repos[item_id] = (desc, ts)
        else:
            best = desc if len(desc) > len(prev[0]) else prev[0]
            repos[item_id] = (best, min(ts, prev[1]))
        result.activities.append((login, item_id, activity, ts))
    result.items = [
        ItemRecord(item_id, Platform.GITHUB, desc, (), created) for item_id, (desc, created) in repos.items()
    ]
    return result


# ---------------------------------------------------------------------------
# account linkage


def read_links(stream: IO[str] | Iterable[str]) -> list[AccountLink]:
    """Read links as JSON lines, or as tab/comma separated triples with optional header."""
    links = []
    for lineno, line in enumerate(stream, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("{"):
            rec = json.loads(s)
            fields = (rec["canonical_id"], rec["github_login"], rec["stackoverflow_user_id"])
        else:
            fields = tuple(p.strip() for p in s.replace("\t", ",").split(","))
            if fields == ("canonical_id", "github_login", "stackoverflow_user_id"):
                continue
            if len(fields) != 3:
                raise CorpusError(f"links line {lineno}: expected 3 fields, got {len(fields)}")
        links.append(AccountLink(*(str(f) for f in fields)))
    return links


def validate_links(links: Sequence[AccountLink]) -> None:
    offenders: dict[str, list[str]] = {}
    for attr in ("canonical_id", "github_login", "stackoverflow_user_id"):
        counts = Counter(getattr(l, attr) for l in links)
        dups = [k for k, c in counts.items() if c > 1]
        if dups:
            offenders[attr] = dups
    if offenders:
        raise LinkValidationError(offenders)


def link_accounts(
    links: Sequence[AccountLink],
    github: ParseResult,
    stackoverflow: ParseResult,
    window: tuple[datetime, datetime] | None = None,
    diagnostics: Counter | None = None,
) -> Corpus:
    """Join both platforms' parse results into one corpus keyed by canonical user.

    Activities on items absent from the dumps (e.g. favorites on answers, answers
    whose question is outside the dump) and, when ``window`` is given, activities
    outside it are dropped and counted in ``diagnostics``.
    """
    validate_links(links)
    diag = diagnostics if diagnostics is not None else Counter()
    by_login = {l.github_login: l.canonical_id for l in links}
    by_so = {l.stackoverflow_user_id: l.canonical_id for l in links}

    items: dict[str, ItemRecord] = {}
    for it in stackoverflow.items:
        items.setdefault(it.item_id, it)
    for it in github.items:
        prev = items.get(it.item_id)
        if prev is None or len(it.text) > len(prev.text):
            created = it.created_at if prev is None else min(prev.created_at, it.created_at)
            items[it.item_id] = ItemRecord(it.item_id, it.platform, it.text, (), created)

    if window is not None:
        window = (as_utc(window[0]), as_utc(window[1]))

    acts: list[ActivityRecord] = []
    for source, mapping, platform in (
        (github, by_login, Platform.GITHUB),
        (stackoverflow, by_so, Platform.STACKOVERFLOW),
    ):
        for user, item_id, activity, ts in source.activities:
            item = items.get(item_id)
            if item is None:
                diag["link:unknown_item"] += 1
                continue
            if item.platform is not platform or activity.platform is not platform:
                diag["link:platform_mismatch"] += 1
                continue
            if window is not None and not window[0] <= ts < window[1]:
                diag["link:outside_window"] += 1
                continue
            canonical = mapping.get(user) or USER_PREFIX[platform] + user
            acts.append(ActivityRecord(ts, canonical, item_id, activity))
    return Corpus.build(items.values(), acts, links, window)


# ---------------------------------------------------------------------------
# users and windows


def filter_base_users(corpus: Corpus, window: tuple[datetime, datetime] | None = None) -> frozenset[str]:
    """Users with at least one activity on each platform inside ``window``."""
    start, end = window if window is not None else corpus.window
    gh: set[str] = set()
    so: set[str] = set()
    for a in corpus.time_range(as_utc(start), as_utc(end)):
        (gh if a.activity.platform is Platform.GITHUB else so).add(a.user_id)
    return frozenset(gh & so)


def window_slice(corpus: Corpus, start: datetime | str, end: datetime | str) -> Corpus:
    """View of ``corpus`` restricted to activities with ``start <= t < end``."""
    start, end = as_utc(start), as_utc(end)
    if end < start:
        raise ValueError(f"inverted window: {format_timestamp(start)} > {format_timestamp(end)}")
    return Corpus(corpus.items, corpus.time_range(start, end), corpus.links, (start, end))


# ---------------------------------------------------------------------------
# canonical files

CORPUS_FILES = ("items.jsonl", "activities.jsonl", "links.jsonl")
CORPUS_META = "corpus.json"


def _dump_line(rec: dict) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n"


def write_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "items.jsonl", "w", encoding="utf-8") as f:
        for item_id in sorted(corpus.items):
            f.write(_dump_line(corpus.items[item_id].to_json()))
    with open(out / "activities.jsonl", "w", encoding="utf-8") as f:
        for a in corpus.activities:
            f.write(_dump_line(a.to_json()))
    with open(out / "links.jsonl", "w", encoding="utf-8") as f:
        for link in corpus.links:
            f.write(_dump_line(link.to_json()))
    meta = {
        "window": [format_timestamp(corpus.window[0]), format_timestamp(corpus.window[1])],
        "n_items": len(corpus.items),
        "n_activities": len(corpus.activities),
        "n_links": len(corpus.links),
    }
    (out / CORPUS_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_jsonl(path: Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield json.loads(line)


def read_corpus(corpus_dir: str | Path) -> Corpus:
    src = Path(corpus_dir)
    for name in CORPUS_FILES:
        if not (src / name).exists():
            raise CorpusError(f"missing corpus file {src / name}")
    items = [ItemRecord.from_json(r) for r in _read_jsonl(src / "items.jsonl")]
    acts = [ActivityRecord.from_json(r) for r in _read_jsonl(src / "activities.jsonl")]
    links = [AccountLink(r["canonical_id"], r["github_login"], r["stackoverflow_user_id"])
             for r in _read_jsonl(src / "links.jsonl")]
    window = None
    if (src / CORPUS_META).exists():
        meta = json.loads((src / CORPUS_META).read_text(encoding="utf-8"))
        window = tuple(parse_timestamp(t) for t in meta["window"])
    return Corpus.build(items, acts, links, window)
