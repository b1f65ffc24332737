"""Activity-interest and co-activity-interest similarity features.

For a query pair ``(u, k)`` and an activity type ``A``:

* the direct score is the fraction of the items in ``u``'s ``A``-set whose
  interests share at least one tag with ``k``;
* the co score averages the direct score of every user ``v`` that shares at
  least one ``A``-item with ``u``.

The query item ``k`` is removed from every user's sets before anything is
computed, co-participation included, so a pair's own label never reaches its
features. Co scores are averages of small-integer ratios and are evaluated
exactly, then rounded once to the nearest double.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import astuple, dataclass, fields
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ACTIVITY_ORDER, ActivityType, Corpus

FEATURE_NAMES = (
    "sim_fork", "sim_watch", "sim_ans", "sim_fav",
    "sim_cofork", "sim_cowatch", "sim_coans", "sim_cofav",
)


class FeatureConfig(str, Enum):
    SO_ACT = "SO_Act"
    SO_COACT = "SO_CoAct"
    GH_ACT = "GH_Act"
    GH_COACT = "GH_CoAct"
    ALL = "ALL"

    @property
    def columns(self) -> tuple[int, ...]:
        return CONFIG_COLUMNS[self]


CONFIG_COLUMNS = {
    FeatureConfig.SO_ACT: (2, 3),
    FeatureConfig.SO_COACT: (6, 7),
    FeatureConfig.GH_ACT: (0, 1),
    FeatureConfig.GH_COACT: (4, 5),
    FeatureConfig.ALL: tuple(range(8)),
}


@dataclass(frozen=True)
class ActivitySets:
    forked: frozenset[str] = frozenset()
    watched: frozenset[str] = frozenset()
    answered: frozenset[str] = frozenset()
    favorited: frozenset[str] = frozenset()

    def of(self, activity: ActivityType) -> frozenset[str]:
        return getattr(self, _SET_FIELD[activity])


_SET_FIELD = {
    ActivityType.FORK: "forked",
    ActivityType.WATCH: "watched",
    ActivityType.ANSWER: "answered",
    ActivityType.FAVORITE: "favorited",
}
EMPTY_SETS = ActivitySets()


@dataclass(frozen=True)
class FeatureVector:
    sim_fork: float = 0.0
    sim_watch: float = 0.0
    sim_ans: float = 0.0
    sim_fav: float = 0.0
    sim_cofork: float = 0.0
    sim_cowatch: float = 0.0
    sim_coans: float = 0.0
    sim_cofav: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES


def build_activity_sets(view: Corpus) -> dict[str, ActivitySets]:
    grouped: dict[str, dict[ActivityType, set[str]]] = defaultdict(lambda: defaultdict(set))
    for a in view.activities:
        grouped[a.user_id][a.activity].add(a.item_id)
    return {
        user: ActivitySets(**{_SET_FIELD[t]: frozenset(by_type.get(t, ())) for t in ACTIVITY_ORDER})
        for user, by_type in sorted(grouped.items())
    }


class CoParticipationIndex:
    """Per activity type: user -> {co-participant: number of shared items}.

    Membership alone gives the co-participation sets; the shared-item counts let
    featurization drop a co-participant whose only shared item is the query item.
    """

    def __init__(self, shared: Mapping[ActivityType, Mapping[str, Mapping[str, int]]]):
        self._shared = {a: dict(shared.get(a, {})) for a in ACTIVITY_ORDER}

    def counts(self, activity: ActivityType, user: str) -> Mapping[str, int]:
        return self._shared[activity].get(user, {})

    def co(self, activity: ActivityType, user: str) -> frozenset[str]:
        return frozenset(self.counts(activity, user))

    def shared(self, activity: ActivityType, u: str, v: str) -> int:
        return self.counts(activity, u).get(v, 0)

    def users(self, activity: ActivityType) -> list[str]:
        return sorted(self._shared[activity])

    def capped(self, cap: int | None, seed: int = 0) -> "CoParticipationIndex":
        """Subsample every neighbourhood larger than ``cap`` (deterministic per user).

        The result is generally not symmetric any more.
        """
        if cap is None:
            return self
        if cap < 1:
            raise ValueError("co cap must be >= 1")
        out = {}
        for a, table in self._shared.items():
            sub = {}
            for u, nbrs in table.items():
                if len(nbrs) > cap:
                    keep = random.Random(f"{seed}:{a.value}:{u}").sample(sorted(nbrs), cap)
                    nbrs = {v: nbrs[v] for v in sorted(keep)}
                sub[u] = nbrs
            out[a] = sub
        return CoParticipationIndex(out)


def build_co_index(sets: Mapping[str, ActivitySets]) -> CoParticipationIndex:
    shared: dict[ActivityType, dict[str, dict[str, int]]] = {}
    for a in ACTIVITY_ORDER:
        by_item: dict[str, list[str]] = defaultdict(list)
        for user in sorted(sets):
            for item in sets[user].of(a):
                by_item[item].append(user)
        table: dict[str, dict[str, int]] = defaultdict(dict)
        for users in by_item.values():
            for i, u in enumerate(users):
                row = table[u]
                for v in users[i + 1:]:
                    row[v] = row.get(v, 0) + 1
                    col = table[v]
                    col[u] = col.get(u, 0) + 1
        shared[a] = {u: dict(sorted(row.items())) for u, row in sorted(table.items())}
    return CoParticipationIndex(shared)


def _matches(x: str, k_tags: frozenset[str], interests: Mapping[str, frozenset[str]]) -> bool:
    return not interests[x].isdisjoint(k_tags)


def _ratio_parts(user: str, k: str, activity: ActivityType, sets: Mapping[str, ActivitySets],
                 interests: Mapping[str, frozenset[str]]) -> tuple[int, int]:
    own = sets.get(user, EMPTY_SETS).of(activity) - {k}
    k_tags = interests[k]
    return sum(1 for x in own if _matches(x, k_tags, interests)), len(own)


def _check_item(k: str, interests: Mapping[str, frozenset[str]]) -> None:
    if k not in interests:
        raise ValueError(f"unknown query item {k!r}")


def sim_activity(u: str, k: str, activity: ActivityType, sets: Mapping[str, ActivitySets],
                 interests: Mapping[str, frozenset[str]]) -> float:
    """Fraction of ``u``'s ``activity`` items (minus ``k``) that share a tag with ``k``."""
    _check_item(k, interests)
    hits, size = _ratio_parts(u, k, activity, sets, interests)
    return hits / size if size else 0.0


def effective_co(u: str, k: str, activity: ActivityType, co: CoParticipationIndex,
                 sets: Mapping[str, ActivitySets]) -> list[str]:
    """Co-participants of ``u`` that still share an item once ``k`` is removed."""
    u_has_k = k in sets.get(u, EMPTY_SETS).of(activity)
    out = []
    for v, n_shared in co.counts(activity, u).items():
        if u_has_k and k in sets.get(v, EMPTY_SETS).of(activity):
            n_shared -= 1
        if n_shared > 0:
            out.append(v)
    return out


def sim_co_activity(u: str, k: str, activity: ActivityType, co: CoParticipationIndex,
                    sets: Mapping[str, ActivitySets], interests: Mapping[str, frozenset[str]]) -> float:
    """Mean over co-participants ``v`` of ``sim_activity(v, k, activity)``."""
    _check_item(k, interests)
    users = effective_co(u, k, activity, co, sets)
    if not users:
        return 0.0
    total = Fraction(0)
    for v in users:
        hits, size = _ratio_parts(v, k, activity, sets, interests)
        total += Fraction(hits, size)
    return float(total / len(users))


def select_config(vector: FeatureVector | Sequence[float], config: FeatureConfig | str) -> list[float]:
    values = vector.as_tuple() if isinstance(vector, FeatureVector) else tuple(vector)
    return [values[i] for i in FeatureConfig(config).columns]


class FeatureContext:
    """Activity sets, co-participation index and item interests of one corpus view."""

    def __init__(self, sets: Mapping[str, ActivitySets], co: CoParticipationIndex,
                 interests: Mapping[str, frozenset[str]]):
        self.sets = sets
        self.co = co
        self.interests = interests
        self._packed = None

    @classmethod
    def from_corpus(cls, view: Corpus, interests: Mapping[str, frozenset[str]],
                    co_cap: int | None = None, seed: int = 0) -> "FeatureContext":
        sets = build_activity_sets(view)
        return cls(sets, build_co_index(sets).capped(co_cap, seed), interests)

    def featurize_pair(self, u: str, k: str) -> FeatureVector:
        return featurize_pair(u, k, self)

    def featurize_pairs(self, pairs: Iterable[tuple[str, str]], backend=None) -> np.ndarray:
        """Feature matrix (n, 8) for many pairs through the selected kernel backend."""
        from . import _backend

        impl = _backend.get(backend)
        pairs = list(pairs)
        out = np.zeros((len(pairs), len(FEATURE_NAMES)), dtype=np.float64)
        if not pairs:
            return out
        packed = self._pack()
        qu = np.array([packed.user_index.get(u, -1) for u, _ in pairs], dtype=np.int64)
        try:
            qk = np.array([packed.item_index[k] for _, k in pairs], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown query item {exc.args[0]!r}") from None
        # grouping queries by item lets the kernel reuse its per-item match cache
        order = np.argsort(qk, kind="stable")
        qu_s, qk_s = qu[order], qk[order]
        for col, a in enumerate(ACTIVITY_ORDER):
            ui_ptr, ui_idx, co_ptr, co_idx, co_cnt = packed.per_type[a]
            direct, co = impl.activity_columns(
                qu_s, qk_s, packed.tag_ptr, packed.tag_idx, packed.n_tags,
                ui_ptr, ui_idx, co_ptr, co_idx, co_cnt,
            )
            out[order, col] = direct
            out[order, col + 4] = co
        return out

    def _pack(self) -> "_Packed":
        if self._packed is None:
            self._packed = _Packed(self)
        return self._packed


class _Packed:
    """CSR layout of a FeatureContext for the kernels."""

    def __init__(self, ctx: FeatureContext):
        item_ids = sorted(ctx.interests)
        self.item_index = {k: i for i, k in enumerate(item_ids)}
        tags = sorted({t for s in ctx.interests.values() for t in s})
        tag_index = {t: i for i, t in enumerate(tags)}
        self.n_tags = len(tags)
        self.tag_ptr, self.tag_idx = _csr(sorted(tag_index[t] for t in ctx.interests[k]) for k in item_ids)

        users = sorted(set(ctx.sets) | {u for a in ACTIVITY_ORDER for u in ctx.co.users(a)})
        self.user_index = {u: i for i, u in enumerate(users)}
        self.per_type = {}
        for a in ACTIVITY_ORDER:
            ui_ptr, ui_idx = _csr(
                sorted(self.item_index[x] for x in ctx.sets.get(u, EMPTY_SETS).of(a)) for u in users
            )
            rows = [ctx.co.counts(a, u) for u in users]
            co_ptr, co_idx = _csr([self.user_index[v] for v in row] for row in rows)
            _, co_cnt = _csr(list(row.values()) for row in rows)
            self.per_type[a] = (ui_ptr, ui_idx, co_ptr, co_idx, co_cnt)


def _csr(rows: Iterable[Iterable[int]]) -> tuple[np.ndarray, np.ndarray]:
    ptr = [0]
    flat: list[int] = []
    for row in rows:
        flat.extend(row)
        ptr.append(len(flat))
    return np.asarray(ptr, dtype=np.int64), np.asarray(flat, dtype=np.int64)


def featurize_pair(u: str, k: str, context: FeatureContext) -> FeatureVector:
    direct = [sim_activity(u, k, a, context.sets, context.interests) for a in ACTIVITY_ORDER]
    co = [sim_co_activity(u, k, a, context.co, context.sets, context.interests) for a in ACTIVITY_ORDER]
    return FeatureVector(*direct, *co)


def write_features(rows: Iterable[tuple[str, str, int, Sequence[float]]], path) -> None:
    """Line-delimited ``user_id item_id label f1..f8`` records, tab separated."""
    with open(path, "w", encoding="utf-8") as f:
        for user, item, label, feats in rows:
            f.write("\t".join([user, item, str(label), *(repr(float(x)) for x in feats)]) + "\n")
