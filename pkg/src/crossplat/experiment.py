"""Temporal-split activity prediction experiments.

For each task and run: sample positive and negative (user, item) pairs from a
train and a test window, featurize each pair on its window's corpus view,
train one linear SVM per feature configuration and score the test pairs by AUC.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import (
    ActivityType,
    Corpus,
    Platform,
    as_utc,
    filter_base_users,
    format_timestamp,
    window_slice,
)
from .features import FeatureConfig, FeatureContext
from .interests import build_vocabulary, item_interests
from .metrics import compute_auc, roc_points
from .svm import SVMParams, predict_score, train_linear_svm

log = logging.getLogger(__name__)

TASK_ORDER = (ActivityType.ANSWER, ActivityType.FAVORITE, ActivityType.FORK, ActivityType.WATCH)
CONFIG_ORDER = tuple(FeatureConfig)
TRAIN_WINDOW = (datetime(2013, 10, 1, tzinfo=timezone.utc), datetime(2014, 7, 1, tzinfo=timezone.utc))
TEST_WINDOW = (datetime(2014, 7, 1, tzinfo=timezone.utc), datetime(2015, 4, 1, tzinfo=timezone.utc))

Window = tuple[datetime, datetime]


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledInstance:
    user_id: str
    item_id: str
    label: int  # 1 positive, 0 negative
    task: ActivityType


@dataclass(frozen=True)
class Sizes:
    pos: int = 5000
    neg: int = 5000


@dataclass
class DatasetSplit:
    train: list[LabeledInstance]
    test: list[LabeledInstance]
    train_window: Window
    test_window: Window
    seed: int
    train_features: np.ndarray | None = None
    test_features: np.ndarray | None = None

    @staticmethod
    def labels(instances: Sequence[LabeledInstance]) -> np.ndarray:
        return np.array([inst.label for inst in instances], dtype=np.int64)


# ---------------------------------------------------------------------------
# sampling


def positive_population(corpus: Corpus, task: ActivityType, window: Window,
                        base_users: frozenset[str]) -> list[tuple[str, str]]:
    start, end = as_utc(window[0]), as_utc(window[1])
    return sorted({
        (a.user_id, a.item_id)
        for a in corpus.time_range(start, end)
        if a.activity is task and a.user_id in base_users
    })


def sample_positives(corpus: Corpus, task: ActivityType, window: Window, n: int, seed,
                     base_users: frozenset[str] | None = None) -> list[LabeledInstance]:
    """``n`` distinct positive pairs drawn uniformly without replacement."""
    task = ActivityType(task)
    if base_users is None:
        base_users = filter_base_users(corpus)
    population = positive_population(corpus, task, window, base_users)
    if n > len(population):
        raise SamplingError(f"asked for {n} {task.value} positives, only {len(population)} available")
    picks = np.random.default_rng(seed).choice(len(population), size=n, replace=False)
    return [LabeledInstance(*population[i], 1, task) for i in picks]


def sample_negatives(corpus: Corpus, task: ActivityType, window: Window, n: int, seed,
                     base_users: frozenset[str] | None = None) -> list[LabeledInstance]:
    """``n`` distinct (base user, active item) pairs with no ``task`` activity in the corpus.

    Rejection sampling over uniform user x uniform item; fails when fewer than one
    draw in a thousand is accepted.
    """
    task = ActivityType(task)
    if base_users is None:
        base_users = filter_base_users(corpus)
    start, end = as_utc(window[0]), as_utc(window[1])
    platform = task.platform
    users = sorted(base_users)
    items = sorted({a.item_id for a in corpus.time_range(start, end) if a.activity.platform is platform})
    if not users or not items:
        raise SamplingError(f"no users or no active {platform.value} items in window for {task.value} negatives")
    taken = {(a.user_id, a.item_id) for a in corpus.activities if a.activity is task}
    rng = np.random.default_rng(seed)
    budget = 1000 * max(n, 1)
    out: list[LabeledInstance] = []
    chosen: set[tuple[str, str]] = set()
    attempts = 0
    while len(out) < n:
        if attempts >= budget:
            raise SamplingError(
                f"negative sampling for {task.value} accepted {len(out)} of {attempts} draws; corpus too dense"
            )
        batch = min(budget - attempts, max(64, 2 * (n - len(out))))
        us = rng.integers(0, len(users), size=batch)
        ks = rng.integers(0, len(items), size=batch)
        for ui, ki in zip(us.tolist(), ks.tolist()):
            attempts += 1
            pair = (users[ui], items[ki])
            if pair in taken or pair in chosen:
                continue
            chosen.add(pair)
            out.append(LabeledInstance(*pair, 0, task))
            if len(out) == n:
                break
    return out


# ---------------------------------------------------------------------------
# splits


def _seed_streams(seed: int, task: ActivityType, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(TASK_ORDER.index(task),)).spawn(count)


def featurize(context: FeatureContext, instances: Sequence[LabeledInstance]) -> np.ndarray:
    return context.featurize_pairs([(i.user_id, i.item_id) for i in instances])


def build_split(corpus: Corpus, task: ActivityType, sizes: Sizes = Sizes(),
                windows: tuple[Window, Window] = (TRAIN_WINDOW, TEST_WINDOW), seed: int = 1,
                interests: Mapping[str, frozenset[str]] | None = None,
                base_users: frozenset[str] | None = None, history: str = "own",
                co_cap: int | None = None) -> DatasetSplit:
    """Sample train/test instances and featurize them.

    ``history="own"`` computes each side's features on its own window;
    ``history="train"`` uses the train window's activity for the test side too.
    """
    task = ActivityType(task)
    train_w = (as_utc(windows[0][0]), as_utc(windows[0][1]))
    test_w = (as_utc(windows[1][0]), as_utc(windows[1][1]))
    if not train_w[1] <= test_w[0]:
        raise ValueError("train window must end before the test window starts")
    if history not in ("own", "train"):
        raise ValueError(f"history must be 'own' or 'train', not {history!r}")
    if base_users is None:
        base_users = filter_base_users(corpus)
    if interests is None:
        interests = item_interests(corpus, build_vocabulary(corpus))
    s_pos_tr, s_neg_tr, s_pos_te, s_neg_te = _seed_streams(seed, task, 4)
    train = (sample_positives(corpus, task, train_w, sizes.pos, s_pos_tr, base_users)
             + sample_negatives(corpus, task, train_w, sizes.neg, s_neg_tr, base_users))
    test = (sample_positives(corpus, task, test_w, sizes.pos, s_pos_te, base_users)
            + sample_negatives(corpus, task, test_w, sizes.neg, s_neg_te, base_users))

    train_ctx = FeatureContext.from_corpus(window_slice(corpus, *train_w), interests, co_cap, seed)
    if history == "train":
        test_ctx = train_ctx
    else:
        test_ctx = FeatureContext.from_corpus(window_slice(corpus, *test_w), interests, co_cap, seed)
    return DatasetSplit(train, test, train_w, test_w, seed, featurize(train_ctx, train), featurize(test_ctx, test))


# ---------------------------------------------------------------------------
# configuration and reports


@dataclass(frozen=True)
class ExperimentConfig:
    tasks: tuple[ActivityType, ...] = TASK_ORDER
    configs: tuple[FeatureConfig, ...] = CONFIG_ORDER
    train_window: Window = TRAIN_WINDOW
    test_window: Window = TEST_WINDOW
    n_pos: int = 5000
    n_neg: int = 5000
    runs: int = 5
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    lam: float = 1e-4
    epochs: int = 200
    co_cap: int | None = None
    history: str = "own"
    shuffle_labels: bool = False

    def __post_init__(self):
        tasks = (self.tasks,) if isinstance(self.tasks, (str, ActivityType)) else self.tasks
        object.__setattr__(self, "tasks", tuple(_task(t) for t in tasks))
        configs = (self.configs,) if isinstance(self.configs, (str, FeatureConfig)) else self.configs
        configs = [FeatureConfig(c) for c in configs]
        if FeatureConfig.ALL not in configs:
            configs.append(FeatureConfig.ALL)
        object.__setattr__(self, "configs", tuple(c for c in CONFIG_ORDER if c in configs))
        for name in ("train_window", "test_window"):
            w = getattr(self, name)
            object.__setattr__(self, name, (_to_datetime(w[0]), _to_datetime(w[1])))
        seeds = tuple(int(s) for s in self.seeds)
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if len(seeds) != self.runs:
            raise ValueError(f"need one seed per run: runs={self.runs}, seeds={list(seeds)}")
        object.__setattr__(self, "seeds", seeds)
        if self.co_cap is not None:
            object.__setattr__(self, "co_cap", int(self.co_cap))

    @classmethod
    def from_mapping(cls, values: Mapping) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        values = dict(values)
        if "task" in values:
            values["tasks"] = values.pop("task")
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown experiment config fields: {sorted(unknown)}")
        if "runs" in values and "seeds" not in values:
            values["seeds"] = tuple(range(1, int(values["runs"]) + 1))
        if "seeds" in values and "runs" not in values:
            values["runs"] = len(values["seeds"])
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        import yaml

        with open(path, encoding="utf-8") as f:
            values = yaml.safe_load(f) or {}
        return cls.from_mapping(values)

    @property
    def sizes(self) -> Sizes:
        return Sizes(self.n_pos, self.n_neg)

    def svm_params(self, seed: int) -> SVMParams:
        return SVMParams(lam=self.lam, epochs=self.epochs, seed=seed)

    def to_json(self) -> dict:
        d = asdict(self)
        d["tasks"] = [t.value for t in self.tasks]
        d["configs"] = [c.value for c in self.configs]
        d["train_window"] = [format_timestamp(t) for t in self.train_window]
        d["test_window"] = [format_timestamp(t) for t in self.test_window]
        d["seeds"] = list(self.seeds)
        return d


def _task(value) -> ActivityType:
    return value if isinstance(value, ActivityType) else ActivityType(str(value).lower())


def _to_datetime(value) -> datetime:
    if isinstance(value, datetime):
        return as_utc(value)
    if hasattr(value, "year"):
        return datetime(value.year, value.month, value.day, tzinfo=timezone.utc)
    return as_utc(str(value))


@dataclass
class ConfigResult:
    task: ActivityType
    config: FeatureConfig
    aucs: list[float] = field(default_factory=list)
    rocs: list[list[tuple[float, float]]] = field(default_factory=list)

    @property
    def auc_mean(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def auc_std(self) -> float:
        # population std: a single run reports 0
        return float(np.std(self.aucs))


@dataclass
class EvalReport:
    results: dict[tuple[ActivityType, FeatureConfig], ConfigResult]
    seeds: tuple[int, ...]

    @property
    def runs(self) -> int:
        return len(self.seeds)

    def __getitem__(self, key) -> ConfigResult:
        task, config = key
        return self.results[(ActivityType(task), FeatureConfig(config))]

    def auc_mean(self, task, config) -> float:
        return self[task, config].auc_mean

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.jsonl", "w", encoding="utf-8") as f:
            for (task, config), res in self.results.items():
                for run, (seed, auc) in enumerate(zip(self.seeds, res.aucs)):
                    f.write(json.dumps({"kind": "run", "task": task.value, "config": config.value,
                                        "run": run, "seed": seed, "auc": auc}, sort_keys=True) + "\n")
                f.write(json.dumps({"kind": "summary", "task": task.value, "config": config.value,
                                    "runs": self.runs, "auc_mean": res.auc_mean, "auc_std": res.auc_std},
                                   sort_keys=True) + "\n")
        with open(out / "roc.tsv", "w", encoding="utf-8") as f:
            f.write("task\tconfig\trun\tfpr\ttpr\n")
            for (task, config), res in self.results.items():
                for run, pts in enumerate(res.rocs):
                    for fpr, tpr in pts:
                        f.write(f"{task.value}\t{config.value}\t{run}\t{fpr!r}\t{tpr!r}\n")
        (out / "summary.txt").write_text(self.summary_table(), encoding="utf-8")

    def summary_table(self) -> str:
        tasks = [t for t in TASK_ORDER if any(k[0] is t for k in self.results)]
        configs = [c for c in CONFIG_ORDER if any(k[1] is c for k in self.results)]
        head = f"{'task':<10}" + "".join(f"{c.value:>18}" for c in configs)
        lines = [f"AUC mean +/- std over {self.runs} run(s)", head]
        for t in tasks:
            cells = []
            for c in configs:
                r = self.results.get((t, c))
                cells.append(f"{r.auc_mean:.4f} +/- {r.auc_std:.4f}".rjust(18) if r else " " * 18)
            lines.append(f"{t.value:<10}" + "".join(cells))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# runs


@dataclass
class _RunOutput:
    task: ActivityType
    run: int
    aucs: dict[FeatureConfig, float]
    rocs: dict[FeatureConfig, list[tuple[float, float]]]


def evaluate_split(split: DatasetSplit, configs: Iterable[FeatureConfig], params: SVMParams,
                   shuffle_seed=None) -> tuple[dict, dict]:
    y_train = DatasetSplit.labels(split.train)
    y_test = DatasetSplit.labels(split.test)
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
        y_train = rng.permutation(y_train)
        y_test = rng.permutation(y_test)
    aucs, rocs = {}, {}
    for config in configs:
        cols = list(config.columns)
        model = train_linear_svm(split.train_features[:, cols], y_train, params, config=config.value)
        scores = predict_score(model, split.test_features[:, cols])
        pos, neg = scores[y_test == 1], scores[y_test == 0]
        aucs[config] = compute_auc(pos, neg)
        rocs[config] = roc_points(pos, neg)
    return aucs, rocs


def _one_run(corpus: Corpus, interests, base_users, config: ExperimentConfig,
             task: ActivityType, run: int) -> _RunOutput:
    seed = config.seeds[run]
    split = build_split(corpus, task, config.sizes, (config.train_window, config.test_window), seed,
                        interests, base_users, config.history, config.co_cap)
    svm_seq, shuffle_seq = _seed_streams(seed, task, 6)[4:]
    params = config.svm_params(int(svm_seq.generate_state(1)[0]))
    aucs, rocs = evaluate_split(split, config.configs, params,
                                shuffle_seq if config.shuffle_labels else None)
    log.info("task=%s run=%d seed=%d AUC(ALL)=%.4f", task.value, run, seed, aucs[FeatureConfig.ALL])
    return _RunOutput(task, run, aucs, rocs)


def run_experiment(corpus: Corpus, config: ExperimentConfig = ExperimentConfig(),
                   interests: Mapping[str, frozenset[str]] | None = None, workers: int = 1) -> EvalReport:
    """Repeat split -> train -> AUC for every task and run; deterministic given the seeds."""
    if interests is None:
        interests = item_interests(corpus, build_vocabulary(corpus))
    base_users = filter_base_users(corpus)
    jobs = [(task, run) for task in config.tasks for run in range(config.runs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_one_run, corpus, interests, base_users, config, t, r) for t, r in jobs]
            outputs = [f.result() for f in futures]
    else:
        outputs = [_one_run(corpus, interests, base_users, config, t, r) for t, r in jobs]
    results: dict[tuple[ActivityType, FeatureConfig], ConfigResult] = {}
    for task in config.tasks:
        for c in config.configs:
            results[(task, c)] = ConfigResult(task, c)
    for out in outputs:
        for c in config.configs:
            res = results[(out.task, c)]
            res.aucs.append(out.aucs[c])
            res.rocs.append(out.rocs[c])
    return EvalReport(results, config.seeds)


# ---------------------------------------------------------------------------
# descriptive statistics


def tag_usage_stats(corpus: Corpus, interests: Mapping[str, frozenset[str]],
                    top_k: int = 10) -> dict[ActivityType, list[tuple[str, float]]]:
    """Per activity type: share (%) of the distinct participated items carrying each tag."""
    table = {}
    for activity in TASK_ORDER:
        items = {a.item_id for a in corpus.activities if a.activity is activity}
        if not items:
            table[activity] = []
            continue
        counts = Counter(t for item in items for t in interests[item])
        rows = sorted(((tag, 100.0 * c / len(items)) for tag, c in counts.items()), key=lambda r: (-r[1], r[0]))
        table[activity] = rows[:top_k]
    return table


def platform_tag_usage(corpus: Corpus, interests: Mapping[str, frozenset[str]],
                       top_k: int = 10) -> dict[Platform, list[tuple[str, float]]]:
    """Share (%) of participated questions / repositories carrying each tag."""
    table = {}
    for platform in (Platform.STACKOVERFLOW, Platform.GITHUB):
        items = {a.item_id for a in corpus.activities if a.activity.platform is platform}
        if not items:
            table[platform] = []
            continue
        counts = Counter(t for item in items for t in interests[item])
        rows = sorted(((tag, 100.0 * c / len(items)) for tag, c in counts.items()), key=lambda r: (-r[1], r[0]))
        table[platform] = rows[:top_k]
    return table


def write_tag_usage(table: Mapping, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("group\trank\ttag\tpercent\n")
        for group, rows in table.items():
            for rank, (tag, pct) in enumerate(rows, 1):
                f.write(f"{group.value}\t{rank}\t{tag}\t{pct:.3f}\n")
