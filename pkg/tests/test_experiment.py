from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from crossplat.corpus import (
    ActivityRecord,
    ActivityType,
    Corpus,
    ItemRecord,
    Platform,
    filter_base_users,
    window_slice,
)
from crossplat.experiment import (
    TEST_WINDOW,
    TRAIN_WINDOW,
    ExperimentConfig,
    SamplingError,
    Sizes,
    build_split,
    platform_tag_usage,
    run_experiment,
    sample_negatives,
    sample_positives,
    tag_usage_stats,
)
from crossplat.features import FeatureConfig, FeatureContext
from crossplat.interests import build_vocabulary, item_interests

UTC = timezone.utc
ANSWER = ActivityType.ANSWER
FULL = (datetime(2013, 1, 1, tzinfo=UTC), datetime(2016, 1, 1, tzinfo=UTC))
SMALL = Sizes(150, 150)


@pytest.fixture(scope="module")
def interests(small_planted):
    corpus, _ = small_planted
    return item_interests(corpus, build_vocabulary(corpus))


def grid_corpus(n_users=6, n_items=10, full=False):
    """Every user forks gh:0 and answers questions; ``full`` makes every pair an answer."""
    t = datetime(2014, 1, 1, tzinfo=UTC)
    items = [ItemRecord("gh:0", Platform.GITHUB, "", (), t)]
    items += [ItemRecord(f"so:{k}", Platform.STACKOVERFLOW, "", ("x",), t) for k in range(n_items)]
    acts = []
    for u in range(n_users):
        acts.append(ActivityRecord(t, f"u{u}", "gh:0", ActivityType.FORK))
        for k in range(n_items):
            if full or (u + k) % 2 == 0:
                acts.append(ActivityRecord(t + timedelta(hours=u * n_items + k), f"u{u}", f"so:{k}", ANSWER))
    return Corpus.build(items, acts)


# -- sampling -----------------------------------------------------------------


def test_positives_subset_of_enumeration():
    corpus = grid_corpus()
    population = {(a.user_id, a.item_id) for a in corpus.activities if a.activity is ANSWER}
    assert len(population) == 30
    sample = sample_positives(corpus, ANSWER, FULL, 10, seed=1)
    assert len(sample) == 10 and len({(s.user_id, s.item_id) for s in sample}) == 10
    assert {(s.user_id, s.item_id) for s in sample} <= population
    assert all(s.label == 1 and s.task is ANSWER for s in sample)
    assert sample == sample_positives(corpus, ANSWER, FULL, 10, seed=1)


def test_exhaustive_positive_draw():
    corpus = grid_corpus()
    sample = sample_positives(corpus, ANSWER, FULL, 30, seed=0)
    assert {(s.user_id, s.item_id) for s in sample} == {
        (a.user_id, a.item_id) for a in corpus.activities if a.activity is ANSWER
    }
    with pytest.raises(SamplingError, match="only 30 available"):
        sample_positives(corpus, ANSWER, FULL, 31, seed=0)


def test_negatives_never_observed():
    corpus = grid_corpus()
    taken = {(a.user_id, a.item_id) for a in corpus.activities if a.activity is ANSWER}
    negs = sample_negatives(corpus, ANSWER, FULL, 30, seed=3)
    pairs = {(n.user_id, n.item_id) for n in negs}
    assert len(pairs) == 30 and not pairs & taken
    assert all(n.label == 0 for n in negs)


def test_negatives_impossible():
    with pytest.raises(SamplingError):
        sample_negatives(grid_corpus(full=True), ANSWER, FULL, 1, seed=0)


# -- splits -------------------------------------------------------------------


def test_split_shapes_and_windows(small_planted, interests):
    corpus, _ = small_planted
    split = build_split(corpus, ANSWER, SMALL, seed=2, interests=interests)
    assert len(split.train) == len(split.test) == 300
    assert split.train_features.shape == split.test_features.shape == (300, 8)
    assert sum(i.label for i in split.train) == sum(i.label for i in split.test) == 150
    assert split.train_window[1] <= split.test_window[0]
    times = {(a.user_id, a.item_id): a.timestamp for a in corpus.activities if a.activity is ANSWER}
    assert all(TRAIN_WINDOW[0] <= times[(i.user_id, i.item_id)] < TRAIN_WINDOW[1] for i in split.train if i.label)
    assert all(TEST_WINDOW[0] <= times[(i.user_id, i.item_id)] < TEST_WINDOW[1] for i in split.test if i.label)
    assert all((i.user_id, i.item_id) not in times for i in split.train + split.test if not i.label)


def test_minimal_split(small_planted, interests):
    corpus, _ = small_planted
    split = build_split(corpus, ActivityType.FORK, Sizes(1, 1), seed=1, interests=interests)
    assert [i.label for i in split.train] == [1, 0] and [i.label for i in split.test] == [1, 0]


def test_split_rejects_overlapping_windows(small_planted, interests):
    corpus, _ = small_planted
    with pytest.raises(ValueError):
        build_split(corpus, ANSWER, SMALL, windows=(TEST_WINDOW, TRAIN_WINDOW), interests=interests)


def test_removing_a_test_positive_leaves_its_features(small_planted, interests):
    corpus, _ = small_planted
    split = build_split(corpus, ANSWER, Sizes(40, 40), seed=5, interests=interests)
    for inst, row in list(zip(split.test, split.test_features))[:40]:
        assert inst.label == 1
        kept = [a for a in corpus.activities
                if (a.user_id, a.item_id, a.activity) != (inst.user_id, inst.item_id, ANSWER)]
        reduced = Corpus.build(corpus.items.values(), kept, corpus.links, corpus.window)
        ctx = FeatureContext.from_corpus(window_slice(reduced, *TEST_WINDOW), interests)
        assert np.array_equal(ctx.featurize_pairs([(inst.user_id, inst.item_id)])[0], row)


def test_train_history_variant(small_planted, interests):
    corpus, _ = small_planted
    own = build_split(corpus, ANSWER, SMALL, seed=2, interests=interests)
    hist = build_split(corpus, ANSWER, SMALL, seed=2, interests=interests, history="train")
    assert own.test == hist.test
    assert np.array_equal(own.train_features, hist.train_features)
    assert not np.array_equal(own.test_features, hist.test_features)


# -- experiments ----------------------------------------------------------------


def test_single_run_std_zero_and_determinism(small_planted, interests):
    corpus, _ = small_planted
    config = ExperimentConfig(tasks=(ANSWER,), n_pos=150, n_neg=150, runs=1, seeds=(4,), epochs=20)
    a = run_experiment(corpus, config, interests)
    b = run_experiment(corpus, config, interests)
    assert a[ANSWER, "ALL"].auc_std == 0.0
    assert [r.aucs for r in a.results.values()] == [r.aucs for r in b.results.values()]
    assert len(a.results) == 5


def test_same_seed_twice_gives_identical_runs(small_planted, interests):
    corpus, _ = small_planted
    config = ExperimentConfig(tasks=(ActivityType.WATCH,), configs=("ALL",), n_pos=100, n_neg=100,
                              runs=2, seeds=(9, 9), epochs=20)
    res = run_experiment(corpus, config, interests)[ActivityType.WATCH, FeatureConfig.ALL]
    assert res.aucs[0] == res.aucs[1]


def test_parallel_matches_serial(small_planted, interests):
    corpus, _ = small_planted
    config = ExperimentConfig(tasks=(ANSWER, ActivityType.FORK), configs=("GH_Act",), n_pos=100, n_neg=100,
                              runs=2, seeds=(1, 2), epochs=20)
    serial = run_experiment(corpus, config, interests)
    parallel = run_experiment(corpus, config, interests, workers=2)
    assert {k: v.aucs for k, v in serial.results.items()} == {k: v.aucs for k, v in parallel.results.items()}


def test_report_files(tmp_path, small_planted, interests):
    corpus, _ = small_planted
    config = ExperimentConfig(tasks=(ANSWER,), n_pos=100, n_neg=100, runs=2, seeds=(1, 2), epochs=20)
    report = run_experiment(corpus, config, interests)
    report.write(tmp_path)
    lines = (tmp_path / "report.jsonl").read_text().splitlines()
    assert len(lines) == 5 * (2 + 1)
    summary = (tmp_path / "summary.txt").read_text()
    for name in ("SO_Act", "SO_CoAct", "GH_Act", "GH_CoAct", "ALL"):
        assert name in summary
    roc = (tmp_path / "roc.tsv").read_text().splitlines()
    assert roc[0] == "task\tconfig\trun\tfpr\ttpr"


def test_config_mapping(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("task: answer\nconfigs: [GH_Act]\nruns: 2\nlambda: 0.001\nn_pos: 10\n")
    config = ExperimentConfig.load(path)
    assert config.tasks == (ANSWER,)
    assert config.configs == (FeatureConfig.GH_ACT, FeatureConfig.ALL)
    assert config.seeds == (1, 2) and config.lam == 0.001 and config.n_pos == 10
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping({"bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(runs=2, seeds=(1,))


# -- tag usage ----------------------------------------------------------------


def test_saturated_tag():
    corpus = grid_corpus()
    interests = {k: frozenset({"javascript"}) if k.startswith("so:") else frozenset() for k in corpus.items}
    table = tag_usage_stats(corpus, interests)
    assert table[ANSWER] == [("javascript", 100.0)]
    assert table[ActivityType.FAVORITE] == []


def test_tag_usage_brute_force(small_planted, interests):
    corpus, _ = small_planted
    table = tag_usage_stats(corpus, interests, top_k=1000)
    for activity, rows in table.items():
        items = {a.item_id for a in corpus.activities if a.activity is activity}
        expected = {}
        for item in items:
            for tag in interests[item]:
                expected[tag] = expected.get(tag, 0) + 1
        assert dict(rows) == {t: 100.0 * c / len(items) for t, c in expected.items()}
        pcts = [p for _, p in rows]
        assert pcts == sorted(pcts, reverse=True)
    top = platform_tag_usage(corpus, interests)
    assert all(len(rows) <= 10 for rows in top.values())
    assert filter_base_users(corpus)
