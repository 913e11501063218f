import datetime as dt

import numpy as np
import pytest

from cascademine.cascades import Cascade, CascadeNode
from cascademine.features import (FEATURE_NAMES, N_FEATURES, FeatureConfig,
                                  FeatureExtractor, LABEL_LONG, LABEL_SHORT,
                                  LabeledCascade, balance, extract_features,
                                  label_cascades, load_examples, save_examples,
                                  build_examples, write_features_csv)
from cascademine.ingest import BusinessRecord, EventKind, UserRecord
from conftest import day, graph_from_edges, mk_cascade, random_graph
from oracles import reference_features


def user(uid, friends=(), review_count=5, avg=3.8, since=-400, fans=2, elite=1):
    since_date = None if since is None else day(since)
    return UserRecord(uid, tuple(friends), review_count, avg, since_date, fans, elite)


def business(bid, city="testville", stars=4.0, review_count=50, categories=3,
             is_open=True):
    return BusinessRecord(bid, city, stars, review_count, categories, is_open)


def cascade_of_size(n, index=0, business_id=0):
    nodes = [(i, i) for i in range(n)]
    edges = [(i, i + 1) for i in range(n - 1)]
    return mk_cascade(nodes, edges, index=index, business=business_id)


class TestConfig:
    def test_defaults_valid(self):
        cfg = FeatureConfig()
        assert cfg.k == 5 and cfg.percentile == 90.0 and cfg.min_big_cascades == 50

    @pytest.mark.parametrize("kwargs", [
        {"k": 1}, {"percentile": 50.0}, {"percentile": 100.0}, {"min_big_cascades": 0},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            FeatureConfig(**kwargs)


class TestLabeling:
    def test_threshold_and_eligibility(self):
        cascades = [cascade_of_size(2, i) for i in range(9)] + [cascade_of_size(20, 9)]
        cfg = FeatureConfig(k=5, min_big_cascades=1)
        res = label_cascades({"t": cascades}, cfg)
        assert res.thresholds["t"] == 2  # nearest rank: ceil(0.9*10)=9th of sorted
        rows = res.labeled["t"]
        # only the size-20 cascade is >= k=5, and it is Long
        assert len(rows) == 1
        assert rows[0].label == LABEL_LONG
        assert rows[0].cascade.size == 20

    def test_city_below_floor_excluded(self):
        # threshold = 25th of 27 sorted sizes = 2, so the two 9s are Long
        cascades = [cascade_of_size(2, i) for i in range(25)] + [
            cascade_of_size(9, 25), cascade_of_size(9, 26)]
        cfg = FeatureConfig(k=2, min_big_cascades=50)
        res = label_cascades({"smalltown": cascades}, cfg)
        assert res.labeled == {}
        assert res.excluded == [("smalltown", 2)]

    def test_planted_quantile_fraction(self, rng):
        sizes = rng.integers(2, 100, size=2000)
        cascades = [cascade_of_size(int(s), i) for i, s in enumerate(sizes)]
        cfg = FeatureConfig(k=2, min_big_cascades=1)
        res = label_cascades({"t": cascades}, cfg)
        rows = res.labeled["t"]
        frac = sum(1 for r in rows if r.label == LABEL_LONG) / len(rows)
        assert 0.05 <= frac <= 0.15

    def test_label_definition_strictly_greater(self):
        cascades = [cascade_of_size(s, i) for i, s in enumerate([2, 2, 3, 3, 8])]
        cfg = FeatureConfig(k=2, min_big_cascades=1, percentile=60.0)
        res = label_cascades({"t": cascades}, cfg)
        threshold = res.thresholds["t"]
        assert threshold == 3
        for row in res.labeled["t"]:
            assert (row.cascade.size > threshold) == (row.label == LABEL_LONG)
        assert sum(r.label == LABEL_LONG for r in res.labeled["t"]) == 1


class TestBalance:
    def make_labeled(self, n_long, n_short):
        rows = [LabeledCascade(cascade_of_size(9, i), LABEL_LONG) for i in range(n_long)]
        rows += [LabeledCascade(cascade_of_size(3, n_long + i), LABEL_SHORT)
                 for i in range(n_short)]
        return {"t": rows}

    def test_downsamples_shorts(self):
        out = balance(self.make_labeled(30, 400), FeatureConfig(min_big_cascades=1))
        rows = out["t"]
        assert sum(1 for r in rows if r.label == LABEL_LONG) == 30
        assert sum(1 for r in rows if r.label == LABEL_SHORT) == 30

    def test_same_seed_same_sample(self):
        labeled = self.make_labeled(10, 100)
        cfg = FeatureConfig(min_big_cascades=1, balance_seed=42)
        ids1 = [r.cascade.cascade_id for r in balance(labeled, cfg)["t"]]
        ids2 = [r.cascade.cascade_id for r in balance(labeled, cfg)["t"]]
        assert ids1 == ids2

    def test_different_seed_usually_differs(self):
        labeled = self.make_labeled(10, 200)
        ids = {tuple(r.cascade.cascade_id for r in balance(
            labeled, FeatureConfig(min_big_cascades=1, balance_seed=s))["t"])
            for s in range(5)}
        assert len(ids) > 1

    def test_selection_frequency_uniform(self):
        n_long, n_short, n_seeds = 30, 400, 200
        labeled = self.make_labeled(n_long, n_short)
        counts = np.zeros(n_short)
        for seed in range(n_seeds):
            cfg = FeatureConfig(min_big_cascades=1, balance_seed=seed)
            for row in balance(labeled, cfg)["t"]:
                if row.label == LABEL_SHORT:
                    counts[row.cascade.cascade_id[2] - n_long] += 1
        expected = n_seeds * n_long / n_short  # 15
        assert abs(counts.mean() - expected) < 1e-9  # exactly n_long picks per seed
        assert counts.std() < 4 * np.sqrt(expected)  # loose uniformity bound


def small_world():
    users = {0: user(0, friends=(1, 2)), 1: user(1, friends=(0,)),
             2: user(2, friends=(0,)), 3: user(3, avg=None, since=None)}
    businesses = {0: business(0), 1: business(1, stars=2.0)}
    graph = graph_from_edges([(0, 1), (0, 2)], 5)
    return users, businesses, graph


class TestExtract:
    def test_two_node_example(self):
        users, businesses, graph = small_world()
        cascade = mk_cascade(
            [(0, 1, EventKind.REVIEW, 4, 100, 2), (1, 4, EventKind.TIP, None, 30, 0)],
            [(0, 1)])
        vec = extract_features(cascade, 2, users, businesses, graph)
        named = dict(zip(FEATURE_NAMES, vec))
        assert named["root_stars"] == 4.0
        assert named["root_is_tip"] == 0.0
        assert named["root_votes_total"] == 2.0
        assert named["event_gap_days_mean"] == 3.0
        assert named["event_gap_days_max"] == 3.0
        assert named["prefix_span_days"] == 3.0
        assert named["nonroot_tip_frac"] == 1.0
        assert named["nonroot_friend_of_root_frac"] == 1.0
        assert named["root_event_weekday"] == float(day(1).weekday())
        assert named["biz_stars"] == 4.0

    def test_friendless_root_degree_zero(self):
        users, businesses, graph = small_world()
        cascade = mk_cascade([(3, 0), (4, 1)], [(3, 4)])
        vec = extract_features(cascade, 2, users, businesses, graph)
        named = dict(zip(FEATURE_NAMES, vec))
        assert named["root_degree_log1p"] == 0.0

    def test_requires_prefix(self):
        users, businesses, graph = small_world()
        cascade = mk_cascade([(0, 0), (1, 1)], [(0, 1)])
        with pytest.raises(ValueError):
            extract_features(cascade, 3, users, businesses, graph)

    def test_imputation_counted_and_finite(self):
        users, businesses, graph = small_world()
        # user 3 has no avg_stars/since; user 4 unknown; business 9 unknown
        cascade = mk_cascade([(3, 0), (4, 2)], [(3, 4)], business=9)
        extractor = FeatureExtractor(users, businesses, graph, k=2)
        vec = extractor.extract(cascade)
        assert np.all(np.isfinite(vec))
        assert extractor.imputed["root_avg_stars"] == 1
        assert extractor.imputed["root_account_age_days"] == 1
        assert extractor.imputed["biz_stars"] == 1
        assert extractor.imputed["nonroot_avg_stars_mean"] == 1

    def test_deterministic_bitwise(self, rng):
        users, businesses, graph, cascades = random_world(rng, 40)
        extractor = FeatureExtractor(users, businesses, graph, k=3)
        for cascade in cascades:
            if cascade.size < 3:
                continue
            v1 = extractor.extract(cascade)
            v2 = extractor.extract(cascade)
            assert v1.tobytes() == v2.tobytes()

    def test_matches_reference_implementation(self, rng):
        users, businesses, graph, cascades = random_world(rng, 120)
        extractor = FeatureExtractor(users, businesses, graph, k=4)
        checked = 0
        for cascade in cascades:
            if cascade.size < 4:
                continue
            vec = extractor.extract(cascade)
            ref = reference_features(cascade, 4, users, businesses, graph)
            for name, value in zip(FEATURE_NAMES, vec):
                assert abs(value - ref[name]) < 1e-9, name
            checked += 1
        assert checked >= 30

    def test_no_leakage_under_mutation(self, rng):
        users, businesses, graph, cascades = random_world(rng, 60)
        k = 3
        extractor = FeatureExtractor(users, businesses, graph, k=k)
        checked = 0
        for cascade in cascades:
            if cascade.size < k + 1:
                continue
            base = extractor.extract(cascade)
            for mutant in mutate_beyond_prefix(cascade, k, rng):
                assert extractor.extract(mutant).tobytes() == base.tobytes()
            checked += 1
        assert checked >= 10


def random_world(rng, n_cascades):
    """Random attribute tables plus synthetic cascades over them."""
    n_users = 60
    users = {}
    for u in range(n_users):
        if rng.random() < 0.15:
            continue  # missing record
        users[u] = user(
            u,
            review_count=int(rng.integers(0, 300)),
            avg=None if rng.random() < 0.2 else float(np.round(rng.uniform(1, 5), 2)),
            since=None if rng.random() < 0.1 else -int(rng.integers(100, 2000)),
            fans=int(rng.integers(0, 50)),
            elite=int(rng.integers(0, 5)),
        )
    businesses = {}
    for b in range(10):
        if rng.random() < 0.1:
            continue
        businesses[b] = business(
            b, city="testville", stars=float(rng.integers(2, 11)) / 2.0,
            review_count=int(rng.integers(0, 500)),
            categories=int(rng.integers(0, 6)), is_open=bool(rng.random() < 0.8))
    graph = random_graph(rng, n_users, 0.08)

    cascades = []
    for i in range(n_cascades):
        n = int(rng.integers(2, 9))
        members = list(rng.choice(n_users, size=n, replace=False))
        specs = []
        for u in members:
            kind = EventKind.REVIEW if rng.random() < 0.7 else EventKind.TIP
            stars = int(rng.integers(1, 6)) if kind is EventKind.REVIEW else None
            specs.append((int(u), int(rng.integers(0, 30)), kind, stars,
                          int(rng.integers(1, 300)), int(rng.integers(0, 6))))
        ordered = sorted(specs, key=lambda s: (s[1], s[0]))
        edges = [(ordered[j][0], ordered[j + 1][0]) for j in range(len(ordered) - 1)]
        cascades.append(mk_cascade(specs, edges, business=int(rng.integers(0, 10)),
                                   index=i))
    return users, businesses, graph, cascades


def mutate_beyond_prefix(cascade, k, rng):
    """Mutations that only touch nodes after position k or later edges."""
    nodes = sorted(cascade.nodes, key=lambda n: (n.date, n.user))
    prefix, suffix = nodes[:k], nodes[k:]
    last_day = max(n.date for n in nodes)
    big_user = 10_000 + int(rng.integers(0, 1000))

    # 1: change payloads and push dates later on suffix nodes
    mutated = [CascadeNode(n.user, n.date + dt.timedelta(days=3), EventKind.TIP,
                           None, n.text_len + 7, n.votes + 5) for n in suffix]
    yield Cascade(cascade.cascade_id, cascade.city, cascade.business_id,
                  tuple(prefix + mutated), cascade.edges)

    # 2: append brand-new later nodes and edges among them
    extra = [CascadeNode(big_user + j, last_day + dt.timedelta(days=j + 1),
                         EventKind.REVIEW, 5, 10, 0) for j in range(3)]
    new_edges = tuple(list(cascade.edges) + [(extra[0].user, extra[1].user),
                                             (extra[1].user, extra[2].user)])
    yield Cascade(cascade.cascade_id, cascade.city, cascade.business_id,
                  tuple(nodes + extra), new_edges)

    # 3: relabel a suffix node's user id upward (stays after the prefix)
    if suffix:
        target = suffix[0]
        relabeled = CascadeNode(big_user, target.date, target.kind, target.stars,
                                target.text_len, target.votes)
        rest = [relabeled if n is target else n for n in suffix]
        edges = tuple((big_user if u == target.user else u,
                       big_user if v == target.user else v)
                      for u, v in cascade.edges)
        yield Cascade(cascade.cascade_id, cascade.city, cascade.business_id,
                      tuple(prefix + rest), edges)


class TestIO:
    def test_examples_round_trip(self, tmp_path, rng):
        users, businesses, graph, cascades = random_world(rng, 30)
        extractor = FeatureExtractor(users, businesses, graph, k=2)
        balanced = {"testville": [LabeledCascade(c, i % 2) for i, c in
                                  enumerate(cascades)]}
        examples = build_examples(balanced, extractor)
        path = tmp_path / "features.pkl"
        save_examples(examples, path)
        loaded = load_examples(path)
        assert len(loaded) == len(examples)
        for a, b in zip(examples, loaded):
            assert a.cascade_id == b.cascade_id
            assert a.label == b.label
            assert np.array_equal(a.features, b.features)

    def test_csv_header_names_all_features(self, tmp_path, rng):
        users, businesses, graph, cascades = random_world(rng, 5)
        extractor = FeatureExtractor(users, businesses, graph, k=2)
        examples = build_examples(
            {"testville": [LabeledCascade(c, LABEL_SHORT) for c in cascades]},
            extractor)
        path = tmp_path / "features.csv"
        write_features_csv(examples, path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[:3] == ["cascade_id", "city", "label"]
        assert tuple(header[3:]) == FEATURE_NAMES
        assert len(header) == 3 + N_FEATURES
