"""Prefix features and long/short labels for cascade growth prediction.

A cascade is labeled Long when its size exceeds the city's nearest-rank
percentile threshold (default the 90th). Features are computed from the first
k nodes in (date, user) order only, never from anything later, grouped into
five blocks: business attributes, root-user attributes, non-root-user
aggregates, the root event, and non-root event aggregates. Count-like inputs
go through log1p before aggregation; star-valued gaps are imputed with the
city's mean business star rating, everything else with zero, and every
imputed value increments a per-feature counter.
"""

from __future__ import annotations

import csv
import pickle
from collections import Counter
from dataclasses import dataclass, field
from math import log1p
from typing import Mapping, Sequence

import numpy as np

from cascademine.cascades import Cascade, CascadeId
from cascademine.ingest import BusinessRecord, EventKind, UserRecord
from cascademine.social import SocialGraph
from cascademine.util import nearest_rank, substream_seed

LABEL_SHORT = 0
LABEL_LONG = 1
LABEL_NAMES = {LABEL_SHORT: "short", LABEL_LONG: "long"}

FEATURE_NAMES: tuple[str, ...] = (
    # business
    "biz_stars",
    "biz_review_count_log1p",
    "biz_category_count",
    "biz_is_open",
    # root node
    "root_degree_log1p",
    "root_review_count_log1p",
    "root_avg_stars",
    "root_account_age_days",
    "root_fans_log1p",
    "root_elite_years",
    # non-root nodes
    "nonroot_degree_log1p_mean",
    "nonroot_degree_log1p_max",
    "nonroot_review_count_log1p_mean",
    "nonroot_review_count_log1p_max",
    "nonroot_avg_stars_mean",
    "nonroot_fans_log1p_mean",
    "nonroot_elite_years_mean",
    "nonroot_friend_of_root_frac",
    # root event
    "root_stars",
    "root_text_len_log1p",
    "root_votes_total",
    "root_is_tip",
    "root_event_weekday",
    # non-root events
    "nonroot_stars_mean",
    "nonroot_text_len_log1p_mean",
    "nonroot_votes_mean",
    "nonroot_tip_frac",
    "event_gap_days_mean",
    "event_gap_days_max",
    "prefix_span_days",
)

N_FEATURES = len(FEATURE_NAMES)
FALLBACK_STARS = 3.0  # midpoint of the 1..5 scale, used only with no businesses at all


@dataclass(frozen=True)
class FeatureConfig:
    k: int = 5  # prefix size in nodes
    percentile: float = 90.0  # long/short threshold percentile
    min_big_cascades: int = 50  # city eligibility floor on Long count
    balance_seed: int = 0  # substream seed for short-cascade downsampling

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 50.0 < self.percentile < 100.0:
            raise ValueError("percentile must lie in (50, 100)")
        if self.min_big_cascades < 1:
            raise ValueError("min_big_cascades must be positive")


@dataclass(frozen=True, slots=True)
class LabeledCascade:
    cascade: Cascade
    label: int  # LABEL_LONG or LABEL_SHORT


@dataclass(frozen=True, slots=True)
class LabeledExample:
    cascade_id: CascadeId
    city: str
    features: np.ndarray  # length N_FEATURES, float64
    label: int


@dataclass
class LabelingResult:
    labeled: dict[str, list[LabeledCascade]]  # included cities only
    thresholds: dict[str, int]  # percentile threshold per city (all cities)
    excluded: list[tuple[str, int]]  # (city, number of Long cascades found)


def label_cascades(cascades_by_city: Mapping[str, Sequence[Cascade]],
                   config: FeatureConfig) -> LabelingResult:
    """Label eligible cascades (size >= k) per city; drop cities whose Long
    count falls below the floor, reporting them instead."""
    labeled: dict[str, list[LabeledCascade]] = {}
    thresholds: dict[str, int] = {}
    excluded: list[tuple[str, int]] = []
    for city in sorted(cascades_by_city):
        cascades = cascades_by_city[city]
        if not cascades:
            excluded.append((city, 0))
            continue
        sizes = sorted(c.size for c in cascades)
        threshold = int(nearest_rank(sizes, config.percentile))
        thresholds[city] = threshold
        rows = [
            LabeledCascade(c, LABEL_LONG if c.size > threshold else LABEL_SHORT)
            for c in sorted(cascades, key=lambda c: c.cascade_id)
            if c.size >= config.k
        ]
        n_long = sum(1 for r in rows if r.label == LABEL_LONG)
        if n_long < config.min_big_cascades:
            excluded.append((city, n_long))
        else:
            labeled[city] = rows
    return LabelingResult(labeled=labeled, thresholds=thresholds, excluded=excluded)


def balance(labeled_by_city: Mapping[str, Sequence[LabeledCascade]],
            config: FeatureConfig) -> dict[str, list[LabeledCascade]]:
    """Downsample Short cascades uniformly without replacement to match the
    Long count per city. Deterministic given balance_seed."""
    out: dict[str, list[LabeledCascade]] = {}
    for city in sorted(labeled_by_city):
        rows = sorted(labeled_by_city[city], key=lambda r: r.cascade.cascade_id)
        longs = [r for r in rows if r.label == LABEL_LONG]
        shorts = [r for r in rows if r.label == LABEL_SHORT]
        n = min(len(longs), len(shorts))
        rng = np.random.default_rng(substream_seed(config.balance_seed, "balance", city))
        if len(shorts) > n:
            picked_idx = np.sort(rng.choice(len(shorts), size=n, replace=False))
            shorts = [shorts[i] for i in picked_idx]
        out[city] = longs[:n] + shorts
    return out


class FeatureExtractor:
    """Computes feature vectors against read-only attribute tables.

    ``imputed`` counts every value that had to be filled in, keyed by the
    feature it fed, so gaps in the user/business tables reconcile exactly
    with what the matrix contains.
    """

    def __init__(self, users: Mapping[int, UserRecord],
                 businesses: Mapping[int, BusinessRecord],
                 graph: SocialGraph, k: int = 5):
        if k < 2:
            raise ValueError("k must be at least 2")
        self.users = users
        self.businesses = businesses
        self.graph = graph
        self.k = k
        self.imputed: Counter = Counter()
        self._city_stars: dict[str, float] = {}

    def _city_mean_stars(self, city: str) -> float:
        cached = self._city_stars.get(city)
        if cached is not None:
            return cached
        stars = [b.stars for b in self.businesses.values() if b.city == city]
        if not stars:
            stars = [b.stars for b in self.businesses.values()]
        value = float(np.mean(stars)) if stars else FALLBACK_STARS
        self._city_stars[city] = value
        return value

    def _stars_or_city_mean(self, value, city: str, feature: str) -> float:
        if value is None:
            self.imputed[feature] += 1
            return self._city_mean_stars(city)
        return float(value)

    def extract(self, cascade: Cascade) -> np.ndarray:
        if cascade.size < self.k:
            raise ValueError(
                f"cascade {cascade.cascade_id} has {cascade.size} nodes, needs >= {self.k}"
            )
        city = cascade.city
        prefix = sorted(cascade.nodes, key=lambda n: (n.date, n.user))[: self.k]
        root = prefix[0]
        rest = prefix[1:]

        v = np.empty(N_FEATURES, dtype=np.float64)

        # business block
        biz = self.businesses.get(cascade.business_id)
        if biz is None:
            for name in ("biz_stars", "biz_review_count_log1p", "biz_category_count",
                         "biz_is_open"):
                self.imputed[name] += 1
            v[0] = self._city_mean_stars(city)
            v[1] = 0.0
            v[2] = 0.0
            v[3] = 0.0
        else:
            v[0] = biz.stars
            v[1] = log1p(biz.review_count)
            v[2] = float(biz.category_count)
            v[3] = 1.0 if biz.is_open else 0.0

        # root node block
        root_user = self.users.get(root.user)
        v[4] = log1p(self.graph.degree(root.user))
        if root_user is None:
            for name in ("root_review_count_log1p", "root_avg_stars",
                         "root_account_age_days", "root_fans_log1p", "root_elite_years"):
                self.imputed[name] += 1
            v[5] = 0.0
            v[6] = self._city_mean_stars(city)
            v[7] = 0.0
            v[8] = 0.0
            v[9] = 0.0
        else:
            v[5] = log1p(root_user.review_count)
            v[6] = self._stars_or_city_mean(root_user.average_stars, city, "root_avg_stars")
            if root_user.yelping_since is None:
                self.imputed["root_account_age_days"] += 1
                v[7] = 0.0
            else:
                v[7] = float(max((root.date - root_user.yelping_since).days, 0))
            v[8] = log1p(root_user.fans)
            v[9] = float(root_user.elite_years)

        # non-root node block (k >= 2 guarantees rest is nonempty)
        degrees = [log1p(self.graph.degree(n.user)) for n in rest]
        review_counts = []
        avg_stars = []
        fans = []
        elite = []
        friend_hits = 0
        for n in rest:
            rec = self.users.get(n.user)
            if rec is None:
                for name in ("nonroot_review_count_log1p_mean", "nonroot_avg_stars_mean",
                             "nonroot_fans_log1p_mean", "nonroot_elite_years_mean"):
                    self.imputed[name] += 1
                review_counts.append(0.0)
                avg_stars.append(self._city_mean_stars(city))
                fans.append(0.0)
                elite.append(0.0)
            else:
                review_counts.append(log1p(rec.review_count))
                avg_stars.append(self._stars_or_city_mean(
                    rec.average_stars, city, "nonroot_avg_stars_mean"))
                fans.append(log1p(rec.fans))
                elite.append(float(rec.elite_years))
            if self.graph.are_friends(root.user, n.user):
                friend_hits += 1
        v[10] = float(np.mean(degrees))
        v[11] = float(np.max(degrees))
        v[12] = float(np.mean(review_counts))
        v[13] = float(np.max(review_counts))
        v[14] = float(np.mean(avg_stars))
        v[15] = float(np.mean(fans))
        v[16] = float(np.mean(elite))
        v[17] = friend_hits / len(rest)

        # root event block
        v[18] = self._stars_or_city_mean(root.stars, city, "root_stars")
        v[19] = log1p(root.text_len)
        v[20] = float(root.votes)
        v[21] = 1.0 if root.kind is EventKind.TIP else 0.0
        v[22] = float(root.date.weekday())

        # non-root event block
        stars = [self._stars_or_city_mean(n.stars, city, "nonroot_stars_mean") for n in rest]
        v[23] = float(np.mean(stars))
        v[24] = float(np.mean([log1p(n.text_len) for n in rest]))
        v[25] = float(np.mean([float(n.votes) for n in rest]))
        v[26] = sum(1 for n in rest if n.kind is EventKind.TIP) / len(rest)
        gaps = [float((b.date - a.date).days) for a, b in zip(prefix, prefix[1:])]
        v[27] = float(np.mean(gaps))
        v[28] = float(np.max(gaps))
        v[29] = float((prefix[-1].date - root.date).days)

        return v


def extract_features(cascade: Cascade, k: int, users: Mapping[int, UserRecord],
                     businesses: Mapping[int, BusinessRecord],
                     graph: SocialGraph) -> np.ndarray:
    """One-shot wrapper around FeatureExtractor for a single cascade."""
    return FeatureExtractor(users, businesses, graph, k).extract(cascade)


def build_examples(balanced_by_city: Mapping[str, Sequence[LabeledCascade]],
                   extractor: FeatureExtractor) -> list[LabeledExample]:
    """Materialize feature vectors for balanced sets, cities and ids sorted."""
    examples = []
    for city in sorted(balanced_by_city):
        for row in sorted(balanced_by_city[city], key=lambda r: r.cascade.cascade_id):
            examples.append(LabeledExample(
                cascade_id=row.cascade.cascade_id,
                city=city,
                features=extractor.extract(row.cascade),
                label=row.label,
            ))
    return examples


def examples_matrix(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([e.features for e in examples]) if examples else np.empty((0, N_FEATURES))
    y = np.array([e.label for e in examples], dtype=np.int64)
    return X, y


def write_features_csv(examples: Sequence[LabeledExample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cascade_id", "city", "label", *FEATURE_NAMES])
        for e in examples:
            cid = "{}:{}:{}".format(*e.cascade_id)
            writer.writerow([cid, e.city, LABEL_NAMES[e.label],
                             *[repr(float(x)) for x in e.features]])


FEATURES_CACHE_FORMAT = "cascademine.features"
FEATURES_CACHE_VERSION = 1


def save_examples(examples: Sequence[LabeledExample], path) -> None:
    payload = {
        "format": FEATURES_CACHE_FORMAT,
        "version": FEATURES_CACHE_VERSION,
        "feature_names": list(FEATURE_NAMES),
        "examples": [
            (e.cascade_id, e.city, e.features.tolist(), e.label) for e in examples
        ],
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)


def load_examples(path) -> list[LabeledExample]:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != FEATURES_CACHE_FORMAT:
        raise ValueError(f"not a features cache: {path}")
    if payload.get("version") != FEATURES_CACHE_VERSION:
        raise ValueError(f"unsupported features cache version in {path}")
    return [
        LabeledExample(tuple(cid), city, np.asarray(vec, dtype=np.float64), label)
        for cid, city, vec, label in payload["examples"]
    ]
