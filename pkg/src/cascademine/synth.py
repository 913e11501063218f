"""Synthetic dataset generator in the Yelp JSON-lines format.

Produces the four input files plus a ground-truth side file of the influence
edges the generator actually followed, one JSON object per line:
{"business": raw_id, "src": raw_user, "dst": raw_user}. Events are seeded
spontaneously and then propagated along friendships: an active user's friend
joins with probability ``influence_prob`` after a 0-3 day delay. Everything is
driven by named substreams of one seed, so identical configs yield
byte-identical files.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cascademine.ingest import DatasetPaths
from cascademine.util import substream_seed

_CATEGORY_POOL = (
    "Restaurants", "Bars", "Coffee & Tea", "Shopping", "Beauty & Spas",
    "Automotive", "Nightlife", "Fitness", "Hotels", "Grocery",
)
_EPOCH = dt.date(2009, 1, 1)
_SPAN_DAYS = 5 * 365


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 50
    n_businesses: int = 10
    n_events: int = 200
    friend_prob: float = 0.1
    influence_prob: float = 0.3
    seed: int = 0
    n_cities: int = 2
    topology: str = "random"  # "random" (Erdos-Renyi) or "chain" (u_i - u_{i+1})

    def __post_init__(self):
        if min(self.n_users, self.n_businesses, self.n_events, self.n_cities) <= 0:
            raise ValueError("counts must be positive")
        if self.n_events > self.n_users * self.n_businesses:
            raise ValueError("n_events cannot exceed n_users * n_businesses "
                             "(one event per user per business)")
        if not 0.0 <= self.friend_prob <= 1.0 or not 0.0 <= self.influence_prob <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.topology not in ("random", "chain"):
            raise ValueError(f"unknown topology {self.topology!r}")


@dataclass(frozen=True)
class SynthResult:
    paths: DatasetPaths
    truth_path: Path
    n_events: int
    n_truth_edges: int


def _friendships(cfg: SynthConfig, rng: np.random.Generator) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(cfg.n_users)]
    if cfg.topology == "chain":
        for u in range(cfg.n_users - 1):
            adj[u].append(u + 1)
            adj[u + 1].append(u)
        return adj
    for u in range(cfg.n_users):
        for v in range(u + 1, cfg.n_users):
            if rng.random() < cfg.friend_prob:
                adj[u].append(v)
                adj[v].append(u)
    return adj


def _event_payload(kind: str, rng: np.random.Generator) -> dict:
    if kind == "review":
        return {
            "stars": int(rng.integers(1, 6)),
            "text_len": int(rng.integers(5, 400)),
            "useful": int(rng.poisson(1.0)),
            "funny": int(rng.poisson(0.5)),
            "cool": int(rng.poisson(0.5)),
        }
    return {"text_len": int(rng.integers(5, 80)), "likes": int(rng.poisson(0.5))}


def generate_synthetic(cfg: SynthConfig, out_dir) -> SynthResult:
    """Write business/user/review/tip JSON-lines files plus the truth file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(substream_seed(cfg.seed, "synth"))

    user_names = [f"u{i:05d}" for i in range(cfg.n_users)]
    business_names = [f"b{i:05d}" for i in range(cfg.n_businesses)]
    cities = [f"city{i:02d}" for i in range(cfg.n_cities)]
    business_city = [cities[int(rng.integers(0, cfg.n_cities))] for _ in business_names]
    adj = _friendships(cfg, rng)

    # events[(user, business)] = (date, kind, payload); grown by propagation
    events: dict[tuple[int, int], tuple[dt.date, str, dict]] = {}
    truth_edges: list[tuple[int, int, int]] = []  # (business, src, dst)

    def add_event(u: int, b: int, day: dt.date) -> None:
        kind = "review" if rng.random() < 0.7 else "tip"
        events[(u, b)] = (day, kind, _event_payload(kind, rng))

    while len(events) < cfg.n_events:
        b = int(rng.integers(0, cfg.n_businesses))
        u = int(rng.integers(0, cfg.n_users))
        if (u, b) in events:
            continue
        day = _EPOCH + dt.timedelta(days=int(rng.integers(0, _SPAN_DAYS)))
        add_event(u, b, day)
        frontier = [(u, day)]
        while frontier and len(events) < cfg.n_events:
            src, src_day = frontier.pop(0)
            for friend in adj[src]:
                if (friend, b) in events or len(events) >= cfg.n_events:
                    continue
                if rng.random() < cfg.influence_prob:
                    delay = int(rng.integers(0, 4))
                    friend_day = src_day + dt.timedelta(days=delay)
                    add_event(friend, b, friend_day)
                    truth_edges.append((b, src, friend))
                    frontier.append((friend, friend_day))

    event_rows = sorted(
        (b, day, u, kind, payload) for (u, b), (day, kind, payload) in events.items()
    )

    reviews_by_user: dict[int, list[int]] = {}
    first_day_by_user: dict[int, dt.date] = {}
    for b, day, u, kind, payload in event_rows:
        if kind == "review":
            reviews_by_user.setdefault(u, []).append(payload["stars"])
        prev = first_day_by_user.get(u)
        if prev is None or day < prev:
            first_day_by_user[u] = day

    review_path = out / "review.json"
    tip_path = out / "tip.json"
    with open(review_path, "w", encoding="ascii", newline="\n") as rfh, \
            open(tip_path, "w", encoding="ascii", newline="\n") as tfh:
        n_review = 0
        for b, day, u, kind, payload in event_rows:
            base = {
                "user_id": user_names[u],
                "business_id": business_names[b],
                "date": day.isoformat(),
                "text": "x" * payload["text_len"],
            }
            if kind == "review":
                n_review += 1
                base.update(review_id=f"r{n_review:06d}", stars=payload["stars"],
                            useful=payload["useful"], funny=payload["funny"],
                            cool=payload["cool"])
                rfh.write(json.dumps(base) + "\n")
            else:
                base.update(likes=payload["likes"])
                tfh.write(json.dumps(base) + "\n")

    user_path = out / "user.json"
    with open(user_path, "w", encoding="ascii", newline="\n") as fh:
        for u, name in enumerate(user_names):
            stars = reviews_by_user.get(u, [])
            first = first_day_by_user.get(u, _EPOCH)
            since = first - dt.timedelta(days=int(rng.integers(30, 1000)))
            elite_count = int(rng.integers(0, 4)) if rng.random() < 0.2 else 0
            record = {
                "user_id": name,
                "friends": [user_names[v] for v in adj[u]],
                "review_count": len(stars),
                "average_stars": round(float(np.mean(stars)), 2) if stars else None,
                "yelping_since": since.isoformat(),
                "fans": int(rng.poisson(2.0)),
                "elite": [str(2009 + i) for i in range(elite_count)],
            }
            fh.write(json.dumps(record) + "\n")

    events_per_business = [0] * cfg.n_businesses
    for b, *_ in event_rows:
        events_per_business[b] += 1
    business_path = out / "business.json"
    with open(business_path, "w", encoding="ascii", newline="\n") as fh:
        for b, name in enumerate(business_names):
            n_cat = int(rng.integers(1, 4))
            cats = list(rng.choice(len(_CATEGORY_POOL), size=n_cat, replace=False))
            record = {
                "business_id": name,
                "city": business_city[b],
                "stars": float(rng.integers(2, 11)) / 2.0,
                "review_count": events_per_business[b],
                "categories": ", ".join(_CATEGORY_POOL[i] for i in sorted(cats)),
                "is_open": int(rng.random() < 0.9),
            }
            fh.write(json.dumps(record) + "\n")

    truth_path = out / "truth_edges.json"
    with open(truth_path, "w", encoding="ascii", newline="\n") as fh:
        for b, src, dst in truth_edges:
            fh.write(json.dumps({
                "business": business_names[b],
                "src": user_names[src],
                "dst": user_names[dst],
            }) + "\n")

    paths = DatasetPaths(business=business_path, user=user_path,
                         review=review_path, tip=tip_path)
    return SynthResult(paths=paths, truth_path=truth_path,
                       n_events=len(events), n_truth_edges=len(truth_edges))
