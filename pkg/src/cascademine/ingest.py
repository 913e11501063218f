"""Yelp-open-dataset JSON-lines ingestion into interned, city-partitioned tables.

Expected input files (one JSON object per line, field names as in the public
Yelp dataset dumps):

  review:   review_id, user_id, business_id, stars, date, text, useful, funny, cool
  tip:      user_id, business_id, date, text, likes
  user:     user_id, friends, review_count, average_stars, yelping_since, fans, elite
  business: business_id, city, stars, review_count, categories, is_open

Different dataset rounds encode ``friends``/``elite``/``categories`` either as
JSON arrays or as comma-separated strings and dates with or without a time
part; both forms are accepted. Malformed lines are skipped and counted per
file, never fatal. String ids are interned to dense integers in sorted order
of the raw id strings, so re-ingesting the same files reproduces the exact
same assignment.

The binary cache written by :func:`save_ingest` is a pickle of
``{"format": "cascademine.ingest", "version": 1, "result": IngestResult}``;
:func:`load_ingest` refuses anything else.
"""

from __future__ import annotations

import datetime as dt
import json
import pickle
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable

from cascademine.errors import DataError

CACHE_FORMAT = "cascademine.ingest"
CACHE_VERSION = 1


class EventKind(IntEnum):
    REVIEW = 0
    TIP = 1


KIND_NAMES = {EventKind.REVIEW: "review", EventKind.TIP: "tip"}
KIND_FROM_NAME = {v: k for k, v in KIND_NAMES.items()}


@dataclass(frozen=True, slots=True)
class Event:
    """One review or tip, reduced to the fields the pipeline consumes."""

    user_id: int
    business_id: int
    date: dt.date
    kind: EventKind
    stars: int | None  # 1..5 for reviews when present; always None for tips
    text_len: int
    useful: int
    funny: int
    cool: int
    likes: int

    @property
    def votes(self) -> int:
        return self.useful + self.funny + self.cool + self.likes


@dataclass(frozen=True, slots=True)
class UserRecord:
    user_id: int
    friends: tuple[int, ...]  # sorted, deduplicated, never contains user_id
    review_count: int
    average_stars: float | None
    yelping_since: dt.date | None
    fans: int
    elite_years: int


@dataclass(frozen=True, slots=True)
class BusinessRecord:
    business_id: int
    city: str  # normalized, never empty
    stars: float
    review_count: int
    category_count: int
    is_open: bool


@dataclass(frozen=True)
class DatasetPaths:
    business: Path
    user: Path
    review: Path
    tip: Path

    def all(self) -> dict[str, Path]:
        return {
            "business": Path(self.business),
            "user": Path(self.user),
            "review": Path(self.review),
            "tip": Path(self.tip),
        }


@dataclass
class IngestResult:
    """Normalized tables keyed by dense interned ids.

    ``events_by_city`` maps normalized city name to events sorted by
    (business_id, date, user_id, kind); cities are disjoint and exhaustive
    over retained events. ``user_ids`` / ``business_ids`` map interned id
    back to the raw string id.
    """

    events_by_city: dict[str, list[Event]]
    users: dict[int, UserRecord]
    businesses: dict[int, BusinessRecord]
    user_ids: list[str]
    business_ids: list[str]
    drop_counts: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def n_events(self) -> int:
        return sum(len(v) for v in self.events_by_city.values())

    def all_events(self) -> Iterable[Event]:
        for city in self.events_by_city:
            yield from self.events_by_city[city]


def normalize_city(raw) -> str:
    """Trim, case-fold, and collapse whitespace runs in a raw city string."""
    if not isinstance(raw, str):
        return ""
    return " ".join(raw.split()).casefold()


def _parse_day(value) -> dt.date:
    # Dates appear as "YYYY-MM-DD" or "YYYY-MM-DD HH:MM:SS"; day precision only.
    if not isinstance(value, str) or len(value) < 10:
        raise ValueError(f"bad date: {value!r}")
    return dt.date.fromisoformat(value[:10])


def _as_int(value, default: int = 0) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        return default
    return n if n >= 0 else default


def _event_stars(value) -> int | None:
    if value is None:
        return None
    try:
        s = int(round(float(value)))
    except (TypeError, ValueError):
        return None
    return s if 1 <= s <= 5 else None


def _id_list(value) -> list[str]:
    # friends / elite fields: JSON array in some rounds, comma string in others
    if isinstance(value, list):
        items = [str(x).strip() for x in value]
    elif isinstance(value, str):
        items = [x.strip() for x in value.split(",")]
    else:
        return []
    return [x for x in items if x and x != "None"]


def _iter_json_lines(path: Path):
    """Yield (line_number, parsed object or None-if-malformed) for a file."""
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError:
                yield None
                continue
            yield obj if isinstance(obj, dict) else None


def _parse_businesses(path: Path, counts: Counter):
    records = {}
    for obj in _iter_json_lines(path):
        counts["lines"] += 1
        if obj is None or not isinstance(obj.get("business_id"), str):
            counts["malformed"] += 1
            continue
        city = normalize_city(obj.get("city"))
        if not city:
            counts["empty_city"] += 1
            continue
        try:
            stars = float(obj.get("stars", 0.0) or 0.0)
        except (TypeError, ValueError):
            stars = 0.0
        records[obj["business_id"]] = (
            city,
            stars,
            _as_int(obj.get("review_count")),
            len(_id_list(obj.get("categories"))),
            bool(_as_int(obj.get("is_open"), 0)),
        )
        counts["retained"] += 1
    return records


def _parse_users(path: Path, counts: Counter):
    records = {}
    for obj in _iter_json_lines(path):
        counts["lines"] += 1
        if obj is None or not isinstance(obj.get("user_id"), str):
            counts["malformed"] += 1
            continue
        try:
            avg = float(obj["average_stars"]) if obj.get("average_stars") is not None else None
        except (TypeError, ValueError):
            avg = None
        try:
            since = _parse_day(obj.get("yelping_since"))
        except ValueError:
            since = None
        records[obj["user_id"]] = (
            _id_list(obj.get("friends")),
            _as_int(obj.get("review_count")),
            avg,
            since,
            _as_int(obj.get("fans")),
            len(_id_list(obj.get("elite"))),
        )
        counts["retained"] += 1
    return records


def _parse_events(path: Path, kind: EventKind, known_businesses, counts: Counter):
    rows = []
    for obj in _iter_json_lines(path):
        counts["lines"] += 1
        if obj is None:
            counts["malformed"] += 1
            continue
        uid, bid = obj.get("user_id"), obj.get("business_id")
        if not isinstance(uid, str) or not isinstance(bid, str):
            counts["malformed"] += 1
            continue
        try:
            day = _parse_day(obj.get("date"))
        except ValueError:
            counts["malformed"] += 1
            continue
        if bid not in known_businesses:
            counts["unknown_business"] += 1
            continue
        text = obj.get("text")
        text_len = len(text) if isinstance(text, str) else 0
        if kind is EventKind.REVIEW:
            row = (uid, bid, day, kind, _event_stars(obj.get("stars")), text_len,
                   _as_int(obj.get("useful")), _as_int(obj.get("funny")),
                   _as_int(obj.get("cool")), 0)
        else:
            row = (uid, bid, day, kind, None, text_len, 0, 0, 0, _as_int(obj.get("likes")))
        rows.append(row)
        counts["retained"] += 1
    return rows


def ingest_dataset(paths: DatasetPaths) -> IngestResult:
    """Parse the four dataset files into interned, city-partitioned tables.

    Raises DataError for a missing file or when no valid business survives;
    malformed lines only increment per-file drop counters.
    """
    path_map = paths.all()
    for name, p in path_map.items():
        if not p.is_file():
            raise DataError(f"missing {name} file: {p}")

    counts = {name: Counter() for name in ("business", "user", "review", "tip")}
    raw_businesses = _parse_businesses(path_map["business"], counts["business"])
    if not raw_businesses:
        raise DataError(f"no valid businesses in {path_map['business']}")
    raw_users = _parse_users(path_map["user"], counts["user"])
    raw_events = _parse_events(path_map["review"], EventKind.REVIEW, raw_businesses, counts["review"])
    raw_events += _parse_events(path_map["tip"], EventKind.TIP, raw_businesses, counts["tip"])

    # Interning: sorted raw-id order, so the assignment is a pure function of
    # the input content and not of file ordering.
    user_universe = set(raw_users)
    for friends, *_ in raw_users.values():
        user_universe.update(friends)
    user_universe.update(row[0] for row in raw_events)
    user_ids = sorted(user_universe)
    user_index = {raw: i for i, raw in enumerate(user_ids)}
    business_ids = sorted(raw_businesses)
    business_index = {raw: i for i, raw in enumerate(business_ids)}

    users: dict[int, UserRecord] = {}
    for raw in sorted(raw_users):
        friends, review_count, avg, since, fans, elite_years = raw_users[raw]
        uid = user_index[raw]
        friend_ids = sorted({user_index[f] for f in friends} - {uid})
        users[uid] = UserRecord(uid, tuple(friend_ids), review_count, avg, since, fans, elite_years)

    businesses: dict[int, BusinessRecord] = {}
    for raw in business_ids:
        city, stars, review_count, category_count, is_open = raw_businesses[raw]
        bid = business_index[raw]
        businesses[bid] = BusinessRecord(bid, city, stars, review_count, category_count, is_open)

    events_by_city: dict[str, list[Event]] = {}
    for raw_uid, raw_bid, day, kind, stars, text_len, useful, funny, cool, likes in raw_events:
        bid = business_index[raw_bid]
        event = Event(user_index[raw_uid], bid, day, kind,
                      stars, text_len, useful, funny, cool, likes)
        events_by_city.setdefault(businesses[bid].city, []).append(event)

    for city in events_by_city:
        events_by_city[city].sort(key=lambda e: (e.business_id, e.date, e.user_id, e.kind))
    events_by_city = {city: events_by_city[city] for city in sorted(events_by_city)}

    return IngestResult(
        events_by_city=events_by_city,
        users=users,
        businesses=businesses,
        user_ids=user_ids,
        business_ids=business_ids,
        drop_counts={name: dict(c) for name, c in counts.items()},
    )


def yearly_activity_counts(events: Iterable[Event]) -> list[tuple[int, int, int]]:
    """Tally (year, review_count, tip_count), ascending by year."""
    reviews: Counter = Counter()
    tips: Counter = Counter()
    for event in events:
        if event.kind is EventKind.REVIEW:
            reviews[event.date.year] += 1
        else:
            tips[event.date.year] += 1
    years = sorted(set(reviews) | set(tips))
    return [(year, reviews.get(year, 0), tips.get(year, 0)) for year in years]


def save_ingest(result: IngestResult, path) -> None:
    payload = {"format": CACHE_FORMAT, "version": CACHE_VERSION, "result": result}
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)


def load_ingest(path) -> IngestResult:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != CACHE_FORMAT:
        raise DataError(f"not an ingest cache: {path}")
    if payload.get("version") != CACHE_VERSION:
        raise DataError(f"unsupported ingest cache version in {path}")
    return payload["result"]
