"""Per-business influence graphs and their connected components (cascades).

For one business, each user is collapsed to their first event there. A
directed edge u->v exists when u and v are friends and u acted strictly
earlier (optionally within ``window_days``); two friends acting on the same
day get the reciprocal pair u->v and v->u. Cascades are the weakly connected
components with at least two nodes; users whose activity links to no friend
are discarded.

The on-disk store is JSON lines, one cascade per line:

  {"cascade_id": [city, business_id, index], "city": ..., "business_id": ...,
   "nodes": [{"user": u, "date": "YYYY-MM-DD", "kind": "review"|"tip",
              "stars": 4|null, "text_len": n, "votes": n}, ...],
   "edges": [[src, dst], ...]}

Nodes are ordered by (date, user id), edges lexicographically, cascades by
cascade_id, so the file is byte-stable for fixed inputs. The per-node
``stars``/``text_len``/``votes`` carry the first event's payload so prefix
features can be computed from the store alone.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, Mapping, Sequence

from cascademine.ingest import Event, EventKind, KIND_FROM_NAME, KIND_NAMES
from cascademine.social import SocialGraph
from cascademine.util import nearest_rank

CascadeId = tuple[str, int, int]


@dataclass(frozen=True, slots=True)
class CascadeNode:
    user: int
    date: dt.date
    kind: EventKind
    stars: int | None
    text_len: int
    votes: int

    def sort_key(self):
        return (self.date, self.user)


@dataclass(frozen=True, slots=True)
class Cascade:
    cascade_id: CascadeId  # (city, business_id, component index)
    city: str
    business_id: int
    nodes: tuple[CascadeNode, ...]  # sorted by (date, user)
    edges: tuple[tuple[int, int], ...]  # directed (src_user, dst_user), lexicographic

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True, slots=True)
class SummaryRow:
    city: str
    cascade_count: int
    p50_size: int
    p90_size: int
    max_size: int


def _first_events(events: Iterable[Event]) -> dict[int, Event]:
    """Collapse a business's time-sorted events to each user's first one."""
    first: dict[int, Event] = {}
    for event in events:
        if event.user_id not in first:
            first[event.user_id] = event
    return first


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != x:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _business_cascades(city: str, business_id: int, events: Sequence[Event],
                       graph: SocialGraph, window_days: int | None) -> list[Cascade]:
    first = _first_events(events)
    if len(first) < 2:
        return []

    # Edges into each user from friends who acted earlier or on the same day.
    # Same-day pairs yield both directions, once from each endpoint's turn.
    edges: list[tuple[int, int]] = []
    participants = list(first)
    for v, ev in first.items():
        dv = ev.date
        nbrs = graph.neighbors(v)
        if len(nbrs) > len(first):
            candidates = (u for u in participants if u != v and graph.are_friends(u, v))
        else:
            candidates = (int(u) for u in nbrs if int(u) in first)
        for u in candidates:
            du = first[u].date
            if du > dv:
                continue
            if window_days is not None and (dv - du).days > window_days:
                continue
            edges.append((u, v))

    if not edges:
        return []

    uf = _UnionFind()
    for u, v in edges:
        uf.union(u, v)

    # Component index follows the position of each component's earliest node
    # in the canonical (date, user) order, so ids are stable across runs.
    order = sorted(first.values(), key=lambda e: (e.date, e.user_id))
    members: dict[int, list[Event]] = {}
    roots_in_order: list[int] = []
    for ev in order:
        root = uf.find(ev.user_id)
        if root not in members:
            members[root] = []
            roots_in_order.append(root)
        members[root].append(ev)

    edges_by_root: dict[int, list[tuple[int, int]]] = {}
    for u, v in edges:
        edges_by_root.setdefault(uf.find(u), []).append((u, v))

    cascades = []
    index = 0
    for root in roots_in_order:
        evs = members[root]
        if len(evs) < 2:
            continue  # isolated reviewer, no qualifying edge
        nodes = tuple(
            CascadeNode(e.user_id, e.date, e.kind, e.stars, e.text_len, e.votes)
            for e in evs
        )
        cascade_edges = tuple(sorted(edges_by_root.get(root, ())))
        cascades.append(Cascade((city, business_id, index), city, business_id,
                                nodes, cascade_edges))
        index += 1
    return cascades


def build_cascades(events_by_city: Mapping[str, Sequence[Event]], graph: SocialGraph,
                   window_days: int | None = None) -> dict[str, list[Cascade]]:
    """Extract cascades for every city. Events must be sorted by
    (business_id, date, user_id); each business is processed independently."""
    if window_days is not None and window_days <= 0:
        raise ValueError("window_days must be positive when given")
    out: dict[str, list[Cascade]] = {}
    for city in sorted(events_by_city):
        cascades: list[Cascade] = []
        for business_id, group in groupby(events_by_city[city], key=lambda e: e.business_id):
            cascades.extend(_business_cascades(city, business_id, list(group), graph, window_days))
        out[city] = cascades
    return out


def cascade_summary(cascades_by_city: Mapping[str, Sequence[Cascade]]) -> list[SummaryRow]:
    """Per-city cascade counts and nearest-rank size percentiles."""
    rows = []
    for city in sorted(cascades_by_city):
        sizes = sorted(c.size for c in cascades_by_city[city])
        if not sizes:
            rows.append(SummaryRow(city, 0, 0, 0, 0))
            continue
        rows.append(SummaryRow(
            city, len(sizes),
            nearest_rank(sizes, 50), nearest_rank(sizes, 90), sizes[-1],
        ))
    return rows


def write_summary_csv(rows: Sequence[SummaryRow], path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("city,cascade_count,p50_size,p90_size,max_size\n")
        for r in rows:
            fh.write(f"{r.city},{r.cascade_count},{r.p50_size},{r.p90_size},{r.max_size}\n")


def _cascade_to_json(cascade: Cascade) -> str:
    obj = {
        "cascade_id": list(cascade.cascade_id),
        "city": cascade.city,
        "business_id": cascade.business_id,
        "nodes": [
            {"user": n.user, "date": n.date.isoformat(), "kind": KIND_NAMES[n.kind],
             "stars": n.stars, "text_len": n.text_len, "votes": n.votes}
            for n in cascade.nodes
        ],
        "edges": [list(e) for e in cascade.edges],
    }
    return json.dumps(obj, separators=(",", ":"))


def write_cascades(cascades_by_city: Mapping[str, Sequence[Cascade]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for city in sorted(cascades_by_city):
            for cascade in sorted(cascades_by_city[city], key=lambda c: c.cascade_id):
                fh.write(_cascade_to_json(cascade))
                fh.write("\n")


def read_cascades(path) -> dict[str, list[Cascade]]:
    out: dict[str, list[Cascade]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            nodes = tuple(
                CascadeNode(n["user"], dt.date.fromisoformat(n["date"]),
                            KIND_FROM_NAME[n["kind"]], n["stars"], n["text_len"], n["votes"])
                for n in obj["nodes"]
            )
            edges = tuple((e[0], e[1]) for e in obj["edges"])
            city, business_id, index = obj["cascade_id"]
            cascade = Cascade((city, business_id, index), obj["city"], obj["business_id"],
                              nodes, edges)
            out.setdefault(cascade.city, []).append(cascade)
    return {city: out[city] for city in sorted(out)}
