"""Undirected friendship graph over dense integer user ids.

Adjacency is stored as one sorted numpy array per node, which keeps
membership tests at O(log degree) and makes neighbor scans cache-friendly
during cascade construction. The graph is immutable once built and safe to
share read-only across workers.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

from cascademine.ingest import UserRecord

_EMPTY = np.empty(0, dtype=np.int64)


class SocialGraph:
    __slots__ = ("_adj", "_n_edges")

    def __init__(self, adjacency: list[np.ndarray], n_edges: int):
        self._adj = adjacency
        self._n_edges = n_edges

    @property
    def n_nodes(self) -> int:
        return len(self._adj)

    @property
    def n_edges(self) -> int:
        return self._n_edges

    def degree(self, u: int) -> int:
        if 0 <= u < len(self._adj):
            return len(self._adj[u])
        return 0

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    def neighbors(self, u: int) -> np.ndarray:
        if 0 <= u < len(self._adj):
            return self._adj[u]
        return _EMPTY

    def are_friends(self, u: int, v: int) -> bool:
        """True iff the undirected edge (u, v) exists. Unknown ids are never friends."""
        if u == v or not (0 <= u < len(self._adj)) or not (0 <= v < len(self._adj)):
            return False
        arr = self._adj[u]
        i = int(np.searchsorted(arr, v))
        return i < len(arr) and arr[i] == v

    def edges(self) -> Iterator[tuple[int, int]]:
        """All undirected edges as (u, v) with u < v, ascending."""
        for u, arr in enumerate(self._adj):
            for v in arr:
                if v > u:
                    yield u, int(v)

    def write_edge_list(self, path) -> None:
        """Debug export: one 'u v' line per undirected edge, interned ids."""
        with open(path, "w", encoding="ascii") as fh:
            for u, v in self.edges():
                fh.write(f"{u} {v}\n")


def build_graph(users: Iterable[UserRecord], n_nodes: int | None = None) -> SocialGraph:
    """Build the friendship graph with symmetric closure.

    A one-sided listing (u names v, v does not name u) still yields the edge;
    self-loops and duplicate listings are dropped. Friend ids beyond the known
    user table become plain graph nodes like any other.
    """
    users = list(users)
    max_id = -1
    for rec in users:
        if rec.user_id > max_id:
            max_id = rec.user_id
        for f in rec.friends:
            if f > max_id:
                max_id = f
    if n_nodes is None:
        n_nodes = max_id + 1
    elif max_id >= n_nodes:
        raise ValueError(f"user id {max_id} out of range for n_nodes={n_nodes}")

    neighbor_lists: list[list[int]] = [[] for _ in range(n_nodes)]
    for rec in users:
        u = rec.user_id
        for v in rec.friends:
            if v == u:
                continue
            neighbor_lists[u].append(v)
            neighbor_lists[v].append(u)

    adjacency: list[np.ndarray] = []
    n_edges = 0
    for lst in neighbor_lists:
        arr = np.unique(np.asarray(lst, dtype=np.int64)) if lst else _EMPTY
        adjacency.append(arr)
        n_edges += len(arr)
    assert n_edges % 2 == 0
    return SocialGraph(adjacency, n_edges // 2)
