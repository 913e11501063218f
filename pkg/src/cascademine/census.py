"""Frequent-topology census of cascades via degree-sequence signatures.

The bucket key is the multi-level signature (node count, edge count, sorted
in-degree sequence, sorted out-degree sequence). It is an isomorphism
invariant, so isomorphic cascades always land in the same bucket, but the
converse fails for some shapes from four nodes up; ``bucket_purity`` measures
that collision rate with an exact backtracking isomorphism check, which is
affordable because frequent cascade topologies are tiny.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from cascademine.cascades import Cascade, CascadeId

DEFAULT_NODE_CAP = 10


@dataclass(frozen=True, slots=True)
class TopologySignature:
    n: int
    m: int
    in_seq: tuple[int, ...]  # sorted nondecreasing, length n
    out_seq: tuple[int, ...]

    def serialize(self) -> str:
        """Canonical ASCII form 'n|m|i,i,...|o,o,...' used as the hash key."""
        return "{}|{}|{}|{}".format(
            self.n, self.m,
            ",".join(map(str, self.in_seq)),
            ",".join(map(str, self.out_seq)),
        )


@dataclass(frozen=True, slots=True)
class CensusRow:
    city: str
    rank: int
    signature: TopologySignature
    representative: CascadeId  # smallest cascade_id in the bucket
    count: int
    share: float


@dataclass(frozen=True, slots=True)
class PurityRow:
    city: str
    signature: TopologySignature
    bucket_size: int
    checked: int  # members (beyond the representative) exactly tested
    purity: float | None  # None when the representative exceeds the node cap


def digraph_signature(n: int, edges: Sequence[tuple[int, int]]) -> TopologySignature:
    """Signature of a directed graph on nodes 0..n-1."""
    indeg = [0] * n
    outdeg = [0] * n
    for u, v in edges:
        outdeg[u] += 1
        indeg[v] += 1
    return TopologySignature(n, len(edges), tuple(sorted(indeg)), tuple(sorted(outdeg)))


def _local_edges(cascade: Cascade) -> tuple[int, list[tuple[int, int]]]:
    index = {node.user: i for i, node in enumerate(cascade.nodes)}
    return len(cascade.nodes), [(index[u], index[v]) for u, v in cascade.edges]


def signature(cascade: Cascade) -> TopologySignature:
    n, edges = _local_edges(cascade)
    return digraph_signature(n, edges)


def digraph_isomorphic(n_a: int, edges_a: Sequence[tuple[int, int]],
                       n_b: int, edges_b: Sequence[tuple[int, int]]) -> bool:
    """Exact directed-graph isomorphism by backtracking.

    Candidate targets are restricted to nodes with identical (in, out) degree
    pairs and every partial mapping is checked for edge agreement in both
    directions, which prunes hard enough for the small graphs seen here.
    """
    if n_a != n_b or len(set(edges_a)) != len(set(edges_b)):
        return False
    succ_a = [set() for _ in range(n_a)]
    pred_a = [set() for _ in range(n_a)]
    for u, v in edges_a:
        succ_a[u].add(v)
        pred_a[v].add(u)
    succ_b = [set() for _ in range(n_b)]
    pred_b = [set() for _ in range(n_b)]
    for u, v in edges_b:
        succ_b[u].add(v)
        pred_b[v].add(u)

    profile_a = [(len(pred_a[i]), len(succ_a[i])) for i in range(n_a)]
    profile_b = [(len(pred_b[i]), len(succ_b[i])) for i in range(n_b)]
    if sorted(profile_a) != sorted(profile_b):
        return False

    # Map the most constrained nodes first: rare degree profiles, then high degree.
    profile_freq = Counter(profile_a)
    order = sorted(range(n_a),
                   key=lambda i: (profile_freq[profile_a[i]], -sum(profile_a[i]), i))
    mapping = [-1] * n_a
    used = [False] * n_b

    def extend(pos: int) -> bool:
        if pos == n_a:
            return True
        a = order[pos]
        for b in range(n_b):
            if used[b] or profile_b[b] != profile_a[a]:
                continue
            if (a in succ_a[a]) != (b in succ_b[b]):
                continue
            ok = True
            for a2 in succ_a[a]:
                m2 = mapping[a2]
                if m2 >= 0 and m2 not in succ_b[b]:
                    ok = False
                    break
            if ok:
                for a2 in pred_a[a]:
                    m2 = mapping[a2]
                    if m2 >= 0 and m2 not in pred_b[b]:
                        ok = False
                        break
            if ok:
                # Forward edge preservation plus equal edge counts implies a
                # full bijection once every node is mapped, so no reverse scan.
                mapping[a] = b
                used[b] = True
                if extend(pos + 1):
                    return True
                mapping[a] = -1
                used[b] = False
        return False

    return extend(0)


def is_isomorphic(a: Cascade, b: Cascade, node_cap: int = DEFAULT_NODE_CAP) -> bool | None:
    """Exact isomorphism for cascades up to node_cap nodes; None when larger."""
    if a.size > node_cap or b.size > node_cap:
        return None
    return digraph_isomorphic(*_local_edges(a), *_local_edges(b))


def census(cascades_by_city: Mapping[str, Sequence[Cascade]],
           max_rank: int = 10) -> dict[str, list[CensusRow]]:
    """Rank topologies per city by frequency; ties break on the serialized
    signature so output order is deterministic."""
    if max_rank <= 0:
        raise ValueError("max_rank must be positive")
    out: dict[str, list[CensusRow]] = {}
    for city in sorted(cascades_by_city):
        cascades = cascades_by_city[city]
        buckets: dict[str, list] = {}
        for cascade in cascades:
            sig = signature(cascade)
            key = sig.serialize()
            entry = buckets.get(key)
            if entry is None:
                buckets[key] = [sig, 1, cascade.cascade_id]
            else:
                entry[1] += 1
                if cascade.cascade_id < entry[2]:
                    entry[2] = cascade.cascade_id
        total = len(cascades)
        ranked = sorted(buckets.items(), key=lambda kv: (-kv[1][1], kv[0]))
        rows = [
            CensusRow(city, rank, sig, rep, count, count / total)
            for rank, (_, (sig, count, rep)) in enumerate(ranked[:max_rank], start=1)
        ]
        out[city] = rows
    return out


def bucket_purity(cascades: Sequence[Cascade], node_cap: int = DEFAULT_NODE_CAP,
                  max_members: int = 50) -> list[PurityRow]:
    """Fraction of each signature bucket exactly isomorphic to its representative.

    Up to ``max_members`` members per bucket (beyond the representative, in
    cascade_id order) are tested. Buckets whose representative exceeds
    node_cap get purity None.
    """
    buckets: dict[str, list[Cascade]] = {}
    sigs: dict[str, TopologySignature] = {}
    for cascade in cascades:
        sig = signature(cascade)
        key = sig.serialize()
        buckets.setdefault(key, []).append(cascade)
        sigs.setdefault(key, sig)

    rows = []
    for key in sorted(buckets, key=lambda k: (-len(buckets[k]), k)):
        members = sorted(buckets[key], key=lambda c: c.cascade_id)
        rep = members[0]
        city = rep.city
        if rep.size > node_cap:
            rows.append(PurityRow(city, sigs[key], len(members), 0, None))
            continue
        sample = members[1:1 + max_members]
        if not sample:
            rows.append(PurityRow(city, sigs[key], len(members), 0, 1.0))
            continue
        hits = sum(1 for c in sample if is_isomorphic(rep, c, node_cap))
        rows.append(PurityRow(city, sigs[key], len(members), len(sample), hits / len(sample)))
    return rows


def _seq_field(seq: tuple[int, ...]) -> str:
    return " ".join(map(str, seq))


def write_census_csv(census_by_city: Mapping[str, Sequence[CensusRow]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("city,rank,n,m,in_seq,out_seq,count,share\n")
        for city in sorted(census_by_city):
            for r in census_by_city[city]:
                s = r.signature
                fh.write(f"{r.city},{r.rank},{s.n},{s.m},{_seq_field(s.in_seq)},"
                         f"{_seq_field(s.out_seq)},{r.count},{r.share!r}\n")


def write_purity_csv(rows_by_city: Mapping[str, Sequence[PurityRow]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("city,n,m,in_seq,out_seq,bucket_size,checked,purity\n")
        for city in sorted(rows_by_city):
            for r in rows_by_city[city]:
                s = r.signature
                purity = "" if r.purity is None else repr(r.purity)
                fh.write(f"{r.city},{s.n},{s.m},{_seq_field(s.in_seq)},"
                         f"{_seq_field(s.out_seq)},{r.bucket_size},{r.checked},{purity}\n")
