"""Customer families: transitive closure of shared phone numbers.

Customer ids and phones live in one node space, namespaced ``C:`` and
``P:`` so that equal strings from the two fields never collide.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .ingest import CallRecord


def customer_node(customer_id: str) -> str:
    return "C:" + customer_id


def phone_node(phone: str) -> str:
    return "P:" + phone


class UnionFind:
    """Disjoint sets with union by size and path compression."""

    def __init__(self) -> None:
        self.parent: dict[str, str] = {}
        self.size: dict[str, int] = {}

    def add(self, x: str) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x: str) -> str:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: str, b: str) -> str:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size.pop(rb)
        return ra


@dataclass
class FamilyPartition:
    parent: dict[str, str]
    size: dict[str, int]
    family_of: dict[str, str] = field(default_factory=dict)
    node_family: dict[str, str] = field(default_factory=dict)
    members: dict[str, list[str]] = field(default_factory=dict)

    def family(self, node: str) -> str:
        return self.node_family[node]

    def n_families(self) -> int:
        return len(self.members)

    def customers_in(self, family_id: str) -> int:
        return sum(1 for m in self.members[family_id] if m.startswith("C:"))


def build_partition(calls: Sequence[CallRecord]) -> FamilyPartition:
    """Union each call's customer node with its phone node.

    Calls lacking both identifiers get no family; downstream labelling
    raises on them, so filter first.
    """
    uf = UnionFind()
    for c in calls:
        nodes = []
        if c.customer_id:
            nodes.append(customer_node(c.customer_id))
        if c.phone:
            nodes.append(phone_node(c.phone))
        for n in nodes:
            uf.add(n)
        if len(nodes) == 2:
            uf.union(nodes[0], nodes[1])

    members: dict[str, list[str]] = {}
    for node in uf.parent:
        members.setdefault(uf.find(node), []).append(node)
    # canonical id: smallest member, independent of union order
    node_family: dict[str, str] = {}
    canon_members: dict[str, list[str]] = {}
    for group in members.values():
        group.sort()
        fid = group[0]
        canon_members[fid] = group
        for node in group:
            node_family[node] = fid

    family_of: dict[str, str] = {}
    for c in calls:
        node = customer_node(c.customer_id) if c.customer_id else (
            phone_node(c.phone) if c.phone else None)
        if node is not None:
            family_of[c.call_id] = node_family[node]
    return FamilyPartition(uf.parent, uf.size, family_of, node_family, canon_members)


def flag_agencies(partition: FamilyPartition, threshold: int = 25) -> set[str]:
    """Families with more than ``threshold`` distinct customer ids."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return {fid for fid in partition.members if partition.customers_in(fid) > threshold}


def coverage(calls: Iterable[CallRecord]) -> dict[str, float]:
    """Share of calls resolvable by customer id alone versus via families."""
    n = by_id = by_family = 0
    for c in calls:
        n += 1
        by_id += bool(c.customer_id)
        by_family += bool(c.customer_id or c.phone)
    return {
        "calls": n,
        "resolvable_by_customer_id": by_id / n if n else 0.0,
        "resolvable_by_family": by_family / n if n else 0.0,
        "gain": (by_family - by_id) / by_id if by_id else 0.0,
    }


def write_families(partition: FamilyPartition, out: IO[str], delimiter: str = ",") -> None:
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["call_id", "family_id"])
    for call_id, fid in partition.family_of.items():
        writer.writerow([call_id, fid])
