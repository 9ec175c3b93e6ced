"""Exhaustive nearest-neighbour search and mean average precision."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, ProtocolError


class RetrievalIndex:
    """Labelled set of descriptors searched by brute-force L2 distance."""

    def __init__(self, descriptors, names: Sequence[str]):
        X = np.asarray(descriptors, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError(f"descriptors must be N x C, got shape {X.shape}")
        names = [str(n) for n in names]
        if len(names) != X.shape[0]:
            raise DimensionError(f"{X.shape[0]} descriptors but {len(names)} names")
        if len(set(names)) != len(names):
            raise ContractError("descriptor names must be unique")
        self.descriptors = X
        self.names = names
        self._row = {n: i for i, n in enumerate(names)}
        # rank of each name in sorted order, for distance ties
        self._name_rank = np.empty(len(names), dtype=np.int64)
        self._name_rank[np.argsort(np.array(names, dtype=object), kind="stable")] = np.arange(len(names))

    def __len__(self) -> int:
        return len(self.names)

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]

    def __contains__(self, name: str) -> bool:
        return name in self._row

    def vector(self, name: str) -> np.ndarray:
        return self.descriptors[self._row[name]]


def knn(index: RetrievalIndex, query, top: int, query_name: str | None = None) -> list[tuple[str, float]]:
    """The ``top`` closest entries as ``(name, distance)`` pairs.

    Sorted by ascending distance, then by name. The entry called
    ``query_name``, if any, is left out.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimensionError(f"query must have dimension {index.dim}, got shape {q.shape}")
    if top < 1:
        raise ContractError(f"top must be >= 1, got {top}")
    diff = index.descriptors - q
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    order = np.lexsort((index._name_rank, dist))
    out = []
    for i in order:
        name = index.names[i]
        if name == query_name:
            continue
        out.append((name, float(dist[i])))
        if len(out) == top:
            break
    return out


def average_precision(ranked: Iterable[str], positives: Iterable[str], junk: Iterable[str] = ()) -> float:
    """Mean of the precision measured at each positive's rank.

    Junk names are dropped from the ranking before ranks are counted.
    Positives that never appear contribute zero.
    """
    positives = set(positives)
    junk = set(junk)
    if not positives:
        raise ContractError("average precision needs at least one positive")
    hits = 0
    total = 0.0
    rank = 0
    for name in ranked:
        if name in junk:
            continue
        rank += 1
        if name in positives:
            hits += 1
            total += hits / rank
    return total / len(positives)


@dataclass(frozen=True)
class Query:
    name: str
    positives: frozenset[str]
    junk: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "positives", frozenset(self.positives))
        object.__setattr__(self, "junk", frozenset(self.junk))
        if self.positives & self.junk:
            raise ProtocolError(f"query {self.name}: positive and junk sets overlap")


QueryProtocol = list[Query]


def missing_names(index: RetrievalIndex, protocol: Sequence[Query]) -> list[str]:
    """Names referenced by ``protocol`` that the index does not hold."""
    missing = set()
    for q in protocol:
        for n in (q.name, *q.positives, *q.junk):
            if n not in index:
                missing.add(n)
    return sorted(missing)


def evaluate_map(index: RetrievalIndex, protocol: Sequence[Query]) -> float:
    """Mean over queries of :func:`average_precision` on the full ranking."""
    if not protocol:
        raise ProtocolError("protocol has no queries")
    unresolved = sorted({q.name for q in protocol if q.name not in index})
    if unresolved:
        raise ProtocolError("unknown query names: " + ", ".join(unresolved))
    aps = []
    for q in protocol:
        ranked = knn(index, index.vector(q.name), len(index), query_name=q.name)
        aps.append(average_precision((n for n, _ in ranked), q.positives, q.junk))
    return float(np.mean(aps))


def class_protocol(names: Sequence[str], labels: Sequence) -> list[Query]:
    """Every item queries for the other items sharing its label."""
    by_label: dict = {}
    for n, lab in zip(names, labels):
        by_label.setdefault(lab, []).append(n)
    out = []
    for n, lab in zip(names, labels):
        pos = [p for p in by_label[lab] if p != n]
        if pos:
            out.append(Query(n, frozenset(pos)))
    return out
