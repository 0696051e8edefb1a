"""ETX, the queue-aware selector metric and candidate-forwarder sets."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from crnsim.errors import DomainError, WeightError
from crnsim.topology import Deployment, Link

INF = math.inf


def link_etx(loss: float) -> float:
    """Expected transmissions over a link with the given loss probability."""
    if not 0.0 < loss < 1.0:
        raise DomainError(f"loss rate {loss} outside (0, 1)")
    return 1.0 / (1.0 - loss)


@dataclass(frozen=True)
class EtxTable:
    link_etx: dict[Link, float]
    node_etx: tuple[float, ...]
    next_hop: tuple[int | None, ...]
    destination: int

    def downstream(self, i: int, neighbors) -> list[int]:
        """Neighbors strictly closer to the destination, ETX-ascending."""
        e = self.node_etx
        out = [j for j in neighbors[i] if e[j] < e[i]]
        out.sort(key=lambda j: (e[j], j))
        return out


def effective_loss(dep: Deployment) -> dict[Link, float]:
    """Per-link loss used for ETX: the best channel's loss rate."""
    return {link: min(dep.loss_rates[link]) for link in dep.links}


def node_etx(dep: Deployment, loss: dict[Link, float] | None = None) -> EtxTable:
    """Bellman-optimal ETX distance of every node to the destination.

    Unreachable nodes get ``inf``. Ties between equal-cost next hops go to the
    lower node index.
    """
    if loss is None:
        loss = effective_loss(dep)
    letx = {link: link_etx(loss[link]) for link in dep.links}
    n = dep.num_nodes
    incoming = [[] for _ in range(n)]
    for (i, j), w in letx.items():
        incoming[j].append((i, w))
    dist = [INF] * n
    dst = dep.destination
    dist[dst] = 0.0
    heap = [(0.0, dst)]
    done = [False] * n
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for u, w in incoming[v]:
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    hops: list[int | None] = [None] * n
    for i in range(n):
        if i == dst or dist[i] == INF:
            continue
        best = None
        for j in dep.neighbors[i]:
            c = letx[(i, j)] + dist[j]
            if best is None or c < best[0] - 1e-12 or (abs(c - best[0]) <= 1e-12 and j < best[1]):
                best = (c, j)
        hops[i] = best[1]
    return EtxTable(link_etx=letx, node_etx=tuple(dist), next_hop=tuple(hops), destination=dst)


def selector_metric(queue: float, etx: float, chi: float = 0.5, gamma: float = 0.5) -> float:
    """H = chi * Q + gamma * ETX; smaller is a better forwarding candidate."""
    if abs(chi + gamma - 1.0) > 1e-12:
        raise WeightError(f"weights must sum to one, got {chi} + {gamma}")
    if queue < 0:
        raise DomainError("queue length must be non-negative")
    return chi * queue + gamma * etx


def select_candidates(eligible, etx: tuple[float, ...], score, max_candidates: int | None) -> list[int]:
    """Keep the ``max_candidates`` lowest-score nodes, then order them by ETX."""
    chosen = list(eligible)
    if max_candidates is not None and len(chosen) > max_candidates:
        chosen.sort(key=lambda j: (score[j], j))
        chosen = chosen[:max_candidates]
    chosen.sort(key=lambda j: (etx[j], j))
    return chosen


@dataclass(frozen=True)
class CandidateSet:
    cfs: dict[int, list[list[int]]]
    h_score: dict[int, float]

    def __getitem__(self, i: int) -> list[list[int]]:
        return self.cfs[i]


def build_candidate_sets(
    etx: EtxTable,
    h: dict[Link, tuple[int, ...]],
    queues,
    max_candidates: int | None = 4,
    chi: float = 0.5,
    gamma: float = 0.5,
) -> CandidateSet:
    """Per-node, per-channel candidate forwarders for the current slot.

    A neighbor qualifies on channel k when it is strictly closer to the
    destination and ``h[(i, j)][k] == 1``. Overflowing sets keep the smallest
    H-scores; the final list is ETX-ordered.
    """
    e = etx.node_etx
    n = len(e)
    score = {j: selector_metric(queues[j], e[j], chi, gamma) for j in range(n) if e[j] < INF}
    num_channels = len(next(iter(h.values()))) if h else 0
    by_node: dict[int, list[tuple[int, tuple[int, ...]]]] = {i: [] for i in range(n)}
    for (i, j), avail in h.items():
        if e[j] < e[i]:
            by_node[i].append((j, avail))
    cfs = {}
    for i in range(n):
        per_k = []
        for k in range(num_channels):
            eligible = [j for j, avail in by_node[i] if avail[k]]
            per_k.append(select_candidates(eligible, e, score, max_candidates))
        cfs[i] = per_k
    return CandidateSet(cfs=cfs, h_score=score)
