"""Time-slotted simulation engine.

Each window of ``window_slots`` slots starts by refreshing queue-aware scores,
forwarding plans and credit ratios. Every slot then runs availability ->
greedy interference-free scheduling -> lossy broadcast -> queue updates.

Packet accounting counts copies. Native packets move hop by hop and stay
with their sender until some receiver keeps them. Coded relays keep their
span until the batch is acknowledged, so every coded copy a relay's neighbor
keeps is a replication. At every slot boundary::

    injected + replicated == delivered + queued + dropped + in_flight

where ``dropped`` is the sum of buffer overflows and copies purged once their
batch is acknowledged.
"""

from __future__ import annotations

import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from crnsim import gf256
from crnsim.coding import CreditLedger, credit_update
from crnsim.forwarding import forwarding_distribution
from crnsim.metrics import INF, EtxTable, node_etx, selector_metric
from crnsim.protocols import PolicySpec, get_policy
from crnsim.topology import ChannelProcess, Deployment, node_free

log = logging.getLogger(__name__)
trace_log = logging.getLogger("crnsim.trace")


@dataclass(frozen=True)
class SimParams:
    batch_size: int = 10
    buffer_cap: int = 100
    window_slots: int = 5
    capacity: int = 100
    max_candidates: int = 4
    source_window: int = 4
    borrow_credit: bool = True
    mu_smoothing: float = 0.5
    audit: bool = False

    def validate(self) -> None:
        for name in ("batch_size", "buffer_cap", "window_slots", "capacity", "max_candidates", "source_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.mu_smoothing < 1.0:
            raise ValueError("mu_smoothing must lie in [0, 1)")


# ---------------------------------------------------------------------------
# scheduling


class ConflictIndex:
    """Link numbering plus the symmetric conflict relation derived from I_ij."""

    def __init__(self, dep: Deployment):
        table = dep.link_table
        self.links = table.links
        self.index = {link: a for a, link in enumerate(self.links)}
        conf = [set() for _ in self.links]
        for a, link in enumerate(self.links):
            for other in table.interference_set[link]:
                b = self.index[other]
                conf[a].add(b)
                conf[b].add(a)
        self.conf = [frozenset(c) for c in conf]

    def conflict(self, a: int, b: int) -> bool:
        return b in self.conf[a]


@dataclass
class SlotSchedule:
    transmissions: list[tuple[int, int, tuple[int, ...]]] = field(default_factory=list)
    radio_usage: dict[int, set[int]] = field(default_factory=dict)

    @property
    def active(self) -> set[tuple[tuple[int, int], int]]:
        return {((i, j), k) for i, k, listeners in self.transmissions for j in listeners}


def _greedy(order, num_channels, num_radios, budget, channel_ok, candidates, link_id, conf,
            f_used=None, capacity=INF, spatial_reuse=True) -> SlotSchedule:
    blocked = [set() for _ in range(num_channels)]
    busy = [False] * num_channels
    used: dict[int, set[int]] = {}
    tx = []
    for i in order:
        room = budget(i)
        sends = 0
        ids = link_id[i]
        for k in range(num_channels):
            if sends >= room:
                break
            ui = used.get(i)
            if ui is not None and (k in ui or len(ui) >= num_radios):
                continue
            if not spatial_reuse and busy[k]:
                continue
            if not channel_ok(i, k):
                continue
            cands = candidates(i, k)
            if not cands:
                continue
            bk = blocked[k]
            listeners = []
            for j in cands:
                a = ids[j]
                if a in bk:
                    continue
                if f_used is not None and f_used[a][k] >= capacity:
                    continue
                uj = used.get(j)
                if uj is not None and k not in uj and len(uj) >= num_radios:
                    continue
                listeners.append(j)
            if not listeners:
                continue
            for j in listeners:
                a = ids[j]
                bk |= conf[a]
                if f_used is not None:
                    f_used[a][k] += 1
                s = used.get(j)
                if s is None:
                    used[j] = {k}
                else:
                    s.add(k)
            if ui is None:
                used[i] = {k}
            else:
                ui.add(k)
            busy[k] = True
            tx.append((i, k, tuple(listeners)))
            sends += 1
    return SlotSchedule(transmissions=tx, radio_usage=used)


def schedule_slot(dep: Deployment, h, demands, priority=None, *, num_radios=None, max_sends=None,
                  f_used=None, capacity=INF, spatial_reuse=True, conflicts: ConflictIndex | None = None) -> SlotSchedule:
    """Greedy maximal feasible schedule for one slot.

    ``demands[i][k]`` lists the receivers node ``i`` wants to reach on channel
    ``k`` (ETX-ordered). Transmitters are considered in ``priority`` order and
    channels lowest-index first; a (link, channel) is admitted only if it is
    available, interference-free with every other transmitter's admitted
    links on that channel, within the radio budget of both ends and below
    the per-window capacity.
    """
    conflicts = conflicts or ConflictIndex(dep)
    R = dep.num_radios if num_radios is None else num_radios
    order = sorted(demands) if priority is None else [i for i in priority if i in demands]
    link_id = {i: {j: conflicts.index[(i, j)] for j in dep.neighbors[i]} for i in demands}

    def channel_ok(i, k):
        return k in demands[i]

    def candidates(i, k):
        return [j for j in demands[i][k] if h[(i, j)][k]]

    def budget(i):
        return dep.num_channels if max_sends is None else max_sends.get(i, 0)

    return _greedy(order, dep.num_channels, R, budget, channel_ok, candidates, link_id, conflicts.conf,
                   f_used=f_used, capacity=capacity, spatial_reuse=spatial_reuse)


def check_schedule(sched: SlotSchedule, dep: Deployment, h, num_radios: int, conflicts: ConflictIndex,
                   f_used=None, capacity=INF) -> list[str]:
    """Independent pairwise audit of a schedule; returns violation descriptions."""
    problems = []
    entries = [((i, j), k) for i, k, ls in sched.transmissions for j in ls]
    for (i, j), k in entries:
        if not h[(i, j)][k]:
            problems.append(f"availability: link {(i, j)} on channel {k}")
    for x in range(len(entries)):
        (i, j), k = entries[x]
        for y in range(x + 1, len(entries)):
            (u, v), k2 = entries[y]
            if k2 != k or u == i:
                continue
            a, b = conflicts.index[(i, j)], conflicts.index[(u, v)]
            if conflicts.conflict(a, b):
                problems.append(f"interference: {(i, j)} and {(u, v)} on channel {k}")
    engaged: dict[int, set[int]] = {}
    for (i, j), k in entries:
        engaged.setdefault(i, set()).add(k)
        engaged.setdefault(j, set()).add(k)
    for node, chans in engaged.items():
        if len(chans) > num_radios:
            problems.append(f"radio budget: node {node} on {len(chans)} channels")
    seen = set()
    for i, k, _ in sched.transmissions:
        if (i, k) in seen:
            problems.append(f"duplicate transmission by {i} on channel {k}")
        seen.add((i, k))
    if f_used is not None:
        for (i, j), k in entries:
            if f_used[conflicts.index[(i, j)]][k] > capacity:
                problems.append(f"capacity: link {(i, j)} channel {k} above {capacity}")
    return problems


# ---------------------------------------------------------------------------
# reception and queues


def transmit_slot(schedule: SlotSchedule, loss, seed: int, slot: int, rng: random.Random | None = None):
    """Draw receptions for every scheduled broadcast.

    ``loss(i, j, k)`` gives the loss probability. Returns a list of
    ``(sender, channel, listeners, receivers)``. Draws come from a generator
    seeded by ``(seed, slot)`` in schedule order, so outcomes are a pure
    function of the seed, the slot and the packet's position in the schedule.
    """
    rng = rng or slot_rng(seed, slot)
    events = []
    for i, k, listeners in schedule.transmissions:
        got = tuple(j for j in listeners if rng.random() >= loss(i, j, k))
        events.append((i, k, listeners, got))
    return events


def slot_rng(seed: int, slot: int) -> random.Random:
    return random.Random(((seed & 0xFFFFFFFF) << 32) | (slot & 0xFFFFFFFF))


@dataclass
class NodeState:
    queue: int = 0
    buffer_cap: int = 100
    sent: list[int] = field(default_factory=list)
    drop_count: int = 0


def apply_queue_dynamics(states: dict[int, NodeState], received: dict[int, int], sent: dict[int, list[int]]):
    """Queue balance Q' = Q - sum_k P^k + received, tail-dropping above the buffer."""
    out = {}
    for node, st in states.items():
        per_channel = list(sent.get(node, ()))
        total_sent = sum(per_channel)
        if total_sent > st.queue:
            raise ValueError(f"node {node} sends {total_sent} packets but holds {st.queue}")
        q = st.queue - total_sent + received.get(node, 0)
        dropped = max(0, q - st.buffer_cap)
        out[node] = NodeState(queue=q - dropped, buffer_cap=st.buffer_cap, sent=per_channel,
                              drop_count=st.drop_count + dropped)
    return out


# ---------------------------------------------------------------------------
# run bookkeeping


@dataclass
class RunMetrics:
    protocol: str = ""
    delivered_packets: int = 0
    injected_packets: int = 0
    replicated_packets: int = 0
    dropped_packets: int = 0
    overflow_drops: int = 0
    purged_packets: int = 0
    in_flight: int = 0
    queued_packets: int = 0
    slots_elapsed: int = 0
    transmissions: int = 0
    source_transmissions: int = 0
    batches_decoded: int = 0
    violations: dict[str, int] = field(default_factory=dict)

    @property
    def throughput(self) -> float:
        """Delivered packets per slot."""
        return self.delivered_packets / self.slots_elapsed if self.slots_elapsed else 0.0

    def conservation_gap(self) -> int:
        return (self.injected_packets + self.replicated_packets
                - self.delivered_packets - self.queued_packets - self.dropped_packets - self.in_flight)

    def as_row(self) -> dict:
        return {
            "throughput": f"{self.throughput:.6f}",
            "delivered": self.delivered_packets,
            "dropped": self.dropped_packets,
            "slots": self.slots_elapsed,
        }


class _Holding:
    __slots__ = ("vecs", "span")

    def __init__(self):
        self.vecs: list[bytes] = []
        self.span = None


@lru_cache(maxsize=65536)
def _alphas(rates: tuple[float, ...]) -> tuple[float, ...]:
    return forwarding_distribution(rates).alphas


@lru_cache(maxsize=65536)
def _betas(rates: tuple[float, ...]) -> tuple[float, ...]:
    return forwarding_distribution(rates).betas


class Simulator:
    """One seeded run of one policy on one deployment."""

    def __init__(self, dep: Deployment, proc: ChannelProcess, policy: PolicySpec | str,
                 params: SimParams | None = None, seed: int = 0):
        self.dep = dep
        self.proc = proc
        self.policy = get_policy(policy) if isinstance(policy, str) else policy
        self.params = params or SimParams()
        self.params.validate()
        self.seed = seed
        self.etx: EtxTable = node_etx(dep)
        self.conflicts = ConflictIndex(dep)
        n, K = dep.num_nodes, dep.num_channels
        self.n, self.K, self.R = n, K, dep.num_radios
        self.src, self.dst = dep.source, dep.destination
        if self.etx.node_etx[self.src] == INF:
            raise ValueError("destination unreachable from source")
        e = self.etx.node_etx
        if self.policy.candidate_rule == "next_hop":
            self.downstream = [[h] if h is not None else [] for h in self.etx.next_hop]
        else:
            self.downstream = [self.etx.downstream(i, dep.neighbors) for i in range(n)]
        self.downstream[self.dst] = []
        idx = self.conflicts.index
        self.link_id = [{j: idx[(i, j)] for j in dep.neighbors[i]} for i in range(n)]
        self.loss = [dep.loss_rates[link] for link in self.conflicts.links]
        self.eff_loss = [min(r) for r in self.loss]
        self.etx_key = [(e[j], j) for j in range(n)]

        p = self.params
        self.metrics = RunMetrics(protocol=self.policy.name)
        self.Q = [0] * n
        self.pref = [list(d) for d in self.downstream]
        self.h_score = [0.0] * n
        self.f_used = [[0] * K for _ in self.conflicts.links]
        self.credits = CreditLedger(num_channels=K, exempt=frozenset({self.src}), borrow=self.params.borrow_credit)
        self.credit_incr = [[0.0] * K for _ in range(n)]
        self.mu = None
        self._tx_count = np.zeros((n, K))
        self._listen_weight = np.zeros((len(self.conflicts.links), K))
        self._link_sender = np.array([l[0] for l in self.conflicts.links], dtype=np.intp)
        self.coding = self.policy.uses_coding
        # coding state
        self.held: list[dict[int, _Holding]] = [dict() for _ in range(n)]
        self.dst_spans: dict[int, object] = {}
        self.acked: set[int] = set()
        self.active_batches: list[int] = []
        self.batch_sent: dict[int, int] = {}
        self.next_batch = 0
        self.source_quota = p.batch_size
        # non-coding state
        self.fifo: list[deque] = [deque() for _ in range(n)]
        self.pending: deque = deque()
        self.next_pid = 0
        # per-node window tallies for the queue-balance audit
        self._tally = np.zeros((n, 5), dtype=np.int64)  # removed, accepted, overflow, purged, consumed
        self._q_window_start = [0] * n
        self.total_queued = 0
        self.forwarded = [0] * n
        self.kept = [0] * n
        self._trace = trace_log.isEnabledFor(logging.DEBUG)

    # -- window boundary -------------------------------------------------

    def _window_boundary(self, t: int, free: np.ndarray) -> None:
        p = self.params
        if p.audit and t > 0:
            self._audit_window()
        self._q_window_start = list(self.Q)
        self._tally[:] = 0
        for row in self.f_used:
            for k in range(self.K):
                row[k] = 0
        e = self.etx.node_etx
        pol = self.policy
        if pol.priority.startswith("h_score") or pol.candidate_rule == "h_score":
            backlog = list(self.Q)
            backlog[self.src] = self._source_backlog()
            self.h_score = [selector_metric(backlog[i], e[i], pol.chi, pol.gamma) if e[i] < INF else INF
                            for i in range(self.n)]
        if pol.candidate_rule == "h_score":
            hs = self.h_score
            self.pref = [sorted(d, key=lambda j: (hs[j], j)) for d in self.downstream]
        if pol.availability_credits:
            if self.mu is None:
                self.mu = self._initial_mu()
            else:
                self._update_mu()
        if self.coding:
            self._plan_credits()

    def _update_mu(self) -> None:
        """Blend last window's observations into the per-link forwarding weight.

        ``mu[(g, i), k]`` estimates the forwarding probability ``i`` obtains
        per broadcast of ``g`` on ``k``: the attached alpha when ``i`` is
        among the listeners, zero when PU activity, interference or radios
        keep it out. Links whose sender stayed silent keep their estimate.
        """
        tx = self._tx_count[self._link_sender]
        sent = tx > 0
        rate = np.divide(self._listen_weight, tx, out=np.zeros_like(self.mu), where=sent)
        s = self.params.mu_smoothing
        self.mu = np.where(sent, s * self.mu + (1.0 - s) * rate, self.mu)
        self._tx_count[:] = 0
        self._listen_weight[:] = 0

    def _initial_mu(self) -> np.ndarray:
        """Alpha over each node's planned candidates, as if every link were always free."""
        mu = np.zeros((len(self.conflicts.links), self.K))
        for g in range(self.n):
            cands = self._plan_candidates(g)
            if not cands:
                continue
            for k in range(self.K):
                rates = tuple(self.loss[self.link_id[g][j]][k] for j in cands)
                for j, w in zip(cands, _alphas(rates)):
                    mu[self.link_id[g][j], k] = w
        return mu

    def _plan_candidates(self, i: int) -> list[int]:
        pref = self.pref[i]
        chosen = pref[: self.params.max_candidates]
        return sorted(chosen, key=self.etx_key.__getitem__)

    def _plan_credits(self) -> None:
        """Planned transmissions per source packet and the per-channel credit increments."""
        n, K = self.n, self.K
        e = self.etx.node_etx
        order = sorted((i for i in range(n) if e[i] < INF and i != self.dst), key=lambda i: (-e[i], i))
        load = [0.0] * n
        load[self.src] = 1.0
        z = [0.0] * n
        plan = {}
        for i in order:
            if load[i] <= 0.0:
                continue
            cands = self._plan_candidates(i)
            if not cands:
                continue
            rates = tuple(self.eff_loss[self.link_id[i][j]] for j in cands)
            betas = _betas(rates)
            z[i] = load[i] / math.fsum(betas)
            plan[i] = cands
            for j, b in zip(cands, betas):
                load[j] += z[i] * b
        if self.src in plan:
            self.source_quota = max(self.params.batch_size, math.ceil(self.params.batch_size * z[self.src]))
        share = self._channel_shares(plan)
        denom = [[0.0] * K for _ in range(n)]
        if self.policy.availability_credits:
            # expected forwarding receptions: every downstream neighbor may
            # end up listening, weighted by its observed alpha * mu
            for g in plan:
                ids = self.link_id[g]
                for k in range(K):
                    flow_gk = z[g] * share[g][k]
                    for j in self.downstream[g]:
                        a = ids[j]
                        denom[j][k] += flow_gk * self.mu[a, k] * (1.0 - self.loss[a][k])
        else:
            alpha_weighted = self.policy.forwarding_rule == "alpha"
            for g, cands in plan.items():
                for k in range(K):
                    rates = tuple(self.loss[self.link_id[g][j]][k] for j in cands)
                    weights = _alphas(rates) if alpha_weighted else (1.0,) * len(cands)
                    flow_gk = z[g] * share[g][k]
                    for j, r, w in zip(cands, rates, weights):
                        denom[j][k] += flow_gk * w * (1.0 - r)
        for i in range(n):
            total = sum(denom[i])
            row = self.credit_incr[i]
            for k in range(K):
                planned = z[i] * share[i][k]
                ratio = credit_update(planned, denom[i][k])
                row[k] = ratio * denom[i][k] / total if total > 0 else 0.0

    def _channel_shares(self, plan) -> list[list[float]]:
        K = self.K
        uniform = [1.0 / K] * K
        if not self.policy.availability_credits:
            return [uniform] * self.n
        shares = [uniform] * self.n
        for i, cands in plan.items():
            w = [sum(self.mu[self.link_id[i][j], k] for j in cands) for k in range(K)]
            tot = sum(w)
            shares[i] = [x / tot for x in w] if tot > 0 else uniform
        return shares

    # -- audits ----------------------------------------------------------

    def _violate(self, kind: str, detail: str) -> None:
        v = self.metrics.violations
        v[kind] = v.get(kind, 0) + 1
        log.warning("invariant violation (%s): %s", kind, detail)

    def _audit_window(self) -> None:
        m = self.metrics
        m.queued_packets = self.total_queued
        if m.conservation_gap() != 0:
            self._violate("conservation", f"gap {m.conservation_gap()}")
        if sum(self.Q) != self.total_queued:
            self._violate("conservation", "queue total drift")
        cap = self.params.buffer_cap
        for i in range(self.n):
            if not 0 <= self.Q[i] <= cap:
                self._violate("buffer", f"node {i} holds {self.Q[i]}")
            removed, accepted, overflow, purged, consumed = (int(x) for x in self._tally[i])
            expect = self._q_window_start[i] - removed + accepted - overflow - purged - consumed
            if expect != self.Q[i]:
                self._violate("queue_balance", f"node {i}: {expect} != {self.Q[i]}")
            if not self.coding and i != self.src and self.forwarded[i] > self.kept[i]:
                self._violate("flow_balance", f"node {i} forwarded more than it kept")

    # -- source ----------------------------------------------------------

    def _source_batch(self) -> int:
        for b in self.active_batches:
            if self.batch_sent[b] < self.source_quota:
                return b
        if len(self.active_batches) < self.params.source_window:
            b = self.next_batch
            self.next_batch += 1
            self.active_batches.append(b)
            self.batch_sent[b] = 0
            return b
        return self.active_batches[0]

    def _source_backlog(self) -> int:
        """Native packets the source holds that are not yet acknowledged."""
        if self.coding:
            return self.params.batch_size * len(self.active_batches)
        return len(self.pending)

    def _top_up_pending(self) -> None:
        limit = self.params.source_window * self.params.batch_size
        while len(self.pending) < self.R and len(self.pending) + self.total_queued < limit:
            self.pending.append(self.next_pid)
            self.next_pid += 1

    # -- coded packet handling ---------------------------------------------

    def _relay_emit(self, i: int, rng: random.Random) -> tuple[int, bytes]:
        """Random recombination of the oldest batch ``i`` still holds.

        Coded relays keep their span until the batch is acknowledged, so a
        broadcast copies information downstream rather than moving it.
        """
        held = self.held[i]
        b = min(held)
        vecs = held[b].vecs
        coeffs = rng.randbytes(len(vecs))
        if not any(coeffs):
            coeffs = b"\x01" + coeffs[1:]
        vec = gf256.combine(vecs, coeffs)
        self.forwarded[i] += 1
        if self.params.audit and not self._in_span(i, b, vec):
            self._violate("flow_balance", f"node {i} emitted a vector outside its span")
        return b, vec

    def _in_span(self, i: int, b: int, vec: bytes) -> bool:
        span = gf256.Span(self.params.batch_size)
        for v in self.held[i][b].vecs:
            span.add(v)
        return span.contains(vec)

    def _innovative(self, j: int, b: int, vec: bytes) -> bool:
        if j == self.dst:
            span = self.dst_spans.get(b)
            return span is None or not span.contains(vec)
        hold = self.held[j].get(b)
        if hold is None:
            return any(vec)
        if hold.span is None:
            span = gf256.Span(self.params.batch_size)
            for v in hold.vecs:
                span.add(v)
            hold.span = span
        return not hold.span.contains(vec)

    def _accept_coded(self, j: int, b: int, vec: bytes, k: int) -> bool:
        """Offer a coded packet to ``j``; True when a copy is accepted (even if then dropped)."""
        if b in self.acked or not self._innovative(j, b, vec):
            return False
        m = self.metrics
        self._tally[j, 1] += 1
        if self.Q[j] >= self.params.buffer_cap:
            self._tally[j, 2] += 1
            m.overflow_drops += 1
            m.dropped_packets += 1
            return True
        self.Q[j] += 1
        self.total_queued += 1
        self.kept[j] += 1
        if j == self.dst:
            span = self.dst_spans.get(b)
            if span is None:
                span = self.dst_spans[b] = gf256.Span(self.params.batch_size)
            span.add(vec)
            if span.rank == self.params.batch_size:
                self._decode(b)
            return True
        hold = self.held[j].get(b)
        if hold is None:
            hold = self.held[j][b] = _Holding()
        hold.vecs.append(vec)
        if hold.span is not None:
            hold.span.add(vec)
        return True

    def _earn_credit(self, j: int) -> None:
        """Every packet heard from upstream earns credit, innovative or not."""
        incr = self.credit_incr[j]
        for k in range(self.K):
            if incr[k]:
                self.credits.add(j, k, incr[k])
        self.credits.cap(j, self.Q[j])

    def _decode(self, b: int) -> None:
        bs = self.params.batch_size
        m = self.metrics
        d = self.dst
        self.Q[d] -= bs
        self.total_queued -= bs
        self._tally[d, 4] += bs
        m.delivered_packets += bs
        m.batches_decoded += 1
        del self.dst_spans[b]
        self.acked.add(b)
        if b in self.batch_sent:
            self.active_batches.remove(b)
            del self.batch_sent[b]
        for i in range(self.n):
            hold = self.held[i].pop(b, None)
            if hold is None:
                continue
            cnt = len(hold.vecs)
            self.Q[i] -= cnt
            self.total_queued -= cnt
            self._tally[i, 3] += cnt
            m.purged_packets += cnt
            m.dropped_packets += cnt
            self.credits.cap(i, self.Q[i])

    # -- native packet handling --------------------------------------------

    def _accept_native(self, j: int, pid: int) -> None:
        m = self.metrics
        if j == self.dst:
            m.delivered_packets += 1
            return
        self._tally[j, 1] += 1
        if self.Q[j] >= self.params.buffer_cap:
            self._tally[j, 2] += 1
            m.overflow_drops += 1
            m.dropped_packets += 1
            return
        self.fifo[j].append(pid)
        self.Q[j] += 1
        self.total_queued += 1
        self.kept[j] += 1

    # -- one slot ----------------------------------------------------------

    def _transmitters(self) -> list[int]:
        src = self.src
        if self.coding:
            nodes = [src] + [i for i in range(self.n) if self.Q[i] > 0 and i != self.dst and i != src]
        else:
            self._top_up_pending()
            nodes = [i for i in range(self.n) if self.Q[i] > 0 and i != self.dst and i != src]
            if self.pending:
                nodes.append(src)
        if self.policy.priority == "h_score":
            hs = self.h_score
            nodes.sort(key=lambda i: (hs[i], i))
        elif self.policy.priority == "h_score_desc":
            hs = self.h_score
            nodes.sort(key=lambda i: (-hs[i], i))
        else:
            e = self.etx.node_etx
            nodes.sort(key=lambda i: (e[i], i))
        return nodes

    def _slot(self, t: int, ft: list[list[bool]]) -> SlotSchedule:
        p = self.params
        src = self.src
        coding = self.coding
        maxc = p.max_candidates
        pref = self.pref
        etx_key = self.etx_key.__getitem__
        credits = self.credits

        def channel_ok(i, k):
            if not ft[i][k]:
                return False
            return not coding or credits.can_send(i, k)

        def candidates(i, k):
            out = []
            for j in pref[i]:
                if ft[j][k]:
                    out.append(j)
                    if len(out) == maxc:
                        break
            if len(out) > 1:
                out.sort(key=etx_key)
            return out

        one_link = self.policy.one_channel_per_link

        def budget(i):
            if i == src:
                room = self.R if coding else len(self.pending)
            else:
                room = self.Q[i]
            return min(room, 1) if one_link else room

        order = self._transmitters()
        sched = _greedy(order, self.K, self.R, budget, channel_ok, candidates, self.link_id,
                        self.conflicts.conf, f_used=self.f_used, capacity=p.capacity,
                        spatial_reuse=self.policy.spatial_reuse)
        if p.audit:
            h = _SlotAvailability(ft)
            for msg in check_schedule(sched, self.dep, h, self.R, self.conflicts, self.f_used, p.capacity):
                self._violate(msg.split(":", 1)[0].replace(" ", "_"), msg)
        rng = slot_rng(self.seed, t)
        loss = self.loss
        lid = self.link_id
        events = transmit_slot(sched, lambda i, j, k: loss[lid[i][j]][k], self.seed, t, rng)
        if self._trace:
            for i, k, ls, got in events:
                trace_log.debug("slot=%d tx=%d ch=%d listeners=%s received=%s", t, i, k, list(ls), list(got))
        m = self.metrics
        m.transmissions += len(events)
        if coding:
            self._resolve_coded(events, rng)
        else:
            self._resolve_native(events)
        return sched

    def _resolve_coded(self, events, rng: random.Random) -> None:
        m = self.metrics
        src, dst = self.src, self.dst
        alpha_rule = self.policy.forwarding_rule == "alpha"
        bs = self.params.batch_size
        for i, k, listeners, got in events:
            self._tx_count[i, k] += 1
            if i == src:
                b = self._source_batch()
                self.batch_sent[b] += 1
                vec = rng.randbytes(bs)
                m.source_transmissions += 1
            else:
                if self.Q[i] <= 0 or not self.held[i]:
                    continue  # batch purged earlier in this slot
                b, vec = self._relay_emit(i, rng)
                self.credits.consume(i, k)
            alphas = None
            if alpha_rule:
                ids = self.link_id[i]
                rates = tuple(self.loss[ids[j]][k] for j in listeners)
                alphas = _alphas(rates)
                for j, w in zip(listeners, alphas):
                    self._listen_weight[ids[j], k] += w
            kept = 0
            for pos, j in enumerate(listeners):
                if j not in got:
                    continue
                if self._accept_coded(j, b, vec, k):
                    kept += 1
                if j == dst or b in self.acked:
                    continue
                # the attached alpha decides whether this copy is forwarded
                if alphas is None or rng.random() < alphas[pos]:
                    self._earn_credit(j)
            if i == src:
                m.injected_packets += kept
            else:
                m.replicated_packets += kept

    def _resolve_native(self, events) -> None:
        m = self.metrics
        src = self.src
        cursor: dict[int, int] = {}
        for i, k, listeners, got in events:
            pos = cursor.get(i, 0)
            cursor[i] = pos + 1
            queue = self.pending if i == src else self.fifo[i]
            pid = queue[pos]
            if not got:
                continue
            queue[pos] = None  # delivered onward; removed below
            j = got[0]
            if i == src:
                m.source_transmissions += 1
                m.injected_packets += 1
            else:
                self.Q[i] -= 1
                self.total_queued -= 1
                self._tally[i, 0] += 1
                self.forwarded[i] += 1
            self._accept_native(j, pid)
        for i in cursor:
            queue = self.pending if i == src else self.fifo[i]
            if None in queue:
                kept = [x for x in queue if x is not None]
                queue.clear()
                queue.extend(kept)

    # -- driver --------------------------------------------------------------

    def run(self, horizon: int) -> RunMetrics:
        if horizon < 0:
            raise ValueError("horizon must be non-negative")
        m = self.metrics
        if horizon == 0:
            return m
        free = node_free(self.dep, self.proc, 0, horizon)
        T = self.params.window_slots
        for t in range(horizon):
            if t % T == 0:
                self._window_boundary(t, free)
            self._slot(t, free[t].tolist())
        m.slots_elapsed = horizon
        m.queued_packets = self.total_queued
        if self.params.audit:
            self._audit_window()
        return m


class _SlotAvailability:
    """``h[(i, j)][k]`` view over a slot's node-level availability."""

    def __init__(self, ft):
        self.ft = ft

    def __getitem__(self, link):
        i, j = link
        fi, fj = self.ft[i], self.ft[j]
        return tuple(int(a and b) for a, b in zip(fi, fj))


def run(dep: Deployment, proc: ChannelProcess, protocol: PolicySpec | str, horizon: int, seed: int = 0,
        params: SimParams | None = None) -> RunMetrics:
    """Simulate ``horizon`` slots and return the run's metrics."""
    return Simulator(dep, proc, protocol, params, seed).run(horizon)
