"""Random CRN deployments, link tables, interference sets and PU channel activity."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from crnsim.errors import ConnectivityFailure, InvalidParams

Link = tuple[int, int]


@dataclass(frozen=True)
class DeploymentParams:
    """Inputs to :func:`generate`.

    ``unit_length`` is the number of area units per range unit: positions are
    drawn in the ``area_width x area_height`` rectangle and every range
    (``d_s``, ``d_i``, PU ranges) is measured in range units.
    """

    num_sus: int = 30
    num_pus: int = 4
    area_width: float = 500.0
    area_height: float = 500.0
    d_s: float = 4.0
    d_i: float = 8.0
    pu_tx_range: float = 6.0
    pu_if_range: float = 12.0
    num_channels: int = 4
    num_radios: int = 3
    unit_length: float = 25.0
    loss_min: float = 0.1
    loss_max: float = 0.3
    source: int | None = None
    destination: int | None = None
    max_retries: int = 100

    def validate(self) -> None:
        if self.num_sus < 2:
            raise InvalidParams("need at least two secondary users")
        if self.num_pus < 0:
            raise InvalidParams("num_pus must be non-negative")
        if self.num_channels < 1:
            raise InvalidParams("num_channels must be >= 1")
        if self.num_radios < 1:
            raise InvalidParams("num_radios must be >= 1")
        if self.area_width <= 0 or self.area_height <= 0:
            raise InvalidParams("area must be positive")
        for name in ("d_s", "d_i", "pu_tx_range", "pu_if_range", "unit_length"):
            if getattr(self, name) <= 0:
                raise InvalidParams(f"{name} must be positive")
        if not self.d_s < self.d_i:
            raise InvalidParams("transmission range must be below interference range")
        if not self.pu_tx_range < self.pu_if_range:
            raise InvalidParams("PU transmission range must be below PU interference range")
        if not 0 < self.loss_min <= self.loss_max < 1:
            raise InvalidParams("loss interval must lie inside (0, 1)")
        if (self.source is None) != (self.destination is None):
            raise InvalidParams("give both source and destination, or neither")
        if self.source is not None:
            if not (0 <= self.source < self.num_sus and 0 <= self.destination < self.num_sus):
                raise InvalidParams("source/destination must index secondary users")
            if self.source == self.destination:
                raise InvalidParams("source and destination must differ")
        if self.max_retries < 1:
            raise InvalidParams("max_retries must be >= 1")


@dataclass(frozen=True)
class LinkTable:
    links: tuple[Link, ...]
    loss_rate: dict[Link, tuple[float, ...]]
    interference_set: dict[Link, frozenset[Link]]


@dataclass(frozen=True, eq=False)
class Deployment:
    area_width: float
    area_height: float
    su_positions: tuple[tuple[float, float], ...]
    pu_positions: tuple[tuple[float, float], ...]
    d_s: float
    d_i: float
    pu_tx_range: float
    pu_if_range: float
    num_channels: int
    num_radios: int
    source: int
    destination: int
    loss_rates: dict[Link, tuple[float, ...]] = field(repr=False)
    unit_length: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        for x, y in self.su_positions + self.pu_positions:
            if not (0 <= x <= self.area_width and 0 <= y <= self.area_height):
                raise InvalidParams(f"position ({x}, {y}) lies outside the area")
        if self.source == self.destination:
            raise InvalidParams("source and destination must differ")
        n = self.num_nodes
        if not (0 <= self.source < n and 0 <= self.destination < n):
            raise InvalidParams("source/destination must index secondary users")
        if self.num_channels < 1 or self.num_radios < 1:
            raise InvalidParams("need at least one channel and one radio")
        for link in self.links:
            rates = self.loss_rates.get(link)
            if rates is None or len(rates) != self.num_channels:
                raise InvalidParams(f"missing per-channel loss rates for link {link}")
            if not all(0 < r < 1 for r in rates):
                raise InvalidParams(f"loss rates of {link} must lie in (0, 1)")

    @property
    def num_nodes(self) -> int:
        return len(self.su_positions)

    @property
    def num_pus(self) -> int:
        return len(self.pu_positions)

    def distance(self, i: int, j: int) -> float:
        """SU-to-SU distance in range units."""
        (xi, yi), (xj, yj) = self.su_positions[i], self.su_positions[j]
        return math.hypot(xi - xj, yi - yj) / self.unit_length

    def pu_distance(self, pu: int, i: int) -> float:
        (xp, yp), (xi, yi) = self.pu_positions[pu], self.su_positions[i]
        return math.hypot(xp - xi, yp - yi) / self.unit_length

    @cached_property
    def distances(self) -> np.ndarray:
        pos = np.asarray(self.su_positions, dtype=float).reshape(-1, 2)
        diff = pos[:, None, :] - pos[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1]) / self.unit_length

    @cached_property
    def links(self) -> tuple[Link, ...]:
        d = self.distances
        n = self.num_nodes
        return tuple((i, j) for i in range(n) for j in range(n) if i != j and d[i, j] < self.d_s)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        out = [[] for _ in range(self.num_nodes)]
        for i, j in self.links:
            out[i].append(j)
        return tuple(tuple(v) for v in out)

    @cached_property
    def pu_cover(self) -> np.ndarray:
        """``cover[n, m]`` is True when SU ``n`` lies within PU ``m``'s interference range."""
        if not self.pu_positions:
            return np.zeros((self.num_nodes, 0), dtype=bool)
        su = np.asarray(self.su_positions, dtype=float)
        pu = np.asarray(self.pu_positions, dtype=float)
        diff = su[:, None, :] - pu[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1]) / self.unit_length <= self.pu_if_range

    @cached_property
    def link_table(self) -> LinkTable:
        return LinkTable(
            links=self.links,
            loss_rate={link: tuple(self.loss_rates[link]) for link in self.links},
            interference_set=interference_sets(self),
        )

    def connected(self, a: int | None = None, b: int | None = None) -> bool:
        a = self.source if a is None else a
        b = self.destination if b is None else b
        seen = {a}
        todo = deque([a])
        nbrs = self.neighbors
        while todo:
            u = todo.popleft()
            if u == b:
                return True
            for v in nbrs[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return False

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "area": [self.area_width, self.area_height],
            "su_positions": [list(p) for p in self.su_positions],
            "pu_positions": [list(p) for p in self.pu_positions],
            "d_s": self.d_s,
            "d_i": self.d_i,
            "pu_tx_range": self.pu_tx_range,
            "pu_if_range": self.pu_if_range,
            "num_channels": self.num_channels,
            "num_radios": self.num_radios,
            "source": self.source,
            "destination": self.destination,
            "unit_length": self.unit_length,
            "seed": self.seed,
            "loss_rates": [[i, j, list(self.loss_rates[(i, j)])] for (i, j) in self.links],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Deployment:
        try:
            width, height = doc["area"]
            return cls(
                area_width=float(width),
                area_height=float(height),
                su_positions=tuple((float(x), float(y)) for x, y in doc["su_positions"]),
                pu_positions=tuple((float(x), float(y)) for x, y in doc.get("pu_positions", [])),
                d_s=float(doc["d_s"]),
                d_i=float(doc["d_i"]),
                pu_tx_range=float(doc["pu_tx_range"]),
                pu_if_range=float(doc["pu_if_range"]),
                num_channels=int(doc["num_channels"]),
                num_radios=int(doc["num_radios"]),
                source=int(doc["source"]),
                destination=int(doc["destination"]),
                unit_length=float(doc.get("unit_length", 1.0)),
                seed=doc.get("seed"),
                loss_rates={(int(i), int(j)): tuple(float(r) for r in rates) for i, j, rates in doc["loss_rates"]},
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParams):
                raise
            raise InvalidParams(f"malformed deployment document: {exc!r}") from exc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_json(cls, text: str) -> Deployment:
        return cls.from_dict(json.loads(text))


def from_positions(
    su_positions,
    d_s: float = 4.0,
    *,
    d_i: float | None = None,
    pu_positions=(),
    pu_tx_range: float = 6.0,
    pu_if_range: float = 12.0,
    num_channels: int = 1,
    num_radios: int = 1,
    source: int = 0,
    destination: int | None = None,
    loss=0.2,
    area: tuple[float, float] | None = None,
    unit_length: float = 1.0,
) -> Deployment:
    """Build a deployment from explicit coordinates.

    ``loss`` is a scalar applied to every link and channel, a callable
    ``loss(i, j, k)``, or a mapping from link to per-channel tuple (links
    absent from the mapping fall back to 0.2).
    """
    su = tuple((float(x), float(y)) for x, y in su_positions)
    pu = tuple((float(x), float(y)) for x, y in pu_positions)
    if area is None:
        xs = [p[0] for p in su + pu]
        ys = [p[1] for p in su + pu]
        area = (max(max(xs), 1.0), max(max(ys), 1.0))
    dst = len(su) - 1 if destination is None else destination
    n = len(su)
    rates = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if math.hypot(su[i][0] - su[j][0], su[i][1] - su[j][1]) / unit_length >= d_s:
                continue
            if callable(loss):
                rates[(i, j)] = tuple(float(loss(i, j, k)) for k in range(num_channels))
            elif isinstance(loss, dict):
                rates[(i, j)] = tuple(loss.get((i, j), (0.2,) * num_channels))
            else:
                rates[(i, j)] = (float(loss),) * num_channels
    return Deployment(
        area_width=float(area[0]),
        area_height=float(area[1]),
        su_positions=su,
        pu_positions=pu,
        d_s=float(d_s),
        d_i=float(2 * d_s if d_i is None else d_i),
        pu_tx_range=pu_tx_range,
        pu_if_range=pu_if_range,
        num_channels=num_channels,
        num_radios=num_radios,
        source=source,
        destination=dst,
        loss_rates=rates,
        unit_length=unit_length,
    )


def generate(params: DeploymentParams, seed: int) -> Deployment:
    """Uniform random placement.

    With explicit endpoints, placement is retried until they connect. Without
    them the session runs between the hop-farthest pair of the placement
    (ties to the lowest indices), retried only while the graph has no link.
    """
    params.validate()
    rng = np.random.default_rng(seed)
    size = np.array([params.area_width, params.area_height])
    for _ in range(params.max_retries):
        su = rng.uniform(0.0, 1.0, size=(params.num_sus, 2)) * size
        pu = rng.uniform(0.0, 1.0, size=(params.num_pus, 2)) * size
        su_pos = tuple((float(x), float(y)) for x, y in su)
        diff = su[:, None, :] - su[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1]) / params.unit_length
        adj = (dist < params.d_s) & ~np.eye(params.num_sus, dtype=bool)
        if params.source is None:
            pair = farthest_pair(adj)
            if pair is None:
                continue
            src, dst = pair
        else:
            src, dst = params.source, params.destination
            if not _reachable(adj, src, dst):
                continue
        links = [(int(i), int(j)) for i, j in zip(*np.nonzero(adj))]
        draws = rng.uniform(params.loss_min, params.loss_max, size=(len(links), params.num_channels))
        rates = {link: tuple(float(r) for r in row) for link, row in zip(links, draws)}
        return Deployment(
            area_width=params.area_width,
            area_height=params.area_height,
            su_positions=su_pos,
            pu_positions=tuple((float(x), float(y)) for x, y in pu),
            d_s=params.d_s,
            d_i=params.d_i,
            pu_tx_range=params.pu_tx_range,
            pu_if_range=params.pu_if_range,
            num_channels=params.num_channels,
            num_radios=params.num_radios,
            source=src,
            destination=dst,
            loss_rates=rates,
            unit_length=params.unit_length,
            seed=seed,
        )
    what = "no link formed" if params.source is None else f"source {params.source} and destination {params.destination} disconnected"
    raise ConnectivityFailure(f"{what} after {params.max_retries} placements")


def hop_distances(adj: np.ndarray) -> np.ndarray:
    """All-pairs hop counts by repeated frontier expansion; -1 marks unreachable."""
    n = adj.shape[0]
    hops = np.full((n, n), -1, dtype=np.int64)
    for a in range(n):
        seen = np.zeros(n, dtype=bool)
        seen[a] = True
        hops[a, a] = 0
        frontier = seen.copy()
        h = 0
        while frontier.any():
            h += 1
            nxt = adj[frontier].any(axis=0) & ~seen
            hops[a, nxt] = h
            seen |= nxt
            frontier = nxt
    return hops


def farthest_pair(adj: np.ndarray) -> tuple[int, int] | None:
    """The connected pair with the most hops between them, or None without links."""
    hops = hop_distances(adj)
    best = int(hops.max())
    if best < 1:
        return None
    i, j = np.argwhere(hops == best)[0]
    return int(i), int(j)


def _reachable(adj: np.ndarray, a: int, b: int) -> bool:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[a] = True
    frontier = seen.copy()
    while frontier.any():
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = nxt
    return bool(seen[b])


def interference_sets(dep: Deployment) -> dict[Link, frozenset[Link]]:
    """I_ij = {(u, v) in E : d(u, j) <= d_s or d(i, v) <= d_s} for every link."""
    d = dep.distances
    near = d <= dep.d_s  # includes the node itself (distance 0)
    out_links = [[] for _ in range(dep.num_nodes)]
    in_links = [[] for _ in range(dep.num_nodes)]
    for u, v in dep.links:
        out_links[u].append((u, v))
        in_links[v].append((u, v))
    result = {}
    for i, j in dep.links:
        members = set()
        for u in np.nonzero(near[:, j])[0]:
            members.update(out_links[u])
        for v in np.nonzero(near[i, :])[0]:
            members.update(in_links[v])
        result[(i, j)] = frozenset(members)
    return result


@dataclass(frozen=True, eq=False)
class ChannelProcess:
    """Independent two-state Markov chain per (PU, channel).

    ``busy_prob[m][k]`` is the stationary probability that PU ``m`` occupies
    channel ``k``; ``mean_on`` is the mean busy-burst length in slots.
    Occupancy at a slot is a pure function of ``(seed, slot)``.
    """

    busy_prob: tuple[tuple[float, ...], ...]
    mean_on: float = 5.0
    seed: int = 0
    block: int = 4096
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mean_on < 1:
            raise InvalidParams("mean busy burst must be at least one slot")
        for row in self.busy_prob:
            for p in row:
                if not 0 <= p <= 1:
                    raise InvalidParams("busy probability must lie in [0, 1]")
                if 0 < p < 1 and p / (1 - p) / self.mean_on > 1:
                    raise InvalidParams(f"busy probability {p} unreachable with mean burst {self.mean_on}")

    @classmethod
    def uniform(cls, num_pus: int, num_channels: int, busy_prob: float = 0.3, mean_on: float = 5.0, seed: int = 0):
        return cls(tuple((busy_prob,) * num_channels for _ in range(num_pus)), mean_on=mean_on, seed=seed)

    @property
    def shape(self) -> tuple[int, int]:
        m = len(self.busy_prob)
        return m, (len(self.busy_prob[0]) if m else 0)

    def transition(self, pu: int, k: int) -> tuple[float, float]:
        """Return ``(p_stay_on, p_stay_off)`` for one chain."""
        p = self.busy_prob[pu][k]
        leave_on = 1.0 / self.mean_on
        if p >= 1.0:
            return 1.0, 0.0
        if p <= 0.0:
            return 1.0 - leave_on, 1.0
        return 1.0 - leave_on, 1.0 - p * leave_on / (1.0 - p)

    def stationary(self, pu: int, k: int) -> float:
        stay_on, stay_off = self.transition(pu, k)
        to_on, to_off = 1.0 - stay_off, 1.0 - stay_on
        if to_on + to_off == 0.0:
            return self.busy_prob[pu][k]
        return to_on / (to_on + to_off)

    def _matrices(self):
        m, k = self.shape
        stay_on = np.empty((m, k))
        turn_on = np.empty((m, k))
        for a in range(m):
            for b in range(k):
                so, sf = self.transition(a, b)
                stay_on[a, b] = so
                turn_on[a, b] = 1.0 - sf
        pi = np.asarray(self.busy_prob, dtype=float).reshape(m, k)
        return stay_on, turn_on, pi

    def _block(self, b: int) -> np.ndarray:
        cached = self._cache.get(b)
        if cached is not None:
            return cached
        m, k = self.shape
        stay_on, turn_on, pi = self._matrices()
        u = np.random.default_rng([self.seed, b]).random((self.block, m, k))
        out = np.empty((self.block, m, k), dtype=bool)
        if b == 0:
            state = u[0] < pi
        else:
            prev = self._block(b - 1)[-1]
            state = np.where(prev, u[0] < stay_on, u[0] < turn_on)
        out[0] = state
        for t in range(1, self.block):
            state = np.where(state, u[t] < stay_on, u[t] < turn_on)
            out[t] = state
        self._cache[b] = out
        return out

    def occupancy(self, start: int, stop: int) -> np.ndarray:
        """Boolean array ``(stop - start, M, K)``: PU m busy on channel k at each slot."""
        if start < 0 or stop < start:
            raise InvalidParams("slot range must be non-negative and ordered")
        m, k = self.shape
        if stop == start:
            return np.zeros((0, m, k), dtype=bool)
        first, last = start // self.block, (stop - 1) // self.block
        parts = [self._block(b) for b in range(first, last + 1)]
        arr = np.concatenate(parts, axis=0)
        off = first * self.block
        return arr[start - off: stop - off]

    def active(self, slot: int) -> np.ndarray:
        return self.occupancy(slot, slot + 1)[0]

    def to_dict(self) -> dict:
        return {"busy_prob": [list(r) for r in self.busy_prob], "mean_on": self.mean_on, "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> ChannelProcess:
        return cls(tuple(tuple(float(p) for p in r) for r in doc["busy_prob"]),
                   mean_on=float(doc.get("mean_on", 5.0)), seed=int(doc.get("seed", 0)))


def node_free(dep: Deployment, proc: ChannelProcess, start: int, stop: int) -> np.ndarray:
    """``free[t, n, k]``: no active PU on channel k covers SU n at slot ``start + t``."""
    n, k = dep.num_nodes, dep.num_channels
    if dep.num_pus == 0:
        return np.ones((stop - start, n, k), dtype=bool)
    occ = proc.occupancy(start, stop)
    if occ.shape[1:] != (dep.num_pus, k):
        raise InvalidParams("channel process shape does not match deployment")
    cover = dep.pu_cover.astype(np.int32)
    blocked = np.einsum("nm,tmk->tnk", cover, occ.astype(np.int32)) > 0
    return ~blocked


def availability(dep: Deployment, proc: ChannelProcess, slot: int) -> dict[Link, tuple[int, ...]]:
    """h[(i, j)][k] = 1 iff the link exists and no active PU on k covers i or j."""
    if slot < 0:
        raise InvalidParams("slot must be non-negative")
    free = node_free(dep, proc, slot, slot + 1)[0]
    return {(i, j): tuple(int(free[i, k] and free[j, k]) for k in range(dep.num_channels)) for i, j in dep.links}
