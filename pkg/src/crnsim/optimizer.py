"""The per-window throughput program: variables, constraints, objective, solvers.

For one window of ``slots`` slots the program chooses link activations
mu[l, k, t], channel usage theta[n, k, t] and link flows f[l, k]. Forwarding
probabilities alpha, loss rates, availability h and backlogs Q are data.

A node's sends ``P_i^k`` are its outflow ``sum_j f_ij^k``, which ties the
flow-balance row to the flows it constrains. The balance row applies to every
node other than the source and the destination.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from crnsim.errors import DimensionMismatch, DomainError, GridTooLarge
from crnsim.forwarding import forwarding_distribution
from crnsim.metrics import INF, node_etx
from crnsim.topology import Deployment

GRID_LIMIT = 10**7
TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NlpInstance:
    num_nodes: int
    links: tuple[tuple[int, int], ...]
    num_channels: int
    slots: int
    source: int
    destination: int
    capacity: float
    radios: int
    loss: np.ndarray  # (L, K)
    alpha: np.ndarray  # (L, K)
    h: np.ndarray  # (L, K) of 0/1, constant over the window
    interference: tuple[tuple[int, ...], ...]  # link index -> indices of I_ij (self included)
    queue: np.ndarray  # (N,)

    def __post_init__(self):
        L, K = len(self.links), self.num_channels
        for name in ("loss", "alpha", "h"):
            arr = getattr(self, name)
            if arr.shape != (L, K):
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {(L, K)}")
        if self.queue.shape != (self.num_nodes,):
            raise DimensionMismatch(f"queue has shape {self.queue.shape}, expected {(self.num_nodes,)}")
        if len(self.interference) != L:
            raise DimensionMismatch("one interference set per link required")
        if L and not ((self.loss > 0).all() and (self.loss < 1).all()):
            raise DomainError("loss rates must lie in (0, 1)")
        if L and not ((self.alpha >= 0).all() and (self.alpha <= 1).all()):
            raise DomainError("forwarding probabilities must lie in [0, 1]")
        if not set(np.unique(self.h)) <= {0, 1}:
            raise DomainError("availability entries must be 0 or 1")
        if (self.queue < 0).any():
            raise DomainError("queue lengths must be non-negative")
        if self.slots < 1 or self.num_channels < 1 or self.radios < 1 or self.capacity < 0:
            raise DomainError("slots, channels and radios must be positive; capacity non-negative")

    @property
    def shape(self) -> dict[str, tuple[int, ...]]:
        L, K, T, N = len(self.links), self.num_channels, self.slots, self.num_nodes
        return {"mu": (L, K, T), "theta": (N, K, T), "f": (L, K)}

    @property
    def num_variables(self) -> int:
        return sum(math.prod(s) for s in self.shape.values())

    def out_links(self, i: int) -> list[int]:
        return [a for a, (u, _) in enumerate(self.links) if u == i]

    def in_links(self, i: int) -> list[int]:
        return [a for a, (_, v) in enumerate(self.links) if v == i]

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_deployment(cls, dep: Deployment, *, slots: int = 5, capacity: float = 100.0, h=None, queue=None,
                        max_candidates: int | None = 4) -> NlpInstance:
        """Program data for ``dep``.

        alpha comes from the forwarding rule over each node's ETX-ordered
        downstream neighbors (the ``max_candidates`` closest); links to any
        other neighbor carry alpha 0. ``h`` defaults to every link available.
        """
        links = tuple(sorted(dep.links))
        index = {l: a for a, l in enumerate(links)}
        K = dep.num_channels
        loss = np.array([dep.loss_rates[l] for l in links], dtype=float).reshape(len(links), K)
        alpha = np.zeros((len(links), K))
        etx = node_etx(dep) if links else None
        for i in range(dep.num_nodes):
            if etx is None or etx.node_etx[i] == INF or i == dep.destination:
                continue
            cands = etx.downstream(i, dep.neighbors)
            if max_candidates is not None:
                cands = cands[:max_candidates]
            for k in range(K):
                if not cands:
                    break
                dist = forwarding_distribution([dep.loss_rates[(i, j)][k] for j in cands])
                for j, a in zip(cands, dist.alphas):
                    alpha[index[(i, j)], k] = a
        if h is None:
            h_arr = np.ones((len(links), K), dtype=np.int64)
        else:
            h_arr = np.array([h[l] for l in links], dtype=np.int64).reshape(len(links), K)
        iset = dep.link_table.interference_set
        interference = tuple(tuple(sorted(index[m] for m in iset[l])) for l in links)
        q = np.zeros(dep.num_nodes) if queue is None else np.asarray(queue, dtype=float)
        return cls(num_nodes=dep.num_nodes, links=links, num_channels=K, slots=slots, source=dep.source,
                   destination=dep.destination, capacity=float(capacity), radios=dep.num_radios, loss=loss,
                   alpha=alpha, h=h_arr, interference=interference, queue=q)

    def nlp_section(self) -> dict:
        return {
            "slots": self.slots,
            "capacity": self.capacity,
            "radios": self.radios,
            "availability": [[list(l), [int(x) for x in row]] for l, row in zip(self.links, self.h)],
            "alpha": [[list(l), [float(x) for x in row]] for l, row in zip(self.links, self.alpha)],
            "queue": [float(q) for q in self.queue],
        }


def load_instance(doc: dict) -> NlpInstance:
    """Instance from a topology document with an optional ``nlp`` section."""
    dep = Deployment.from_dict(doc)
    nlp = doc.get("nlp", {})
    h = None
    if "availability" in nlp:
        h = {tuple(l): tuple(v) for l, v in nlp["availability"]}
    inst = NlpInstance.from_deployment(dep, slots=int(nlp.get("slots", 5)), capacity=float(nlp.get("capacity", 100.0)),
                                       h=h, queue=nlp.get("queue"))
    if "alpha" in nlp:
        given = {tuple(l): v for l, v in nlp["alpha"]}
        alpha = np.array([given[l] for l in inst.links], dtype=float).reshape(inst.alpha.shape)
        inst = NlpInstance(**{**inst.__dict__, "alpha": alpha})
    if "radios" in nlp:
        inst = NlpInstance(**{**inst.__dict__, "radios": int(nlp["radios"])})
    return inst


def instance_document(dep: Deployment, inst: NlpInstance, asn: Assignment | None = None) -> str:
    doc = dep.to_dict()
    doc["nlp"] = inst.nlp_section()
    if asn is not None:
        doc["variables"] = asn.to_dict()
    return json.dumps(doc, sort_keys=True, indent=1)


@dataclass
class Assignment:
    mu: np.ndarray
    theta: np.ndarray
    f: np.ndarray
    objective: float = 0.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, inst: NlpInstance) -> Assignment:
        s = inst.shape
        return cls(np.zeros(s["mu"]), np.zeros(s["theta"]), np.zeros(s["f"]))

    def sends(self, inst: NlpInstance) -> np.ndarray:
        """P[i, k]: packets node i sends on channel k (its outflow)."""
        P = np.zeros((inst.num_nodes, inst.num_channels))
        for a, (u, _) in enumerate(inst.links):
            P[u] += self.f[a]
        return P

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "theta": self.theta.tolist(), "f": self.f.tolist(),
                "objective": self.objective}


@dataclass(frozen=True)
class Violation:
    row: str
    index: tuple
    magnitude: float

    def __str__(self):
        return f"{self.row}{list(self.index)}: {self.magnitude:.3g}"


def objective(inst: NlpInstance, asn: Assignment) -> float:
    """Delivered packets: sum over links into D and channels of f * (1 - rho)."""
    total = 0.0
    for a, (_, v) in enumerate(inst.links):
        if v == inst.destination:
            total += float(np.dot(asn.f[a], 1.0 - inst.loss[a]))
    return total


def _check_dims(inst: NlpInstance, asn: Assignment) -> None:
    s = inst.shape
    for name in ("mu", "theta", "f"):
        got = np.shape(getattr(asn, name))
        if got != s[name]:
            raise DimensionMismatch(f"{name} has shape {got}, expected {s[name]}")


def inflow(inst: NlpInstance, f: np.ndarray) -> np.ndarray:
    """Forwarded arrivals per node: sum over in-links and channels of f * (1 - rho) * alpha."""
    out = np.zeros(inst.num_nodes)
    w = (1.0 - inst.loss) * inst.alpha
    for a, (_, v) in enumerate(inst.links):
        out[v] += float(np.dot(f[a], w[a]))
    return out


def check_feasible(inst: NlpInstance, asn: Assignment, tol: float = TOL) -> list[Violation]:
    """Every constraint row of the program; returns the violated ones with magnitudes."""
    _check_dims(inst, asn)
    mu, theta, f = np.asarray(asn.mu, float), np.asarray(asn.theta, float), np.asarray(asn.f, float)
    L, K, T = inst.shape["mu"]
    out: list[Violation] = []

    def box(name, arr, lo, hi):
        for idx in zip(*np.nonzero(arr < lo - tol)):
            out.append(Violation(f"{name}_lower", tuple(int(x) for x in idx), float(lo - arr[idx])))
        if hi is not None:
            for idx in zip(*np.nonzero(arr > hi + tol)):
                out.append(Violation(f"{name}_upper", tuple(int(x) for x in idx), float(arr[idx] - hi)))

    box("mu", mu, 0.0, 1.0)
    box("theta", theta, 0.0, 1.0)
    box("f", f, 0.0, None)
    for a in range(L):
        rows = mu[list(inst.interference[a])].sum(axis=0)  # (K, T)
        for k, t in zip(*np.nonzero(rows > 1.0 + tol)):
            out.append(Violation("interference", (a, int(k), int(t)), float(rows[k, t] - 1.0)))
    for a, (u, v) in enumerate(inst.links):
        if u != inst.destination:
            d = mu[a] - theta[u]
            for k, t in zip(*np.nonzero(d > tol)):
                out.append(Violation("theta_out", (a, int(k), int(t)), float(d[k, t])))
        if v != inst.source:
            d = mu[a] - theta[v]
            for k, t in zip(*np.nonzero(d > tol)):
                out.append(Violation("theta_in", (a, int(k), int(t)), float(d[k, t])))
    radio = theta.sum(axis=1)  # (N, T)
    for i, t in zip(*np.nonzero(radio > inst.radios + tol)):
        out.append(Violation("radio", (int(i), int(t)), float(radio[i, t] - inst.radios)))
    d = mu - inst.h[:, :, None]
    for idx in zip(*np.nonzero(d > tol)):
        out.append(Violation("availability", tuple(int(x) for x in idx), float(d[idx])))
    cap = mu.sum(axis=2) * inst.capacity
    d = f - cap
    for a, k in zip(*np.nonzero(d > tol)):
        out.append(Violation("capacity", (int(a), int(k)), float(d[a, k])))
    arrivals = inflow(inst, f)
    P = asn.sends(inst) if asn.f is f else Assignment(mu, theta, f).sends(inst)
    for i in range(inst.num_nodes):
        if i in (inst.source, inst.destination):
            continue
        rhs = float(P[i].sum() + inst.queue[i])
        gap = abs(arrivals[i] - rhs)
        if gap > tol * max(1.0, abs(rhs)):
            out.append(Violation("flow_balance", (i,), gap))
    return out


# ---------------------------------------------------------------------------
# local search


def minimal_theta(inst: NlpInstance, mu: np.ndarray) -> np.ndarray:
    """Smallest theta meeting both coupling rows for the given mu."""
    theta = np.zeros(inst.shape["theta"])
    for a, (u, v) in enumerate(inst.links):
        if u != inst.destination:
            np.maximum(theta[u], mu[a], out=theta[u])
        if v != inst.source:
            np.maximum(theta[v], mu[a], out=theta[v])
    return theta


class _FlowModel:
    """Flows on the ETX-decreasing subgraph, driven by split weights.

    Every relay sends its surplus (forwarded arrivals minus backlog) over its
    available downstream link-channels in proportion to its split weights; the
    source sends its injection ``s`` the same way. All flows are affine in
    ``s``: ``f = fa + fb * s``.
    """

    def __init__(self, inst: NlpInstance):
        self.inst = inst
        dist = _etx_from_instance(inst)
        self.order = sorted((i for i in range(inst.num_nodes) if dist[i] < INF and i != inst.destination),
                            key=lambda i: (-dist[i], i))
        self.out = {i: [a for a in inst.out_links(i) if dist[inst.links[a][1]] < dist[i]] for i in self.order}
        # weights live on available (link, channel) pairs only
        self.mask = {i: inst.h[self.out[i]].astype(bool) for i in self.order}
        self.split_nodes = [i for i in self.order if self.mask[i].any()]
        self.gain = (1.0 - inst.loss) * inst.alpha
        L = len(inst.links)
        self.conflict = np.zeros((L, L))
        for a, members in enumerate(inst.interference):
            self.conflict[a, list(members)] = 1.0
        self.incident = [[] for _ in range(inst.num_nodes)]
        for a, (u, v) in enumerate(inst.links):
            if u != inst.destination:
                self.incident[u].append(a)
            if v != inst.source:
                self.incident[v].append(a)

    def unit_flows(self, weights):
        inst = self.inst
        L, K = len(inst.links), inst.num_channels
        fa, fb = np.zeros((L, K)), np.zeros((L, K))
        ina, inb = np.zeros(inst.num_nodes), np.zeros(inst.num_nodes)
        for i in self.order:
            sa, sb = (0.0, 1.0) if i == inst.source else (ina[i] - inst.queue[i], inb[i])
            w = weights.get(i)
            if w is None:
                continue
            for pos, a in enumerate(self.out[i]):
                fa[a], fb[a] = w[pos] * sa, w[pos] * sb
                v = inst.links[a][1]
                ina[v] += float(np.dot(fa[a], self.gain[a]))
                inb[v] += float(np.dot(fb[a], self.gain[a]))
        return fa, fb

    def _radio_ok(self, mu_lk: np.ndarray) -> bool:
        R = self.inst.radios
        for i, links in enumerate(self.incident):
            if links and mu_lk[links].max(axis=0).sum() > R + 1e-12:
                return False
        return True

    def assignment(self, weights) -> Assignment | None:
        """Largest injection the rows allow, with the smallest activation carrying the flows.

        Every row is monotone in mu, so for given flows the least activation
        spread evenly over the window is optimal. Interference and the mu <= 1
        bound are linear in the injection (ratio test); the radio row is
        convex in it (bisection).
        """
        inst = self.inst
        fa, fb = self.unit_flows(weights)
        per = inst.capacity * inst.slots
        lo = 0.0
        pos = fb > 0
        if pos.any():
            lo = max(0.0, float(np.max(-fa[pos] / fb[pos])))
        if (fa[~pos] < -TOL).any():
            return None
        if per <= 0:
            hi = lo if not (fa > TOL).any() and not pos.any() else -1.0
        else:
            hi = math.inf
            rows_a, rows_b = self.conflict @ fa, self.conflict @ fb
            for A, Bc, cap in ((fa, fb, per), (rows_a, rows_b, per)):
                up = Bc > 0
                if up.any():
                    hi = min(hi, float(np.min((cap - A[up]) / Bc[up])))
                if (A[~up] > cap + TOL).any():
                    return None
            if hi == math.inf:
                hi = lo
        if hi < lo - TOL:
            return None
        hi = max(hi, lo)

        def mu_at(s):
            return np.clip((fa + fb * s) / per, 0.0, 1.0) if per > 0 else np.zeros_like(fa)

        if not self._radio_ok(mu_at(hi)):
            if not self._radio_ok(mu_at(lo)):
                return None
            a, b = lo, hi
            for _ in range(60):
                m = 0.5 * (a + b)
                a, b = (m, b) if self._radio_ok(mu_at(m)) else (a, m)
            hi = a
        mu = np.repeat(mu_at(hi)[:, :, None], inst.slots, axis=2)
        f = np.clip(fa + fb * hi, 0.0, None)
        # guard the capacity row against rounding in the division above
        f = np.minimum(f, mu.sum(axis=2) * inst.capacity)
        asn = Assignment(mu=mu, theta=minimal_theta(inst, mu), f=f)
        asn.objective = objective(inst, asn)
        return asn


def _etx_from_instance(inst: NlpInstance) -> list[float]:
    """Destination distances under the best-channel ETX of each link."""
    import heapq

    best = (1.0 / (1.0 - inst.loss.min(axis=1))) if len(inst.links) else np.zeros(0)
    incoming = [[] for _ in range(inst.num_nodes)]
    for a, (u, v) in enumerate(inst.links):
        incoming[v].append((u, float(best[a])))
    dist = [INF] * inst.num_nodes
    dist[inst.destination] = 0.0
    heap = [(0.0, inst.destination)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u, w in incoming[v]:
            if d + w < dist[u]:
                dist[u] = d + w
                heapq.heappush(heap, (d + w, u))
    return dist


def solve_local(inst: NlpInstance, seed: int = 0, budget: int = 3000, restarts: int = 6) -> Assignment:
    """Randomized multi-start coordinate ascent.

    The search variables are each node's split of its outflow over its
    available downstream link-channels. For a given split the flows are
    affine in the source injection; the activations are the least that carry
    them, and the injection is scaled down until every row holds. A step
    perturbs one split coordinate (jitter, zero it, or move mass between two
    of a node's coordinates) and is kept only when the result passes
    check_feasible and strictly improves the objective.
    """
    rng = np.random.default_rng(seed)
    model = _FlowModel(inst)
    best = Assignment.zeros(inst)
    best.objective = objective(inst, best)
    nodes = model.split_nodes
    if not nodes or budget <= 0:
        best.meta = {"seed": seed, "budget": budget, "restarts": restarts}
        return best

    def normalized(w, mask):
        w = np.where(mask, np.maximum(w, 0.0), 0.0)
        tot = w.sum()
        return w / tot if tot > 0 else None

    steps_per_start = max(1, budget // max(1, restarts))
    for start in range(max(1, restarts)):
        weights = {}
        for i in nodes:
            m = model.mask[i]
            raw = m.astype(float) if start == 0 else rng.uniform(0.0, 1.0, m.shape) * m
            if start > 1 and rng.random() < 0.5:
                # sparse start: a single link-channel per node
                raw = np.zeros(m.shape)
                cells = np.argwhere(m)
                raw[tuple(cells[rng.integers(len(cells))])] = 1.0
            weights[i] = normalized(raw, m)
        cur = model.assignment(weights)
        if cur is None or check_feasible(inst, cur):
            cur = Assignment.zeros(inst)
            cur.objective = objective(inst, cur)
        step = 0.5
        for it in range(steps_per_start):
            i = nodes[rng.integers(len(nodes))]
            m = model.mask[i]
            cells = np.argwhere(m)
            w = weights[i].copy()
            x = tuple(cells[rng.integers(len(cells))])
            move = rng.random()
            if move < 0.25:
                w[x] = 0.0
            elif move < 0.6 and len(cells) > 1:
                y = tuple(cells[rng.integers(len(cells))])
                delta = min(w[y], abs(rng.normal(0.0, step)))
                w[y] -= delta
                w[x] += delta
            else:
                w[x] = max(0.0, w[x] + rng.normal(0.0, step))
            w = normalized(w, m)
            if w is None:
                continue
            trial = dict(weights)
            trial[i] = w
            cand = model.assignment(trial)
            if cand is not None and cand.objective > cur.objective + 1e-12 and not check_feasible(inst, cand):
                cur, weights = cand, trial
            if (it + 1) % 100 == 0:
                step = max(0.01, step * 0.7)
        if cur.objective > best.objective:
            best = cur
    best.meta = {"seed": seed, "budget": budget, "restarts": restarts}
    return best


# ---------------------------------------------------------------------------
# grid oracle


class _InnerLp:
    """Exact best flows for fixed link capacities; only the bounds change per call."""

    def __init__(self, inst: NlpInstance):
        L, K = len(inst.links), inst.num_channels
        self.shape = (L, K)
        c = np.zeros(L * K)
        for a, (_, v) in enumerate(inst.links):
            if v == inst.destination:
                c[a * K:(a + 1) * K] = -(1.0 - inst.loss[a])
        self.c = c
        gain = (1.0 - inst.loss) * inst.alpha
        rows, rhs = [], []
        for i in range(inst.num_nodes):
            if i in (inst.source, inst.destination):
                continue
            row = np.zeros(L * K)
            for a, (u, v) in enumerate(inst.links):
                if v == i:
                    row[a * K:(a + 1) * K] += gain[a]
                if u == i:
                    row[a * K:(a + 1) * K] -= 1.0
            rows.append(row)
            rhs.append(inst.queue[i])
        self.A = np.array(rows) if rows else None
        self.b = np.array(rhs) if rows else None

    def __call__(self, cap: np.ndarray) -> tuple[float, np.ndarray] | None:
        if not self.c.size:
            return 0.0, np.zeros(self.shape)
        bounds = np.column_stack([np.zeros(cap.size), cap.ravel()])
        res = linprog(self.c, A_eq=self.A, b_eq=self.b, bounds=bounds, method="highs")
        if res.status != 0:
            return None
        return -float(res.fun), np.asarray(res.x).reshape(self.shape)


def grid_oracle(inst: NlpInstance, resolution: float = 0.05) -> Assignment:
    """Exhaustive search over mu on a grid of the given resolution.

    Only mu entries with h = 1 are gridded (the rest are pinned to 0). For each
    grid point theta takes its smallest feasible value and the flows are
    solved exactly. More capacity never lowers the flow optimum, so only
    feasible points that cannot be raised by one step in any coordinate are
    solved.
    """
    steps = int(round(1.0 / resolution))
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError("resolution must divide 1")
    free = [tuple(int(x) for x in idx) for idx in np.argwhere(np.broadcast_to(inst.h[:, :, None] > 0, inst.shape["mu"]))]
    points = (steps + 1) ** len(free)
    if points > GRID_LIMIT:
        raise GridTooLarge(f"{points} grid points exceed the limit of {GRID_LIMIT}")
    lp = _InnerLp(inst)
    levels = np.arange(steps + 1) / steps
    ok = _grid_feasible(inst, free, levels, steps).reshape((steps + 1,) * len(free))
    maximal = ok.copy()
    for d in range(len(free)):
        up = np.zeros_like(ok)
        idx = [slice(None)] * len(free)
        idx[d] = slice(0, steps)
        src = [slice(None)] * len(free)
        src[d] = slice(1, steps + 1)
        up[tuple(idx)] = ok[tuple(src)]
        maximal &= ~up
    best = Assignment.zeros(inst)
    best.objective = -1.0
    candidates = np.argwhere(maximal)
    for r in candidates:
        mu = np.zeros(inst.shape["mu"])
        for d, idx in enumerate(free):
            mu[idx] = levels[r[d]]
        cap = mu.sum(axis=2) * inst.capacity
        res = lp(cap)
        if res is None or res[0] <= best.objective + 1e-12:
            continue
        asn = Assignment(mu=mu, theta=minimal_theta(inst, mu), f=np.clip(res[1], 0.0, cap))
        asn.objective = objective(inst, asn)
        best = asn
    if best.objective < 0:  # no grid point admits a balanced flow
        best = Assignment.zeros(inst)
        best.objective = 0.0
        best.meta = {"resolution": resolution, "grid_points": points, "solved": len(candidates), "feasible": False}
        return best
    best.meta = {"resolution": resolution, "grid_points": points, "solved": len(candidates), "feasible": True}
    return best


def _grid_feasible(inst, free, levels, steps, chunk: int = 1 << 16) -> np.ndarray:
    """Interference and radio rows for every grid point (theta minimal), in row-major grid order."""
    n = len(free)
    total = (steps + 1) ** n
    L, K, T = inst.shape["mu"]
    out = np.empty(total, dtype=bool)
    for start in range(0, total, chunk):
        flat = np.arange(start, min(total, start + chunk))
        digits = np.array(np.unravel_index(flat, (steps + 1,) * n)).T if n else np.zeros((len(flat), 0), dtype=int)
        mu = np.zeros((len(flat), L, K, T))
        for d, (a, k, t) in enumerate(free):
            mu[:, a, k, t] = levels[digits[:, d]]
        ok = np.ones(len(flat), dtype=bool)
        for a in range(L):
            s = mu[:, list(inst.interference[a])].sum(axis=1)
            ok &= (s <= 1.0 + 1e-12).all(axis=(1, 2))
        theta = np.zeros((len(flat), inst.num_nodes, K, T))
        for a, (u, v) in enumerate(inst.links):
            if u != inst.destination:
                np.maximum(theta[:, u], mu[:, a], out=theta[:, u])
            if v != inst.source:
                np.maximum(theta[:, v], mu[:, a], out=theta[:, v])
        ok &= (theta.sum(axis=2) <= inst.radios + 1e-12).all(axis=(1, 2))
        out[start:start + len(flat)] = ok
    return out
