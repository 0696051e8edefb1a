"""Intra-session random linear network coding over GF(256) and credit counters."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from crnsim import gf256
from crnsim.errors import BatchMismatch, DomainError, LengthMismatch, RankDeficient

DEFAULT_BATCH_SIZE = 10


@dataclass(frozen=True)
class CodedPacket:
    batch_id: int
    coeffs: bytes
    payload: bytes = b""
    alpha: float = 1.0

    @property
    def innovative_possible(self) -> bool:
        """False for the all-zero combination, which never adds rank."""
        return any(self.coeffs)


def encode(natives, coeffs, batch_id: int = 0, alpha: float = 1.0) -> CodedPacket:
    """Combine the batch's native packets with the given GF(256) coefficients."""
    coeffs = bytes(coeffs)
    natives = [bytes(p) for p in natives]
    if len(coeffs) != len(natives):
        raise LengthMismatch(f"{len(coeffs)} coefficients for a batch of {len(natives)}")
    if not natives:
        raise LengthMismatch("empty batch")
    if len({len(p) for p in natives}) != 1:
        raise LengthMismatch("native payloads differ in length")
    payload = gf256.combine(natives, coeffs) if len(natives[0]) else b""
    return CodedPacket(batch_id=batch_id, coeffs=coeffs, payload=payload, alpha=alpha)


def random_coeffs(rng: random.Random, batch_size: int) -> bytes:
    return rng.randbytes(batch_size)


class CodedBatch:
    """Receiver-side store of coded packets for one batch."""

    def __init__(self, batch_id: int, batch_size: int = DEFAULT_BATCH_SIZE, payload_len: int = 0):
        if batch_size < 1:
            raise DomainError("batch size must be positive")
        self.batch_id = batch_id
        self.batch_size = batch_size
        self.payload_len = payload_len
        self.coefficient_matrix: list[bytes] = []
        self.payloads: list[bytes] = []
        self._span = gf256.Span(batch_size)

    @property
    def rank(self) -> int:
        return self._span.rank

    @property
    def decodable(self) -> bool:
        return self.rank == self.batch_size

    def store_and_rank(self, pkt: CodedPacket) -> bool:
        """Keep ``pkt`` if it raises the rank; return whether it did."""
        if pkt.batch_id != self.batch_id:
            raise BatchMismatch(f"packet of batch {pkt.batch_id} offered to batch {self.batch_id}")
        if len(pkt.coeffs) != self.batch_size:
            raise LengthMismatch("coefficient vector length differs from batch size")
        if len(pkt.payload) != self.payload_len:
            raise LengthMismatch("payload length differs from the batch's")
        if not self._span.add(pkt.coeffs):
            return False
        self.coefficient_matrix.append(pkt.coeffs)
        self.payloads.append(pkt.payload)
        return True

    def decode(self) -> list[bytes]:
        if not self.decodable:
            raise RankDeficient(f"rank {self.rank} of {self.batch_size}")
        payloads = self.payloads if self.payload_len else [b""] * self.batch_size
        out = gf256.solve(self.coefficient_matrix, payloads)
        if out is None:  # pragma: no cover - rank bookkeeping guarantees invertibility
            raise RankDeficient("coefficient matrix is singular")
        return out


def decode(batch: CodedBatch) -> list[bytes]:
    return batch.decode()


def store_and_rank(batch: CodedBatch, pkt: CodedPacket) -> bool:
    return batch.store_and_rank(pkt)


def credit_update(sent: float, expected_received: float) -> float:
    """Credit ratio: packets to send per packet expected from upstream.

    A zero denominator means nothing arrives to be forwarded, so the
    contribution is zero.
    """
    if sent < 0:
        raise DomainError("sent packet count must be non-negative")
    if expected_received < 0:
        raise DomainError("expected reception count must be non-negative")
    if expected_received == 0:
        return 0.0
    return sent / expected_received


@dataclass
class CreditLedger:
    """One real-valued counter per (node, channel)."""

    num_channels: int
    exempt: frozenset[int] = frozenset()
    borrow: bool = False
    credit: dict[int, list[float]] = field(default_factory=dict)

    def _row(self, node: int) -> list[float]:
        row = self.credit.get(node)
        if row is None:
            row = self.credit[node] = [0.0] * self.num_channels
        return row

    def get(self, node: int, k: int) -> float:
        return self._row(node)[k]

    def add(self, node: int, k: int, value: float) -> None:
        self._row(node)[k] += value

    def can_send(self, node: int, k: int) -> bool:
        """Credit on channel ``k``, or on any channel when borrowing is allowed."""
        if node in self.exempt:
            return True
        row = self._row(node)
        return row[k] > 0.0 or (self.borrow and max(row) > 0.0)

    def consume(self, node: int, k: int) -> None:
        """Decrement after a broadcast on ``k`` (the source is never charged).

        With borrowing, an exhausted channel draws on the richest counter.
        """
        if node in self.exempt:
            return
        row = self._row(node)
        if self.borrow and row[k] <= 0.0:
            k = max(range(self.num_channels), key=lambda c: (row[c], -c))
        row[k] -= 1.0

    def cap(self, node: int, limit: float) -> None:
        row = self._row(node)
        for k in range(self.num_channels):
            if row[k] > limit:
                row[k] = limit

    def snapshot(self) -> dict[int, tuple[float, ...]]:
        return {n: tuple(v) for n, v in sorted(self.credit.items())}


def full_rank_frequency(trials: int, batch_size: int = DEFAULT_BATCH_SIZE, seed: int = 0) -> float:
    """Fraction of trials in which ``batch_size`` uniform random vectors are independent."""
    rng = random.Random(seed)
    hits = 0
    for _ in range(trials):
        rows = [rng.randbytes(batch_size) for _ in range(batch_size)]
        hits += gf256.rank(rows) == batch_size
    return hits / trials

