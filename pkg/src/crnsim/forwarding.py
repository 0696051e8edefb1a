"""Per-packet forwarding probabilities over an ETX-ordered candidate list.

Candidates are indexed by rank position ``m`` starting at 1 (the candidate
closest to the destination). ``loss_rates[m - 1]`` is the loss probability of
the link from the sender to candidate ``m``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from crnsim.errors import DomainError, EmptyCandidateSet, TooManyCandidates

ORACLE_CAP = 20


def _check(loss_rates) -> list[float]:
    rates = [float(r) for r in loss_rates]
    for r in rates:
        if not 0.0 < r < 1.0:
            raise DomainError(f"loss rate {r} outside (0, 1)")
    return rates


def _check_index(rates, m: int) -> None:
    if not 1 <= m <= len(rates):
        raise IndexError(f"candidate position {m} outside 1..{len(rates)}")


def beta_only(loss_rates, m: int) -> float:
    """Probability that candidate ``m`` and no other candidate receives."""
    rates = _check(loss_rates)
    _check_index(rates, m)
    p = 1.0 - rates[m - 1]
    for j, r in enumerate(rates, start=1):
        if j != m:
            p *= r
    return p


def beta_with_lower(loss_rates, m: int) -> float:
    """Probability that ``m`` receives, every higher-priority candidate misses,
    and at least one lower-priority candidate also receives."""
    rates = _check(loss_rates)
    _check_index(rates, m)
    return math.prod(rates[: m - 1]) * (1.0 - rates[m - 1]) * (1.0 - math.prod(rates[m:]))


@dataclass(frozen=True)
class ForwardingDistribution:
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    loss_rates: tuple[float, ...]

    @property
    def delivery_prob(self) -> float:
        """Probability that at least one candidate receives."""
        return math.fsum(self.betas)


def forwarding_distribution(loss_rates) -> ForwardingDistribution:
    """Forwarding probability of each candidate: its beta over the beta total."""
    rates = _check(loss_rates)
    if not rates:
        raise EmptyCandidateSet("candidate set is empty")
    betas = [beta_only(rates, m) + beta_with_lower(rates, m) for m in range(1, len(rates) + 1)]
    total = 0.0
    for b in betas:
        total += b
    alphas = tuple(b / total for b in betas)
    return ForwardingDistribution(alphas=alphas, betas=tuple(betas), loss_rates=tuple(rates))


def reception_oracle(loss_rates) -> list[float]:
    """Enumerate all 2^l reception outcomes and credit each to its
    highest-priority receiver."""
    rates = _check(loss_rates)
    if len(rates) > ORACLE_CAP:
        raise TooManyCandidates(f"{len(rates)} candidates exceed the enumeration cap of {ORACLE_CAP}")
    betas = [0.0] * len(rates)
    for outcome in itertools.product((False, True), repeat=len(rates)):
        p = 1.0
        for got, r in zip(outcome, rates):
            p *= (1.0 - r) if got else r
        for m, got in enumerate(outcome):
            if got:
                betas[m] += p
                break
    return betas
