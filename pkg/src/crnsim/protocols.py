"""The four routing strategies compared by the simulator.

Every policy shares the availability-aware channel pick (lowest-index channel
that is free at both ends with a radio to spare); they differ in candidate
selection, what receivers do with a packet, and how transmitters are ordered.
"""

from __future__ import annotations

from dataclasses import dataclass

from crnsim.errors import ConfigError

NAMES = ("ORNC", "MORE", "EXOR", "SINGLE")


@dataclass(frozen=True)
class PolicySpec:
    name: str
    uses_coding: bool
    candidate_rule: str  # "h_score" | "etx" | "next_hop"
    forwarding_rule: str  # "alpha" | "credit" | "first_receiver" | "unicast"
    availability_credits: bool = False
    spatial_reuse: bool = True
    one_channel_per_link: bool = False
    priority: str = "etx"  # "etx" | "h_score" | "h_score_desc"
    chi: float = 0.5
    gamma: float = 0.5

    @property
    def opportunistic(self) -> bool:
        return self.candidate_rule != "next_hop"


def policy_ornc(chi: float = 0.5, gamma: float = 0.5) -> PolicySpec:
    return PolicySpec(
        name="ORNC",
        uses_coding=True,
        candidate_rule="h_score",
        forwarding_rule="alpha",
        availability_credits=True,
        priority="h_score",
        chi=chi,
        gamma=gamma,
    )


def policy_more() -> PolicySpec:
    return PolicySpec(name="MORE", uses_coding=True, candidate_rule="etx", forwarding_rule="credit")


def policy_exor() -> PolicySpec:
    return PolicySpec(name="EXOR", uses_coding=False, candidate_rule="etx", forwarding_rule="first_receiver")


def policy_single() -> PolicySpec:
    return PolicySpec(
        name="SINGLE",
        uses_coding=False,
        candidate_rule="next_hop",
        forwarding_rule="unicast",
        one_channel_per_link=True,
    )


_FACTORIES = {
    "ORNC": policy_ornc,
    "MORE": policy_more,
    "EXOR": policy_exor,
    "SINGLE": policy_single,
}


def get_policy(name: str) -> PolicySpec:
    try:
        return _FACTORIES[name.upper()]()
    except KeyError:
        raise ConfigError(f"unknown protocol {name!r}; choose from {', '.join(n.lower() for n in NAMES)}") from None
