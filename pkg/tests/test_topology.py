import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crnsim.errors import ConnectivityFailure, InvalidParams
from crnsim.topology import (
    ChannelProcess,
    Deployment,
    DeploymentParams,
    availability,
    farthest_pair,
    from_positions,
    generate,
    hop_distances,
    interference_sets,
    node_free,
)


def brute_interference(dep):
    """I_ij rebuilt from raw coordinates with a plain double loop."""
    def dist(a, b):
        (x1, y1), (x2, y2) = dep.su_positions[a], dep.su_positions[b]
        return math.hypot(x1 - x2, y1 - y2) / dep.unit_length

    out = {}
    for i, j in dep.links:
        out[(i, j)] = frozenset((u, v) for u, v in dep.links if dist(u, j) <= dep.d_s or dist(i, v) <= dep.d_s)
    return out


def test_generate_uses_default_counts_and_ranges():
    dep = generate(DeploymentParams(), seed=0)
    assert dep.num_nodes == 30 and dep.num_pus == 4
    assert (dep.area_width, dep.area_height) == (500.0, 500.0)
    assert (dep.d_s, dep.d_i, dep.pu_tx_range, dep.pu_if_range) == (4.0, 8.0, 6.0, 12.0)
    assert dep.connected()


def test_generate_is_seed_deterministic():
    a = generate(DeploymentParams(), seed=7)
    b = generate(DeploymentParams(), seed=7)
    assert a.to_json() == b.to_json()
    assert a.to_json() != generate(DeploymentParams(), seed=8).to_json()


def test_positions_do_not_depend_on_channel_count():
    a = generate(DeploymentParams(num_channels=1), seed=3)
    b = generate(DeploymentParams(num_channels=4), seed=3)
    assert a.su_positions == b.su_positions and a.links == b.links


def test_two_nodes_within_range():
    dep = from_positions([(0, 0), (3, 0)], d_s=4)
    assert set(dep.links) == {(0, 1), (1, 0)}


def test_line_of_three():
    dep = from_positions([(0, 0), (3, 0), (6, 0)], d_s=4)
    assert set(dep.links) == {(0, 1), (1, 0), (1, 2), (2, 1)}
    assert (1, 2) in dep.link_table.interference_set[(0, 1)]


def test_neighbor_rule_is_strict():
    dep = from_positions([(0, 0), (4, 0)], d_s=4)
    assert dep.links == ()


def test_interference_boundary_is_inclusive():
    # d(u, j) == d_s exactly puts (u, v) in I_ij
    dep = from_positions([(0, 0), (3, 0), (7, 0), (10, 0)], d_s=4, d_i=8)
    assert math.isclose(dep.distance(2, 1), 4.0)
    assert (2, 3) in dep.link_table.interference_set[(0, 1)]


def test_far_links_do_not_interfere():
    dep = from_positions([(0, 0), (3, 0), (20, 0), (23, 0)], d_s=4, d_i=8)
    assert (2, 3) not in dep.link_table.interference_set[(0, 1)]
    assert (0, 1) not in dep.link_table.interference_set[(2, 3)]


@pytest.mark.parametrize("seed", range(5))
def test_interference_sets_match_brute_force(seed):
    dep = generate(DeploymentParams(num_sus=10, area_width=150, area_height=150), seed=seed)
    assert interference_sets(dep) == brute_interference(dep)


def test_neighbor_rule_all_pairs():
    dep = generate(DeploymentParams(), seed=2)
    links = set(dep.links)
    for i in range(dep.num_nodes):
        for j in range(dep.num_nodes):
            if i != j:
                assert ((i, j) in links) == (dep.distance(i, j) < dep.d_s)


def test_loss_rates_inside_interval():
    dep = generate(DeploymentParams(), seed=4)
    rates = [r for v in dep.loss_rates.values() for r in v]
    assert all(0.1 <= r <= 0.3 for r in rates)
    assert all(len(v) == dep.num_channels for v in dep.loss_rates.values())


def test_json_round_trip():
    dep = generate(DeploymentParams(), seed=5)
    back = Deployment.from_json(dep.to_json())
    assert back.to_json() == dep.to_json()
    assert back.links == dep.links


def test_malformed_document_rejected():
    with pytest.raises(InvalidParams):
        Deployment.from_dict({"area": [1, 1]})


@pytest.mark.parametrize("field,value", [("d_s", 0), ("num_radios", 0), ("num_channels", 0), ("num_sus", 1),
                                         ("d_i", 3.0), ("pu_if_range", 5.0), ("loss_max", 1.0)])
def test_invalid_params(field, value):
    with pytest.raises(InvalidParams):
        generate(DeploymentParams(**{field: value}), seed=0)


def test_connectivity_failure_after_retries():
    p = DeploymentParams(num_sus=2, area_width=5000, area_height=5000, source=0, destination=1, max_retries=5)
    with pytest.raises(ConnectivityFailure):
        generate(p, seed=0)


def test_explicit_endpoints_are_connected():
    dep = generate(DeploymentParams(source=0, destination=29), seed=1)
    assert (dep.source, dep.destination) == (0, 29)
    assert dep.connected()


def test_farthest_pair_picks_longest_hop_distance():
    adj = np.zeros((4, 4), dtype=bool)
    for a, b in [(0, 1), (1, 2), (2, 3)]:
        adj[a, b] = adj[b, a] = True
    assert farthest_pair(adj) == (0, 3)
    hops = hop_distances(adj)
    assert hops[0, 3] == 3 and hops[3, 0] == 3


def test_positions_inside_area():
    with pytest.raises(InvalidParams):
        from_positions([(0, 0), (3, 0)], area=(2.0, 2.0))


# -- channel process -------------------------------------------------------


def test_idle_pus_leave_every_link_available():
    dep = generate(DeploymentParams(), seed=0)
    proc = ChannelProcess.uniform(dep.num_pus, dep.num_channels, busy_prob=0.0)
    for slot in (0, 17, 999):
        h = availability(dep, proc, slot)
        assert all(all(v) for v in h.values())


def test_always_on_pu_blocks_its_channel():
    dep = from_positions([(5, 5), (8, 5)], d_s=4, pu_positions=[(5, 5)], num_channels=2, area=(20, 20))
    proc = ChannelProcess(((1.0, 0.0),), seed=3)
    for slot in range(50):
        h = availability(dep, proc, slot)
        assert h[(0, 1)][0] == 0 and h[(1, 0)][0] == 0
        assert h[(0, 1)][1] == 1


def test_pu_outside_interference_range_blocks_nothing():
    dep = from_positions([(0, 0), (3, 0)], d_s=4, pu_positions=[(40, 0)], area=(50, 5))
    proc = ChannelProcess(((1.0,),))
    assert availability(dep, proc, 0)[(0, 1)] == (1,)


def test_busy_fraction_matches_stationary_probability():
    proc = ChannelProcess(((0.5,),), mean_on=5.0, seed=11)
    occ = proc.occupancy(0, 10000)
    assert abs(occ[:, 0, 0].mean() - 0.5) <= 0.02


@given(p=st.floats(0.01, 0.8), mean_on=st.floats(1.0, 20.0))
def test_stationary_distribution_of_chain(p, mean_on):
    if p / (1 - p) / mean_on > 1:
        return
    proc = ChannelProcess(((p,),), mean_on=mean_on)
    assert abs(proc.stationary(0, 0) - p) <= 1e-9
    stay_on, stay_off = proc.transition(0, 0)
    pi = (1 - stay_off) / ((1 - stay_on) + (1 - stay_off))
    assert abs(pi - p) <= 1e-9


def test_occupancy_is_pure_function_of_seed_and_slot():
    a = ChannelProcess.uniform(4, 3, seed=9)
    b = ChannelProcess.uniform(4, 3, seed=9)
    # read b out of order; slot values must not depend on access history
    late = b.occupancy(9000, 9010)
    assert np.array_equal(a.occupancy(0, 10000)[9000:9010], late)
    assert np.array_equal(a.active(4097), b.active(4097))


def test_node_free_agrees_with_availability():
    dep = generate(DeploymentParams(), seed=6)
    proc = ChannelProcess.uniform(dep.num_pus, dep.num_channels, seed=6)
    free = node_free(dep, proc, 100, 110)
    for t in range(10):
        h = availability(dep, proc, 100 + t)
        for (i, j), row in h.items():
            assert row == tuple(int(free[t, i, k] and free[t, j, k]) for k in range(dep.num_channels))


def test_channel_process_document_round_trip():
    proc = ChannelProcess.uniform(2, 3, busy_prob=0.2, seed=4)
    back = ChannelProcess.from_dict(json.loads(json.dumps(proc.to_dict())))
    assert np.array_equal(back.occupancy(0, 500), proc.occupancy(0, 500))
