import math

import pytest
from hypothesis import given, strategies as st

from crnsim.errors import DomainError, WeightError
from crnsim.metrics import INF, build_candidate_sets, link_etx, node_etx, select_candidates, selector_metric
from crnsim.topology import DeploymentParams, from_positions, generate


def test_link_etx_values():
    assert link_etx(0.5) == 2.0
    assert link_etx(0.2) == pytest.approx(1.25, abs=1e-15)
    assert link_etx(1e-12) == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_link_etx_domain(bad):
    with pytest.raises(DomainError):
        link_etx(bad)


def test_chain_distances():
    dep = from_positions([(0, 0), (3, 0), (6, 0)], d_s=4, loss=0.2)
    table = node_etx(dep)
    assert table.node_etx == pytest.approx((2.5, 1.25, 0.0), abs=1e-12)
    assert table.next_hop == (1, 2, None)


def test_diamond_routes_through_better_branch():
    # S=0, A=1 (lossy), B=2 (clean), D=3
    pos = [(0, 0), (3, 2), (3, -2), (6, 0)]
    loss = {(0, 1): (0.5,), (1, 3): (0.5,), (0, 2): (0.1,), (2, 3): (0.1,)}
    dep = from_positions([(x, y + 2) for x, y in pos], d_s=4, loss=loss)
    table = node_etx(dep)
    assert table.next_hop[0] == 2
    assert table.node_etx[0] == pytest.approx(2 / 0.9)


def test_unreachable_nodes_are_infinite():
    dep = from_positions([(0, 0), (3, 0), (30, 0)], d_s=4, destination=1, area=(31, 1))
    table = node_etx(dep)
    assert table.node_etx[2] == INF and table.next_hop[2] is None


@pytest.mark.parametrize("seed", range(4))
def test_bellman_optimality(seed):
    dep = generate(DeploymentParams(), seed=seed)
    t = node_etx(dep)
    assert t.node_etx[dep.destination] == 0
    for i in range(dep.num_nodes):
        if i == dep.destination or t.node_etx[i] == INF:
            continue
        best = min(t.link_etx[(i, j)] + t.node_etx[j] for j in dep.neighbors[i])
        assert t.node_etx[i] == pytest.approx(best, abs=1e-12)
    for link, v in t.link_etx.items():
        assert v == pytest.approx(1 / (1 - min(dep.loss_rates[link])))


def test_selector_metric_examples():
    assert selector_metric(10, 3) == 6.5
    assert selector_metric(0, 4.2) == pytest.approx(2.1)
    assert selector_metric(1, 2) < selector_metric(2, 2)


def test_selector_weights_must_sum_to_one():
    with pytest.raises(WeightError):
        selector_metric(1, 1, chi=0.6, gamma=0.6)
    with pytest.raises(DomainError):
        selector_metric(-1, 1)


@given(q=st.lists(st.integers(0, 100), min_size=2, max_size=8), e=st.lists(st.floats(0, 50), min_size=8, max_size=8))
def test_h_ranking_equals_sum_ranking(q, e):
    n = len(q)
    h = [selector_metric(q[j], e[j]) for j in range(n)]
    s = [q[j] + e[j] for j in range(n)]
    assert sorted(range(n), key=lambda j: (h[j], j)) == sorted(range(n), key=lambda j: (s[j], j))


def test_select_candidates_drops_largest_h():
    etx = (0.0, 1.0, 1.1, 1.2, 1.3, 1.4)
    queues = [0, 0, 0, 95, 0, 0]
    score = {j: selector_metric(queues[j], etx[j]) for j in range(6)}
    assert select_candidates([1, 2, 3, 4, 5], etx, score, 4) == [1, 2, 4, 5]


def _star(num=4):
    # sender 0 with ETX-ordered candidates 1..num, destination last
    pos = [(0.0, 5.0)] + [(2.0, 5.0 + d) for d in (-1.5, -0.5, 0.5, 1.5)][:num] + [(4.5, 5.0)]
    dst = len(pos) - 1
    loss = {}
    for j in range(1, num + 1):
        loss[(0, j)] = (0.2,)
        loss[(j, dst)] = (0.1 + 0.02 * j,)
    return from_positions(pos, d_s=3.2, loss=lambda i, j, k: loss.get((i, j), (0.3,))[0], area=(10, 10))


def test_star_candidates_follow_etx_order():
    dep = _star()
    t = node_etx(dep)
    h = {l: (1,) for l in dep.links}
    cs = build_candidate_sets(t, h, [0] * dep.num_nodes, max_candidates=4)
    order = sorted(cs[0][0], key=lambda j: t.node_etx[j])
    assert cs[0][0] == order
    assert set(cs[0][0]) >= {1, 2, 3, 4} - {j for j in range(1, 5) if t.node_etx[j] >= t.node_etx[0]}


def test_no_progress_gives_empty_set():
    dep = from_positions([(0, 0), (3, 0), (6, 0)], d_s=4)
    t = node_etx(dep)
    cs = build_candidate_sets(t, {l: (1,) for l in dep.links}, [0, 0, 0])
    assert cs[2][0] == []
    blocked = {l: (0,) for l in dep.links}
    assert build_candidate_sets(t, blocked, [0, 0, 0])[0][0] == []


@pytest.mark.parametrize("seed", range(3))
def test_candidates_strictly_decrease_etx(seed):
    dep = generate(DeploymentParams(), seed=seed)
    t = node_etx(dep)
    h = {l: (1,) * dep.num_channels for l in dep.links}
    cs = build_candidate_sets(t, h, list(range(dep.num_nodes)), max_candidates=4)
    for i in range(dep.num_nodes):
        for lst in cs[i]:
            assert len(lst) <= 4
            assert all(t.node_etx[j] < t.node_etx[i] for j in lst)
            assert [t.node_etx[j] for j in lst] == sorted(t.node_etx[j] for j in lst)


def test_unlimited_equal_queues_is_pure_etx_order():
    dep = generate(DeploymentParams(), seed=1)
    t = node_etx(dep)
    h = {l: (1,) * dep.num_channels for l in dep.links}
    cs = build_candidate_sets(t, h, [3] * dep.num_nodes, max_candidates=None)
    for i in range(dep.num_nodes):
        assert cs[i][0] == t.downstream(i, dep.neighbors)


def test_empty_queues_keep_etx_ranking():
    dep = generate(DeploymentParams(), seed=2)
    t = node_etx(dep)
    h = {l: (1,) * dep.num_channels for l in dep.links}
    cs = build_candidate_sets(t, h, [0] * dep.num_nodes, max_candidates=4)
    for i in range(dep.num_nodes):
        assert cs[i][0] == t.downstream(i, dep.neighbors)[:4]


def test_selector_score_recorded():
    dep = from_positions([(0, 0), (3, 0), (6, 0)], d_s=4)
    t = node_etx(dep)
    cs = build_candidate_sets(t, {l: (1,) for l in dep.links}, [4, 2, 0])
    assert cs.h_score[1] == pytest.approx(0.5 * 2 + 0.5 * 1.25)
    assert math.isclose(cs.h_score[2], 0.0)
