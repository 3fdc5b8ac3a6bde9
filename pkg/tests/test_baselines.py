from __future__ import annotations

import random

import pytest

from bfrsim.baselines import (LSA_LINK_ENTRY, FloodingStrategy, compute_shortest_paths, dijkstra,
                              flood_transmissions, lsa_size, served_prefixes, sp_signalling_cost)
from bfrsim.engine import LinkScheduleItem
from bfrsim.names import parse
from bfrsim.packets import PACKET_HEADER, Interest
from bfrsim.topology import Topology

from helpers import attach, mini_network, random_connected, router_graph, small_catalogue


def floyd_warshall(topo: Topology) -> dict[tuple[str, str], float]:
    nodes = topo.nodes
    inf = float("inf")
    d = {(a, b): (0 if a == b else inf) for a in nodes for b in nodes}
    for link in topo.links:
        d[link.a, link.b] = d[link.b, link.a] = 1
    for k in nodes:
        for i in nodes:
            for j in nodes:
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def test_dijkstra_matches_floyd_warshall():
    rng = random.Random(12)
    for _ in range(150):
        n = rng.randint(1, 12)
        topo = router_graph(random_connected(rng, n, rng.randint(0, 2 * n)), n)
        fw = floyd_warshall(topo)
        adj = topo.adjacency()
        for s in topo.nodes:
            dist = dijkstra(adj, s)
            for t in topo.nodes:
                assert dist.get(t, float("inf")) == fw[s, t]


def test_dijkstra_disconnected_component():
    topo = router_graph([(0, 1)], 3)
    assert dijkstra(topo.adjacency(), "R0") == {"R0": 0, "R1": 1}


def test_next_hop_on_shortest_path_with_lowest_id_tie_break():
    topo = attach(router_graph([(0, 1), (0, 2), (1, 3), (2, 3)]), {}, {"S0": "R3"})
    table = compute_shortest_paths(topo, {"S0": [parse("/a/x")]})
    assert table.path("R0", "S0") == ["R0", "R1", "R3", "S0"]
    assert table.face("R0", "/a/x") == topo.face_to("R0", "R1")
    assert table.face("R0", "/b/y") is None


def test_next_hops_lie_on_shortest_paths():
    rng = random.Random(3)
    for _ in range(40):
        n = rng.randint(2, 10)
        topo = attach(router_graph(random_connected(rng, n), n), {}, {"S0": f"R{rng.randrange(n)}"})
        table = compute_shortest_paths(topo, {"S0": [parse("/a")]})
        dist = dijkstra(topo.adjacency(), "S0")
        for node, (face, nb) in table.next_hop["S0"].items():
            assert dist[nb] == dist[node] - 1


def test_flooding_forwards_everywhere_but_ingress():
    net = mini_network(router_graph([(0, 1), (0, 2), (0, 3)]), {"C0": "R1"}, {"S0": "R2"}, strategy="flooding")
    r0 = net.sim.nodes["R0"]
    assert isinstance(r0.strategy, FloodingStrategy)
    assert r0.strategy.forward(r0, Interest(parse("/x/01"), 1), 0) == [1, 2]
    net.sim.apply_link_event(net.topology.find_link("R0", "R3"), False)
    assert r0.strategy.forward(r0, Interest(parse("/x/01"), 1), 0) == [1]


def test_flooding_satisfies_everything_and_bounds_copies():
    rng = random.Random(5)
    for trial in range(10):
        n = rng.randint(3, 8)
        topo = router_graph(random_connected(rng, n), n)
        net = mini_network(topo, {"C0": f"R{rng.randrange(n)}"}, {"S0": f"R{rng.randrange(n)}"},
                           strategy="flooding", seed=trial, cache_capacity=0)
        copies: dict[int, int] = {}
        inner = net.sim.transmit

        def transmit(node, face, packet, inner=inner, copies=copies):
            if isinstance(packet, Interest):
                copies[packet.nonce] = copies.get(packet.nonce, 0) + 1
            return inner(node, face, packet)

        net.sim.transmit = transmit
        report = net.run()
        assert report.unsatisfied == 0 and report.satisfied == report.issued - report.pending
        assert max(copies.values()) <= 2 * len(net.topology.links)


def test_sp_recomputes_after_failure():
    topo = router_graph([(0, 1), (1, 2), (2, 3), (3, 0)])
    net = mini_network(topo, {"C0": "R2"}, {"S0": "R0"}, strategy="shortest-path", duration=10.0,
                       sp_convergence_delay=1.0, cache_capacity=0)
    li = net.topology.find_link("R1", "R2")
    r2 = net.sim.nodes["R2"]
    uri = net.catalogue.files[0].uri
    assert r2.fib.get(uri).next_hops == {r2.neighbors.index("R1")}
    net.sim.schedule_failures([LinkScheduleItem("R1", "R2", 3.0, 6.0)])
    net.sim.run(3.5)
    # stale entry still points at the dead link until the controller catches up
    assert r2.fib.get(uri).next_hops == {r2.neighbors.index("R1")}
    net.sim.run(4.5)
    assert r2.fib.get(uri).next_hops == {r2.neighbors.index("R3")}
    report = net.run()
    assert net.controller.recomputations == 3
    assert 0 < report.unsatisfied <= 8


def test_sp_controller_rejects_negative_delay():
    from bfrsim.baselines import SpController
    net = mini_network(router_graph([(0, 1)]), {"C0": "R1"}, {"S0": "R0"}, strategy="shortest-path")
    with pytest.raises(ValueError):
        SpController(net.sim, {}, -1.0)


# signalling cost model ----------------------------------------------------------

def two_nodes() -> Topology:
    topo = Topology()
    topo.add_node("A")
    topo.add_node("B")
    topo.add_link("A", "B", 0.01, 1e6)
    return topo


def test_two_node_lsa_cost():
    topo = two_nodes()
    # each node floods one LSA across the single link
    assert flood_transmissions(topo, "A") == 1
    each = PACKET_HEADER + 1 + (1 + LSA_LINK_ENTRY)
    assert lsa_size(topo, "A") == each
    assert sp_signalling_cost(topo) == 2 * each


def test_zero_rounds_cost_nothing():
    assert sp_signalling_cost(two_nodes(), rounds=0) == 0
    with pytest.raises(ValueError):
        sp_signalling_cost(two_nodes(), rounds=-1)


def test_rounds_scale_linearly():
    topo = router_graph([(0, 1), (1, 2), (2, 0)])
    assert sp_signalling_cost(topo, rounds=3) == 3 * sp_signalling_cost(topo)


def test_flood_transmissions_formula():
    topo = router_graph([(0, 1), (1, 2), (2, 0), (2, 3)])
    # origin sends on 2 links; R1, R2, R3 forward on degree - 1 links
    assert flood_transmissions(topo, "R0") == 2 + 1 + 2 + 0
    assert flood_transmissions(topo, "R0") <= 2 * len(topo.links)


def test_served_prefixes():
    names = [parse("/a/x/1"), parse("/a/y"), parse("/b/z")]
    assert [p.uri for p in served_prefixes(names)] == ["/a", "/b"]
    assert [p.uri for p in served_prefixes(names, 2)] == ["/a/x", "/a/y", "/b/z"]
    assert [p.uri for p in served_prefixes(names, None)] == ["/a/x/1", "/a/y", "/b/z"]
    with pytest.raises(ValueError):
        served_prefixes(names, 0)


def test_lsa_lists_served_prefixes():
    topo = attach(router_graph([(0, 1)]), {}, {"S0": "R0"})
    cat = small_catalogue(count=4)
    base = sp_signalling_cost(topo, {})
    with_names = sp_signalling_cost(topo, {"S0": cat.files})
    # two host prefixes, each carried over every link of S0's flood
    added = sum(len(p.uri) for p in served_prefixes(cat.files))
    assert with_names - base == added * flood_transmissions(topo, "S0")
