"""Comparison strategies: flooding and omniscient shortest-path routing.

The shortest-path baseline is computed centrally from the true topology and
content placement; its signalling is charged through a link-state flooding
cost model rather than simulated packet by packet.
"""
from __future__ import annotations

import heapq
from collections.abc import Iterable, Mapping

from .engine import Node, Simulator, Strategy
from .names import ContentName
from .packets import PACKET_HEADER, Interest
from .topology import Topology

__all__ = [
    "FloodingStrategy",
    "ShortestPathStrategy",
    "RoutingTableSP",
    "SpController",
    "dijkstra",
    "compute_shortest_paths",
    "flood_transmissions",
    "lsa_size",
    "sp_signalling_cost",
    "served_prefixes",
    "LSA_LINK_ENTRY",
]

LSA_LINK_ENTRY = 4  # bytes per adjacency entry besides the neighbour id (link cost)


class FloodingStrategy(Strategy):
    """Forward every Interest on all up faces except the one it came from.

    Interests with a new nonce are flooded even when they join a pending
    entry: with several concurrent requesters, suppressing them can leave a
    region of nodes each waiting on the other with no path to the producer.
    """

    name = "flooding"

    def forward(self, node: Node, interest: Interest, in_face: int) -> list[int]:
        up = node.face_up
        return [f for f in range(len(up)) if f != in_face and up[f]]

    forward_aggregated = forward


def dijkstra(adj: Mapping[str, Iterable[str]], source: str,
             weight=None) -> dict[str, float]:
    """Distances from ``source``; ``weight(u, v)`` defaults to one hop per link."""
    dist: dict[str, float] = {source: 0}
    done: set[str] = set()
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v in adj[u]:
            nd = d + (1 if weight is None else weight(u, v))
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


class RoutingTableSP:
    """Per node: served name -> single next-hop face on a min-hop path to its server."""

    def __init__(self, topology: Topology, placement: Mapping[str, Iterable[ContentName]],
                 up: Iterable[bool] | None = None):
        self.topology = topology
        self.placement = {s: list(names) for s, names in placement.items()}
        self.owner: dict[str, str] = {}
        for server in sorted(self.placement):
            for name in self.placement[server]:
                self.owner.setdefault(name.uri, server)
        adj = topology.adjacency(up)
        # server -> node -> (face, neighbour) for every node that can reach the server
        self.next_hop: dict[str, dict[str, tuple[int, str]]] = {}
        for server in self.placement:
            dist = dijkstra(adj, server)
            hops: dict[str, tuple[int, str]] = {}
            for node, d in dist.items():
                if node == server:
                    continue
                best = min(v for v in adj[node] if dist.get(v) == d - 1)
                hops[node] = (topology.face_to(node, best), best)
            self.next_hop[server] = hops

    def face(self, node: str, prefix: str) -> int | None:
        server = self.owner.get(prefix)
        if server is None:
            return None
        hop = self.next_hop[server].get(node)
        return None if hop is None else hop[0]

    def server_faces(self, node: str) -> dict[str, int]:
        return {s: hops[node][0] for s, hops in self.next_hop.items() if node in hops}

    def path(self, node: str, server: str) -> list[str]:
        out = [node]
        hops = self.next_hop[server]
        while out[-1] != server:
            if out[-1] not in hops:
                return []
            out.append(hops[out[-1]][1])
        return out


def compute_shortest_paths(topology: Topology, placement: Mapping[str, Iterable[ContentName]],
                           up: Iterable[bool] | None = None) -> RoutingTableSP:
    return RoutingTableSP(topology, placement, up)


class ShortestPathStrategy(Strategy):
    """Forward on the single FIB next hop; stale entries send into dead links until recomputed."""

    name = "shortest-path"

    def forward(self, node: Node, interest: Interest, in_face: int) -> list[int]:
        entry = node.fib.lookup_lpm(interest.name)
        if entry is None:
            return []
        return sorted(f for f in entry.next_hops if f != in_face)


class SpController:
    """Installs shortest-path FIBs and recomputes them a fixed delay after each link change.

    FIB prefixes are the full file names held by each server.
    """

    def __init__(self, sim: Simulator, placement: Mapping[str, Iterable[ContentName]],
                 convergence_delay: float = 2.0):
        if convergence_delay < 0:
            raise ValueError("convergence delay must be non-negative")
        self.sim = sim
        self.placement = {s: list(names) for s, names in placement.items()}
        self.convergence_delay = convergence_delay
        self.table: RoutingTableSP | None = None
        self.recomputations = 0
        self._installed: dict[str, dict[str, int]] = {n: {} for n in sim.nodes}
        sim.link_listeners.append(self._on_link_event)

    def install(self) -> RoutingTableSP:
        sim = self.sim
        table = compute_shortest_paths(sim.topology, self.placement, sim.link_up)
        for n, node in sim.nodes.items():
            new = table.server_faces(n)
            old = self._installed[n]
            for server in set(old) | set(new):
                if old.get(server) == new.get(server):
                    continue
                for name in self.placement[server]:
                    if table.owner.get(name.uri) != server:
                        continue
                    if server in new:
                        node.fib.set_nexthops(name, (new[server],))
                    else:
                        node.fib.entries.pop(name.uri, None)
            self._installed[n] = new
        self.table = table
        self.recomputations += 1
        return table

    def _on_link_event(self, li: int, up: bool) -> None:
        self.sim.after(self.convergence_delay, self.install)


def flood_transmissions(topology: Topology, origin: str, up: Iterable[bool] | None = None) -> int:
    """Link traversals of one flood from ``origin`` with duplicate suppression.

    The origin sends on all its links; every other reached node forwards its
    first copy on all links but the one it came in on.
    """
    adj = topology.adjacency(up)
    reached = topology.hop_distances(origin, up)
    return len(adj[origin]) + sum(len(adj[u]) - 1 for u in reached if u != origin)


def lsa_size(topology: Topology, node: str, served: Iterable[ContentName] = ()) -> int:
    """Header, one entry per neighbour, and every served name at its full length."""
    size = PACKET_HEADER + len(node)
    size += sum(len(nb) + LSA_LINK_ENTRY for nb in topology.neighbors(node))
    size += sum(len(name.uri) for name in served)
    return size


def served_prefixes(names: Iterable[ContentName], components: int | None = 1) -> list[ContentName]:
    """Distinct name prefixes of ``components`` components (full names for ``None``), sorted."""
    if components is not None and components < 1:
        raise ValueError("components must be >= 1")
    out = {n.uri: n for n in (n if components is None else n.prefix(min(components, len(n))) for n in names)}
    return [out[u] for u in sorted(out)]


def sp_signalling_cost(topology: Topology, placement: Mapping[str, Iterable[ContentName]] | None = None,
                       rounds: int = 1, prefix_components: int | None = 1) -> int:
    """Bytes on the wire for ``rounds`` rounds in which every node floods one LSA.

    A server's LSA lists the server-level prefixes it serves: the distinct
    first ``prefix_components`` components of its names (``None`` lists every
    full name).
    """
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    if rounds == 0:
        return 0
    placement = placement or {}
    per_round = 0
    for node in topology.nodes:
        served = served_prefixes(placement.get(node, ()), prefix_components)
        per_round += lsa_size(topology, node, served) * flood_transmissions(topology, node)
    return per_round * rounds
