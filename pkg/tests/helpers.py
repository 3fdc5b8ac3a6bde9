"""Small hand-built networks shared by the test modules."""
from __future__ import annotations

import itertools
import random

from bfrsim.config import ScenarioConfig
from bfrsim.names import parse
from bfrsim.scenario import Network, assemble_network
from bfrsim.topology import Topology
from bfrsim.workload import Catalogue

# (criterion number, printed line) for every acceptance verdict reached this session
ACCEPTANCE_LINES: list[tuple[int, str]] = []
CRITERIA = range(1, 13)

CORE_DELAY = 0.010
CORE_BW = 10e6
ACCESS_DELAY = 0.001
ACCESS_BW = 100e6


def router_graph(edges, n: int | None = None) -> Topology:
    """Routers ``R0..R{n-1}`` joined by ``edges`` (pairs of indices)."""
    n = n if n is not None else 1 + max(max(e) for e in edges)
    topo = Topology()
    for i in range(n):
        topo.add_node(f"R{i}", "router")
    for a, b in edges:
        topo.add_link(f"R{a}", f"R{b}", CORE_DELAY, CORE_BW)
    return topo


def attach(topo: Topology, consumers: dict[str, str], servers: dict[str, str]) -> Topology:
    """Copy of ``topo`` with each consumer/server linked to the router it maps to."""
    topo = topo.copy()
    for node, router in {**consumers, **servers}.items():
        topo.add_node(node, "consumer" if node in consumers else "server")
        topo.add_link(node, router, ACCESS_DELAY, ACCESS_BW)
    return topo


def small_catalogue(count: int = 4, segments: int = 3) -> Catalogue:
    return Catalogue([parse(f"/site{i % 2}.org/dir/file{i}.html") for i in range(count)], segments)


def mini_network(topo: Topology, consumers: dict[str, str], servers: dict[str, str], placement=None,
                 catalogue: Catalogue | None = None, seed: int = 1, **cfg) -> Network:
    """A ready-to-run network; by default every file lives on the first server."""
    catalogue = catalogue or small_catalogue()
    if placement is None:
        first = sorted(servers)[0]
        placement = {s: (list(catalogue.files) if s == first else []) for s in servers}
    options = dict(duration=4.0, consumer_rate=5.0, consumer_start=1.0, segments=catalogue.segments_per_file,
                   n_consumers=len(consumers), n_servers=max(1, len(servers)))
    options.update(cfg)
    config = ScenarioConfig(**options)
    full = attach(topo, consumers, servers)
    return assemble_network(config, seed, full, sorted(consumers), sorted(servers), placement, catalogue)


def connected_graphs(n: int) -> list[tuple[tuple[int, int], ...]]:
    """Every connected labelled simple graph on ``n`` vertices, as edge tuples."""
    pairs = list(itertools.combinations(range(n), 2))
    out = []
    for mask in range(1 << len(pairs)):
        edges = tuple(p for i, p in enumerate(pairs) if mask >> i & 1)
        if len(edges) >= n - 1 and router_graph(edges, n).is_connected():
            out.append(edges)
    return out


def sample_connected_graphs(n: int, count: int, seed: int) -> list[tuple[tuple[int, int], ...]]:
    graphs = connected_graphs(n)
    return random.Random(seed).sample(graphs, min(count, len(graphs)))


def random_connected(rng: random.Random, n: int, extra: int | None = None) -> list[tuple[int, int]]:
    """A random spanning tree on ``n`` vertices plus up to ``extra`` (default ``n``) chords."""
    edges = {(rng.randrange(i), i) for i in range(1, n)}
    for _ in range(n if extra is None else extra):
        if n > 1:
            edges.add(tuple(sorted(rng.sample(range(n), 2))))
    return sorted(edges)


def verdict(number: int, ok: bool, detail: str) -> None:
    """Record and print one acceptance line, then fail the test if the criterion does not hold."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    assert ok, line
