"""Network topologies and the line-oriented topology file format.

Format::

    # comment
    node <id> <router|consumer|server>
    link <a> <b> <delay_ms> <bandwidth_bps>

Each link gives one face to each endpoint; a node's faces are numbered in
the order its links appear in the file.
"""
from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

__all__ = ["Link", "Topology", "TopologyError", "load_topology", "parse_topology", "ROLES",
           "BUNDLED_PROFILES"]

ROLES = ("router", "consumer", "server")
BUNDLED_PROFILES = ("geant",)


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    delay: float  # seconds
    bandwidth: float  # bits per second

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


@dataclass
class Topology:
    roles: dict[str, str] = field(default_factory=dict)
    links: list[Link] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._faces: dict[str, list[int]] | None = None

    # construction -----------------------------------------------------------

    def add_node(self, node: str, role: str = "router") -> None:
        if role not in ROLES:
            raise TopologyError(f"unknown role {role!r} for node {node!r}")
        if node in self.roles:
            raise TopologyError(f"duplicate node {node!r}")
        self.roles[node] = role
        self._faces = None

    def add_link(self, a: str, b: str, delay: float, bandwidth: float) -> int:
        for n in (a, b):
            if n not in self.roles:
                raise TopologyError(f"link references unknown node {n!r}")
        if a == b:
            raise TopologyError(f"self-loop on {a!r}")
        if delay <= 0 or bandwidth <= 0:
            raise TopologyError(f"link {a}-{b}: delay and bandwidth must be positive")
        if self.find_link(a, b) is not None:
            raise TopologyError(f"duplicate link {a}-{b}")
        self.links.append(Link(a, b, delay, bandwidth))
        self._faces = None
        return len(self.links) - 1

    def copy(self) -> "Topology":
        return Topology(dict(self.roles), list(self.links))

    # queries ----------------------------------------------------------------

    @property
    def nodes(self) -> list[str]:
        return list(self.roles)

    def nodes_with_role(self, role: str) -> list[str]:
        return [n for n, r in self.roles.items() if r == role]

    def faces(self, node: str) -> list[int]:
        """Link indices incident to ``node``; the face id is the position in this list."""
        if self._faces is None:
            faces: dict[str, list[int]] = {n: [] for n in self.roles}
            for i, link in enumerate(self.links):
                faces[link.a].append(i)
                faces[link.b].append(i)
            self._faces = faces
        return self._faces[node]

    def face_to(self, node: str, neighbor: str) -> int:
        for face, li in enumerate(self.faces(node)):
            if self.links[li].other(node) == neighbor:
                return face
        raise KeyError(f"{node!r} has no link to {neighbor!r}")

    def neighbors(self, node: str) -> list[str]:
        return [self.links[li].other(node) for li in self.faces(node)]

    def degree(self, node: str) -> int:
        return len(self.faces(node))

    def find_link(self, a: str, b: str) -> int | None:
        for i, link in enumerate(self.links):
            if {link.a, link.b} == {a, b}:
                return i
        return None

    def adjacency(self, up: Iterable[bool] | None = None) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.roles}
        states = list(up) if up is not None else [True] * len(self.links)
        for link, ok in zip(self.links, states):
            if ok:
                adj[link.a].append(link.b)
                adj[link.b].append(link.a)
        return adj

    def is_connected(self, up: Iterable[bool] | None = None) -> bool:
        if not self.roles:
            return True
        adj = self.adjacency(up)
        start = next(iter(self.roles))
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return len(seen) == len(self.roles)

    def hop_distances(self, source: str, up: Iterable[bool] | None = None) -> dict[str, int]:
        adj = self.adjacency(up)
        dist = {source: 0}
        queue = deque([source])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def diameter(self) -> int:
        return max(max(self.hop_distances(n).values()) for n in self.roles)

    def validate(self) -> None:
        if not self.roles:
            raise TopologyError("topology has no nodes")
        if not self.is_connected():
            raise TopologyError("topology is not connected")

    def to_text(self) -> str:
        lines = [f"node {n} {r}" for n, r in self.roles.items()]
        lines += [
            f"link {l.a} {l.b} {l.delay * 1000:g} {l.bandwidth:g}" for l in self.links
        ]
        return "\n".join(lines) + "\n"


def parse_topology(text: str, source: str = "<string>") -> Topology:
    topo = Topology()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "node":
                if len(parts) != 3:
                    raise TopologyError("expected: node <id> <role>")
                topo.add_node(parts[1], parts[2])
            elif parts[0] == "link":
                if len(parts) != 5:
                    raise TopologyError("expected: link <a> <b> <delay_ms> <bandwidth_bps>")
                try:
                    delay_ms, bw = float(parts[3]), float(parts[4])
                except ValueError:
                    raise TopologyError("delay and bandwidth must be numbers") from None
                topo.add_link(parts[1], parts[2], delay_ms / 1000.0, bw)
            else:
                raise TopologyError(f"unknown directive {parts[0]!r}")
        except TopologyError as exc:
            raise TopologyError(f"{source}:{lineno}: {exc}") from None
    try:
        topo.validate()
    except TopologyError as exc:
        raise TopologyError(f"{source}: {exc}") from None
    return topo


def load_topology(path_or_profile: str | os.PathLike) -> Topology:
    """Load a topology file, or a bundled profile by name (e.g. ``"geant"``)."""
    name = os.fspath(path_or_profile)
    if name in BUNDLED_PROFILES:
        text = resources.files("bfrsim.data").joinpath(f"{name}.topo").read_text()
        return parse_topology(text, f"<profile {name}>")
    with open(name, encoding="utf-8") as fh:
        return parse_topology(fh.read(), name)
