"""Content catalogue, Zipf popularity and random endpoint/content placement."""
from __future__ import annotations

import bisect
import math
import os
import random
import string
from dataclasses import dataclass
from itertools import accumulate

from .names import ContentName, parse
from .topology import Topology, TopologyError

__all__ = [
    "Catalogue",
    "PopularityModel",
    "PlacementError",
    "popularity",
    "generate_catalogue",
    "place_endpoints",
    "assign_content",
    "ACCESS_DELAY",
    "ACCESS_BANDWIDTH",
    "MEAN_URL_LENGTH",
]

MEAN_URL_LENGTH = 42.45
ACCESS_DELAY = 0.001
ACCESS_BANDWIDTH = 100e6


class PlacementError(ValueError):
    pass


def popularity(i: int, alpha: float, M: int, q: float = 0.0) -> float:
    """Probability that rank ``i`` (1-based) is requested out of ``M`` files."""
    if M < 1:
        raise ValueError(f"catalogue size must be >= 1, got {M}")
    if not 1 <= i <= M:
        raise ValueError(f"rank {i} outside [1, {M}]")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    norm = math.fsum(1.0 / (j + q) ** alpha for j in range(1, M + 1))
    return (1.0 / (i + q) ** alpha) / norm


class PopularityModel:
    """Zipf popularity over ``M`` ranks with inverse-CDF sampling."""

    def __init__(self, alpha: float, M: int, q: float = 0.0):
        if M < 1:
            raise ValueError(f"catalogue size must be >= 1, got {M}")
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if q < 0:
            raise ValueError(f"shift q must be non-negative, got {q}")
        self.alpha = alpha
        self.M = M
        self.q = q
        weights = [1.0 / (j + q) ** alpha for j in range(1, M + 1)]
        norm = math.fsum(weights)
        self.probabilities = [w / norm for w in weights]
        self.cdf = list(accumulate(self.probabilities))
        self.cdf[-1] = 1.0

    def probability(self, i: int) -> float:
        return self.probabilities[i - 1]

    def sample(self, rng: random.Random) -> int:
        """Draw a 0-based catalogue index (rank minus one)."""
        return min(bisect.bisect_right(self.cdf, rng.random()), self.M - 1)


@dataclass
class Catalogue:
    files: list[ContentName]
    segments_per_file: int = 100

    def __post_init__(self) -> None:
        uris = [f.uri for f in self.files]
        if len(set(uris)) != len(uris):
            raise ValueError("catalogue names must be unique")
        if self.segments_per_file < 1:
            raise ValueError("segments_per_file must be >= 1")

    def __len__(self) -> int:
        return len(self.files)

    @property
    def total_segments(self) -> int:
        return len(self.files) * self.segments_per_file

    @property
    def mean_url_length(self) -> float:
        return sum(len(f.uri.encode("utf-8")) for f in self.files) / len(self.files)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {len(self.files)} files, mean URL length {self.mean_url_length:.2f} bytes\n")
            for f in self.files:
                fh.write(f.uri + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike, segments_per_file: int = 100) -> "Catalogue":
        files = []
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if line:
                    files.append(parse(line))
        if not files:
            raise ValueError(f"{path}: empty catalogue")
        return cls(files, segments_per_file)


_TLDS = ("com", "org", "net", "de", "fr", "it", "ch", "uk", "edu", "nl", "es", "eu")
_DIRS = ("images", "img", "static", "news", "video", "media", "files", "docs", "blog",
         "assets", "css", "js", "pics", "content", "data", "pub", "en", "archive")
_EXTS = ("html", "jpg", "png", "gif", "css", "js", "pdf", "mp4", "php", "txt")
_LETTERS = string.ascii_lowercase


def _word(rng: random.Random, lo: int, hi: int) -> str:
    return "".join(rng.choice(_LETTERS) for _ in range(rng.randint(lo, hi)))


def generate_catalogue(count: int, rng: random.Random, mean_length: float = MEAN_URL_LENGTH,
                       segments_per_file: int = 100) -> Catalogue:
    """Synthetic web-like catalogue: ``/<host>/<dir>.../<file>.<ext>``, 2 to 4 components.

    Hosts are drawn from a pool shared across files so that advertised
    prefixes overlap. Each URL's target length is drawn around ``mean_length``
    and the file component is sized to meet it.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    n_hosts = max(1, count // 6)
    hosts = []
    while len(hosts) < n_hosts:
        h = f"www.{_word(rng, 3, 10)}.{rng.choice(_TLDS)}"
        if h not in hosts:
            hosts.append(h)
    files: list[ContentName] = []
    seen: set[str] = set()
    while len(files) < count:
        host = hosts[min(int(rng.paretovariate(1.2)) - 1, n_hosts - 1)] if n_hosts > 1 else hosts[0]
        depth = rng.choice((0, 1, 1, 2))  # directories between host and file
        comps = [host] + [rng.choice(_DIRS) for _ in range(depth)]
        ext = rng.choice(_EXTS)
        target = max(8, round(rng.gauss(mean_length, 12.0)))
        fixed = sum(len(c) + 1 for c in comps) + 1 + len(ext) + 1  # slashes, dot
        stem_len = max(3, target - fixed)
        comps.append(f"{_word(rng, stem_len, stem_len)}.{ext}")
        name = ContentName(comps)
        if name.uri in seen:
            continue
        seen.add(name.uri)
        files.append(name)
    return Catalogue(files, segments_per_file)


def _group_sizes(total: int, lo: int, hi: int, rng: random.Random) -> list[int]:
    """Random composition of ``total`` into parts within ``[lo, hi]`` where feasible."""
    sizes = []
    left = total
    while left > 0:
        options = [s for s in range(lo, hi + 1) if s == left or left - s >= lo]
        size = rng.choice(options) if options else min(hi, left)
        sizes.append(size)
        left -= size
    return sizes


def place_endpoints(topology: Topology, n_consumers: int, n_servers: int, rng: random.Random,
                    group: tuple[int, int] = (3, 6)) -> tuple[Topology, list[str], list[str]]:
    """Attach consumers in groups to random routers and servers to random routers.

    Returns the extended topology plus the consumer and server ids.
    """
    routers = sorted(topology.nodes_with_role("router"))
    lo, hi = group
    if n_consumers < 0 or n_servers < 0:
        raise PlacementError("endpoint counts must be non-negative")
    if lo < 1 or hi < lo:
        raise PlacementError(f"invalid group bounds {group}")
    if n_consumers or n_servers:
        if not routers:
            raise PlacementError("no routers to attach endpoints to")
    sizes = _group_sizes(n_consumers, lo, hi, rng) if n_consumers else []
    if len(sizes) > len(routers):
        raise PlacementError(
            f"{n_consumers} consumers need {len(sizes)} routers, only {len(routers)} available"
        )
    topo = topology.copy()
    chosen = rng.sample(routers, len(sizes))
    consumers: list[str] = []
    for router, size in zip(chosen, sizes):
        for _ in range(size):
            cid = f"C{len(consumers)}"
            topo.add_node(cid, "consumer")
            topo.add_link(cid, router, ACCESS_DELAY, ACCESS_BANDWIDTH)
            consumers.append(cid)
    servers: list[str] = []
    for i in range(n_servers):
        sid = f"S{i}"
        try:
            topo.add_node(sid, "server")
        except TopologyError as exc:
            raise PlacementError(str(exc)) from None
        topo.add_link(sid, rng.choice(routers), ACCESS_DELAY, ACCESS_BANDWIDTH)
        servers.append(sid)
    return topo, consumers, servers


def assign_content(servers: list[str], catalogue: Catalogue,
                   rng: random.Random) -> dict[str, list[ContentName]]:
    """Partition the catalogue: every file goes to one uniformly chosen server, none left empty."""
    if not servers:
        raise PlacementError("no servers to assign content to")
    if len(catalogue) < len(servers):
        raise PlacementError(f"{len(catalogue)} files cannot fill {len(servers)} servers")
    owner: list[str | None] = [None] * len(catalogue)
    seeded = rng.sample(range(len(catalogue)), len(servers))
    for s, idx in zip(servers, seeded):
        owner[idx] = s
    for idx in range(len(catalogue)):
        if owner[idx] is None:
            owner[idx] = rng.choice(servers)
    out: dict[str, list[ContentName]] = {s: [] for s in servers}
    for f, s in zip(catalogue.files, owner):
        out[s].append(f)
    return out
