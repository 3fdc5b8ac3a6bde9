"""Per-node NDN tables: Content Store, Pending Interest Table and FIB."""
from __future__ import annotations

from collections import OrderedDict
from typing import Iterable

from .names import ContentName, parse

__all__ = [
    "ContentStore",
    "PitEntry",
    "Pit",
    "FibEntry",
    "Fib",
    "FORWARD_NEW",
    "AGGREGATE",
    "DUPLICATE",
    "DEAD_NONCE_GRACE",
]

FORWARD_NEW = "forward-new"
AGGREGATE = "aggregate"
DUPLICATE = "duplicate-drop"

DEAD_NONCE_GRACE = 1.0


class ContentStore:
    """LRU cache of Data packets keyed by full (segmented) name URI."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.capacity = capacity
        self.entries: OrderedDict = OrderedDict()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, uri: str) -> bool:
        return uri in self.entries

    def lookup(self, name):
        uri = name if isinstance(name, str) else name.uri
        data = self.entries.get(uri)
        if data is not None:
            self.entries.move_to_end(uri)
        return data

    def insert(self, data) -> str | None:
        """Cache ``data``; returns the URI evicted to make room, if any."""
        if self.capacity == 0:
            return None
        uri = data.name.uri
        entries = self.entries
        if uri in entries:
            entries.move_to_end(uri)
            entries[uri] = data
            return None
        entries[uri] = data
        if len(entries) > self.capacity:
            evicted, _ = entries.popitem(last=False)
            return evicted
        return None


class PitEntry:
    __slots__ = ("name", "in_records", "out_records", "nonces", "expiry", "stored_cai", "created",
                 "forwarded", "nacked", "spent")

    def __init__(self, name: ContentName, expiry: float, created: float = 0.0):
        self.name = name
        self.in_records: dict[int, tuple[int, float]] = {}  # face -> (nonce, expiry)
        self.out_records: dict[int, int] = {}  # face -> nonce
        self.nonces: set[int] = set()
        self.expiry = expiry
        self.stored_cai = None
        self.created = created
        self.forwarded = None  # last Interest copy sent upstream, reused for retries
        self.nacked: set[int] = set()  # upstream faces that answered with a no-route NACK
        self.spent: set[int] = set()  # nonces this node has sent upstream

    @property
    def is_cai(self) -> bool:
        return self.stored_cai is not None

    def in_faces(self) -> list[int]:
        return list(self.in_records)

    def __repr__(self) -> str:
        kind = "CAI " if self.stored_cai is not None else ""
        return f"PitEntry({kind}{self.name.uri}, in={sorted(self.in_records)}, expiry={self.expiry:g})"


class Pit:
    """Pending Interest Table with nonce-based duplicate suppression.

    Nonces of consumed or expired entries stay in a dead-nonce list until the
    entry's expiry plus :data:`DEAD_NONCE_GRACE`.
    """

    def __init__(self):
        self.entries: dict[str, PitEntry] = {}
        self.dead_nonces: dict[tuple[str, int], float] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, uri: str) -> bool:
        return uri in self.entries

    def get(self, uri: str, now: float | None = None) -> PitEntry | None:
        entry = self.entries.get(uri)
        if entry is not None and now is not None and entry.expiry <= now:
            self._retire(uri, entry)
            return None
        return entry

    def _retire(self, uri: str, entry: PitEntry) -> None:
        del self.entries[uri]
        until = entry.expiry + DEAD_NONCE_GRACE
        dead = self.dead_nonces
        for nonce in entry.nonces:
            if dead.get((uri, nonce), -1.0) < until:
                dead[(uri, nonce)] = until

    def remove(self, uri: str) -> PitEntry | None:
        entry = self.entries.get(uri)
        if entry is not None:
            self._retire(uri, entry)
        return entry

    def seen_nonce(self, uri: str, nonce: int, now: float) -> bool:
        until = self.dead_nonces.get((uri, nonce))
        return until is not None and until > now

    def on_interest(self, interest, in_face: int, now: float) -> str:
        """Classify an incoming Interest and update the table accordingly."""
        uri = interest.name.uri
        nonce = interest.nonce
        entry = self.get(uri, now)
        if entry is not None and nonce in entry.nonces:
            return DUPLICATE
        if self.seen_nonce(uri, nonce, now):
            return DUPLICATE
        expiry = now + interest.lifetime
        if entry is not None:
            entry.in_records[in_face] = (nonce, expiry)
            entry.nonces.add(nonce)
            if expiry > entry.expiry:
                entry.expiry = expiry
            return AGGREGATE
        entry = PitEntry(interest.name, expiry, now)
        entry.in_records[in_face] = (nonce, expiry)
        entry.nonces.add(nonce)
        self.entries[uri] = entry
        return FORWARD_NEW

    def on_data(self, data, now: float) -> list[int]:
        """Consume the entry matching ``data`` and return its downstream faces."""
        uri = data.name.uri
        entry = self.entries.get(uri)
        if entry is None or entry.stored_cai is not None:
            return []
        self._retire(uri, entry)
        if entry.expiry <= now:
            return []
        return [f for f, (_, exp) in entry.in_records.items() if exp > now]

    def expire(self, now: float) -> list[PitEntry]:
        """Remove every entry with ``expiry <= now`` and purge stale dead nonces."""
        expired = [(u, e) for u, e in self.entries.items() if e.expiry <= now]
        for uri, entry in expired:
            self._retire(uri, entry)
        if self.dead_nonces:
            stale = [k for k, until in self.dead_nonces.items() if until <= now]
            for k in stale:
                del self.dead_nonces[k]
        return [e for _, e in expired]

    # advertisement entries -------------------------------------------------

    def store_cai(self, cai, in_face: int, now: float) -> PitEntry:
        """Store a fresh advertisement, replacing any entry under the same name."""
        uri = cai.name.uri
        old = self.entries.get(uri)
        if old is not None:
            self._retire(uri, old)
        entry = PitEntry(cai.name, now + cai.lifetime, now)
        entry.stored_cai = cai
        entry.nonces.add(cai.nonce)
        entry.in_records[in_face] = (cai.nonce, entry.expiry)
        self.entries[uri] = entry
        return entry

    def cai_entries(self) -> list[PitEntry]:
        return [e for e in self.entries.values() if e.stored_cai is not None]


class FibEntry:
    __slots__ = ("prefix", "next_hops")

    def __init__(self, prefix: ContentName, next_hops: Iterable[int] = ()):
        self.prefix = prefix
        self.next_hops: set[int] = set(next_hops)

    def __repr__(self) -> str:
        return f"FibEntry({self.prefix.uri}, {sorted(self.next_hops)})"


class Fib:
    def __init__(self):
        self.entries: dict[str, FibEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, uri: str) -> bool:
        return uri in self.entries

    def get(self, prefix) -> FibEntry | None:
        return self.entries.get(prefix if isinstance(prefix, str) else prefix.uri)

    def lookup_lpm(self, name: ContentName) -> FibEntry | None:
        entries = self.entries
        if not entries:
            return None
        comps = name.components
        uri = name.uri
        for length in range(len(comps), 0, -1):
            entry = entries.get(uri)
            if entry is not None:
                return entry
            uri = uri[: len(uri) - len(comps[length - 1]) - 1]
        return None

    def add_nexthop(self, prefix, face: int) -> FibEntry:
        if isinstance(prefix, str):
            prefix = parse(prefix)
        entry = self.entries.get(prefix.uri)
        if entry is None:
            entry = self.entries[prefix.uri] = FibEntry(prefix)
        entry.next_hops.add(face)
        return entry

    def set_nexthops(self, prefix, faces: Iterable[int]) -> FibEntry | None:
        """Replace an entry's next hops; an empty set deletes the entry."""
        if isinstance(prefix, str):
            prefix = parse(prefix)
        faces = set(faces)
        if not faces:
            self.entries.pop(prefix.uri, None)
            return None
        entry = self.entries.get(prefix.uri)
        if entry is None:
            entry = self.entries[prefix.uri] = FibEntry(prefix, faces)
        else:
            entry.next_hops = faces
        return entry

    def remove_nexthop(self, prefix, face: int) -> None:
        uri = prefix if isinstance(prefix, str) else prefix.uri
        entry = self.entries.get(uri)
        if entry is None:
            return
        entry.next_hops.discard(face)
        if not entry.next_hops:
            del self.entries[uri]

    def remove_face(self, face: int) -> int:
        """Drop ``face`` from every entry; entries left empty disappear. Returns entries touched."""
        touched = 0
        empty = []
        for uri, entry in self.entries.items():
            if face in entry.next_hops:
                entry.next_hops.discard(face)
                touched += 1
                if not entry.next_hops:
                    empty.append(uri)
        for uri in empty:
            del self.entries[uri]
        return touched

    def add_face_everywhere(self, face: int) -> None:
        for entry in self.entries.values():
            entry.next_hops.add(face)

    def clear(self) -> None:
        self.entries.clear()
