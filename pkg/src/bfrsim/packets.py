"""Wire packets: Interest, Data, No-Data NACK and the content advertisement Interest."""
from __future__ import annotations

from .bloom import BloomFilter, BloomFormatError
from .names import ContentName, parse, strip_segment

__all__ = [
    "Interest",
    "Data",
    "Nack",
    "CaiMessage",
    "CAI_PREFIX",
    "PACKET_HEADER",
    "SEGMENT_PAYLOAD",
    "DEFAULT_INTEREST_LIFETIME",
    "cai_name",
]

CAI_PREFIX = "ContentAdvertisement"
PACKET_HEADER = 60  # fixed framing bytes on every packet
SEGMENT_PAYLOAD = 1024
DEFAULT_INTEREST_LIFETIME = 4.0


def cai_name(server_id: str) -> ContentName:
    return ContentName((CAI_PREFIX, server_id))


class Interest:
    """Request for one named segment.

    ``detour`` marks a copy that a router sent off its advertised routes
    while recovering from a NACK; it stays set on every later copy.
    """

    __slots__ = ("name", "nonce", "lifetime", "hop_count", "key", "size", "detour")

    def __init__(self, name: ContentName, nonce: int, lifetime: float = DEFAULT_INTEREST_LIFETIME,
                 hop_count: int = 0, detour: bool = False):
        if lifetime <= 0:
            raise ValueError("Interest lifetime must be positive")
        self.name = name
        self.nonce = nonce & 0xFFFFFFFF
        self.lifetime = lifetime
        self.hop_count = hop_count
        self.detour = detour
        # lookup key for FIB population and repositories: the segmentless name
        self.key = strip_segment(name).uri
        self.size = PACKET_HEADER + len(name.uri)

    is_cai = False

    def hop(self, detour: bool = False) -> "Interest":
        """Copy with the hop counter advanced by one link (and marked as a detour if asked)."""
        cp = object.__new__(Interest)
        cp.name = self.name
        cp.nonce = self.nonce
        cp.lifetime = self.lifetime
        cp.hop_count = self.hop_count + 1
        cp.key = self.key
        cp.size = self.size
        cp.detour = self.detour or detour
        return cp

    def __repr__(self) -> str:
        extra = ", detour" if self.detour else ""
        return f"Interest({self.name.uri}, nonce={self.nonce:#x}, hops={self.hop_count}{extra})"


class Data:
    __slots__ = ("name", "payload_size", "origin_id", "hop_count", "size")

    def __init__(self, name: ContentName, origin_id: str, hop_count: int = 0,
                 payload_size: int = SEGMENT_PAYLOAD):
        self.name = name
        self.payload_size = payload_size
        self.origin_id = origin_id
        self.hop_count = hop_count
        self.size = PACKET_HEADER + len(name.uri) + payload_size

    is_nack = False

    def __repr__(self) -> str:
        return f"Data({self.name.uri}, origin={self.origin_id}, hops={self.hop_count})"


NO_DATA = "no-data"
NO_ROUTE = "no-route"
DUPLICATE_NONCE = "duplicate"
NACK_REASONS = (NO_DATA, NO_ROUTE, DUPLICATE_NONCE)


class Nack:
    """Negative reply travelling back along the PIT path.

    ``NO_DATA`` comes from a server that no longer holds the content,
    ``NO_ROUTE`` from a router left without any usable next hop and
    ``DUPLICATE_NONCE`` from a router that already handled this copy and can
    neither serve nor wait for it.

    ``nonce`` names the Interest copy being refused; a router ignores a NACK
    whose nonce no longer matches what it sent on that face. ``None`` matches
    any copy.
    """

    __slots__ = ("name", "origin_id", "reason", "nonce", "size")

    def __init__(self, name: ContentName, origin_id: str, reason: str = NO_DATA,
                 nonce: int | None = None):
        if reason not in NACK_REASONS:
            raise ValueError(f"unknown NACK reason {reason!r}")
        self.name = name
        self.origin_id = origin_id
        self.reason = reason
        self.nonce = nonce
        self.size = PACKET_HEADER + len(name.uri)

    is_nack = True

    def __repr__(self) -> str:
        return f"Nack({self.name.uri}, {self.reason}, origin={self.origin_id})"


class CaiMessage:
    """Content Advertisement Interest: ``/ContentAdvertisement/<server>`` carrying a filter."""

    __slots__ = ("name", "nonce", "lifetime", "filter_bytes", "discard_old_adverts",
                 "hop_count", "size", "_filter")

    is_cai = True

    def __init__(self, server_id: str, nonce: int, lifetime: float, filter_bytes: bytes,
                 discard_old_adverts: bool = False, hop_count: int = 0):
        if lifetime <= 0:
            raise ValueError("CAI lifetime must be positive")
        self.name = cai_name(server_id)
        self.nonce = nonce & 0xFFFFFFFF
        self.lifetime = lifetime
        self.filter_bytes = bytes(filter_bytes)
        self.discard_old_adverts = discard_old_adverts
        self.hop_count = hop_count
        # framing + name + one flag byte + serialized filter
        self.size = PACKET_HEADER + len(self.name.uri) + 1 + len(self.filter_bytes)
        self._filter: BloomFilter | None = None

    @classmethod
    def from_name(cls, name: ContentName | str, nonce: int, lifetime: float, filter_bytes: bytes,
                  discard_old_adverts: bool = False) -> "CaiMessage":
        if isinstance(name, str):
            name = parse(name)
        if len(name) != 2 or name.components[0] != CAI_PREFIX:
            raise ValueError(f"not a content advertisement name: {name}")
        return cls(name.components[1], nonce, lifetime, filter_bytes, discard_old_adverts)

    @property
    def server_id(self) -> str:
        return self.name.components[1]

    @property
    def key(self) -> str:
        return self.name.uri

    @property
    def filter(self) -> BloomFilter:
        """Decoded filter; raises :class:`BloomFormatError` for a corrupt payload."""
        if self._filter is None:
            self._filter = BloomFilter.from_bytes(self.filter_bytes)
        return self._filter

    def is_well_formed(self) -> bool:
        try:
            self.filter
        except BloomFormatError:
            return False
        return True

    def hop(self) -> "CaiMessage":
        cp = object.__new__(CaiMessage)
        cp.name = self.name
        cp.nonce = self.nonce
        cp.lifetime = self.lifetime
        cp.filter_bytes = self.filter_bytes
        cp.discard_old_adverts = self.discard_old_adverts
        cp.hop_count = self.hop_count + 1
        cp.size = self.size
        cp._filter = self._filter  # decoded filter is read-only; share it between copies
        return cp

    def __repr__(self) -> str:
        flag = ", discard" if self.discard_old_adverts else ""
        return f"CaiMessage({self.name.uri}, nonce={self.nonce:#x}{flag})"
