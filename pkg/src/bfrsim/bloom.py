"""Bloom filters used as content summaries in advertisements.

Positions come from double hashing: two 64-bit words are taken from a keyed
BLAKE2b digest of the element (the key is the simulation-wide seed), and salt
``i`` selects ``h1 + i * h2 (mod m)``.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Union

__all__ = [
    "BloomParams",
    "BloomFilter",
    "BloomFormatError",
    "derive_params",
    "estimate_fpp",
    "HEADER_SIZE",
]

Element = Union[bytes, str]

MAGIC = b"CABF"
VERSION = 1
_HEADER = struct.Struct(">4sBBIQ")
HEADER_SIZE = _HEADER.size  # 18 bytes
MAX_SALTS = 64


class BloomFormatError(ValueError):
    """Raised when a serialized filter cannot be decoded."""


@dataclass(frozen=True)
class BloomParams:
    n: int
    p: float
    m: int
    k: int
    m_real: float
    k_real: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 1 <= self.k <= MAX_SALTS:
            raise ValueError(f"k must be in [1, {MAX_SALTS}], got {self.k}")

    @property
    def payload_bytes(self) -> int:
        return (self.m + 7) // 8

    @classmethod
    def from_ratio(cls, n: int, bits_per_element: float, k: int) -> "BloomParams":
        """Parameters for a fixed ``m/n`` ratio and salt count (Table-style settings)."""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        m_real = bits_per_element * n
        m = _byte_align(m_real)
        return cls(n=n, p=estimate_fpp(m, n, k), m=m, k=k, m_real=m_real, k_real=float(k))


def _byte_align(m_real: float) -> int:
    m = max(1, math.ceil(m_real - 1e-9))
    return ((m + 7) // 8) * 8


def derive_params(n: int, p: float) -> BloomParams:
    """Size a filter for ``n`` elements at false-positive probability ``p``.

    ``m`` is rounded up to a whole number of bytes and ``k`` to the nearest
    integer (at least 1). The unrounded values are kept on the result.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    ln2 = math.log(2)
    m_real = -n * math.log(p) / (ln2 * ln2)
    k_real = (m_real / n) * ln2
    k = min(MAX_SALTS, max(1, round(k_real)))
    return BloomParams(n=n, p=p, m=_byte_align(m_real), k=k, m_real=m_real, k_real=k_real)


def estimate_fpp(m: int, n: int, k: int) -> float:
    """Analytic false-positive probability ``(1 - exp(-k n / m)) ** k``."""
    if m < 1 or n < 1 or k < 1:
        raise ValueError("m, n and k must all be >= 1")
    return (1.0 - math.exp(-k * n / m)) ** k


def _as_bytes(element: Element) -> bytes:
    return element.encode("utf-8") if isinstance(element, str) else bytes(element)


class BloomFilter:
    """Bit-array Bloom filter with ``salt_count`` double-hashed positions."""

    __slots__ = ("m", "salt_count", "seed", "bits", "_key")

    def __init__(self, m: int, salt_count: int, seed: int = 0, bits: bytes | None = None):
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        if not 1 <= salt_count <= MAX_SALTS:
            raise ValueError(f"salt_count must be in [1, {MAX_SALTS}], got {salt_count}")
        self.m = m
        self.salt_count = salt_count
        self.seed = seed & 0xFFFFFFFFFFFFFFFF
        nbytes = (m + 7) // 8
        if bits is None:
            self.bits = bytearray(nbytes)
        else:
            if len(bits) != nbytes:
                raise ValueError(f"expected {nbytes} payload bytes, got {len(bits)}")
            self.bits = bytearray(bits)
        self._key = self.seed.to_bytes(8, "big")

    @classmethod
    def from_params(cls, params: BloomParams, seed: int = 0) -> "BloomFilter":
        return cls(params.m, params.k, seed)

    @classmethod
    def build(cls, elements: Iterable[Element], params: BloomParams, seed: int = 0) -> "BloomFilter":
        bf = cls.from_params(params, seed)
        for e in elements:
            bf.add(e)
        return bf

    def positions(self, element: Element) -> list[int]:
        digest = hashlib.blake2b(_as_bytes(element), digest_size=16, key=self._key).digest()
        h1, h2 = struct.unpack(">QQ", digest)
        m = self.m
        return [(h1 + i * h2) % m for i in range(self.salt_count)]

    def add(self, element: Element) -> "BloomFilter":
        bits = self.bits
        for j in self.positions(element):
            bits[j >> 3] |= 0x80 >> (j & 7)
        return self

    insert = add

    def contains(self, element: Element) -> bool:
        bits = self.bits
        for j in self.positions(element):
            if not bits[j >> 3] & (0x80 >> (j & 7)):
                return False
        return True

    __contains__ = contains

    def popcount(self) -> int:
        return sum(bin(b).count("1") for b in self.bits)

    def fill_ratio(self) -> float:
        return self.popcount() / self.m

    def to_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, VERSION, self.salt_count, self.m, self.seed) + bytes(self.bits)

    serialize = to_bytes

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BloomFilter":
        if len(blob) < HEADER_SIZE:
            raise BloomFormatError(f"truncated header: {len(blob)} < {HEADER_SIZE} bytes")
        magic, version, salts, m, seed = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise BloomFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BloomFormatError(f"unsupported version {version}")
        if m < 1 or not 1 <= salts <= MAX_SALTS:
            raise BloomFormatError(f"invalid parameters m={m} salt_count={salts}")
        payload = blob[HEADER_SIZE:]
        if len(payload) != (m + 7) // 8:
            raise BloomFormatError(
                f"declared m={m} needs {(m + 7) // 8} payload bytes, got {len(payload)}"
            )
        return cls(m, salts, seed, payload)

    deserialize = from_bytes

    @property
    def wire_size(self) -> int:
        return HEADER_SIZE + len(self.bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BloomFilter):
            return NotImplemented
        return (self.m, self.salt_count, self.seed, self.bits) == (
            other.m,
            other.salt_count,
            other.seed,
            other.bits,
        )

    def __repr__(self) -> str:
        return f"BloomFilter(m={self.m}, k={self.salt_count}, set={self.popcount()})"
