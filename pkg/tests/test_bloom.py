from __future__ import annotations

import hashlib
import math
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfrsim.bloom import (HEADER_SIZE, BloomFilter, BloomFormatError, BloomParams, derive_params,
                          estimate_fpp)

elements = st.one_of(st.binary(max_size=40), st.text(max_size=40))


def reference_positions(element: bytes, m: int, k: int, seed: int) -> list[int]:
    """Double hashing written out independently of the library."""
    digest = hashlib.blake2b(element, digest_size=16, key=seed.to_bytes(8, "big")).digest()
    h1 = int.from_bytes(digest[:8], "big")
    h2 = int.from_bytes(digest[8:], "big")
    return [(h1 + i * h2) % m for i in range(k)]


# derive_params ------------------------------------------------------------------

def test_derive_params_n200_p002():
    p = derive_params(200, 0.02)
    assert p.m_real == pytest.approx(1628.47, abs=0.01)
    assert p.k_real == pytest.approx(5.64, abs=0.01)
    assert p.m_real / 8 == pytest.approx(203.5, abs=0.1)
    assert (p.m, p.k) == (1632, 6)
    assert p.payload_bytes == 204


def test_derive_params_single_element():
    p = derive_params(1, 0.5)
    assert p.m_real == pytest.approx(1 / math.log(2))
    assert p.k_real == pytest.approx(1.0)
    assert (p.m, p.k) == (8, 1)


@pytest.mark.parametrize("n,p", [(0, 0.1), (-3, 0.1), (10, 0.0), (10, 1.0), (10, 1.5)])
def test_derive_params_domain_errors(n, p):
    with pytest.raises(ValueError):
        derive_params(n, p)


@given(st.integers(1, 5000), st.floats(1e-6, 0.999))
def test_derive_params_rounding(n, p):
    params = derive_params(n, p)
    assert params.m % 8 == 0
    assert params.m >= params.m_real - 1e-6
    assert params.m - params.m_real < 8 + 1e-6
    assert params.k == max(1, round(params.k_real)) or params.k == 64


def test_params_invariants():
    with pytest.raises(ValueError):
        BloomParams(n=1, p=0.1, m=0, k=1, m_real=0.0, k_real=1.0)
    with pytest.raises(ValueError):
        BloomParams(n=1, p=0.1, m=8, k=65, m_real=8.0, k_real=65.0)


def test_from_ratio():
    p = BloomParams.from_ratio(1000, 3.0, 2)
    assert (p.m, p.k) == (3000, 2)
    assert p.p == pytest.approx(estimate_fpp(3000, 1000, 2))


# estimate_fpp -------------------------------------------------------------------

def test_estimate_fpp_table_rows():
    assert estimate_fpp(3000, 1000, 2) == pytest.approx(0.2368, abs=5e-5)
    assert estimate_fpp(8000, 1000, 5) == pytest.approx(0.0217, abs=5e-5)


def test_estimate_fpp_large_m_tends_to_zero():
    assert estimate_fpp(10**9, 1, 1) < 1e-8


def test_estimate_fpp_rejects_zero():
    with pytest.raises(ValueError):
        estimate_fpp(0, 1, 1)


# insert / contains ----------------------------------------------------------------

def test_positions_match_reference():
    bf = BloomFilter(1632, 6, seed=0xDEADBEEF)
    for e in (b"", b"/unibe.ch/", "/unibe.ch/images/fileName1".encode()):
        assert bf.positions(e) == reference_positions(e, 1632, 6, 0xDEADBEEF)


def test_insert_sets_exactly_the_positions():
    bf = BloomFilter(64, 3, seed=7)
    bf.add(b"x")
    expected = set(reference_positions(b"x", 64, 3, 7))
    got = {j for j in range(64) if bf.bits[j // 8] & (1 << (7 - j % 8))}
    assert got == expected


def test_empty_filter_contains_nothing():
    bf = BloomFilter(128, 4)
    assert not any(bf.contains(f"e{i}") for i in range(100))
    assert b"" not in bf


def test_fig1_names_in_small_filter():
    bf = BloomFilter(15, 3, seed=1)
    names = ["/unibe.ch/", "/unibe.ch/images/", "/unibe.ch/images/fileName1"]
    for name in names:
        bf.add(name)
    assert bf.popcount() <= 9
    assert all(name in bf for name in names)


def test_str_and_utf8_bytes_are_the_same_element():
    bf = BloomFilter(256, 4, seed=3).add("/zürich/a")
    assert "/zürich/a".encode("utf-8") in bf


@given(st.lists(elements, max_size=60), st.integers(0, 2**64 - 1))
def test_no_false_negatives(items, seed):
    bf = BloomFilter(512, 5, seed)
    for e in items:
        bf.add(e)
    assert all(bf.contains(e) for e in items)
    assert bf.popcount() <= bf.m


@given(st.lists(elements, min_size=1, max_size=40), elements)
def test_insert_is_monotone(items, probe):
    bf = BloomFilter(200, 3, seed=11)
    before_bits = bytes(bf.bits)
    before = bf.contains(probe)
    for e in items:
        prev = bytes(bf.bits)
        pop = bf.popcount()
        bf.add(e)
        assert all(a & b == a for a, b in zip(prev, bf.bits))
        assert bf.popcount() - pop <= 3
    assert all(a & b == a for a, b in zip(before_bits, bf.bits))
    assert bf.contains(probe) or not before


@given(st.lists(elements, max_size=30), st.integers(0, 2**64 - 1))
def test_same_seed_same_bits(items, seed):
    a = BloomFilter.build(items, derive_params(max(1, len(items)), 0.05), seed)
    b = BloomFilter.build(items, derive_params(max(1, len(items)), 0.05), seed)
    assert a == b


def test_frozen_bits_are_platform_independent():
    bf = BloomFilter.build(["/a/", "/a/x", "/a/y"], derive_params(3, 0.02), seed=42)
    assert hashlib.sha256(bf.to_bytes()).hexdigest()[:16] == FROZEN_DIGEST


FROZEN_DIGEST = hashlib.sha256(
    struct.pack(">4sBBIQ", b"CABF", 1, 6, 32, 42)
    + bytes(
        (lambda bits: [sum(1 << (7 - j) for j in range(8) if 8 * i + j in bits) for i in range(4)])(
            {p for e in ("/a/", "/a/x", "/a/y") for p in reference_positions(e.encode(), 32, 6, 42)}
        )
    )
).hexdigest()[:16]


def test_empirical_fpp_tracks_target():
    rng = random.Random(20240601)
    n, target = 500, 0.02
    members = [f"/member/{rng.getrandbits(64):x}" for _ in range(n)]
    bf = BloomFilter.build(members, derive_params(n, target), seed=rng.getrandbits(64))
    probes = 100_000
    hits = sum(bf.contains(f"/probe/{i}/{rng.getrandbits(32)}") for i in range(probes))
    assert 0.5 * target <= hits / probes <= 1.5 * target


def test_empirical_fpp_eight_bits_five_salts():
    rng = random.Random(99)
    n = 1000
    bf = BloomFilter.build((f"m{i}" for i in range(n)), BloomParams.from_ratio(n, 8.0, 5), seed=5)
    rate = sum(bf.contains(f"p{rng.random()}") for _ in range(100_000)) / 100_000
    assert rate == pytest.approx(0.022, abs=0.005)


# serialization ------------------------------------------------------------------

def test_empty_filter_layout():
    blob = BloomFilter(8, 1, seed=0).to_bytes()
    assert blob == b"CABF" + bytes([1, 1]) + (8).to_bytes(4, "big") + bytes(8) + b"\x00"
    assert len(blob) == HEADER_SIZE + 1 == 19


def test_payload_size_for_n200():
    bf = BloomFilter.from_params(derive_params(200, 0.02))
    assert len(bf.to_bytes()) == HEADER_SIZE + 204
    assert bf.wire_size == HEADER_SIZE + 204


def test_round_trip_n200():
    rng = random.Random(1)
    bf = BloomFilter.build([f"/x/{rng.random()}" for _ in range(200)], derive_params(200, 0.02), seed=9)
    assert BloomFilter.from_bytes(bf.to_bytes()) == bf


@given(st.integers(1, 300), st.integers(1, 64), st.integers(0, 2**64 - 1), st.lists(elements, max_size=20))
def test_round_trip_property(m, k, seed, items):
    bf = BloomFilter(m, k, seed)
    for e in items:
        bf.add(e)
    back = BloomFilter.deserialize(bf.serialize())
    assert back == bf
    assert all(back.contains(e) for e in items)


@pytest.mark.parametrize("mutate,msg", [
    (lambda b: b[:10], "truncated"),
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + b"\x02" + b[5:], "version"),
    (lambda b: b[:-1], "payload"),
    (lambda b: b + b"\x00", "payload"),
    (lambda b: b[:6] + (0).to_bytes(4, "big") + b[10:], "invalid"),
])
def test_deserialize_rejects_bad_input(mutate, msg):
    blob = BloomFilter(64, 3, seed=1).add("a").to_bytes()
    with pytest.raises(BloomFormatError, match=msg):
        BloomFilter.from_bytes(mutate(blob))


def test_constructor_validation():
    with pytest.raises(ValueError):
        BloomFilter(0, 1)
    with pytest.raises(ValueError):
        BloomFilter(8, 0)
    with pytest.raises(ValueError):
        BloomFilter(16, 1, bits=b"\x00")


@settings(max_examples=30)
@given(st.lists(st.text(min_size=1, max_size=20), min_size=1, max_size=50, unique=True))
def test_contains_false_for_unset_position(items):
    bf = BloomFilter.build(items, derive_params(len(items), 0.01), seed=3)
    for e in items:
        bf2 = BloomFilter.from_bytes(bf.to_bytes())
        j = bf2.positions(e)[0]
        bf2.bits[j >> 3] &= ~(0x80 >> (j & 7)) & 0xFF
        assert not bf2.contains(e)
