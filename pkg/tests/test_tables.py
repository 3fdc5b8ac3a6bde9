from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bfrsim.names import parse
from bfrsim.packets import CaiMessage, Data, Interest
from bfrsim.tables import AGGREGATE, DEAD_NONCE_GRACE, DUPLICATE, FORWARD_NEW, ContentStore, Fib, Pit


def data(uri: str) -> Data:
    return Data(parse(uri), "S0")


# content store --------------------------------------------------------------------

def test_cs_lru_order():
    cs = ContentStore(2)
    assert cs.insert(data("/a/00")) is None
    assert cs.insert(data("/b/00")) is None
    assert cs.lookup(parse("/a/00")) is not None  # /a/00 becomes most recent
    assert cs.insert(data("/c/00")) == "/b/00"
    assert "/a/00" in cs and "/c/00" in cs and "/b/00" not in cs


def test_cs_zero_capacity_caches_nothing():
    cs = ContentStore(0)
    assert cs.insert(data("/a/00")) is None
    assert len(cs) == 0
    with pytest.raises(ValueError):
        ContentStore(-1)


def test_cs_miss_returns_none():
    assert ContentStore(3).lookup("/nothing/00") is None


@given(st.integers(0, 5), st.lists(st.tuples(st.booleans(), st.integers(0, 8)), max_size=80))
def test_cs_matches_reference_lru(capacity, ops):
    cs = ContentStore(capacity)
    model: list[str] = []  # least recent first
    for is_insert, i in ops:
        uri = f"/f{i}/00"
        if is_insert:
            evicted = cs.insert(data(uri))
            if capacity == 0:
                assert evicted is None
                continue
            expect = None
            if uri in model:
                model.remove(uri)
            elif len(model) == capacity:
                expect = model.pop(0)
            model.append(uri)
            assert evicted == expect
        else:
            hit = cs.lookup(uri)
            assert (hit is not None) == (uri in model)
            if uri in model:
                model.remove(uri)
                model.append(uri)
        assert list(cs.entries) == model
        assert len(cs) <= capacity


# PIT ------------------------------------------------------------------------------

def interest(uri: str, nonce: int, lifetime: float = 4.0) -> Interest:
    return Interest(parse(uri), nonce, lifetime)


def test_pit_new_aggregate_duplicate():
    pit = Pit()
    assert pit.on_interest(interest("/a/00", 1), 0, 0.0) == FORWARD_NEW
    assert pit.on_interest(interest("/a/00", 2), 1, 0.1) == AGGREGATE
    assert pit.on_interest(interest("/a/00", 1), 2, 0.2) == DUPLICATE
    entry = pit.get("/a/00")
    assert sorted(entry.in_records) == [0, 1]
    assert entry.expiry == pytest.approx(4.1)


def test_pit_data_consumes_entry():
    pit = Pit()
    pit.on_interest(interest("/a/00", 1), 3, 0.0)
    pit.on_interest(interest("/a/00", 2), 5, 0.0)
    assert sorted(pit.on_data(data("/a/00"), 1.0)) == [3, 5]
    assert "/a/00" not in pit
    assert pit.on_data(data("/a/00"), 1.0) == []


def test_pit_dead_nonce_blocks_loops_until_grace():
    pit = Pit()
    pit.on_interest(interest("/a/00", 7, lifetime=1.0), 0, 0.0)
    pit.on_data(data("/a/00"), 0.5)
    assert pit.on_interest(interest("/a/00", 7), 1, 0.6) == DUPLICATE
    assert pit.on_interest(interest("/a/00", 7), 1, 1.0 + DEAD_NONCE_GRACE) == FORWARD_NEW


def test_pit_expiry():
    pit = Pit()
    pit.on_interest(interest("/a/00", 1, lifetime=2.0), 0, 0.0)
    pit.on_interest(interest("/b/00", 2, lifetime=5.0), 0, 0.0)
    assert [e.name.uri for e in pit.expire(2.0)] == ["/a/00"]
    assert pit.get("/b/00", now=4.9) is not None
    assert pit.get("/b/00", now=5.0) is None
    assert len(pit) == 0


def test_pit_late_data_after_expiry_is_dropped():
    pit = Pit()
    pit.on_interest(interest("/a/00", 1, lifetime=1.0), 0, 0.0)
    assert pit.on_data(data("/a/00"), 1.5) == []


def test_store_cai_replaces_previous_advert():
    pit = Pit()
    first = CaiMessage("S1", 10, 5.0, b"")
    second = CaiMessage("S1", 11, 5.0, b"")
    pit.store_cai(first, 2, 0.0)
    entry = pit.store_cai(second, 3, 1.0)
    assert pit.cai_entries() == [entry]
    assert entry.stored_cai is second and entry.in_faces() == [3]
    assert entry.expiry == pytest.approx(6.0)
    # the old advert's nonce is now dead, so a lingering copy counts as a duplicate
    assert pit.seen_nonce("/ContentAdvertisement/S1", 10, 1.5)
    assert pit.on_data(data("/ContentAdvertisement/S1"), 1.0) == []


# FIB ------------------------------------------------------------------------------

def brute_lpm(fib: Fib, uri: str):
    best = None
    for prefix, entry in fib.entries.items():
        p = prefix.rstrip("/")
        if (uri == p or uri.startswith(p + "/")) and (best is None or len(p) > len(best[0])):
            best = (p, entry)
    return None if best is None else best[1]


def test_fib_lpm_prefers_longest():
    fib = Fib()
    fib.add_nexthop("/a", 1)
    fib.add_nexthop("/a/b", 2)
    assert fib.lookup_lpm(parse("/a/b/c/01")).next_hops == {2}
    assert fib.lookup_lpm(parse("/a/x")).next_hops == {1}
    assert fib.lookup_lpm(parse("/z")) is None
    assert fib.lookup_lpm(parse("/a/bc")).next_hops == {1}


def test_fib_add_remove_set():
    fib = Fib()
    fib.add_nexthop("/a", 1)
    fib.add_nexthop("/a", 2)
    assert fib.get("/a").next_hops == {1, 2}
    fib.remove_nexthop("/a", 1)
    assert fib.get("/a").next_hops == {2}
    fib.remove_nexthop("/a", 2)
    assert "/a" not in fib
    fib.set_nexthops("/b", [3, 4])
    assert fib.set_nexthops("/b", []) is None and len(fib) == 0


def test_fib_remove_face_and_add_everywhere():
    fib = Fib()
    fib.set_nexthops("/a", [1])
    fib.set_nexthops("/b", [1, 2])
    assert fib.remove_face(1) == 2
    assert list(fib.entries) == ["/b"]
    fib.add_face_everywhere(9)
    assert fib.get("/b").next_hops == {2, 9}
    fib.clear()
    assert len(fib) == 0


comp = st.sampled_from(["a", "b", "c"])
paths = st.lists(comp, min_size=1, max_size=4).map(lambda cs: "/" + "/".join(cs))


@given(st.lists(st.tuples(paths, st.integers(0, 3)), max_size=15), paths)
def test_fib_lpm_matches_brute_force(routes, query):
    fib = Fib()
    for prefix, face in routes:
        fib.add_nexthop(prefix, face)
    assert fib.lookup_lpm(parse(query)) is brute_lpm(fib, query)
