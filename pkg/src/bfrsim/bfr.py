"""Bloom filter-based routing: advertisement, CAI propagation and on-demand FIB population.

Each server summarises its content names and their prefixes in a Bloom
filter and floods it as a Content Advertisement Interest. Every node keeps
the latest CAI per server in its PIT; the faces a CAI arrived on lead back
toward that server. A regular Interest whose stripped name hits a stored
filter is multicast over those faces.
"""
from __future__ import annotations

import random
from collections.abc import Iterable

from .bloom import BloomFilter, BloomParams, derive_params
from .engine import APP_FACE, Node, Simulator, Strategy
from .names import ContentName, enumerate_prefixes, strip_segment
from .packets import CAI_PREFIX, CaiMessage, Interest
from .tables import DEAD_NONCE_GRACE

__all__ = [
    "ServerRepository",
    "BfrStrategy",
    "advertisement_strings",
    "build_advertisement",
    "advertise",
    "migrate",
    "INRECORD_POLICIES",
    "FANOUTS",
]

# Which duplicate CAI copies add an in-record, and how Interests use them:
# "all" and "ranked" record every copy ("ranked" prefers the fewest-hop faces,
# see BfrStrategy), "first" keeps only the first arrival, "shortest" keeps the
# copies that travelled no more hops than the best one so far.
INRECORD_POLICIES = ("all", "ranked", "first", "shortest")
FANOUTS = ("learn", "multicast")


class ServerRepository:
    """Content held by one origin server plus its advertisement settings.

    ``advert_params`` fixes the filter size; when it is ``None`` the filter is
    sized for the actual number of distinct strings at target ``fpp``.
    """

    def __init__(self, server_id: str, contents: Iterable[ContentName], segments_per_file: int = 100,
                 advert_params: BloomParams | None = None, fpp: float = 0.02,
                 refresh_interval: float = 1000.0, seed: int = 0):
        if not server_id or "/" in server_id:
            raise ValueError(f"invalid server id {server_id!r}")
        if refresh_interval <= 0:
            raise ValueError("refresh_interval must be positive")
        self.server_id = server_id
        self.contents: list[ContentName] = []
        self._uris: set[str] = set()
        self.removed: set[str] = set()
        self.segments_per_file = segments_per_file
        self.advert_params = advert_params
        self.fpp = fpp
        self.refresh_interval = refresh_interval
        self.seed = seed
        self.add(contents)

    def __contains__(self, key: str) -> bool:
        return key in self._uris

    def __len__(self) -> int:
        return len(self.contents)

    def was_removed(self, key: str) -> bool:
        return key in self.removed

    def add(self, names: Iterable[ContentName]) -> None:
        for name in names:
            if name.uri not in self._uris:
                self._uris.add(name.uri)
                self.contents.append(name)
            self.removed.discard(name.uri)

    def remove(self, names: Iterable[ContentName]) -> None:
        drop = {n.uri for n in names}
        missing = drop - self._uris
        if missing:
            raise KeyError(f"{self.server_id} does not hold {sorted(missing)[0]}")
        self.contents = [n for n in self.contents if n.uri not in drop]
        self._uris -= drop
        self.removed |= drop

    @property
    def uris(self) -> frozenset[str]:
        return frozenset(self._uris)


def advertisement_strings(contents: Iterable[ContentName]) -> list[str]:
    """Every name plus its prefixes, deduplicated, in first-seen order."""
    seen: dict[str, None] = {}
    for name in contents:
        for s in enumerate_prefixes(name):
            seen.setdefault(s, None)
    return list(seen)


def build_advertisement(repo: ServerRepository, nonce: int, lifetime: float | None = None,
                        discard_old_adverts: bool = False) -> CaiMessage:
    strings = advertisement_strings(repo.contents)
    params = repo.advert_params or derive_params(max(1, len(strings)), repo.fpp)
    bf = BloomFilter.build(strings, params, repo.seed)
    if lifetime is None:
        lifetime = repo.refresh_interval + 1.0
    return CaiMessage(repo.server_id, nonce, lifetime, bf.to_bytes(), discard_old_adverts)


def advertise(sim: Simulator, server: str, rng: random.Random | None = None,
              discard_old_adverts: bool = False) -> CaiMessage:
    """Build the server's CAI now and send it on all of the server's faces."""
    node = sim.nodes[server]
    if node.repo is None:
        raise ValueError(f"{server} has no repository")
    nonce = (rng or random).getrandbits(32)
    cai = build_advertisement(node.repo, nonce, discard_old_adverts=discard_old_adverts)
    sim.metrics.record_cai_originated()
    # the origin keeps no copy but must drop its own CAI when it loops back
    node.pit.dead_nonces[(cai.name.uri, cai.nonce)] = sim.now + cai.lifetime + DEAD_NONCE_GRACE
    out = cai.hop()
    for face in node.up_faces():
        sim.transmit(node, face, out)
    return cai


def migrate(sim: Simulator, from_server: str, to_server: str, names: Iterable[ContentName],
            rng: random.Random | None = None) -> None:
    """Move ``names`` between repositories; both servers re-advertise with the discard flag."""
    names = list(names)
    src = sim.nodes[from_server].repo
    dst = sim.nodes[to_server].repo
    if src is None or dst is None:
        raise ValueError("migration endpoints must both be servers")
    src.remove(names)
    dst.add(names)
    advertise(sim, from_server, rng, discard_old_adverts=True)
    advertise(sim, to_server, rng, discard_old_adverts=True)


class BfrStrategy(Strategy):
    """Per-node BFR forwarding state.

    ``memo`` maps a stripped name to the state version at which its FIB entry
    was computed. Any change to the stored CAIs or their in-records bumps the
    version, so stale memo entries are recomputed on next use.

    ``hops`` keeps, per server and in-record face, how many hops the CAI copy
    on that face had travelled. Policy ``"ranked"`` records every face like
    ``"all"`` but multicasts only on each matching server's fewest-hop faces
    (other than the incoming one), so the remaining in-records act as
    standby paths that take over as soon as a link fails.

    With ``fanout="learn"`` (ranked policy only) a node remembers, per file,
    which face returned Data first and sends later Interests for that file
    only there while it stays among the fewest-hop faces. Every
    ``explore_every``-th Interest still goes to all of them so a faster path
    is noticed. Learned faces of neighbouring routers may lead towards
    different matching servers and so form a loop; the copy is then refused
    as a duplicate and the retry machinery takes over.
    ``fanout="multicast"`` always uses every fewest-hop face.
    """

    name = "bfr"
    refuse_duplicates = True

    def __init__(self, node: Node, inrecord_policy: str = "ranked",
                 oracle: dict[str, frozenset[str]] | None = None,
                 fanout: str = "learn", explore_every: int = 16):
        super().__init__(node)
        if inrecord_policy not in INRECORD_POLICIES:
            raise ValueError(f"unknown in-record policy {inrecord_policy!r}")
        if fanout not in FANOUTS:
            raise ValueError(f"unknown fanout {fanout!r}")
        if explore_every < 1:
            raise ValueError("explore_every must be >= 1")
        self.inrecord_policy = inrecord_policy
        self.oracle = oracle
        self.cais: dict[str, object] = {}  # server id -> PIT entry holding its CAI
        self.hops: dict[str, dict[int, int]] = {}  # server id -> in-record face -> CAI hop count
        self.version = 0
        self.memo: dict[str, int] = {}
        self.matches: dict[str, list[str]] = {}  # stripped name -> servers whose filter matched
        self.derived: set[str] = set()  # FIB prefixes created by populate_fib
        self._groups: list[tuple[object, list[str], set[int]]] | None = None
        self._next_expiry = float("inf")
        self.fanout = fanout
        self.explore_every = explore_every
        self.fastest: dict[str, int] = {}  # stripped name -> face whose Data arrived first
        self.sent: dict[str, int] = {}  # stripped name -> Interests forwarded under "learn"
        node.fib.set_nexthops(f"/{CAI_PREFIX}", node.faces)

    # advertisement handling ---------------------------------------------------

    def _touch(self) -> None:
        self.version += 1
        self._groups = None

    def _add_inrecord(self, entry, sid: str, face: int, hop: int) -> None:
        entry.in_records[face] = (entry.stored_cai.nonce, entry.expiry)
        self.hops[sid][face] = hop
        self._touch()

    def on_cai(self, node: Node, cai: CaiMessage, in_face: int) -> None:
        sim = node.sim
        now = sim.now
        if not cai.is_well_formed():
            sim.metrics.record_protocol_error()
            return
        self._purge_expired(now)
        pit = node.pit
        uri = cai.name.uri
        sid = cai.server_id
        entry = pit.get(uri, now)
        if entry is not None and cai.nonce in entry.nonces:
            sim.metrics.record_duplicate()
            if in_face in entry.in_records:
                return
            policy = self.inrecord_policy
            if policy in ("all", "ranked"):
                self._add_inrecord(entry, sid, in_face, cai.hop_count)
            elif policy == "shortest":
                best = min(self.hops[sid].values(), default=cai.hop_count)
                if cai.hop_count < best:
                    entry.in_records.clear()
                    self.hops[sid].clear()
                if cai.hop_count <= best:
                    self._add_inrecord(entry, sid, in_face, cai.hop_count)
            return
        if pit.seen_nonce(uri, cai.nonce, now):
            sim.metrics.record_duplicate()
            return
        if cai.discard_old_adverts:
            self.discard(sid)
        entry = pit.store_cai(cai, in_face, now)
        self.cais[sid] = entry
        self.hops[sid] = {in_face: cai.hop_count}
        if entry.expiry < self._next_expiry:
            self._next_expiry = entry.expiry
        self._touch()
        sim.metrics.record_stored_cai_bytes(sum(e.stored_cai.size for e in self.cais.values()))
        fib_entry = node.fib.lookup_lpm(cai.name)
        if fib_entry is None:
            return
        out = cai.hop()
        for face in sorted(fib_entry.next_hops):
            if face != in_face and node.face_up[face]:
                sim.transmit(node, face, out)

    def _forget(self, sid: str) -> None:
        entry = self.cais.pop(sid, None)
        self.hops.pop(sid, None)
        if entry is not None:
            self.node.pit.remove(entry.name.uri)
        self._touch()

    def discard(self, server_id: str) -> None:
        """Forget ``server_id``'s stored CAI and every FIB entry derived from CAIs."""
        self._forget(server_id)
        fib = self.node.fib
        for prefix in self.derived:
            fib.entries.pop(prefix, None)
        self.derived.clear()
        self.memo.clear()
        self.matches.clear()

    def _purge_expired(self, now: float) -> None:
        if now < self._next_expiry:
            return
        nxt = float("inf")
        for sid, entry in list(self.cais.items()):
            if entry.expiry <= now:
                self._forget(sid)
            elif entry.expiry < nxt:
                nxt = entry.expiry
        self._next_expiry = nxt

    # forwarding ---------------------------------------------------------------

    def _filter_groups(self):
        """Stored CAIs grouped by identical filter bytes, with the union of their in-records."""
        if self._groups is None:
            groups: dict[bytes, tuple[object, list[str], set[int]]] = {}
            for sid in sorted(self.cais):
                entry = self.cais[sid]
                cai = entry.stored_cai
                g = groups.get(cai.filter_bytes)
                if g is None:
                    g = groups[cai.filter_bytes] = (cai.filter, [], set())
                g[1].append(sid)
                g[2].update(entry.in_records)
            self._groups = list(groups.values())
        return self._groups

    def matching_servers(self, key: str) -> list[str]:
        """Servers whose stored filter (or exact set, in oracle mode) contains ``key``."""
        out = []
        oracle = self.oracle
        for bf, sids, _ in self._filter_groups():
            if oracle is not None:
                out += [s for s in sids if key in oracle.get(s, ())]
            elif bf.contains(key):
                out += sids
        return out

    def populate_fib(self, node: Node, interest: Interest) -> set[int]:
        """Install the FIB entry for the Interest's stripped name; returns its next hops."""
        key = interest.key
        self._purge_expired(node.sim.now)
        sids = self.matching_servers(key)
        faces: set[int] = set()
        for sid in sids:
            faces.update(self.cais[sid].in_records)
        faces = {f for f in faces if f != APP_FACE and node.face_up[f]}
        if faces:
            node.fib.set_nexthops(key, faces)
            self.derived.add(key)
        else:
            node.fib.entries.pop(key, None)
            self.derived.discard(key)
        self.memo[key] = self.version
        self.matches[key] = sids
        return faces

    def forward(self, node: Node, interest: Interest, in_face: int) -> list[int]:
        key = interest.key
        self._purge_expired(node.sim.now)
        if self.memo.get(key) == self.version:
            entry = node.fib.entries.get(key)
            faces = entry.next_hops if entry is not None else ()
        else:
            faces = self.populate_fib(node, interest)
        if self.inrecord_policy != "ranked":
            out = {f for f in faces if f != in_face}
        else:
            out = set()
            for sid in self.matches[key]:
                ranked = [(h, f) for f, h in self.hops[sid].items() if f != in_face and f in faces]
                if ranked:
                    best = min(ranked)[0]
                    out.update(f for h, f in ranked if h == best)
            if self.fanout == "learn" and len(out) > 1:
                # unicast on the tie that answered first, re-probing all of them now and then
                n = self.sent[key] = self.sent.get(key, 0) + 1
                w = self.fastest.get(key)
                if w in out and n % self.explore_every:
                    return [w]
        return sorted(out)

    def on_data(self, node: Node, data, in_face: int) -> None:
        if self.fanout == "learn":
            self.fastest[strip_segment(data.name).uri] = in_face

    def refuse_duplicate(self, node: Node, interest: Interest, in_face: int, entry) -> bool:
        """Refuse every copy that meets a pending entry.

        Hop counts go stale after a failure, so a merging multicast branch
        cannot be told apart from a loop. The refused sender retries
        elsewhere; if it runs dry its "no route" only cancels the copy with
        that nonce, so requests aggregated on the same entry survive.
        """
        return True

    def retry(self, node: Node, entry, interest: Interest) -> list[int]:
        """Next-ranked in-record faces not yet tried for ``entry``.

        In-records only point away from each node's children in the advert
        flood, so after a failure the way around may lie behind a face that
        never carried the CAI. Once the in-records are used up, one untried
        router face is probed (lowest face id) before giving up.
        """
        self._purge_expired(node.sim.now)
        tried = entry.nacked | set(entry.in_records) | set(entry.out_records)
        sids = self.matching_servers(interest.key)
        out: set[int] = set()
        for sid in sids:
            ranked = [(h, f) for f, h in self.hops[sid].items()
                      if f not in tried and f != APP_FACE and node.face_up[f]]
            if not ranked:
                continue
            if self.inrecord_policy != "ranked":
                out.update(f for _, f in ranked)
                continue
            best = min(ranked)[0]
            out.update(f for h, f in ranked if h == best)
        if not out and sids:
            out.update(self._probe(node, tried))
        return sorted(out)

    @staticmethod
    def _probe(node: Node, tried) -> list[int]:
        """Lowest-numbered up face towards a router that is not in ``tried``.

        Servers are left out: one that advertised nothing matching cannot help.
        """
        nodes = node.sim.nodes
        for f, up in enumerate(node.face_up):
            if up and f not in tried and nodes[node.neighbors[f]].role == "router":
                return [f]
        return []

    def forward_aggregated(self, node: Node, interest: Interest, in_face: int) -> list[int]:
        """Forward a new nonce only on faces with no copy outstanding.

        A copy of an earlier requester's Interest may sit on a branch that
        never returns Data, so new nonces still go out where nothing is
        pending. Re-sending on a pending face would replace that face's
        out-record, and a refusal of the new copy would then cancel the
        earlier one whose Data is still on its way.
        """
        pending = node.pit.entries[interest.name.uri].out_records
        return [f for f in self.forward(node, interest, in_face) if f not in pending]

    # topology changes ---------------------------------------------------------

    def _known_face(self, node: Node, face: int) -> bool:
        if 0 <= face < len(node.ports):
            return True
        node.sim.metrics.record_unknown_face()
        return False

    def on_link_down(self, node: Node, face: int) -> None:
        if not self._known_face(node, face):
            return
        for sid, entry in self.cais.items():
            entry.in_records.pop(face, None)
            self.hops[sid].pop(face, None)
        node.fib.remove_face(face)
        self.derived &= set(node.fib.entries)
        self._touch()

    def on_link_up(self, node: Node, face: int) -> None:
        if not self._known_face(node, face):
            return
        for sid, entry in self.cais.items():
            entry.in_records[face] = (entry.stored_cai.nonce, entry.expiry)
            # rank the recovered face with the current best so traffic uses it at once
            self.hops[sid][face] = min(self.hops[sid].values(), default=0)
        node.fib.add_face_everywhere(face)
        node.fib.add_nexthop(f"/{CAI_PREFIX}", face)
        self._touch()
