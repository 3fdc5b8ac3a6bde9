"""Deterministic discrete-event core: event queue, links, faces and the node pipeline.

Events are ordered by ``(time, sequence)``; the sequence number is assigned
when an event is scheduled, so equal-time events run in scheduling order and
a run is a pure function of its inputs.

Links are store-and-forward with one FIFO per direction: a packet starts
serializing when the direction is free, occupies it for ``size * 8 /
bandwidth`` seconds and arrives one propagation delay later. Buffers are
unbounded. Taking a link down drops everything still on it.
"""
from __future__ import annotations

import heapq
import logging
from collections import deque
from typing import Callable

from .names import ContentName
from .packets import DUPLICATE_NONCE, NO_DATA, NO_ROUTE, Data, Interest, Nack
from .tables import AGGREGATE, DEAD_NONCE_GRACE, DUPLICATE, ContentStore, Fib, Pit
from .topology import Topology

__all__ = ["Simulator", "Node", "Strategy", "ConsumerApp", "APP_FACE", "LinkScheduleItem"]

log = logging.getLogger(__name__)

APP_FACE = -1  # pseudo-face connecting a node to its local application


class LinkScheduleItem:
    """One failure: the link between ``a`` and ``b`` goes down at ``t_down`` and back up at ``t_up``."""

    __slots__ = ("a", "b", "t_down", "t_up")

    def __init__(self, a: str, b: str, t_down: float, t_up: float):
        if not t_down < t_up:
            raise ValueError(f"link {a}-{b}: t_down ({t_down}) must precede t_up ({t_up})")
        self.a, self.b, self.t_down, self.t_up = a, b, t_down, t_up

    def __repr__(self) -> str:
        return f"LinkScheduleItem({self.a}-{self.b}, down={self.t_down:g}, up={self.t_up:g})"


class Strategy:
    """Per-node forwarding logic. Subclasses override :meth:`forward`."""

    name = "none"

    def __init__(self, node: "Node"):
        self.node = node

    refuse_duplicates = False  # NACK duplicates that cannot be served (strategies that retry)

    def forward(self, node: "Node", interest: Interest, in_face: int) -> list[int]:
        return []

    def forward_aggregated(self, node: "Node", interest: Interest, in_face: int) -> list[int]:
        """Faces for an Interest merged into an existing PIT entry; normally none."""
        return []

    def refuse_duplicate(self, node: "Node", interest: Interest, in_face: int, entry) -> bool:
        """Whether a duplicate joining a pending entry gets a NACK instead of an in-record."""
        return in_face in entry.out_records

    def retry(self, node: "Node", entry, interest: Interest) -> list[int]:
        """Alternative faces once every upstream of ``entry`` has answered "no route"."""
        return []

    def on_cai(self, node: "Node", cai, in_face: int) -> None:
        node.sim.metrics.record_protocol_error()

    def on_data(self, node: "Node", data, in_face: int) -> None:
        """Data that satisfied a pending entry arrived on ``in_face``."""

    def on_link_down(self, node: "Node", face: int) -> None:
        pass

    def on_link_up(self, node: "Node", face: int) -> None:
        pass


class Node:
    """One NDN node: CS, PIT, FIB, faces and an attached strategy."""

    __slots__ = ("sim", "id", "role", "cs", "pit", "fib", "ports", "face_up", "strategy",
                 "app", "repo", "neighbors")

    def __init__(self, sim: "Simulator", node_id: str, role: str, cs_capacity: int):
        self.sim = sim
        self.id = node_id
        self.role = role
        self.cs = ContentStore(cs_capacity)
        self.pit = Pit()
        self.fib = Fib()
        self.ports: list[tuple[int, int, Node, int]] = []  # (link, direction, peer, peer face)
        self.face_up: list[bool] = []
        self.neighbors: list[str] = []
        self.strategy: Strategy = Strategy(self)
        self.app = None
        self.repo = None

    @property
    def faces(self) -> range:
        return range(len(self.ports))

    def up_faces(self) -> list[int]:
        return [f for f, ok in enumerate(self.face_up) if ok]

    def send(self, face: int, packet) -> bool:
        return self.sim.transmit(self, face, packet)

    def _reply(self, face: int, packet) -> None:
        if face == APP_FACE:
            if packet.is_nack:
                self.app.on_nack(packet)
            else:
                self.app.on_data(packet)
        else:
            self.sim.transmit(self, face, packet)

    # pipeline ---------------------------------------------------------------

    def receive(self, packet, in_face: int) -> None:
        cls = packet.__class__
        if cls is Data:
            self.on_data(packet, in_face)
        elif cls is Interest:
            self.on_interest(packet, in_face)
        elif cls is Nack:
            self.on_nack(packet, in_face)
        else:
            self.strategy.on_cai(self, packet, in_face)

    def on_interest(self, interest: Interest, in_face: int) -> None:
        sim = self.sim
        now = sim.now
        pit = self.pit
        uri = interest.name.uri
        nonce = interest.nonce
        entry = pit.get(uri, now)
        if (entry is not None and nonce in entry.nonces) or pit.seen_nonce(uri, nonce, now):
            self._on_duplicate(interest, in_face, entry)
            return
        data = self.cs.lookup(uri)
        if data is not None:
            sim.metrics.record_cache_hit(self.id)
            pit.dead_nonces[(uri, nonce)] = now + interest.lifetime + DEAD_NONCE_GRACE
            self._reply(in_face, Data(interest.name, self.id, interest.hop_count, data.payload_size))
            return
        repo = self.repo
        if repo is not None:
            key = interest.key
            if key in repo:
                seg = interest.name.segment
                if seg is not None and 1 <= seg <= repo.segments_per_file:
                    pit.dead_nonces[(uri, nonce)] = now + interest.lifetime + DEAD_NONCE_GRACE
                    sim.metrics.record_server_hit(self.id)
                    self._reply(in_face, Data(interest.name, self.id, interest.hop_count))
                    return
            elif repo.was_removed(key):
                pit.dead_nonces[(uri, nonce)] = now + interest.lifetime + DEAD_NONCE_GRACE
                sim.metrics.record_nack()
                self._reply(in_face, Nack(interest.name, self.id, NO_DATA, nonce))
                return
            else:
                sim.metrics.record_wrong_server(uri, nonce)
        if pit.on_interest(interest, in_face, now) == AGGREGATE:
            sim.metrics.record_aggregate()
            faces = self.strategy.forward_aggregated(self, interest, in_face)
            if not faces:
                return
        else:
            faces = self.strategy.forward(self, interest, in_face)
        entry = pit.entries[uri]
        fwd = interest.hop()
        if not faces and in_face != APP_FACE:
            fwd = interest.hop(detour=True)
            faces = self.strategy.retry(self, entry, fwd)
        if not faces:
            sim.metrics.record_unroutable()
            if in_face != APP_FACE:
                pit.remove(uri)
                sim.metrics.record_nack()
                self._nack_downstream(entry, Nack(interest.name, self.id, NO_ROUTE), None)
            return
        self._send_upstream(entry, fwd, faces)

    def _on_duplicate(self, interest: Interest, in_face: int, entry) -> None:
        """A copy whose nonce was already handled here; it is never forwarded again.

        While the entry is pending the sender joins its in-records, since its
        own copy may have been dropped as a duplicate everywhere upstream. A
        strategy that retries on NACKs may refuse it instead (see
        :meth:`Strategy.refuse_duplicate`), and once the entry is gone a node
        without a cached copy answers "no route".
        """
        sim = self.sim
        sim.metrics.record_duplicate()
        if in_face == APP_FACE:
            return
        refuse = self.strategy.refuse_duplicates
        if entry is not None:
            if refuse and self.strategy.refuse_duplicate(self, interest, in_face, entry):
                sim.metrics.record_nack()
                self._reply(in_face, Nack(interest.name, self.id, DUPLICATE_NONCE, interest.nonce))
            elif in_face not in entry.in_records:
                entry.in_records[in_face] = (interest.nonce, entry.expiry)
            return
        data = self.cs.entries.get(interest.name.uri)
        if data is not None:
            self._reply(in_face, Data(interest.name, self.id, interest.hop_count, data.payload_size))
        elif refuse:
            # this node is done with the nonce and holds no copy: nothing to offer
            sim.metrics.record_nack()
            self._reply(in_face, Nack(interest.name, self.id, NO_ROUTE, interest.nonce))

    def _nack_downstream(self, entry, nack: Nack, skip: int | None) -> None:
        """Send ``nack`` to every requester, each tagged with the nonce it sent."""
        for face, (nonce, _) in entry.in_records.items():
            if face != skip:
                self._reply(face, Nack(nack.name, nack.origin_id, nack.reason, nonce))

    def on_data(self, data: Data, in_face: int) -> None:
        sim = self.sim
        faces = self.pit.on_data(data, sim.now)
        if not faces:
            sim.metrics.record_unsolicited()
            return
        self.strategy.on_data(self, data, in_face)
        self.cs.insert(data)
        for face in faces:
            if face != in_face:
                self._reply(face, data)

    def on_nack(self, nack: Nack, in_face: int) -> None:
        pit = self.pit
        uri = nack.name.uri
        entry = pit.get(uri, self.sim.now)
        if entry is None or entry.stored_cai is not None:
            return
        sent = entry.out_records.get(in_face)
        if sent is None or (nack.nonce is not None and nack.nonce != sent):
            return  # refers to a copy this node has since superseded
        del entry.out_records[in_face]
        if nack.reason != NO_DATA:
            entry.nacked.add(in_face)  # never retried: it would refuse the copy again
        if entry.out_records:
            return  # other upstreams may still answer
        if nack.reason != NO_DATA and entry.forwarded is not None:
            fwd = entry.forwarded
            faces = self.strategy.retry(self, entry, fwd)
            if faces:
                if not fwd.detour:
                    fwd = Interest(fwd.name, fwd.nonce, fwd.lifetime, fwd.hop_count, True)
                self._send_upstream(entry, fwd, faces)
                return
            if self._relaunch(entry):
                return
        pit.remove(uri)
        if nack.reason != NO_DATA:
            # whatever the upstream said, this node has now run out of routes
            nack = Nack(nack.name, self.id, NO_ROUTE)
        self._nack_downstream(entry, nack, in_face)

    def _send_upstream(self, entry, fwd: Interest, faces) -> None:
        entry.forwarded = fwd
        entry.spent.add(fwd.nonce)
        for face in faces:
            entry.out_records[face] = fwd.nonce
            self.sim.transmit(self, face, fwd)

    def _relaunch(self, entry) -> bool:
        """Forward a held requester's nonce once the forwarded copy has run out of routes.

        A request aggregated onto a pending entry is not sent where a copy is
        already outstanding (see :meth:`Strategy.forward_aggregated`). When
        every upstream then refuses that copy, the held nonce is still new to
        the network, so it starts afresh instead of sharing the NACK.
        """
        prev = entry.forwarded
        for face, (nonce, _) in list(entry.in_records.items()):
            if nonce in entry.spent:
                continue
            interest = Interest(prev.name, nonce, prev.lifetime, max(0, prev.hop_count - 1))
            faces = self.strategy.forward(self, interest, face)
            entry.spent.add(nonce)
            if faces:
                entry.nacked.clear()
                self._send_upstream(entry, interest.hop(), faces)
                return True
        return False

    def __repr__(self) -> str:
        return f"Node({self.id}, {self.role}, faces={len(self.ports)})"


class Simulator:
    """Event loop over a :class:`Topology` of :class:`Node` objects."""

    def __init__(self, topology: Topology, metrics=None, cs_capacity: int = 100):
        from .metrics import MetricsCollector

        self.topology = topology
        self.metrics = metrics if metrics is not None else MetricsCollector()
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.events_processed = 0
        self.trace: list | None = None
        self.nodes: dict[str, Node] = {
            n: Node(self, n, role, cs_capacity) for n, role in topology.roles.items()
        }
        nl = len(topology.links)
        self.link_up = [True] * nl
        self.link_gen = [0] * nl
        self.link_delay = [l.delay for l in topology.links]
        self.link_bw = [l.bandwidth for l in topology.links]
        self.busy_until = [[0.0, 0.0] for _ in range(nl)]
        self.in_flight = [0] * nl
        self.link_listeners: list[Callable[[int, bool], None]] = []
        for n, node in self.nodes.items():
            for li in topology.faces(n):
                link = topology.links[li]
                peer = link.other(n)
                direction = 0 if link.a == n else 1
                node.ports.append((li, direction, self.nodes[peer], topology.face_to(peer, n)))
                node.face_up.append(True)
                node.neighbors.append(peer)

    # scheduling -------------------------------------------------------------

    def schedule(self, time: float, fn: Callable, *args) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule in the past ({time} < {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, fn, args))

    def after(self, delay: float, fn: Callable, *args) -> None:
        self.schedule(self.now + delay, fn, *args)

    def every(self, start: float, period: float, fn: Callable, *args, until: float | None = None) -> None:
        """Call ``fn`` at ``start``, ``start + period``, ... (strictly before ``until``)."""

        def tick(*a):
            fn(*a)
            nxt = self.now + period
            if until is None or nxt < until:
                self.schedule(nxt, tick, *a)

        if until is None or start < until:
            self.schedule(start, tick, *args)

    def run(self, until: float) -> None:
        heap = self._heap
        pop = heapq.heappop
        trace = self.trace
        n = 0
        while heap and heap[0][0] <= until:
            t, seq, fn, args = pop(heap)
            self.now = t
            if trace is not None:
                trace.append((t, seq, getattr(fn, "__name__", "?")))
            fn(*args)
            n += 1
        self.events_processed += n
        self.now = max(self.now, until)

    @property
    def pending_events(self) -> int:
        return len(self._heap)

    # links ------------------------------------------------------------------

    def transmit(self, node: Node, face: int, packet) -> bool:
        """Queue ``packet`` on ``face``; returns False when the link is down."""
        li, direction, peer, peer_face = node.ports[face]
        metrics = self.metrics
        if not self.link_up[li]:
            metrics.record_drop_at_send(packet)
            return False
        metrics.record_transmit(packet)
        busy = self.busy_until[li]
        now = self.now
        start = busy[direction]
        if start < now:
            start = now
        end = start + packet.size * 8.0 / self.link_bw[li]
        busy[direction] = end
        self.in_flight[li] += 1
        self._seq += 1
        heapq.heappush(
            self._heap,
            (end + self.link_delay[li], self._seq, self._arrive, (li, self.link_gen[li], peer, peer_face, packet)),
        )
        return True

    def _arrive(self, li: int, gen: int, peer: Node, peer_face: int, packet) -> None:
        if gen != self.link_gen[li]:
            self.metrics.record_drop_in_flight(packet)
            return
        self.in_flight[li] -= 1
        self.metrics.record_receive(packet)
        peer.receive(packet, peer_face)

    def link_index(self, a: str, b: str) -> int:
        li = self.topology.find_link(a, b)
        if li is None:
            raise KeyError(f"no link {a}-{b}")
        return li

    def apply_link_event(self, li: int, up: bool) -> None:
        """Bring link ``li`` up or down and notify both endpoint strategies."""
        if self.link_up[li] == up:
            return
        link = self.topology.links[li]
        self.link_up[li] = up
        if not up:
            self.link_gen[li] += 1  # invalidates every packet still on the wire
            self.in_flight[li] = 0
            self.busy_until[li] = [self.now, self.now]
        self.metrics.record_link_event(up)
        for n in (link.a, link.b):
            node = self.nodes[n]
            face = self.topology.face_to(n, link.other(n))
            node.face_up[face] = up
            if up:
                node.strategy.on_link_up(node, face)
            else:
                node.strategy.on_link_down(node, face)
        for listener in self.link_listeners:
            listener(li, up)

    def schedule_failures(self, items: list[LinkScheduleItem]) -> None:
        for item in items:
            li = self.link_index(item.a, item.b)
            self.schedule(item.t_down, self.apply_link_event, li, False)
            self.schedule(item.t_up, self.apply_link_event, li, True)

    def expire_tables(self) -> None:
        now = self.now
        for node in self.nodes.values():
            node.pit.expire(now)


class ConsumerApp:
    """Constant-rate requester: picks a file by popularity and asks for its segments in order.

    The first Interest goes out at a random offset within one interval after ``start``.

    An Interest is unsatisfied when its lifetime passes without Data; there
    are no retransmissions.
    """

    def __init__(self, node: Node, catalogue, model, rng, rate: float, start: float, stop: float,
                 lifetime: float):
        if rate <= 0:
            raise ValueError("consumer rate must be positive")
        self.node = node
        self.sim = node.sim
        self.catalogue = catalogue
        self.model = model
        self.rng = rng
        self.interval = 1.0 / rate
        self.stop = stop
        self.lifetime = lifetime
        self.current: ContentName | None = None
        self.segment = 0
        self.pending: dict[str, list[float]] = {}  # uri -> issue times still waiting
        self._deadlines: deque = deque()
        self.issued = 0
        self.satisfied = 0
        self.unsatisfied = 0
        node.app = self
        # random phase so that consumers do not all fire at the same instants
        first = start + rng.random() * self.interval
        if first < stop:
            self.sim.schedule(first, self._tick)

    def _next_name(self) -> ContentName:
        seg_count = self.catalogue.segments_per_file
        if self.current is None or self.segment >= seg_count:
            self.current = self.catalogue.files[self.model.sample(self.rng)]
            self.segment = 0
        self.segment += 1
        return self.current.child(f"{self.segment:02d}")

    def _tick(self) -> None:
        sim = self.sim
        now = sim.now
        self.sweep(now)
        name = self._next_name()
        interest = Interest(name, self.rng.getrandbits(32), self.lifetime)
        uri = name.uri
        self.pending.setdefault(uri, []).append(now)
        self._deadlines.append((now + self.lifetime, uri, now))
        self.issued += 1
        sim.metrics.record_interest_issued(self.node.id)
        nxt = now + self.interval
        if nxt < self.stop:
            sim.schedule(nxt, self._tick)
        self.node.on_interest(interest, APP_FACE)

    def sweep(self, now: float) -> None:
        dl = self._deadlines
        pending = self.pending
        while dl and dl[0][0] <= now:
            _, uri, issued_at = dl.popleft()
            times = pending.get(uri)
            if times and times[0] == issued_at:
                del times[0]
                if not times:
                    del pending[uri]
                self.unsatisfied += 1
                self.sim.metrics.record_unsatisfied(self.node.id)

    def on_data(self, data: Data) -> None:
        # one Data answers every outstanding request for the segment
        for issued_at in self.pending.pop(data.name.uri, ()):
            self.satisfied += 1
            self.sim.metrics.record_delivery(self.node.id, self.sim.now - issued_at, data)

    def on_nack(self, nack: Nack) -> None:
        for _ in self.pending.pop(nack.name.uri, ()):
            self.unsatisfied += 1
            self.sim.metrics.record_unsatisfied(self.node.id, nacked=True)

    def finish(self, horizon: float) -> int:
        """Settle deadlines up to ``horizon``; returns the count still pending."""
        self.sweep(horizon)
        return sum(len(times) for times in self.pending.values())
