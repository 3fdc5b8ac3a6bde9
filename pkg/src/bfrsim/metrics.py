"""Run-time counters, the per-run report, multi-run aggregation and export."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

from .packets import CaiMessage, Data, Interest, Nack

__all__ = [
    "MetricsCollector",
    "MetricsReport",
    "AggregateReport",
    "aggregate",
    "normalized_overhead",
    "export",
    "to_csv",
    "to_json",
    "from_json",
    "CSV_COLUMNS",
    "ExportError",
]


class ExportError(OSError):
    pass


class MetricsCollector:
    """Counters fed by the engine and strategies during one run."""

    def __init__(self):
        self.issued = 0
        self.satisfied = 0
        self.unsatisfied = 0
        self.nacked = 0
        self.rtt_sum = 0.0
        self.hop_sum = 0
        self.rtts: list[float] = []
        self.bytes = {"interest": 0, "data": 0, "nack": 0, "cai": 0, "lsa": 0}
        self.packets = {"interest": 0, "data": 0, "nack": 0, "cai": 0}
        self.sent = 0
        self.received = 0
        self.dropped_at_send = 0
        self.dropped_in_flight = 0
        self.cache_hits = 0
        self.server_hits = 0
        self.duplicates = 0
        self.aggregated = 0
        self.unroutable = 0
        self.unsolicited = 0
        self.nacks_sent = 0
        self.protocol_errors = 0
        self.unknown_face_warnings = 0
        self.link_events = 0
        self.cai_originated = 0
        self.wrong_server: set[tuple[str, int]] = set()
        self.origins: dict[str, int] = defaultdict(int)
        self.per_consumer: dict[str, list[int]] = defaultdict(lambda: [0, 0, 0])
        self.stored_cai_bytes_max = 0
        self.pending_at_horizon = 0

    # packet hooks -----------------------------------------------------------

    @staticmethod
    def _kind(packet) -> str:
        cls = packet.__class__
        if cls is Interest:
            return "interest"
        if cls is Data:
            return "data"
        if cls is CaiMessage:
            return "cai"
        if cls is Nack:
            return "nack"
        raise TypeError(f"unknown packet type {cls.__name__}")

    def record_transmit(self, packet) -> None:
        kind = self._kind(packet)
        self.bytes[kind] += packet.size
        self.packets[kind] += 1
        self.sent += 1

    def record_receive(self, packet) -> None:
        self.received += 1

    def record_drop_at_send(self, packet) -> None:
        self.sent += 1
        self.dropped_at_send += 1

    def record_drop_in_flight(self, packet) -> None:
        self.dropped_in_flight += 1

    # node hooks -------------------------------------------------------------

    def record_interest_issued(self, consumer: str) -> None:
        self.issued += 1
        self.per_consumer[consumer][0] += 1

    def record_delivery(self, consumer: str, rtt: float, data: Data) -> None:
        self.satisfied += 1
        self.rtt_sum += rtt
        self.rtts.append(rtt)
        self.hop_sum += data.hop_count
        self.origins[data.origin_id] += 1
        self.per_consumer[consumer][1] += 1

    def record_unsatisfied(self, consumer: str, nacked: bool = False) -> None:
        self.unsatisfied += 1
        if nacked:
            self.nacked += 1
        self.per_consumer[consumer][2] += 1

    def record_cache_hit(self, node: str) -> None:
        self.cache_hits += 1

    def record_server_hit(self, node: str) -> None:
        self.server_hits += 1

    def record_wrong_server(self, uri: str, nonce: int) -> None:
        self.wrong_server.add((uri, nonce))

    def record_duplicate(self) -> None:
        self.duplicates += 1

    def record_aggregate(self) -> None:
        self.aggregated += 1

    def record_unroutable(self) -> None:
        self.unroutable += 1

    def record_unsolicited(self) -> None:
        self.unsolicited += 1

    def record_nack(self) -> None:
        self.nacks_sent += 1

    def record_protocol_error(self) -> None:
        self.protocol_errors += 1

    def record_unknown_face(self) -> None:
        self.unknown_face_warnings += 1

    def record_link_event(self, up: bool) -> None:
        self.link_events += 1

    def record_cai_originated(self) -> None:
        self.cai_originated += 1

    def record_lsa_bytes(self, nbytes: int) -> None:
        self.bytes["lsa"] += nbytes

    def record_stored_cai_bytes(self, nbytes: int) -> None:
        if nbytes > self.stored_cai_bytes_max:
            self.stored_cai_bytes_max = nbytes

    # report -----------------------------------------------------------------

    def report(self, scenario: str = "", strategy: str = "", alpha: float = math.nan,
               fpp: float = math.nan, seed: int | None = None) -> "MetricsReport":
        settled = self.satisfied + self.unsatisfied
        retrieved = self.satisfied
        traffic = self.bytes["interest"] + self.bytes["data"] + self.bytes["nack"]
        return MetricsReport(
            scenario=scenario,
            strategy=strategy,
            alpha=alpha,
            fpp=fpp,
            seed=seed,
            issued=self.issued,
            satisfied=self.satisfied,
            unsatisfied=self.unsatisfied,
            pending=self.pending_at_horizon,
            avg_rtt_ms=(1000.0 * self.rtt_sum / retrieved) if retrieved else None,
            unsatisfied_pct=(100.0 * self.unsatisfied / settled) if settled else 0.0,
            normalized_overhead_bytes_per_data=(traffic / retrieved) if retrieved else None,
            total_interest_overhead_bytes=float(self.bytes["interest"]),
            data_overhead_bytes=float(self.bytes["data"] + self.bytes["nack"]),
            advert_or_signalling_overhead_bytes=float(self.bytes["cai"] + self.bytes["lsa"]),
            mean_hit_distance_hops=(self.hop_sum / retrieved) if retrieved else None,
            wrong_server_pct=(100.0 * len(self.wrong_server) / self.issued) if self.issued else 0.0,
            stored_cai_bytes=float(self.stored_cai_bytes_max),
            cache_hits=self.cache_hits,
            server_hits=self.server_hits,
        )


@dataclass
class MetricsReport:
    scenario: str
    strategy: str
    alpha: float
    fpp: float
    seed: int | None
    issued: int
    satisfied: int
    unsatisfied: int
    pending: int
    avg_rtt_ms: float | None
    unsatisfied_pct: float
    normalized_overhead_bytes_per_data: float | None
    total_interest_overhead_bytes: float
    data_overhead_bytes: float
    advert_or_signalling_overhead_bytes: float
    mean_hit_distance_hops: float | None
    wrong_server_pct: float
    stored_cai_bytes: float = 0.0
    cache_hits: int = 0
    server_hits: int = 0
    runs: int = 1
    ci95: dict[str, float] = field(default_factory=dict)
    per_run: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name in ("unsatisfied_pct", "wrong_server_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name}={v} outside [0, 100]")
        for name in ("total_interest_overhead_bytes", "data_overhead_bytes",
                     "advert_or_signalling_overhead_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.mean_hit_distance_hops is not None and self.mean_hit_distance_hops < 0:
            raise ValueError("hit distance must be non-negative")

    @property
    def ci95_rtt(self) -> float | None:
        return self.ci95.get("avg_rtt_ms")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


AggregateReport = MetricsReport

_MEAN_FIELDS = (
    "avg_rtt_ms",
    "unsatisfied_pct",
    "normalized_overhead_bytes_per_data",
    "total_interest_overhead_bytes",
    "data_overhead_bytes",
    "advert_or_signalling_overhead_bytes",
    "mean_hit_distance_hops",
    "wrong_server_pct",
    "stored_cai_bytes",
)
_SUM_FIELDS = ("issued", "satisfied", "unsatisfied", "pending", "cache_hits", "server_hits")


def _t_quantile(df: int) -> float:
    from scipy.stats import t

    return float(t.ppf(0.975, df))


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean over runs with 95% Student-t half-widths; a single run has no intervals."""
    if not reports:
        raise ValueError("nothing to aggregate")
    first = reports[0]
    values: dict = {}
    ci: dict[str, float] = {}
    n = len(reports)
    for name in _MEAN_FIELDS:
        xs = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        if not xs:
            values[name] = None
            continue
        values[name] = math.fsum(xs) / len(xs)
        if len(xs) > 1:
            ci[name] = _t_quantile(len(xs) - 1) * statistics.stdev(xs) / math.sqrt(len(xs))
    for name in _SUM_FIELDS:
        values[name] = sum(getattr(r, name) for r in reports)
    return MetricsReport(
        scenario=first.scenario,
        strategy=first.strategy,
        alpha=first.alpha,
        fpp=first.fpp,
        seed=None if n > 1 else first.seed,
        runs=n,
        ci95=ci if n > 1 else {},
        per_run=[{k: v for k, v in r.to_dict().items() if k not in ("per_run", "ci95")} for r in reports]
        if n > 1 else [],
        **values,
    )


def normalized_overhead(interest_bytes: float, data_bytes: float, retrieved: int) -> float | None:
    """Interest plus Data link bytes per retrieved Data packet; ``None`` when nothing was retrieved."""
    if retrieved <= 0:
        return None
    return (interest_bytes + data_bytes) / retrieved


CSV_COLUMNS = (
    "scenario",
    "strategy",
    "alpha",
    "fpp",
    "avg_rtt_ms",
    "unsatisfied_pct",
    "norm_overhead_B",
    "interest_overhead_B",
    "signalling_B",
    "hit_distance",
    "wrong_server_pct",
    "ci95_rtt",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return f"{x:.6g}"
    return str(x)


def _csv_row(r: MetricsReport) -> list[str]:
    return [
        r.scenario,
        r.strategy,
        _fmt(r.alpha),
        _fmt(r.fpp),
        _fmt(r.avg_rtt_ms),
        _fmt(r.unsatisfied_pct),
        _fmt(r.normalized_overhead_bytes_per_data),
        _fmt(r.total_interest_overhead_bytes),
        _fmt(r.advert_or_signalling_overhead_bytes),
        _fmt(r.mean_hit_distance_hops),
        _fmt(r.wrong_server_pct),
        _fmt(r.ci95_rtt),
    ]


def to_csv(reports: Iterable[MetricsReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(_csv_row(r))
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def to_json(reports: Iterable[MetricsReport]) -> str:
    return json.dumps([_json_safe(r.to_dict()) for r in reports], indent=2, sort_keys=True) + "\n"


def from_json(text: str) -> list[MetricsReport]:
    out = []
    for d in json.loads(text):
        for k in ("alpha", "fpp"):
            if d.get(k) is None:
                d[k] = math.nan
        out.append(MetricsReport.from_dict(d))
    return out


def export(reports: Sequence[MetricsReport], path: str | os.PathLike | None, fmt: str = "csv") -> str:
    """Render ``reports`` as CSV or JSON; writes to ``path`` when given and returns the text."""
    if not reports:
        raise ValueError("no reports to export")
    if fmt == "csv":
        text = to_csv(reports)
    elif fmt == "json":
        text = to_json(reports)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ExportError(f"cannot write {os.fspath(path)}: {exc.strerror or exc}") from exc
    return text
