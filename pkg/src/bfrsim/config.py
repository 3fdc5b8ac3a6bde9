"""Scenario configuration: defaults, YAML loading and validation."""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import yaml

from .bfr import FANOUTS, INRECORD_POLICIES

__all__ = ["ScenarioConfig", "FailureSpec", "ConfigError", "load_config", "STRATEGIES",
           "TABLE2_SETTINGS", "SCALED_FAILURES"]

STRATEGIES = ("bfr", "flooding", "shortest-path")

# (bits per element, salt count) pairs evaluated for wrong-server routing
TABLE2_SETTINGS = ((3.0, 2), (3.0, 2), (4.0, 3), (6.0, 4), (8.0, 5))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FailureSpec:
    """One link outage; ``link`` of ``None`` lets the scenario pick a core link."""

    down: float
    up: float
    link: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.down) and math.isfinite(self.up)) or not 0 <= self.down < self.up:
            raise ConfigError(f"failure needs 0 <= down < up, got down={self.down} up={self.up}")
        if self.link is not None and (len(self.link) != 2 or self.link[0] == self.link[1]):
            raise ConfigError(f"failure link must name two distinct nodes, got {self.link}")


# three outages at a fifth of the run length apart, scaled to a 2000 s horizon
SCALED_FAILURES = (FailureSpec(100.0, 200.0), FailureSpec(300.0, 400.0), FailureSpec(500.0, 600.0))


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    strategy: str = "bfr"
    alpha: float = 0.8
    zipf_q: float = 0.0
    duration: float = 2000.0
    seed: int = 1
    runs: int = 1

    topology: str = "geant"
    n_consumers: int = 56
    n_servers: int = 5
    consumer_group: tuple[int, int] = (3, 6)
    catalogue: str | None = None
    catalogue_size: int = 1000
    catalogue_seed: int = 424242
    segments: int = 100
    cache_capacity: int = 100

    consumer_rate: float = 10.0
    consumer_start: float = 1.0
    interest_lifetime: float = 4.0
    bandwidth_scale: float = 1.0

    bf_n: int | None = None  # None: size each filter for its actual string count
    bf_p: float = 0.02
    bf_ratio: float | None = None
    bf_k: int | None = None
    oracle_filters: bool = False
    inrecord_policy: str = "ranked"
    bfr_fanout: str = "learn"
    bfr_explore_every: int = 16
    cai_refresh: float = 1000.0

    sp_convergence_delay: float = 2.0
    failures: list[FailureSpec] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.consumer_group = tuple(self.consumer_group)
        fs = []
        for f in self.failures:
            if isinstance(f, FailureSpec):
                fs.append(f)
            elif isinstance(f, dict):
                link = f.get("link")
                unknown = set(f) - {"down", "up", "link"}
                if unknown:
                    raise ConfigError(f"unknown failure keys {sorted(unknown)}")
                try:
                    fs.append(FailureSpec(float(f["down"]), float(f["up"]),
                                          tuple(link) if link is not None else None))
                except KeyError as exc:
                    raise ConfigError(f"failure entry missing {exc.args[0]!r}") from None
            else:
                raise ConfigError(f"failure entries must be mappings, got {f!r}")
        self.failures = fs
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        need(self.alpha > 0, "alpha must be positive")
        need(self.zipf_q >= 0, "zipf_q must be non-negative")
        need(self.duration > 0, "duration must be positive")
        need(self.runs >= 1, "runs must be >= 1")
        need(self.n_consumers >= 0 and self.n_servers >= 1, "need >= 0 consumers and >= 1 server")
        lo, hi = self.consumer_group
        need(1 <= lo <= hi, f"consumer_group must satisfy 1 <= lo <= hi, got {self.consumer_group}")
        need(self.catalogue_size >= 1, "catalogue_size must be >= 1")
        need(self.segments >= 1, "segments must be >= 1")
        need(self.cache_capacity >= 0, "cache_capacity must be non-negative")
        need(self.consumer_rate > 0, "consumer_rate must be positive")
        need(self.consumer_start >= 0, "consumer_start must be non-negative")
        need(self.interest_lifetime > 0, "interest_lifetime must be positive")
        need(self.bandwidth_scale > 0, "bandwidth_scale must be positive")
        need(0 < self.bf_p < 1, "bf_p must lie in (0, 1)")
        need(self.bf_n is None or self.bf_n >= 1, "bf_n must be >= 1")
        need((self.bf_ratio is None) == (self.bf_k is None), "bf_ratio and bf_k go together")
        if self.bf_ratio is not None:
            need(self.bf_ratio > 0 and 1 <= self.bf_k <= 64, "bf_ratio > 0 and 1 <= bf_k <= 64 required")
        need(self.inrecord_policy in INRECORD_POLICIES,
             f"inrecord_policy must be one of {INRECORD_POLICIES}")
        need(self.bfr_fanout in FANOUTS, f"bfr_fanout must be one of {FANOUTS}")
        need(self.bfr_explore_every >= 1, "bfr_explore_every must be >= 1")
        need(self.cai_refresh > 0, "cai_refresh must be positive")
        need(self.sp_convergence_delay >= 0, "sp_convergence_delay must be non-negative")
        for f in self.failures:
            need(f.up <= self.duration, f"failure up time {f.up} beyond duration {self.duration}")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["consumer_group"] = list(self.consumer_group)
        d["failures"] = [
            {"down": f.down, "up": f.up, **({"link": list(f.link)} if f.link else {})} for f in self.failures
        ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {os.fspath(path)}: {exc.strerror or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{os.fspath(path)}: invalid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{os.fspath(path)}: top level must be a mapping")
    try:
        return ScenarioConfig.from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{os.fspath(path)}: {exc}") from None
