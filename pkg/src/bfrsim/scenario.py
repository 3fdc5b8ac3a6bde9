"""Scenario assembly: build a network from a config, run it, sweep parameters."""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass

from .baselines import FloodingStrategy, ShortestPathStrategy, SpController, compute_shortest_paths, \
    sp_signalling_cost
from .bfr import BfrStrategy, ServerRepository, advertise, advertisement_strings
from .bloom import BloomParams, derive_params, estimate_fpp
from .config import ConfigError, ScenarioConfig, TABLE2_SETTINGS
from .engine import ConsumerApp, LinkScheduleItem, Simulator
from .metrics import MetricsCollector, MetricsReport, aggregate
from .topology import Link, Topology, TopologyError, load_topology
from .workload import Catalogue, PlacementError, PopularityModel, assign_content, generate_catalogue, \
    place_endpoints

__all__ = ["Network", "build_network", "assemble_network", "run_scenario", "run_config", "run_sweep", "select_failure_links",
           "nominal_fpp", "SWEEP_ALPHAS"]

log = logging.getLogger(__name__)

SWEEP_ALPHAS = (0.8, 1.0, 1.2, 1.4)


@dataclass
class Network:
    """A wired-up simulation ready to run."""

    config: ScenarioConfig
    seed: int
    sim: Simulator
    topology: Topology
    consumers: list[str]
    servers: list[str]
    placement: dict
    catalogue: Catalogue
    apps: list[ConsumerApp]
    failures: list[LinkScheduleItem]
    controller: SpController | None = None

    def run(self) -> MetricsReport:
        cfg = self.config
        self.sim.run(cfg.duration)
        self.sim.metrics.pending_at_horizon = sum(app.finish(cfg.duration) for app in self.apps)
        return self.sim.metrics.report(cfg.name, cfg.strategy, cfg.alpha,
                                       nominal_fpp(cfg) if cfg.strategy == "bfr" else math.nan, self.seed)


def nominal_fpp(cfg: ScenarioConfig) -> float:
    if cfg.oracle_filters:
        return 0.0
    if cfg.bf_ratio is not None:
        return estimate_fpp(round(cfg.bf_ratio * 1000), 1000, cfg.bf_k)
    return cfg.bf_p


def _scaled(topology: Topology, factor: float) -> Topology:
    if factor == 1.0:
        return topology
    return Topology(dict(topology.roles),
                    [Link(l.a, l.b, l.delay, l.bandwidth * factor) for l in topology.links])


def _load_catalogue(cfg: ScenarioConfig) -> Catalogue:
    if cfg.catalogue:
        try:
            return Catalogue.load(cfg.catalogue, cfg.segments)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"catalogue: {exc}") from None
    return generate_catalogue(cfg.catalogue_size, random.Random(cfg.catalogue_seed), segments_per_file=cfg.segments)


def select_failure_links(topology: Topology, consumers: list[str], servers: list[str], count: int,
                         rng: random.Random) -> list[tuple[str, str]]:
    """Pick ``count`` distinct router-router links that carry consumer-to-server shortest paths.

    Only links whose removal keeps the graph connected qualify; links are drawn
    without replacement with probability proportional to the routes crossing them.
    """
    table = compute_shortest_paths(topology, {s: () for s in servers})
    usage: dict[int, int] = {}
    for c in consumers:
        for s in servers:
            path = table.path(c, s)
            for a, b in zip(path, path[1:]):
                li = topology.find_link(a, b)
                usage[li] = usage.get(li, 0) + 1
    candidates = []
    for li in sorted(usage):
        link = topology.links[li]
        if topology.roles[link.a] != "router" or topology.roles[link.b] != "router":
            continue
        up = [True] * len(topology.links)
        up[li] = False
        if topology.is_connected(up):
            candidates.append(li)
    chosen: list[tuple[str, str]] = []
    while candidates and len(chosen) < count:
        li = rng.choices(candidates, weights=[usage[c] for c in candidates])[0]
        candidates.remove(li)
        chosen.append((topology.links[li].a, topology.links[li].b))
    if len(chosen) < count:
        raise ConfigError(f"only {len(chosen)} suitable links for {count} failures")
    return chosen


def _advert_params(cfg: ScenarioConfig, contents) -> BloomParams | None:
    if cfg.bf_ratio is not None:
        n = len(advertisement_strings(contents))
        return BloomParams.from_ratio(n, cfg.bf_ratio, cfg.bf_k)
    if cfg.bf_n is not None:
        return derive_params(cfg.bf_n, cfg.bf_p)
    return None


def build_network(cfg: ScenarioConfig, seed: int | None = None) -> Network:
    seed = cfg.seed if seed is None else seed
    try:
        base = load_topology(cfg.topology)
    except OSError as exc:
        raise ConfigError(f"topology {cfg.topology}: {exc.strerror or exc}") from None
    except TopologyError as exc:
        raise ConfigError(str(exc)) from None
    try:
        topo, consumers, servers = place_endpoints(base, cfg.n_consumers, cfg.n_servers,
                                                   random.Random(f"{seed}:placement"), cfg.consumer_group)
        catalogue = _load_catalogue(cfg)
        placement = assign_content(servers, catalogue, random.Random(f"{seed}:content"))
    except PlacementError as exc:
        raise ConfigError(str(exc)) from None
    return assemble_network(cfg, seed, topo, consumers, servers, placement, catalogue)


def assemble_network(cfg: ScenarioConfig, seed: int, topo: Topology, consumers: list[str], servers: list[str],
                     placement: dict, catalogue: Catalogue) -> Network:
    """Wire strategies, advertisements, failures and consumers onto a topology with endpoints in place."""
    topo = _scaled(topo, cfg.bandwidth_scale)
    sim = Simulator(topo, MetricsCollector(), cfg.cache_capacity)

    bloom_seed = random.Random(f"{seed}:bloom").getrandbits(64)
    for s in servers:
        sim.nodes[s].repo = ServerRepository(s, placement[s], cfg.segments, _advert_params(cfg, placement[s]),
                                             cfg.bf_p, cfg.cai_refresh, bloom_seed)

    controller = None
    if cfg.strategy == "bfr":
        oracle = None
        if cfg.oracle_filters:
            oracle = {s: frozenset(advertisement_strings(placement[s])) for s in servers}
        for node in sim.nodes.values():
            node.strategy = BfrStrategy(node, cfg.inrecord_policy, oracle, cfg.bfr_fanout, cfg.bfr_explore_every)
        advert_rng = random.Random(f"{seed}:cai")
        for s in servers:
            sim.every(0.0, cfg.cai_refresh, advertise, sim, s, advert_rng, until=cfg.duration)
    elif cfg.strategy == "flooding":
        for node in sim.nodes.values():
            node.strategy = FloodingStrategy(node)
    else:
        for node in sim.nodes.values():
            node.strategy = ShortestPathStrategy(node)
        controller = SpController(sim, placement, cfg.sp_convergence_delay)
        controller.install()
        lsa_round = sp_signalling_cost(topo, placement, 1)
        sim.every(0.0, cfg.cai_refresh, sim.metrics.record_lsa_bytes, lsa_round, until=cfg.duration)

    failures: list[LinkScheduleItem] = []
    if cfg.failures:
        auto = [f for f in cfg.failures if f.link is None]
        picked = iter(select_failure_links(topo, consumers, servers, len(auto),
                                           random.Random(f"{seed}:failures")) if auto else [])
        for f in cfg.failures:
            a, b = f.link if f.link is not None else next(picked)
            if topo.find_link(a, b) is None:
                raise ConfigError(f"failure references missing link {a}-{b}")
            failures.append(LinkScheduleItem(a, b, f.down, f.up))
        sim.schedule_failures(failures)

    model = PopularityModel(cfg.alpha, len(catalogue), cfg.zipf_q)
    apps = [
        ConsumerApp(sim.nodes[c], catalogue, model, random.Random(f"{seed}:consumer:{c}"), cfg.consumer_rate,
                    cfg.consumer_start, cfg.duration, cfg.interest_lifetime)
        for c in consumers
    ]
    sim.every(cfg.interest_lifetime, cfg.interest_lifetime, sim.expire_tables, until=cfg.duration)
    return Network(cfg, seed, sim, topo, consumers, servers, placement, catalogue, apps, failures, controller)


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> MetricsReport:
    """One run of ``cfg`` with ``seed`` (defaults to ``cfg.seed``)."""
    return build_network(cfg, seed).run()


def run_config(cfg: ScenarioConfig) -> MetricsReport:
    """``cfg.runs`` runs on consecutive seeds, aggregated."""
    reports = []
    for i in range(cfg.runs):
        log.info("%s: run %d/%d (seed %d)", cfg.name, i + 1, cfg.runs, cfg.seed + i)
        reports.append(run_scenario(cfg, cfg.seed + i))
    return aggregate(reports)


def run_sweep(cfg: ScenarioConfig, axis: str, values=None, strategies=None) -> list[MetricsReport]:
    """One aggregated report per (axis value, strategy).

    ``axis="alpha"`` runs every strategy at each alpha; ``axis="fpp"`` runs BFR
    at each (bits per element, salt count) pair.
    """
    rows = []
    if axis == "alpha":
        for alpha in values or SWEEP_ALPHAS:
            for strategy in strategies or ("flooding", "shortest-path", "bfr"):
                rows.append(run_config(cfg.replace(alpha=alpha, strategy=strategy)))
    elif axis == "fpp":
        for ratio, k in values or TABLE2_SETTINGS:
            rows.append(run_config(cfg.replace(strategy="bfr", bf_ratio=ratio, bf_k=k)))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected 'alpha' or 'fpp'")
    return rows

