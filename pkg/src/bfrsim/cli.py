"""Command-line front end: ``bfrsim run | sweep | validate | gen-catalogue``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import random
import sys

import yaml

from .config import STRATEGIES, ConfigError, SCALED_FAILURES, ScenarioConfig, load_config
from .metrics import ExportError, export
from .scenario import run_config, run_sweep
from .topology import TopologyError, load_topology
from .workload import generate_catalogue

log = logging.getLogger("bfrsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# flag -> config key, for the keys most often changed from the command line
_OVERRIDES = {
    "strategy": str,
    "alpha": float,
    "duration": float,
    "runs": int,
    "topology": str,
    "consumer_rate": float,
    "bandwidth_scale": float,
    "cache_capacity": int,
    "bf_n": int,
    "bf_p": float,
    "inrecord_policy": str,
    "bfr_fanout": str,
    "cai_refresh": float,
    "sp_convergence_delay": float,
    "catalogue": str,
}


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="YAML scenario file (defaults apply when omitted)")
    for key, typ in _OVERRIDES.items():
        flag = "--" + key.replace("_", "-")
        kw = {"choices": STRATEGIES} if key == "strategy" else {}
        p.add_argument(flag, dest=key, type=typ, default=None, **kw)
    p.add_argument("--oracle-filters", action="store_true", default=None,
                   help="route on exact content sets instead of Bloom filters")
    p.add_argument("--scaled-failures", action="store_true",
                   help="use the three-outage schedule with automatically chosen links")
    p.add_argument("--set", dest="extra", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; VALUE is parsed as YAML")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base RNG seed")
    common.add_argument("--out", default=None, help="output file (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bfrsim", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario (aggregated over --runs seeds)")
    _add_scenario_args(p)

    p = sub.add_parser("sweep", parents=[common], help="sweep alpha or the filter false-positive level")
    _add_scenario_args(p)
    p.add_argument("--axis", choices=("alpha", "fpp"), required=True)
    p.add_argument("--values", default=None,
                   help="comma-separated alphas, or ratio:k pairs for the fpp axis")
    p.add_argument("--strategies", default=None, help="comma-separated strategies for the alpha axis")

    p = sub.add_parser("validate", parents=[common], help="check a config file and its topology")
    _add_scenario_args(p)

    p = sub.add_parser("gen-catalogue", parents=[common], help="write a synthetic URL catalogue")
    p.add_argument("--count", type=int, default=1000)
    return parser


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    data = load_config(args.config).to_dict() if args.config else {}
    for key in _OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if args.oracle_filters:
        data["oracle_filters"] = True
    if args.scaled_failures:
        data["failures"] = [{"down": f.down, "up": f.up} for f in SCALED_FAILURES]
    data.update(_parse_set(args.extra))
    if args.seed is not None:
        data["seed"] = args.seed
    return ScenarioConfig.from_dict(data)


def _sweep_values(axis: str, text: str | None):
    if text is None:
        return None
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        if axis == "alpha":
            return [float(t) for t in items]
        pairs = []
        for t in items:
            ratio, _, k = t.partition(":")
            pairs.append((float(ratio), int(k)))
        return pairs
    except ValueError:
        raise ConfigError(f"cannot parse --values {text!r}") from None


def _emit(reports, args) -> None:
    text = export(reports, args.out, args.format)
    if args.out is None:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    _emit([run_config(config_from_args(args))], args)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    strategies = args.strategies.split(",") if args.strategies else None
    if strategies:
        bad = [s for s in strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}; expected some of {STRATEGIES}")
    _emit(run_sweep(cfg, args.axis, _sweep_values(args.axis, args.values), strategies), args)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = config_from_args(args)
    try:
        topo = load_topology(cfg.topology)
    except OSError as exc:
        raise ConfigError(f"topology {cfg.topology}: {exc.strerror or exc}") from None
    except TopologyError as exc:
        raise ConfigError(str(exc)) from None
    routers = len(topo.nodes_with_role("router"))
    print(f"ok: {cfg.name}: {routers} routers, {len(topo.links)} links, strategy {cfg.strategy}")
    return EXIT_OK


def _cmd_gen_catalogue(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    seed = 424242 if args.seed is None else args.seed
    cat = generate_catalogue(args.count, random.Random(seed))
    if args.out is None:
        sys.stdout.write("".join(f"{n.uri}\n" for n in cat.files))
    else:
        cat.save(args.out)
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
    "gen-catalogue": _cmd_gen_catalogue,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - report any simulation failure as a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
