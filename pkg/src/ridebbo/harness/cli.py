"""Command-line harness: ``generate``, ``run``, ``compare`` and ``sweep``.

Settings resolve in three layers: built-in defaults, then an optional
YAML/JSON ``--config`` file (keys are case-insensitive), then explicit flags.
Every report echoes the resolved settings so a run can be repeated exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from ..bbo import BBOConfig
from ..matchers import MATCHER_NAMES
from ..matchers.sa import SAParams
from ..roadnet import NetConfig, grid_network, load_network, save_network
from ..sim import SimConfig, SimReport, run as simulate
from .instance import GenParams, InstanceError, generate, load_instance, save_instance

BBO_KEYS = tuple(f.name for f in fields(BBOConfig) if f.name not in ("alpha", "seed"))
SA_KEYS = tuple(f.name for f in fields(SAParams) if f.name != "seed")
SIM_KEYS = ("batch_seconds", "horizon_seconds", "alpha", "seed", "speed", "matcher")
NET_KEYS = ("cache_capacity", "network_nodes", "network_edges", "grid", "grid_spacing",
            "grid_jitter", "grid_seed")
GEN_KEYS = ("drivers", "riders", "profile", "capacity", "driver_slack", "rider_slack",
            "rate_multiplier")
CONFIG_KEYS = frozenset(BBO_KEYS + SA_KEYS + SIM_KEYS + NET_KEYS + GEN_KEYS + ("jobs", "cases"))

DEFAULTS = {
    "seed": 0, "alpha": 0.5, "batch_seconds": 30, "horizon_seconds": 1800, "speed": 10.0,
    "matcher": "bbo", "cache_capacity": NetConfig().cache_capacity,
    "grid": 20, "grid_spacing": 200.0, "grid_jitter": 0.3, "grid_seed": 0,
    "drivers": 200, "riders": 668, "profile": "batched", "capacity": 3,
    "driver_slack": 2.0, "rider_slack": 2.0, "rate_multiplier": 1.0, "jobs": 1,
}

#: Default sweep grid: hybrid ratio x rollback with N=20, G_max=10, E=1, alpha=0.5.
DEFAULT_CASES = (
    {"hybrid_ratio": 0.85, "rollback": True},
    {"hybrid_ratio": 0.85, "rollback": False},
    {"hybrid_ratio": 1.0, "rollback": True},
    {"hybrid_ratio": 1.0, "rollback": False},
)


class ConfigError(ValueError):
    pass


def _norm_key(key):
    return str(key).strip().lower().replace("-", "_")


def load_config(path):
    """Read a YAML or JSON settings file into a dict with normalised keys."""
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    out = {}
    for k, v in data.items():
        key = _norm_key(k)
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown key {k!r}")
        if key == "cases":
            v = [{_norm_key(ck): cv for ck, cv in case.items()} for case in v]
        out[key] = v
    return out


def resolve(args) -> dict:
    """Merge defaults, the config file and explicit flags (flags win)."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(load_config(args.config))
    for key, val in vars(args).items():
        if key in CONFIG_KEYS and val is not None:
            settings[key] = val
    if settings["matcher"] not in MATCHER_NAMES:
        raise ConfigError(f"unknown matcher {settings['matcher']!r}")
    return settings


def network_spec(settings) -> dict:
    return {k: settings.get(k) for k in NET_KEYS}


def build_network(spec):
    config = NetConfig(cache_capacity=int(spec["cache_capacity"]))
    nodes, edges = spec.get("network_nodes"), spec.get("network_edges")
    if bool(nodes) != bool(edges):
        raise ConfigError("--network-nodes and --network-edges must be given together")
    if nodes:
        return load_network(nodes, edges, config)
    return grid_network(int(spec["grid"]), float(spec["grid_spacing"]),
                        rng=np.random.default_rng(int(spec["grid_seed"])),
                        jitter=float(spec["grid_jitter"]), config=config)


def matcher_config(settings, matcher, overrides=None):
    merged = dict(settings)
    merged.update(overrides or {})
    if matcher == "bbo":
        kw = {k: merged[k] for k in BBO_KEYS if k in merged}
        return BBOConfig(alpha=merged["alpha"], seed=merged["seed"], **kw)
    if matcher == "sa":
        kw = {k: merged[k] for k in SA_KEYS if k in merged}
        return SAParams(seed=merged["seed"], **kw)
    return None


def sim_config(settings, matcher, overrides=None) -> SimConfig:
    return SimConfig(
        batch_seconds=int(settings["batch_seconds"]),
        horizon_seconds=int(settings["horizon_seconds"]),
        matcher=matcher,
        matcher_config=matcher_config(settings, matcher, overrides),
        alpha=float(settings["alpha"]),
        seed=int(settings["seed"]),
        speed=float(settings["speed"]),
    )


# ---------------------------------------------------------------- reports

def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def batch_rows(report: SimReport, riders):
    """One CSV row per batch.  ``matched``, ``delay_sum`` and ``arrivals`` sum
    to the cumulative figures in the JSON report."""
    requests = sorted(r.request for r in riders)
    rows, seen = [], 0
    for b in report.batches:
        upto = int(np.searchsorted(requests, b.clock, side="right"))
        s = b.snapshot
        rows.append([b.index, b.clock, upto - seen, s.total_riders, s.matched_count,
                     sum(s.matching_delays), b.plan_cost, s.overhead_sum])
        seen = upto
    return rows


BATCH_HEADER = ["index", "clock", "arrivals", "pool_size", "matched", "delay_sum",
                "plan_cost", "active_overhead"]
DRIVER_HEADER = ["id", "base_distance", "trip_distance", "overhead", "riders_served"]


def write_report(report: SimReport, riders, out: Path):
    """Write report.json, batches.csv, drivers.csv, events.log and timing.json."""
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(report.to_dict(), out / "report.json")
    _write_csv(out / "batches.csv", BATCH_HEADER, batch_rows(report, riders))
    _write_csv(out / "drivers.csv", DRIVER_HEADER,
               [[d["id"], d["base_distance"], d["trip_distance"], d["overhead"], len(d["riders"])]
                for d in report.drivers])
    (out / "events.log").write_text("".join(e + "\n" for e in report.events), encoding="utf-8")
    # wall-clock lives apart from report.json so that file stays reproducible
    _dump_json({"batch_wall_seconds": report.wall_seconds,
                "max_batch_wall_seconds": max(report.wall_seconds, default=0.0)},
               out / "timing.json")


def summary_row(report: SimReport):
    c = report.to_dict()["cumulative"]
    return {
        "matching_rate": c["matching_rate"],
        "overhead_sum": c["overhead_sum"],
        "overhead_mean": c["overhead_mean"],
        "matching_delay_mean": c["matching_delay_mean"],
        "cost": c["cost"],
    }


# ---------------------------------------------------------------- jobs

def _job(spec):
    """Run one simulation from a picklable description (used by worker processes)."""
    net = build_network(spec["network"])
    inst = load_instance(spec["instance"], net)
    return simulate(inst, spec["sim"], net)


def _run_jobs(specs, jobs, net=None, inst=None):
    """Run simulations in order; results are returned in input order either way."""
    if jobs <= 1 or len(specs) <= 1:
        return [simulate(inst, s["sim"], net) for s in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_job, specs))


# ---------------------------------------------------------------- commands

def cmd_generate(args, settings):
    net = build_network(network_spec(settings))
    p = GenParams(
        driver_count=int(settings["drivers"]),
        rider_count=int(settings["riders"]),
        horizon_seconds=int(settings["horizon_seconds"]),
        capacity=int(settings["capacity"]),
        driver_slack=float(settings["driver_slack"]),
        rider_slack=float(settings["rider_slack"]),
        speed=float(settings["speed"]),
        profile=settings["profile"],
        batch_seconds=int(settings["batch_seconds"]),
        rate_multiplier=float(settings["rate_multiplier"]),
        seed=int(settings["seed"]),
    )
    inst = generate(net, p)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(inst, out, header=f"profile={p.profile} seed={p.seed} "
                                    f"drivers={inst.driver_count} riders={inst.rider_count}")
    if args.network_out:
        prefix = Path(args.network_out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        save_network(net, f"{prefix}.nodes", f"{prefix}.edges")
    print(f"wrote {out} ({inst.driver_count} drivers, {inst.rider_count} riders)")
    return 0


def _setup(settings, args):
    net = build_network(network_spec(settings))
    inst = load_instance(args.instance, net)
    return net, inst


def _spec(settings, args, sim):
    return {"network": network_spec(settings), "instance": str(args.instance), "sim": sim}


def cmd_run(args, settings):
    net, inst = _setup(settings, args)
    report = simulate(inst, sim_config(settings, settings["matcher"]), net)
    out = Path(args.out)
    write_report(report, inst.riders(), out)
    row = summary_row(report)
    print(f"{report.matcher}: " + " ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    return 1 if report.defects else 0


COMPARE_HEADER = ["matcher", "matching_rate", "overhead_sum", "overhead_mean",
                  "matching_delay_mean", "cost"]


def cmd_compare(args, settings):
    net, inst = _setup(settings, args)
    specs = [_spec(settings, args, sim_config(settings, m)) for m in MATCHER_NAMES]
    reports = _run_jobs(specs, int(settings["jobs"]), net, inst)
    out = Path(args.out)
    rows, table = [], []
    for m, rep in zip(MATCHER_NAMES, reports):
        write_report(rep, inst.riders(), out / m)
        row = summary_row(rep)
        rows.append({"matcher": m, **row})
        table.append([m] + [row[k] for k in COMPARE_HEADER[1:]])
    _write_csv(out / "compare.csv", COMPARE_HEADER, table)
    _dump_json({"settings": _echo(settings), "rows": rows}, out / "compare.json")
    _print_table(COMPARE_HEADER, table)
    return 1 if any(r.defects for r in reports) else 0


SWEEP_METRICS = (
    ("Base driver dist.", "base_driver_distance"),
    ("Base rider dist.", "base_rider_distance"),
    ("Matched trip dist.", "matched_trip_distance"),
    ("d_ov", "overhead_sum"),
    ("M_R", "matching_rate"),
    ("Cost", "cost"),
    ("Cost (unweighted)", "cost_unweighted"),
)
CASE_PARAMS = (
    ("Generation limit", "G_max", "generation_limit"),
    ("Population size", "N", "population_size"),
    ("Hybrid init. rate", "H_ratio", "hybrid_ratio"),
    ("Number of elites", "E", "elite_count"),
    ("Roll back", "RB", "rollback"),
    ("Objective weight", "alpha", "alpha"),
    ("Cache size", "-", "cache_capacity"),
)


def sweep_cases(settings):
    cases = settings.get("cases") or DEFAULT_CASES
    base = {"population_size": 20, "generation_limit": 10, "elite_count": 1}
    out = []
    for case in cases:
        unknown = set(case) - set(BBO_KEYS)
        if unknown:
            raise ConfigError(f"sweep case has non-BBO keys {sorted(unknown)}")
        merged = dict(base)
        merged.update({k: settings[k] for k in BBO_KEYS if k in settings})
        merged.update(case)
        out.append(merged)
    return out


def cmd_sweep(args, settings):
    net, inst = _setup(settings, args)
    cases = sweep_cases(settings)
    specs = [_spec(settings, args, sim_config(settings, "bbo", c)) for c in cases]
    reports = _run_jobs(specs, int(settings["jobs"]), net, inst)
    out = Path(args.out)
    names = [f"Case {i}" for i in range(1, len(cases) + 1)]
    results = []
    for i, rep in enumerate(reports, 1):
        write_report(rep, inst.riders(), out / f"case{i}")
        c = rep.to_dict()["cumulative"]
        c["cost_unweighted"] = (c["overhead_sum"] / c["rider_msp_sum"] + 1 - c["matching_rate"]
                                if c["rider_msp_sum"] else None)
        results.append(c)
    _write_csv(out / "sweep.csv", [""] + names,
               [[label] + [r[key] for r in results] for label, key in SWEEP_METRICS])
    case_rows = []
    for label, symbol, key in CASE_PARAMS:
        vals = [settings[key] if key in ("alpha", "cache_capacity") else c[key] for c in cases]
        if key == "rollback":
            vals = ["On" if v else "Off" for v in vals]
        case_rows.append([label, symbol] + vals)
    _write_csv(out / "sweep_cases.csv", ["", "Symbol"] + names, case_rows)
    _dump_json({"settings": _echo(settings), "cases": cases, "results": results},
               out / "sweep.json")
    _print_table([""] + names, [[label] + [r[key] for r in results] for label, key in SWEEP_METRICS])
    return 1 if any(r.defects for r in reports) else 0


def _echo(settings):
    return {k: settings[k] for k in sorted(settings)}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4f}" if abs(v) < 100 else f"{v:,.0f}"
    return "-" if v is None else str(v)


def _print_table(header, rows):
    cells = [[str(h) for h in header]] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        print("  ".join(c.rjust(w) for c, w in zip(r, widths)))


# ---------------------------------------------------------------- parser

def _add_common(p):
    p.add_argument("--config", help="YAML or JSON settings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--network-nodes", dest="network_nodes", help="node file: id lat lon")
    p.add_argument("--network-edges", dest="network_edges", help="edge file: u v weight")
    p.add_argument("--grid", type=int, help="side of the built-in grid network")
    p.add_argument("--grid-spacing", dest="grid_spacing", type=float)
    p.add_argument("--grid-jitter", dest="grid_jitter", type=float)
    p.add_argument("--grid-seed", dest="grid_seed", type=int)
    p.add_argument("--cache-capacity", dest="cache_capacity", type=int)
    p.add_argument("--batch-seconds", dest="batch_seconds", type=int)
    p.add_argument("--horizon-seconds", dest="horizon_seconds", type=int)
    p.add_argument("--speed", type=float)


def _add_sim(p, with_matcher=False):
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--alpha", type=float)
    if with_matcher:
        p.add_argument("--matcher", choices=MATCHER_NAMES)
    p.add_argument("--population-size", dest="population_size", type=int)
    p.add_argument("--generation-limit", dest="generation_limit", type=int)
    p.add_argument("--elite-count", dest="elite_count", type=int)
    p.add_argument("--hybrid-ratio", dest="hybrid_ratio", type=float)
    p.add_argument("--rollback", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--mutation-probability", dest="mutation_probability", type=float)
    p.add_argument("--jobs", type=int, help="worker processes for compare/sweep")


def build_parser():
    parser = argparse.ArgumentParser(prog="ridebbo", description="Dynamic ridesharing simulator")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a random instance")
    _add_common(gen)
    gen.add_argument("--out", required=True, help="instance file to write")
    gen.add_argument("--network-out", dest="network_out",
                     help="also write PREFIX.nodes and PREFIX.edges")
    gen.add_argument("--drivers", type=int)
    gen.add_argument("--riders", type=int)
    gen.add_argument("--profile", choices=("uniform", "batched"))
    gen.add_argument("--capacity", type=int)
    gen.add_argument("--driver-slack", dest="driver_slack", type=float)
    gen.add_argument("--rider-slack", dest="rider_slack", type=float)
    gen.add_argument("--rate-multiplier", dest="rate_multiplier", type=float)

    for name, helptext, with_matcher in (
            ("run", "simulate one matcher", True),
            ("compare", "simulate every matcher on one instance", False),
            ("sweep", "simulate BBO over a grid of settings", False)):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_sim(p, with_matcher)
    return parser


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve(args)
        return COMMANDS[args.command](args, settings)
    except (ConfigError, InstanceError, ValueError, OSError) as exc:
        parser.exit(2, f"ridebbo: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
