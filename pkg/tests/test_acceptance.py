"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line with the measured
numbers before asserting, so ``pytest -v`` output doubles as the acceptance
report.  Run this file directly for just the summary lines.
"""

import itertools
import math
import pickle
import statistics
import time

import numpy as np
import pytest

from ridebbo.bbo import (BBOConfig, Population, bbo_match, compute_rates, evolve, init_population,
                         migrate, mutate, transplant)
from ridebbo.domain import Driver, Rider
from ridebbo.harness.cli import main as cli_main
from ridebbo.harness.instance import GenParams, arrival_counts, generate
from ridebbo.matchers import MATCHER_NAMES, Batch, Matching, greedy_match, match
from ridebbo.metrics import CostParams, MetricsSnapshot, cost
from ridebbo.roadnet import grid_network, load_network
from ridebbo.sim import SimConfig, run, report_cost

from conftest import random_batch
from oracles import brute_force_cost, floyd_warshall, micro_instance


@pytest.fixture
def say(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return emit


# 1 ------------------------------------------------------------------------

RIDER_MSP_SUM = 3_532_517
TABLE_CASES = [  # (d_ov, M_R, printed cost)
    (1_315_084, 0.479, 0.8932),
    (1_327_789, 0.482, 0.8938),
    (1_285_775, 0.481, 0.8834),
    (1_282_986, 0.476, 0.8871),
]


def test_c01_cost_formula_reproduction(say):
    rows, ok = [], True
    for k, (ov, mr, printed) in enumerate(TABLE_CASES, 1):
        total = 1_000_000
        s = MetricsSnapshot(round(mr * total), total, ov, RIDER_MSP_SUM)
        c = cost(CostParams(0.5), s)
        hand = 0.5 * ov / RIDER_MSP_SUM + 0.5 * (1 - mr)
        ok &= abs(c - hand) < 1e-12 and abs(2 * c - printed) <= 5e-4
        if k == 1:
            ok &= abs(c - 0.44664) <= 1e-4
        rows.append(f"case{k} {c:.5f} (x2 {2 * c:.4f} vs {printed})")
    say("C1 cost formula", ok, "; ".join(rows))
    assert ok


# 2 ------------------------------------------------------------------------

def _random_graph(rng, n):
    nodes = [(i, 39.9 + 0.02 * rng.random(), 116.4 + 0.02 * rng.random()) for i in range(n)]
    edges = [(i, int(rng.integers(i)), float(rng.integers(1, 1000))) for i in range(1, n)]
    for _ in range(int(rng.integers(0, 3 * n))):
        u, v = rng.choice(n, size=2, replace=False)
        edges.append((int(u), int(v), float(rng.integers(1, 1000))))
    return nodes, edges


def test_c02_shortest_path_oracle(say):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    mismatches = pairs = 0
    for _ in range(100):
        n = int(rng.integers(2, 51))
        nodes, edges = _random_graph(rng, n)
        net = load_network(nodes, edges)
        idx, dist = floyd_warshall(list(range(n)), edges)
        for u, v in itertools.product(range(n), repeat=2):
            pairs += 1
            mismatches += net.distance(u, v) != dist[idx[u]][idx[v]]
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    say("C2 shortest paths", ok, f"{mismatches} mismatches over {pairs} pairs on 100 graphs, {elapsed:.1f}s")
    assert ok


# 3 ------------------------------------------------------------------------

def test_c03_brute_force_optimality(say):
    cfg = BBOConfig(population_size=20, generation_limit=50, elite_count=1, mutation_probability=0.1)
    seeds = range(4)
    t0 = time.perf_counter()
    bbo_hits = greedy_hits = total = 0
    for inst in range(25):
        net, drivers, riders = micro_instance(inst)
        opt = brute_force_cost(riders, drivers, net, 0, 0.5)
        greedy_cost = greedy_match(riders, drivers, net, 0).cost
        for s in seeds:
            total += 1
            greedy_hits += greedy_cost <= opt + 1e-9
            bbo_hits += bbo_match(riders, drivers, net, 0, rng_seed=s, config=cfg).cost <= opt + 1e-9
    elapsed = time.perf_counter() - t0
    ok = bbo_hits >= 0.9 * total and greedy_hits < bbo_hits and elapsed < 120
    say("C3 brute-force optimality", ok,
        f"BBO optimal {bbo_hits}/{total}, greedy {greedy_hits}/{total}, {elapsed:.1f}s")
    assert ok


# 4 ------------------------------------------------------------------------

def test_c04_elitism_monotonicity(say):
    t0 = time.perf_counter()
    increases = runs = gens = 0
    for k in range(1000):
        net, drivers, riders = random_batch(k % 50, n_drivers=4, n_riders=8)
        cfg = BBOConfig(hybrid_ratio=(0.0, 0.85, 1.0)[k % 3], rollback=bool(k % 2))
        trace = evolve(Batch(riders, drivers, net, 0), cfg, seed=k).trace
        runs += 1
        gens += len(trace) - 1
        increases += sum(b > a for a, b in zip(trace, trace[1:]))
    elapsed = time.perf_counter() - t0
    ok = increases == 0 and elapsed < 300
    say("C4 elitism monotonicity", ok,
        f"{increases} increases over {gens} generations in {runs} runs, {elapsed:.1f}s")
    assert ok


# 5 ------------------------------------------------------------------------

def _stranding_trial(seed):
    """Target and source differ on a one-seat vehicle whose displaced rider
    cannot go anywhere else (the only other vehicle is full)."""
    rng = np.random.default_rng(seed)
    net = grid_network(6, 100.0, rng=rng, jitter=0.5)

    def od():
        return (int(x) for x in rng.choice(36, size=2, replace=False))

    big = 10**6
    a = Driver(1, *od(), 0, big, capacity=1)
    b = Driver(2, *od(), 0, big, capacity=2)
    riders = [Rider(10 + k, *od(), 0, big) for k in range(4)]
    batch = Batch(riders, [a, b], net, 0)
    r1, r2, r3, r4 = riders
    target, source = Matching(batch), Matching(batch)
    for state, first in ((target, r1), (source, r2)):
        for r, did in ((r3, 2), (r4, 2), (first, 1)):
            state.apply(r, did, state.try_insert(r, did))
    return target, source


def _frozen(m: Matching):
    return pickle.dumps((m.changed, m.overhead, m.assigned, m.cost))


def test_c05_rollback_atomicity(say):
    equal = stranded = 0
    for seed in range(100):
        target, source = _stranding_trial(seed)
        before = _frozen(target)
        loose = target.copy()
        transplant(loose, source, 1, rollback=False)
        stranded += None in loose.assigned.values()
        undone = transplant(target, source, 1, rollback=True) is False
        equal += undone and _frozen(target) == before
    ok = equal == 100 and stranded == 100
    say("C5 rollback atomicity", ok, f"{equal}/100 byte-equal after rollback ({stranded}/100 strand without it)")
    assert ok


# 6 ------------------------------------------------------------------------

def test_c06_constraint_safety(say):
    t0 = time.perf_counter()
    ops = violations = 0
    rng = np.random.default_rng(6)
    cfg = BBOConfig(population_size=6, mutation_probability=1.0)
    k = 0
    while ops < 100_000:
        net, drivers, riders = random_batch(1000 + k, n_drivers=5, n_riders=10)
        k += 1
        batch = Batch(riders, drivers, net, 0)
        pop = compute_rates(init_population(batch, cfg, seed=k))
        for _ in range(150):
            i = int(rng.integers(len(pop)))
            cand = pop.candidates[i]
            op = int(rng.integers(3))
            if op == 0:
                r = batch.pool[int(rng.integers(len(batch.pool)))]
                cand.state.unassign(r.id)
                cand.state.assign_random(r, rng)
            elif op == 1:
                snapshot = compute_rates(Population([c.copy() for c in pop.candidates]))
                migrate(i, cand, snapshot, cfg, rng)
            else:
                mutate(cand, cfg, rng)
            ops += 1
            violations += len(cand.state.violations())
            violations += not math.isclose(cand.state.cost, cand.state.recompute_cost(), abs_tol=1e-9)
    # commits: whole simulations, every executed stop checked against its window
    late_drops = defects = commits = 0
    for seed in range(12):
        net = grid_network(8, 200.0, rng=np.random.default_rng(seed), jitter=0.3)
        inst = generate(net, GenParams(12, 40, horizon_seconds=600, seed=seed))
        late = {r.id: r.late for r in inst.riders()}
        rep = run(inst, SimConfig(horizon_seconds=600, matcher=MATCHER_NAMES[seed % 4], seed=seed,
                                  check_plans=True), net)
        defects += len(rep.defects)
        for line in rep.events:
            t, kind, rider, _ = (f.split("=")[1] for f in line.split())
            commits += kind == "match"
            late_drops += kind == "dropoff" and float(t) > late[int(rider)] + 1e-6
    ops += commits
    elapsed = time.perf_counter() - t0
    ok = ops >= 100_000 and violations == 0 and late_drops == 0 and defects == 0
    say("C6 constraint safety", ok,
        f"{ops} operations ({commits} commits), {violations} violations, "
        f"{late_drops} late dropoffs, {defects} defects, {elapsed:.1f}s")
    assert ok


# 7 ------------------------------------------------------------------------

def test_c07_desk_scale_ordering(say):
    t0 = time.perf_counter()
    costs = {m: [] for m in ("greedy", "sa", "bbo")}
    rates = {m: [] for m in costs}
    for i in range(20):
        net = grid_network(12, 200.0, rng=np.random.default_rng(1000 + i), jitter=0.3)
        inst = generate(net, GenParams(20, 60, horizon_seconds=600, profile="batched", seed=i))
        for m in costs:
            rep = run(inst, SimConfig(horizon_seconds=600, matcher=m, seed=i), net)
            costs[m].append(report_cost(rep))
            rates[m].append(rep.cumulative.matched_count / rep.cumulative.total_riders)
    med = {m: statistics.median(v) for m, v in costs.items()}
    mr = {m: statistics.median(v) for m, v in rates.items()}
    elapsed = time.perf_counter() - t0
    ok = (med["bbo"] <= med["greedy"] and med["bbo"] <= med["sa"]
          and mr["bbo"] >= mr["greedy"] - 0.02 and elapsed < 600)
    say("C7 desk-scale ordering", ok,
        "median cost " + ", ".join(f"{m} {v:.4f}" for m, v in med.items())
        + "; median M_R " + ", ".join(f"{m} {v:.4f}" for m, v in mr.items()) + f"; {elapsed:.0f}s")
    assert ok


# 8 ------------------------------------------------------------------------

def test_c08_batched_profile(say):
    p = GenParams(200, 668, horizon_seconds=1800, profile="batched", seed=0)
    rc, dc = arrival_counts(p)
    counts_ok = (rc == [11] * 60 + [8] and dc == [22] + [3] * 59 + [1])
    net = grid_network(30, 200.0, rng=np.random.default_rng(7), jitter=0.3)
    inst = generate(net, p)
    t0 = time.perf_counter()
    rep = run(inst, SimConfig(matcher="bbo", matcher_config=BBOConfig(population_size=20,
                                                                     generation_limit=10), seed=0), net)
    elapsed = time.perf_counter() - t0
    worst = max(rep.wall_seconds)
    ok = counts_ok and len(rep.batches) == 60 and worst < 30 and not rep.defects
    say("C8 batched arrival profile", ok,
        f"{len(rep.batches)} batches, arrival counts {'ok' if counts_ok else 'WRONG'}, "
        f"slowest batch {worst:.2f}s, M_R {rep.cumulative.matched_count}/668, total {elapsed:.0f}s")
    assert ok


# 9 ------------------------------------------------------------------------

def test_c09_determinism(say, tmp_path):
    common = ["--grid", "10", "--horizon-seconds", "300"]
    cli_main(["generate", *common, "--drivers", "12", "--riders", "36", "--out", str(tmp_path / "i.txt")])
    same = checks = 0
    for m in MATCHER_NAMES:
        for seed in (0, 1, 2):
            blobs = []
            for k in range(2):
                out = tmp_path / f"{m}-{seed}-{k}"
                cli_main(["run", *common, "--instance", str(tmp_path / "i.txt"), "--matcher", m,
                          "--seed", str(seed), "--out", str(out)])
                blobs.append(b"".join((out / f).read_bytes()
                                      for f in ("report.json", "batches.csv", "drivers.csv", "events.log")))
            checks += 1
            same += blobs[0] == blobs[1]
    ok = same == checks == 12
    say("C9 determinism", ok, f"{same}/{checks} repeated runs byte-identical")
    assert ok


# 10 -----------------------------------------------------------------------

def test_c10_trivial_boundaries(say):
    results = {}
    results["alpha=0"] = cost(CostParams(0.0), MetricsSnapshot(3, 12, 5e5, 1e3)) == 1 - 3 / 12
    results["alpha=1 zero overhead"] = cost(CostParams(1.0), MetricsSnapshot(3, 12, 0.0, 1e3)) == 0.0
    net = grid_network(5, 100.0)
    d = Driver(1, 0, 24, 0, 10**6)
    results["empty pool"] = all(match(m, [], [d], net, 0).assignments == () for m in MATCHER_NAMES)
    net2, drivers, riders = random_batch(0)
    batch = Batch(riders, drivers, net2, 0)
    tags0 = {c.state.tag for c in init_population(batch, BBOConfig(hybrid_ratio=0.0)).candidates}
    tags1 = {c.state.tag for c in init_population(batch, BBOConfig(hybrid_ratio=1.0)).candidates}
    results["H_ratio endpoints"] = tags0 == {"greedy"} and tags1 == {"random"}
    ok = all(results.values())
    say("C10 trivial boundaries", ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in results.items()))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
