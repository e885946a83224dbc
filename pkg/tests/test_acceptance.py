"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines
inline; without ``-s`` they are still written to the terminal through
``capsys.disabled()``.
"""

import itertools
import math
import random
import time

import numpy as np
import pytest

from oracles import config_oracle, exhaustive_placements, quorum_time_oracle, safety_oracle
from weighted_hotstuff.chained import predict_chained_run
from weighted_hotstuff.cli import main as cli_main
from weighted_hotstuff.errors import QuorumUnreachable
from weighted_hotstuff.experiments import (
    STATUS_OK,
    ScenarioSpec,
    run_comparison_campaign,
    run_scenario,
    run_sweep,
)
from weighted_hotstuff.hotstuff import LeaderSchedule, predict_run
from weighted_hotstuff.netmodel import generate_random_topology, load_fixture, make_rng
from weighted_hotstuff.optimizer import (
    AnnealParams,
    CandidateState,
    anneal,
    make_energy_fn,
    perturb_leader_schedule,
)
from weighted_hotstuff.quorum import (
    check_continuous_safety,
    make_config,
    make_discrete_assignment,
    select_faulty,
    time_to_form_quorum,
)

GRID = [(f, d) for f in range(1, 5) for d in range(0, 4)]


@pytest.fixture
def verdict(capsys):
    def report(cid, ok, detail, elapsed, limit=None):
        timing = f"{elapsed:.1f}s" + (f" (limit {limit}s)" if limit else "")
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail} [{timing}]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        if limit is not None:
            assert elapsed < limit, f"criterion {cid} exceeded its {limit}s budget"
    return report


def test_c1_config_formulas(verdict):
    t0 = time.perf_counter()
    bad = []
    for f, d in GRID:
        c = make_config(f, d)
        n, q_v, v_max, v_min = config_oracle(f, d)
        if (c.n, c.q_v, c.v_max, c.v_min) != (n, q_v, float(v_max), float(v_min)):
            bad.append((f, d))
    c = make_config(1, 1)
    anchor = (c.n, c.q_v, c.v_max) == (5, 5, 2.0)
    verdict(1, not bad and anchor,
            f"{len(GRID) - len(bad)}/{len(GRID)} (f, delta) pairs exact; (1,1) -> n=5 q_v=5 v_max=2: {anchor}",
            time.perf_counter() - t0, 1)


def test_c2_quorum_oracle(verdict):
    t0 = time.perf_counter()
    rng = random.Random(7)
    mismatches = 0
    for _ in range(1000):
        n = rng.randint(1, 8)
        lat = [math.inf if rng.random() < 0.15 else rng.choice([rng.uniform(0, 400), float(rng.randint(0, 4))])
               for _ in range(n)]
        w = [rng.choice([rng.uniform(0, 2), 1.0, 2.0]) for _ in range(n)]
        threshold = rng.uniform(0.05, sum(w))
        expected = quorum_time_oracle(lat, w, threshold)
        try:
            got = time_to_form_quorum(lat, w, threshold)
        except QuorumUnreachable:
            got = None
        mismatches += got != expected
    verdict(2, mismatches == 0, f"{1000 - mismatches}/1000 instances equal the subset oracle",
            time.perf_counter() - t0, 10)


def test_c3_availability_tightness(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    failures = []
    for f, d in GRID:
        c = make_config(f, d)
        for positions in itertools.combinations(range(c.n), 2 * f):
            if len(failures) > 5:
                break
            a = make_discrete_assignment(c, positions)
            if a.total - f * c.v_max != c.q_v:
                failures.append(("tightness", f, d, positions))
            faulty = set(select_faulty(a, f))
            lat = rng.uniform(0, 400, c.n)
            lat[list(faulty)] = math.inf
            expected = max(lat[i] for i in range(c.n) if i not in faulty)
            if time_to_form_quorum(lat, a) != expected:
                failures.append(("quorum", f, d, positions))
    verdict(3, not failures,
            "total - f*v_max == q_v and faulty-case quorum == all non-faulty replicas for every placement"
            if not failures else f"violations: {failures[:5]}",
            time.perf_counter() - t0)


def test_c4_safety_oracle(verdict):
    t0 = time.perf_counter()
    disagreements = 0
    for n in (4, 5, 6):
        rng = np.random.default_rng(40 + n)
        for k in range(200):
            if k % 2:
                w = rng.uniform(0, 2, n)
            else:
                w = np.ones(n)
                w[rng.choice(n, 2, replace=False)] = 2.0
                w = np.clip(w + rng.uniform(-0.3, 0.3, n), 0, 2)
            w = [float(x) for x in w]
            r = check_continuous_safety(w, 1)
            valid, threshold = safety_oracle(w, 1)
            disagreements += r.valid != valid or not math.isclose(r.threshold, threshold, abs_tol=1e-12)
    ex1 = check_continuous_safety([2, 2, 1, 1, 1], 1)
    ex2 = check_continuous_safety([2, 2, 2, 0, 0], 1)
    ex3 = check_continuous_safety([1, 1, 1, 1, 1], 1)
    examples = (ex1.valid and ex1.threshold == 5 and not ex2.valid and ex2.threshold == 4
                and ex3.valid and ex3.threshold == 4)
    verdict(4, disagreements == 0 and examples,
            f"{600 - disagreements}/600 vectors agree with the minimal-quorum oracle; worked examples: {examples}",
            time.perf_counter() - t0, 30)


def test_c5_static_schedule_invariance(verdict):
    t0 = time.perf_counter()
    m = load_fixture()
    n = m.n
    views = 3 * n
    rng = np.random.default_rng(5)
    worst = 0.0
    nulls = []
    for positions in itertools.combinations(range(n), 2):
        w = make_discrete_assignment(make_config(1, 1), positions)
        rr = predict_run(m, w, LeaderSchedule.round_robin(n, views), views, static=True).total_latency
        for _ in range(10):
            perm = LeaderSchedule(rng.permutation(LeaderSchedule.round_robin(n, views).leaders))
            worst = max(worst, abs(predict_run(m, w, perm, views, static=True).total_latency - rr))
        if positions not in ((0, 1), (0, 3), (2, 3)):
            continue
        energy = make_energy_fn(m, views, 0, static=True)
        for schedule in (LeaderSchedule.round_robin(n), LeaderSchedule.round_robin(n, views)):
            start = CandidateState(w, schedule)
            best = anneal(start, energy, perturb_leader_schedule, AnnealParams(seed=sum(positions)))
            nulls.append(abs(energy(start) - best.energy))
    ok = worst <= 1e-9 and max(nulls) <= 1e-9
    verdict(5, ok, f"max |permuted - round-robin| = {worst:.2e} ms; max annealing gain = {max(nulls):.2e} ms",
            time.perf_counter() - t0, 5)


def test_c6_annealer_exhaustive(verdict):
    t0 = time.perf_counter()
    m = load_fixture()
    views = 5
    table = exhaustive_placements(m.entries.tolist(), 1, 1, views)
    optimum = min(table.values())
    hits = 0
    for seed in range(100):
        o = run_scenario(ScenarioSpec(variant="best-assigned", views=views, static=True, seed=seed),
                         matrix=m)
        hits += abs(o.total_latency - optimum) <= 1e-9
    verdict(6, hits >= 95, f"global minimum {optimum:.2f} ms found in {hits}/100 seeded runs (need >= 95)",
            time.perf_counter() - t0, 60)


def _sweep_means(chained, variants):
    m = load_fixture()
    means = {}
    for v in variants:
        outcomes = run_sweep(ScenarioSpec(variant=v, chained=chained, views=(5, 20), seed=0), m)
        means[v] = float(np.mean([o.average_per_view for o in outcomes]))
    return means


def test_c7_trend_reproduction(verdict):
    t0 = time.perf_counter()
    order = ["combined", "best-assigned", "optimal-leader", "weighted", "basic-baseline"]
    means = _sweep_means(False, order)
    base = means["basic-baseline"]
    gain = {v: (base - means[v]) / base * 100 for v in order}
    bands = gain["weighted"] >= 3 and gain["best-assigned"] >= 12 and gain["combined"] >= 15
    ordered = all(means[a] <= means[b] for a, b in zip(order, order[1:]))
    verdict(7, bands and ordered,
            "improvement vs baseline: " + ", ".join(f"{v} {gain[v]:.2f}%" for v in order[:-1])
            + f"; ordering holds: {ordered}",
            time.perf_counter() - t0, 300)


def test_c8_chained_model(verdict):
    t0 = time.perf_counter()
    m = load_fixture()
    w = make_discrete_assignment(make_config(1, 1), {0, 3})
    rr = LeaderSchedule.round_robin(5)
    r = predict_chained_run(m, w, rr, 20, seed=0)
    ramp = [len(t.stage_times) for t in r.traces] == [min(v + 1, 4) for v in range(20)]
    dominated = True
    for seed in range(20):
        topo = generate_random_topology(5, 400.0, make_rng(seed))
        c = predict_chained_run(topo, w, rr, 20, seed=seed)
        b = predict_run(topo, w, rr, 20, seed=seed)
        dominated &= all(x.view_latency <= y.total for x, y in zip(c.traces, b.traces))
    means = _sweep_means(True, ["basic-baseline", "weighted"])
    gain = (means["basic-baseline"] - means["weighted"]) / means["basic-baseline"] * 100
    verdict(8, ramp and dominated and gain >= 3,
            f"warm-up ramp exact: {ramp}; per-view max <= sum on 20 seeds: {dominated}; "
            f"chained weighted improves {gain:.2f}% (need >= 3%)",
            time.perf_counter() - t0, 120)


def test_c9_continuous_campaign(verdict):
    t0 = time.perf_counter()
    result = run_comparison_campaign(ScenarioSpec(views=10, max_latency=400.0), 200, seed=0)
    frac = result.continuous_better_or_equal
    verdict(9, len(result.rows) == 200 and frac >= 0.70,
            f"continuous better {result.fraction('continuous'):.3f}, tie {result.fraction('tie'):.3f}, "
            f"better-or-equal {frac:.3f} over {len(result.rows)} topologies (need >= 0.70)",
            time.perf_counter() - t0, 900)


def test_c10_fault_semantics(verdict, capsys):
    t0 = time.perf_counter()
    code = cli_main(["simulate", "--variant", "basic-baseline", "--faulty", "--views", "10"])
    capsys.readouterr()
    finite = []
    for chained in (False, True):
        for variant in ("weighted", "best-assigned", "optimal-leader", "combined"):
            o = run_scenario(ScenarioSpec(variant=variant, chained=chained, faulty=True, views=10))
            finite.append(o.status == STATUS_OK and math.isfinite(o.total_latency))
    verdict(10, code == 3 and all(finite),
            f"baseline faulty exit code {code} (need 3); weighted discrete variants finite: "
            f"{sum(finite)}/{len(finite)}",
            time.perf_counter() - t0)
