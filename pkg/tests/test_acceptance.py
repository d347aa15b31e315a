"""Acceptance suite: one criterion per test, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
complete (without ``-s`` they appear in captured output on failure).

The statistical criteria use thresholds with slack below the theoretical
guarantees, so a correct implementation passes with margin while a broken
stopping rule, biased sampler, or schedule-dependent engine fails.
"""

import math
import os
import time

import numpy as np
import pytest

from conftest import bernoulli_scenario
from ppsv.approximation import BitstreamConsumer, Bot, Estimate, make_params
from ppsv.engine import run as engine_run
from ppsv.kernels import warmup
from ppsv.model import DiscreteDeviation, PowerSlotPartition, Scenario, \
    SubstationProfile, User
from ppsv.oracle import exact_table
from ppsv.scenario_io import GenConfig, generate_scenario
from ppsv.verifier import verify
from test_oracle import enumerate_apd, total_variation


def _report(num: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {num}: {name}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    assert ok, line


def _screened_discrete_scenarios(count: int = 20):
    """Deterministic pool of discrete scenarios for oracle comparison.

    Screens out scenarios where a state spreads substantial mass across
    sub-epsilon slots: there the sound answer is bot for several slots at
    once and no estimator, however correct, can reconcile coverage sums
    with the oracle.  Kept scenarios have, per state, at most 0.10 total
    mass in slots below 0.115, so every non-bot entry carries a real
    guarantee and coverage sums stay comparable.
    """
    kept = []
    seed = 0
    while len(kept) < count:
        seed += 1
        assert seed < 500, "scenario screening ran away"
        sc = generate_scenario(GenConfig(
            seed=seed, n_users=4, n_time_slots=8, n_states=3,
            n_power_slots=6, family="discrete", rel_magnitude=0.15))
        table = exact_table(sc)
        ok = all(
            sum(p for (v, w), p in table["probability"].items()
                if v == state and p < 0.115) <= 0.10
            for state in sc.substation.states)
        if ok:
            kept.append((sc, table))
    return kept


_SCENARIO_POOL = None


def _pool():
    global _SCENARIO_POOL
    if _SCENARIO_POOL is None:
        _SCENARIO_POOL = _screened_discrete_scenarios()
    return _SCENARIO_POOL


def test_criterion_1_stopping_rule_coverage():
    """Bernoulli p in {0.2, 0.5, 0.9}, (eps, delta) = (0.1, 0.05), 200 runs
    per p: fraction of runs with relative error <= eps must be >= 0.93."""
    params = make_params(0.1, 0.05)
    fractions = {}
    for p in (0.2, 0.5, 0.9):
        hits = 0
        for r in range(200):
            rng = np.random.default_rng(900_000 + int(p * 10) * 10_000 + r)
            consumer = BitstreamConsumer(params)
            outcome = None
            while outcome is None:
                bits = (rng.random(4096) < p).astype(np.uint8)
                outcome = consumer.feed(bits)
            assert isinstance(outcome, Estimate), "p >= eps must not bot"
            if abs(outcome.mean - p) / p <= params.epsilon:
                hits += 1
        fractions[p] = hits / 200
    ok = all(f >= 0.93 for f in fractions.values())
    _report(1, "stopping-rule coverage on Bernoulli streams", ok,
            "within-eps fractions " + str(fractions))


def test_criterion_2_bot_soundness():
    """True probability 0 -> bot always; eps/50 -> bot >= 99/100;
    2 eps -> bot <= 5/100.  (eps, delta) = (0.1, 0.05)."""
    params = make_params(0.1, 0.05)

    def bot_count(p: float, runs: int, seed_base: int) -> int:
        sc = bernoulli_scenario(p)
        n = 0
        for r in range(runs):
            result = engine_run(sc, params, seed_base + r, tasks=(("v", 1),),
                                batch_size=8192)
            if isinstance(result.outcomes[0].outcome, Bot):
                n += 1
        return n

    zero_bots = bot_count(0.0, 20, 10_000)
    tiny_bots = bot_count(params.epsilon / 50, 100, 20_000)
    big_bots = bot_count(2 * params.epsilon, 100, 30_000)
    ok = zero_bots == 20 and tiny_bots >= 99 and big_bots <= 5
    _report(2, "bot verdict soundness", ok,
            f"p=0: {zero_bots}/20 bot, p=eps/50: {tiny_bots}/100 bot, "
            f"p=2eps: {big_bots}/100 bot")


def test_criterion_3_oracle_equivalence():
    """20 discrete scenarios x 50 seeds at (0.1, 0.05): >= 93% of pooled
    non-bot entries within relative eps of the exact value; per-state
    coverage within eps + 0.05 of the oracle sum on every run."""
    params = make_params(0.1, 0.05)
    pool = _pool()
    n_ok = 0
    n_entries = 0
    worst_gap = 0.0
    gap_ok = True
    for sc, table in pool:
        for run_seed in range(1000, 1050):
            report = verify(sc, params, seed=run_seed, batch_size=8192)
            det = report.deterministic
            for state in sc.substation.states:
                gap = abs(det["per_state"][state]["coverage"]
                          - table["coverage"][state])
                worst_gap = max(worst_gap, gap)
                if gap > params.epsilon + 0.05:
                    gap_ok = False
            for entry in det["entries"]:
                if entry["verdict"] != "estimate":
                    continue
                exact_p = table["probability"][(entry["state"], entry["slot_index"])]
                n_entries += 1
                if exact_p > 0 and abs(entry["mean"] - exact_p) <= params.epsilon * exact_p:
                    n_ok += 1
    fraction = n_ok / n_entries
    ok = fraction >= 0.93 and gap_ok
    _report(3, "estimates match the exact oracle", ok,
            f"{n_ok}/{n_entries} entries within eps ({fraction:.4f}), "
            f"worst coverage gap {worst_gap:.4f} "
            f"(allowed {params.epsilon + 0.05:.2f})")


def test_criterion_4_parallel_determinism():
    """workers in {1, 2, 8} x batch_size in {1, 7, 4096} on 5 scenarios:
    deterministic report blocks must be bytewise identical."""
    params = make_params(0.2, 0.1)
    all_ok = True
    checked = 0
    for gen_seed in (201, 202, 203, 204, 205):
        sc = generate_scenario(GenConfig(
            seed=gen_seed, n_users=3, n_time_slots=6, n_states=2,
            n_power_slots=4, family="mixed", rel_magnitude=0.2))
        blocks = set()
        for workers in (1, 2, 8):
            for batch_size in (1, 7, 4096):
                report = verify(sc, params, seed=777, workers=workers,
                                batch_size=batch_size)
                blocks.add(report.deterministic_json())
                checked += 1
        if len(blocks) != 1:
            all_ok = False
    _report(4, "deterministic blocks identical across schedules", all_ok,
            f"{checked} runs over 5 scenarios x 9 schedule configs")


def test_criterion_5_parallel_speedup():
    """>= 1e8 indicator samples: 4 workers must halve 1-worker wall time.
    Only meaningful on a machine with >= 4 cores."""
    cores = os.cpu_count() or 1
    if cores < 4:
        print(f"[SKIP] criterion 5: parallel speedup "
              f"(machine has {cores} core(s); criterion is defined for >= 4)",
              flush=True)
        pytest.skip(f"needs >= 4 cores, have {cores}")
    # ten impossible slots: every task runs to the cutoff, ~1.07e7 samples
    # each at (0.01, 0.05), 1.07e8 total
    d = DiscreteDeviation(support=(0.0,), probs=(1.0,))
    user = User.with_shared_model("u", (0.0,), d)
    breakpoints = tuple(float(x) for x in range(1, 13))
    sc = Scenario(users=(user,),
                  substation=SubstationProfile(assignment=("v",)),
                  slots=PowerSlotPartition(breakpoints=breakpoints))
    params = make_params(0.01, 0.05)
    tasks = tuple(("v", w) for w in range(1, 11))
    total = params.cutoff * len(tasks)
    assert total >= 10**8
    warmup()
    engine_run(sc, make_params(0.5, 0.5), 0, tasks=tasks)  # prime tables
    t0 = time.perf_counter()
    engine_run(sc, params, 12345, tasks=tasks, workers=1, batch_size=65536)
    t1 = time.perf_counter() - t0
    t0 = time.perf_counter()
    engine_run(sc, params, 12345, tasks=tasks, workers=4, batch_size=65536)
    t4 = time.perf_counter() - t0
    ratio = t4 / t1
    ok = ratio <= 0.5
    _report(5, "4-worker speedup on a 1e8-sample job", ok,
            f"1 worker {t1:.2f}s, 4 workers {t4:.2f}s, ratio {ratio:.3f}")


def test_criterion_6_oracle_self_check():
    """Convolution equals exhaustive enumeration (TV <= 1e-9) on every
    scenario with <= 4 users and <= 4 support points."""
    scenarios = [sc for sc, _ in _pool()]
    # crafted cases: colliding sums and mass exactly on breakpoints
    d = DiscreteDeviation(support=(0.0, 1.0), probs=(0.5, 0.5))
    scenarios.append(Scenario(
        users=(User.with_shared_model("a", (0.0,), d),
               User.with_shared_model("b", (0.0,), d)),
        substation=SubstationProfile(assignment=("v",)),
        slots=PowerSlotPartition(breakpoints=(-1.0, 1.0, 3.0))))
    d4 = DiscreteDeviation(support=(-1.5, 0.0, 0.5, 2.0),
                           probs=(0.125, 0.25, 0.5, 0.125))
    scenarios.append(Scenario(
        users=(User.with_shared_model("a", (1.0, 2.0), d4),
               User.with_shared_model("b", (0.5, 0.25), d4),
               User.with_shared_model("c", (2.0, 1.0), d4),
               User.with_shared_model("d", (0.0, 0.125), d4)),
        substation=SubstationProfile(assignment=("x", "y")),
        slots=PowerSlotPartition(breakpoints=(0.0, 4.0, 8.0, 12.0))))
    worst_tv = 0.0
    slots_checked = 0
    for sc in scenarios:
        assert len(sc.users) <= 4
        assert all(len(m.support) <= 4 for u in sc.users for m in u.deviation)
        from ppsv.oracle import apd_distribution
        for t in range(sc.n_time_slots):
            support, probs = apd_distribution(sc, t)
            tv = total_variation(support, probs, enumerate_apd(sc, t))
            worst_tv = max(worst_tv, tv)
            slots_checked += 1
    ok = worst_tv <= 1e-9
    _report(6, "convolution oracle equals exhaustive enumeration", ok,
            f"{slots_checked} time-slot distributions, worst TV {worst_tv:.3e}")


def test_criterion_7_constant_pinning():
    """Stopping constants match an independent high-precision evaluation to
    12 significant digits for three (eps, delta) pairs."""
    golden = {
        (0.1, 0.05): ("1166.84823488", 11669),
        (0.05, 0.01): ("6394.55094414", 127892),
        (0.5, 0.5): ("24.8980011637", 50),
    }
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    ok = True
    details = []
    for (eps, delta), (target_str, cutoff_want) in golden.items():
        params = make_params(eps, delta)
        target_golden = float(target_str)
        rel = abs(params.success_target - target_golden) / target_golden
        scale_mp = 4 * (mp.e - 2) * mp.log(2 / mp.mpf(delta)) / mp.mpf(eps) ** 2
        target_mp = 1 + (1 + mp.mpf(eps)) * scale_mp
        cutoff_mp = int(mp.ceil(target_mp / mp.mpf(eps)))
        rel_mp = abs(params.success_target - float(target_mp)) / float(target_mp)
        good = (rel <= 5e-12 and rel_mp <= 5e-12
                and params.cutoff == cutoff_want == cutoff_mp)
        ok = ok and good
        details.append(f"({eps},{delta}): rel {max(rel, rel_mp):.1e}, "
                       f"cutoff {params.cutoff}")
    _report(7, "stopping constants pinned to 12 significant digits", ok,
            "; ".join(details))
