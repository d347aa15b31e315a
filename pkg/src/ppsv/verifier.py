"""End-to-end verification: per-(state, slot) decisions plus reporting.

:func:`verify` validates the scenario, runs the sampling engine over every
(substation state, power slot) pair, and wraps the decisions in a
:class:`VerificationReport`.  The report is split into two blocks:

* ``deterministic`` is a pure function of (scenario, approximation
  parameters, master seed).  Byte-for-byte identical across runs, worker
  counts, batch sizes, lookahead settings, and kernel backends.
* ``runtime`` carries everything schedule-dependent: wall times, worker
  count, discarded speculative batches, the active backend.

Per-entry guarantees hold marginally at the requested (epsilon, delta);
``family_wise=True`` instead splits delta evenly across all entries so the
whole table is simultaneously correct with confidence 1 - delta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import engine
from .approximation import Bot, EdParams, Estimate, make_params
from .kernels import active_backend, compile_tables, indicator_batch
from .model import Scenario, Violation, validate
from .rng import derive_key
from .scenario_io import scenario_digest

DEFAULT_BATCH_SIZE = engine.DEFAULT_BATCH_SIZE


class InvalidScenarioError(ValueError):
    """Scenario failed structural validation; carries the violation list."""

    def __init__(self, violations: list[Violation]):
        lines = "; ".join(f"{v.path}: {v.message}" for v in violations[:8])
        extra = "" if len(violations) <= 8 else f" (+{len(violations) - 8} more)"
        super().__init__(f"invalid scenario: {lines}{extra}")
        self.violations = tuple(violations)


class IndicatorStream:
    """Random-access view of one (state, slot) indicator sample stream.

    Element i is a pure function of (master seed, state, slot, i): the same
    index always yields the same bit, any batch split concatenates to the
    same stream, and iteration is an endless batched walk from index 0.
    """

    def __init__(self, scenario: Scenario, state: str, slot: int, seed: int):
        self._tables = compile_tables(scenario)
        if state not in self._tables.state_index:
            raise ValueError(f"unknown substation state {state!r}")
        if not 0 <= slot < self._tables.n_power_slots:
            raise IndexError(f"slot index {slot} out of range")
        self.state = state
        self.slot = slot
        self.seed = seed
        self.key = derive_key(seed, self._tables.state_index[state], slot)

    def batch(self, start: int, count: int) -> np.ndarray:
        if start < 0:
            raise ValueError("start must be >= 0")
        return indicator_batch(self._tables, self.key, start, count,
                               self.state, self.slot)

    def element(self, i: int) -> int:
        return int(self.batch(i, 1)[0])

    def __iter__(self):
        start = 0
        while True:
            for bit in self.batch(start, DEFAULT_BATCH_SIZE):
                yield int(bit)
            start += DEFAULT_BATCH_SIZE


@dataclass(frozen=True)
class VerificationReport:
    """Verification outcome table plus run metadata.

    ``deterministic``/``runtime`` are plain JSON-ready dicts; see the module
    docstring for the split.  ``outcomes`` keeps the decision objects keyed
    by (state, slot) for programmatic use.
    """

    deterministic: dict
    runtime: dict
    outcomes: dict[tuple[str, int], Estimate | Bot]

    def to_json_dict(self) -> dict:
        return {"schema_version": 1, "kind": "verification",
                "deterministic": self.deterministic, "runtime": self.runtime}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def deterministic_json(self) -> str:
        """Canonical bytes of the schedule-independent block."""
        return json.dumps(self.deterministic, sort_keys=True,
                          separators=(",", ":"))

    def to_csv(self) -> str:
        lines = ["state,slot_lo_kw,slot_hi_kw,verdict,mean,samples"]
        for e in self.deterministic["entries"]:
            mean = repr(e["mean"]) if e["verdict"] == "estimate" else ""
            lines.append(f"{e['state']},{e['slot_lo_kw']!r},{e['slot_hi_kw']!r},"
                         f"{e['verdict']},{mean},{e['samples']}")
        return "\n".join(lines) + "\n"


def verify(scenario: Scenario, params: EdParams, seed: int = 0, *,
           workers: int = 1, batch_size: int = DEFAULT_BATCH_SIZE,
           lookahead: int | None = None,
           family_wise: bool = False) -> VerificationReport:
    """Decide every (state, power slot) pair of the scenario.

    Each entry is either an estimate within relative error ``epsilon`` of
    the true landing probability, or ``bot`` certifying that probability is
    below ``epsilon``; either claim holds with probability ``>= 1 - delta``
    (per entry, or jointly when ``family_wise``).
    """
    violations = validate(scenario)
    if violations:
        raise InvalidScenarioError(violations)
    n_entries = len(scenario.substation.states) * scenario.slots.n_slots
    if family_wise and n_entries > 0:
        entry_params = make_params(params.epsilon, params.delta / n_entries)
    else:
        entry_params = params
    run = engine.run(scenario, entry_params, seed, workers=workers,
                     batch_size=batch_size, lookahead=lookahead)

    entries = []
    wall_nanos = []
    outcomes: dict[tuple[str, int], Estimate | Bot] = {}
    per_state: dict[str, dict] = {
        v: {"coverage": 0.0, "bot_slots": 0} for v in scenario.substation.states}
    for to in run.outcomes:
        lo, hi, _closed = scenario.slots.bounds(to.slot)
        entry = {"state": to.state, "slot_index": to.slot,
                 "slot_lo_kw": lo, "slot_hi_kw": hi}
        if isinstance(to.outcome, Estimate):
            entry["verdict"] = "estimate"
            entry["mean"] = to.outcome.mean
            entry["samples"] = to.outcome.samples_used
            per_state[to.state]["coverage"] += to.outcome.mean
        else:
            entry["verdict"] = "bot"
            entry["samples"] = to.outcome.samples_used
            per_state[to.state]["bot_slots"] += 1
        entries.append(entry)
        wall_nanos.append(to.wall_nanos)
        outcomes[(to.state, to.slot)] = to.outcome
    for v, agg in per_state.items():
        # advisory: if even crediting every bot slot its maximal hidden mass
        # (< epsilon each) the total stays short of 1 - epsilon, some demand
        # mass likely falls outside the power-slot range
        agg["low_coverage"] = (
            agg["coverage"] + agg["bot_slots"] * entry_params.epsilon
            < 1.0 - entry_params.epsilon)

    deterministic = {
        "scenario_digest": scenario_digest(scenario),
        "deviation_composition": "additive",
        "epsilon": params.epsilon,
        "delta": params.delta,
        "family_wise": family_wise,
        "entry_epsilon": entry_params.epsilon,
        "entry_delta": entry_params.delta,
        "success_target": entry_params.success_target,
        "cutoff": entry_params.cutoff,
        "master_seed": seed,
        "entries": entries,
        "per_state": per_state,
    }
    runtime = {
        "workers": run.workers,
        "batch_size": run.batch_size,
        "lookahead": run.lookahead,
        "backend": active_backend(),
        "wall_seconds": run.wall_nanos / 1e9,
        "generated_batches": run.generated_batches,
        "discarded_batches": run.discarded_batches,
        "entry_wall_nanos": wall_nanos,
    }
    return VerificationReport(deterministic=deterministic, runtime=runtime,
                              outcomes=outcomes)


def oracle_report(scenario: Scenario) -> dict:
    """Exact-probability report in the same envelope as verification."""
    from .oracle import exact_table

    violations = validate(scenario)
    if violations:
        raise InvalidScenarioError(violations)
    table = exact_table(scenario)
    entries = []
    for v in scenario.substation.states:
        for w in range(scenario.slots.n_slots):
            lo, hi, _ = scenario.slots.bounds(w)
            entries.append({"state": v, "slot_index": w,
                            "slot_lo_kw": lo, "slot_hi_kw": hi,
                            "verdict": "exact", "mean": table["probability"][(v, w)]})
    deterministic = {
        "scenario_digest": scenario_digest(scenario),
        "deviation_composition": "additive",
        "entries": entries,
        "per_state": {
            v: {"coverage": table["coverage"][v],
                "out_of_range_mass": table["out_of_range"][v]}
            for v in scenario.substation.states},
    }
    return {"schema_version": 1, "kind": "exact", "deterministic": deterministic}


def oracle_csv(report: dict) -> str:
    lines = ["state,slot_lo_kw,slot_hi_kw,verdict,mean,samples"]
    for e in report["deterministic"]["entries"]:
        lines.append(f"{e['state']},{e['slot_lo_kw']!r},{e['slot_hi_kw']!r},"
                     f"exact,{e['mean']!r},")
    return "\n".join(lines) + "\n"
