"""Deterministic parallel execution of verification tasks.

A task is one (substation state, power slot) pair.  Each task owns a
counter-based sample stream keyed by (master seed, state index, slot index),
so the bit at position i is a pure function of the key and i.  Worker
threads generate fixed-size batches speculatively and out of order; a
per-task reassembly buffer feeds them to the stopping-rule consumer
strictly in batch order.  The decision it reaches is therefore identical
for any worker count, lookahead, or thread timing; only throughput and the
amount of discarded speculative work vary.

The generation hot path releases the GIL (numba ``nogil``), so threads can
scale on multi-core machines; the numpy fallback also drops the GIL inside
large array ops.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from .approximation import BitstreamConsumer, Bot, EdParams, Estimate
from .kernels import compile_tables, indicator_batch
from .model import Scenario
from .rng import derive_key

DEFAULT_BATCH_SIZE = 4096


class RunError(RuntimeError):
    """A verification task failed; no partial results are produced."""

    def __init__(self, state: str, slot: int, cause: BaseException):
        super().__init__(
            f"sampling failed for state {state!r}, power slot {slot}: {cause!r}")
        self.state = state
        self.slot = slot
        self.cause = cause


@dataclass(frozen=True)
class TaskOutcome:
    state: str
    slot: int
    outcome: Estimate | Bot
    wall_nanos: int          # first batch issued -> decision reached
    batches_generated: int
    batches_consumed: int


@dataclass(frozen=True)
class EngineRun:
    outcomes: tuple[TaskOutcome, ...]
    workers: int
    batch_size: int
    lookahead: int
    generated_batches: int
    discarded_batches: int
    wall_nanos: int


class _Task:
    __slots__ = ("state", "slot", "key", "consumer", "buffer", "next_issue",
                 "next_consume", "generated", "consumed", "done", "max_batches",
                 "start_ns", "end_ns")

    def __init__(self, state: str, slot: int, key: int, params: EdParams,
                 batch_size: int):
        self.state = state
        self.slot = slot
        self.key = key
        self.consumer = BitstreamConsumer(params)
        self.buffer: dict[int, object] = {}
        self.next_issue = 0
        self.next_consume = 0
        self.generated = 0
        self.consumed = 0
        self.done = False
        self.max_batches = -(-params.cutoff // batch_size)
        self.start_ns = -1
        self.end_ns = -1


def default_tasks(scenario: Scenario) -> tuple[tuple[str, int], ...]:
    """All (state, slot) pairs, ordered by state label then slot index."""
    return tuple((v, w)
                 for v in scenario.substation.states
                 for w in range(scenario.slots.n_slots))


def run(scenario: Scenario, params: EdParams, seed: int,
        tasks: tuple[tuple[str, int], ...] | None = None, *,
        workers: int = 1, batch_size: int = DEFAULT_BATCH_SIZE,
        lookahead: int | None = None) -> EngineRun:
    """Decide every task; deterministic in (scenario, params, seed, tasks).

    ``workers`` threads generate batches; ``lookahead`` caps how many batches
    a task may have issued beyond its last consumed one (default
    ``2 * workers``).  Raises :class:`RunError` on the first worker failure.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if lookahead is None:
        lookahead = 2 * workers
    if lookahead < 1:
        raise ValueError("lookahead must be >= 1")
    tables = compile_tables(scenario)
    if tasks is None:
        tasks = default_tasks(scenario)
    task_list: list[_Task] = []
    keys_seen: dict[int, tuple[str, int]] = {}
    for state, slot in tasks:
        if state not in tables.state_index:
            raise ValueError(f"unknown substation state {state!r}")
        if not 0 <= slot < tables.n_power_slots:
            raise IndexError(f"slot index {slot} out of range")
        key = derive_key(seed, tables.state_index[state], slot)
        if key in keys_seen:
            raise RunError(state, slot, ValueError(
                f"sample stream key collision with task {keys_seen[key]}"))
        keys_seen[key] = (state, slot)
        task_list.append(_Task(state, slot, key, params, batch_size))

    cond = threading.Condition()
    n_remaining = len(task_list)
    failure: list[tuple[_Task, BaseException]] = []
    cursor = 0  # rotating pick start, spreads workers across tasks

    def _drain(ts: _Task) -> None:
        nonlocal n_remaining
        while not ts.done and ts.next_consume in ts.buffer:
            bits = ts.buffer.pop(ts.next_consume)
            ts.next_consume += 1
            ts.consumed += 1
            outcome = ts.consumer.feed(bits)
            if outcome is not None:
                ts.done = True
                ts.end_ns = time.perf_counter_ns()
                ts.buffer.clear()
                n_remaining -= 1

    def _pick() -> _Task | None:
        nonlocal cursor
        n = len(task_list)
        for probe in range(n):
            ts = task_list[(cursor + probe) % n]
            if (not ts.done and ts.next_issue < ts.max_batches
                    and ts.next_issue - ts.next_consume < lookahead):
                cursor = (cursor + probe + 1) % n
                return ts
        return None

    def _worker() -> None:
        while True:
            with cond:
                while True:
                    if failure or n_remaining == 0:
                        return
                    ts = _pick()
                    if ts is not None:
                        break
                    cond.wait()
                bidx = ts.next_issue
                ts.next_issue += 1
                if ts.start_ns < 0:
                    ts.start_ns = time.perf_counter_ns()
            try:
                bits = indicator_batch(tables, ts.key, bidx * batch_size,
                                       batch_size, ts.state, ts.slot)
            except BaseException as exc:
                with cond:
                    failure.append((ts, exc))
                    cond.notify_all()
                return
            with cond:
                ts.generated += 1
                if not ts.done:
                    ts.buffer[bidx] = bits
                    _drain(ts)
                cond.notify_all()

    t0 = time.perf_counter_ns()
    if len(task_list) == 0:
        return EngineRun((), workers, batch_size, lookahead, 0, 0,
                         time.perf_counter_ns() - t0)
    threads = [threading.Thread(target=_worker, name=f"ppsv-worker-{i}")
               for i in range(workers)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    wall = time.perf_counter_ns() - t0
    if failure:
        ts, exc = failure[0]
        raise RunError(ts.state, ts.slot, exc) from exc
    outcomes = []
    generated = 0
    consumed = 0
    for ts in task_list:
        if not ts.done:
            raise RunError(ts.state, ts.slot,
                           RuntimeError("task ended without a decision"))
        outcomes.append(TaskOutcome(
            state=ts.state, slot=ts.slot,
            outcome=ts.consumer.outcome,
            wall_nanos=max(0, ts.end_ns - ts.start_ns),
            batches_generated=ts.generated,
            batches_consumed=ts.consumed,
        ))
        generated += ts.generated
        consumed += ts.consumed
    return EngineRun(tuple(outcomes), workers, batch_size, lookahead,
                     generated, generated - consumed, wall)
