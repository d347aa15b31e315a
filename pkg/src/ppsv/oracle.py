"""Exact slot probabilities for scenarios with purely discrete deviations.

When every user's deviation model at a time slot is discrete, the aggregated
demand at that slot has a finite distribution: the convolution of the users'
shifted deviation supports.  Averaging slot masses over a state's time-slot
class gives the exact per-slot landing probability, which the statistical
verifier is checked against in tests and exposed via the command line.

Continuous deviation models (uniform, truncated Gaussian) have no finite
support, so the oracle refuses them with :class:`OracleInapplicableError`.
A resource guard bounds the convolution support size; scenarios that exceed
it raise :class:`OracleResourceError` (a subclass, same exit path).
"""

from __future__ import annotations

import numpy as np

from .model import DiscreteDeviation, Scenario

MAX_SUPPORT_POINTS = 1_000_000

# Distinct float sums of identical addends differ only by rounding; anything
# closer than this (scaled) is treated as one support point.
MERGE_TOL = 1e-12


class OracleInapplicableError(Exception):
    """The scenario is outside the exact oracle's domain."""


class OracleResourceError(OracleInapplicableError):
    """The convolution support grew past the configured bound."""


def _merge_close(support: np.ndarray, probs: np.ndarray, tol: float):
    order = np.argsort(support, kind="stable")
    s = support[order]
    p = probs[order]
    starts = np.empty(len(s), dtype=bool)
    starts[0] = True
    starts[1:] = np.diff(s) > tol
    group = np.cumsum(starts) - 1
    merged_s = s[starts]
    merged_p = np.zeros(len(merged_s), dtype=np.float64)
    np.add.at(merged_p, group, p)
    return merged_s, merged_p


def apd_distribution(scenario: Scenario, t: int,
                     max_support: int = MAX_SUPPORT_POINTS):
    """Exact distribution of aggregated demand at time slot ``t``.

    Returns ``(support, probs)`` as float64 arrays sorted by support value.
    Raises :class:`OracleInapplicableError` if any user's model at ``t`` is
    not discrete, :class:`OracleResourceError` if the support blows up.
    """
    if not 0 <= t < scenario.n_time_slots:
        raise IndexError(f"time slot {t} out of range 0..{scenario.n_time_slots - 1}")
    support = np.zeros(1, dtype=np.float64)
    probs = np.ones(1, dtype=np.float64)
    for user in scenario.users:
        model = user.deviation[t]
        if not isinstance(model, DiscreteDeviation):
            raise OracleInapplicableError(
                f"user {user.id!r} has a {type(model).__name__} at time slot {t}; "
                "exact probabilities need discrete deviations everywhere")
        vals = np.asarray(model.support, dtype=np.float64) + user.epp[t]
        ps = np.asarray(model.probs, dtype=np.float64)
        if len(support) * len(vals) > max_support:
            raise OracleResourceError(
                f"convolution support exceeds {max_support} points at time slot {t}")
        support = (support[:, None] + vals[None, :]).ravel()
        probs = (probs[:, None] * ps[None, :]).ravel()
        scale = max(1.0, float(np.max(np.abs(support))))
        support, probs = _merge_close(support, probs, MERGE_TOL * scale)
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"convolved probabilities sum to {total}, not 1")
    return support, probs


def _bin_slots(support: np.ndarray, probs: np.ndarray,
               breakpoints: np.ndarray):
    """Mass per power slot plus out-of-range mass, honoring half-open slots."""
    k = len(breakpoints) - 1
    idx = np.searchsorted(breakpoints, support, side="right") - 1
    idx[support == breakpoints[-1]] = k - 1  # top breakpoint belongs to the last slot
    in_range = (support >= breakpoints[0]) & (support <= breakpoints[-1])
    per_slot = np.bincount(idx[in_range], weights=probs[in_range], minlength=k)
    return per_slot, float(probs[~in_range].sum())


def exact_probability(scenario: Scenario, state: str, slot: int) -> float:
    """Exact landing probability for one (state, power slot) pair."""
    tv = scenario.substation.slots_for(state)
    if not tv:
        raise ValueError(f"unknown substation state {state!r}")
    bp = np.asarray(scenario.slots.breakpoints, dtype=np.float64)
    if not 0 <= slot < scenario.slots.n_slots:
        raise IndexError(f"slot index {slot} out of range 0..{scenario.slots.n_slots - 1}")
    total = 0.0
    for t in tv:
        support, probs = apd_distribution(scenario, t)
        per_slot, _ = _bin_slots(support, probs, bp)
        total += per_slot[slot]
    return total / len(tv)


def exact_table(scenario: Scenario) -> dict:
    """Exact probabilities for every (state, slot), plus per-state mass checks.

    Returns ``{"probability": {(state, slot): p}, "out_of_range": {state: mass},
    "coverage": {state: in-range mass}}``.  Each time slot's distribution is
    convolved once and binned into every power slot.
    """
    bp = np.asarray(scenario.slots.breakpoints, dtype=np.float64)
    k = scenario.slots.n_slots
    probability: dict[tuple[str, int], float] = {}
    out_of_range: dict[str, float] = {}
    coverage: dict[str, float] = {}
    per_t: dict[int, tuple[np.ndarray, float]] = {}
    for t in range(scenario.n_time_slots):
        support, probs = apd_distribution(scenario, t)
        per_t[t] = _bin_slots(support, probs, bp)
    for state in scenario.substation.states:
        tv = scenario.substation.slots_for(state)
        acc = np.zeros(k, dtype=np.float64)
        oor = 0.0
        for t in tv:
            slot_mass, extra = per_t[t]
            acc += slot_mass
            oor += extra
        acc /= len(tv)
        for slot in range(k):
            probability[(state, slot)] = float(acc[slot])
        out_of_range[state] = oor / len(tv)
        coverage[state] = float(acc.sum())
    return {"probability": probability, "out_of_range": out_of_range, "coverage": coverage}
