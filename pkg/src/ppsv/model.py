"""System model: users, predicted profiles, deviation models, substation
profile, power slots — plus the pure scalar sampling primitives.

A scenario describes a population of users over dense time slots 0..N-1.
Each user has a predicted power profile (kW per slot) and a per-slot
deviation model; realized demand in slot t is the sum over users of
predicted power plus an independently drawn deviation (deviations are
additive on power; negative totals are allowed — prosumers may inject).

The substation profile assigns a state label to every time slot; the slots
sharing a state form that state's class.  Power slots are the half-open
intervals of a breakpoint partition, the last slot closed, so membership is
deterministic and values outside the partition belong to no slot.

The samplers here are the readable reference path: one draw at a time from
a positioned :class:`~ppsv.rng.RngStream`.  The batch kernels in
:mod:`ppsv.kernels` must replay them bit-for-bit.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Union

from ._normal import norm_cdf, norm_quantile
from .rng import RngStream

TimeSlotId = int

_PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDeviation:
    """Finite-support deviation: distinct points (kW) with probabilities."""

    support: tuple[float, ...]
    probs: tuple[float, ...]


@dataclass(frozen=True)
class UniformDeviation:
    """Uniform deviation on [lo, hi] kW."""

    lo: float
    hi: float


@dataclass(frozen=True)
class TruncatedGaussianDeviation:
    """Gaussian deviation truncated to [lo, hi] kW."""

    mean: float
    stddev: float
    lo: float
    hi: float


DeviationModel = Union[DiscreteDeviation, UniformDeviation, TruncatedGaussianDeviation]


@dataclass(frozen=True)
class User:
    """A user: id, predicted profile, and one deviation model per time slot."""

    id: str
    epp: tuple[float, ...]
    deviation: tuple[DeviationModel, ...]

    @classmethod
    def with_shared_model(cls, id: str, epp: tuple[float, ...] | list[float],
                          model: DeviationModel) -> "User":
        epp_t = tuple(float(x) for x in epp)
        return cls(id=id, epp=epp_t, deviation=(model,) * len(epp_t))


@dataclass(frozen=True)
class SubstationProfile:
    """State label per time slot; the state set is the image of the map."""

    assignment: tuple[str, ...]

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.assignment)))

    def slots_for(self, state: str) -> tuple[TimeSlotId, ...]:
        return tuple(t for t, v in enumerate(self.assignment) if v == state)


@dataclass(frozen=True)
class PowerSlotPartition:
    """Strictly increasing breakpoints b_0 < ... < b_k defining k slots.

    Slot i is [b_i, b_{i+1}) except the last, which is closed at b_k.
    """

    breakpoints: tuple[float, ...]

    @property
    def n_slots(self) -> int:
        return len(self.breakpoints) - 1

    def bounds(self, slot: int) -> tuple[float, float, bool]:
        if not 0 <= slot < self.n_slots:
            raise IndexError(f"slot index {slot} out of range 0..{self.n_slots - 1}")
        closed = slot == self.n_slots - 1
        return self.breakpoints[slot], self.breakpoints[slot + 1], closed

    def slot_of(self, value: float) -> int:
        """Index of the slot containing ``value``, or -1 if out of range."""
        b = self.breakpoints
        if value < b[0] or value > b[-1]:
            return -1
        if value == b[-1]:
            return self.n_slots - 1
        return bisect_right(b, value) - 1


@dataclass(frozen=True)
class Scenario:
    users: tuple[User, ...]
    substation: SubstationProfile
    slots: PowerSlotPartition

    @property
    def n_time_slots(self) -> int:
        return len(self.substation.assignment)

    @property
    def draws_per_indicator(self) -> int:
        # One uniform for the time-slot pick, one per user for deviations.
        return 1 + len(self.users)


@dataclass(frozen=True)
class Violation:
    """One invariant violation, located by a path into the scenario."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def _validate_model(model: DeviationModel, path: str, out: list[Violation]) -> None:
    if isinstance(model, DiscreteDeviation):
        if len(model.support) == 0:
            out.append(Violation(path, "discrete support is empty"))
            return
        if len(model.support) != len(model.probs):
            out.append(Violation(path, "support and probability lengths differ"))
            return
        if not all(math.isfinite(p) and p > 0.0 for p in model.probs):
            out.append(Violation(path, "probabilities must be finite and > 0"))
        total = math.fsum(model.probs)
        if not abs(total - 1.0) <= _PROB_SUM_TOL:
            out.append(Violation(path, f"probability mass sums to {total!r}, not 1"))
        if len(set(model.support)) != len(model.support):
            out.append(Violation(path, "support points are not distinct"))
        if not all(math.isfinite(x) for x in model.support):
            out.append(Violation(path, "support points must be finite"))
    elif isinstance(model, UniformDeviation):
        if not (math.isfinite(model.lo) and math.isfinite(model.hi)):
            out.append(Violation(path, "interval bounds must be finite"))
        elif model.lo > model.hi:
            out.append(Violation(path, f"lo {model.lo!r} exceeds hi {model.hi!r}"))
    elif isinstance(model, TruncatedGaussianDeviation):
        if not math.isfinite(model.mean):
            out.append(Violation(path, f"mean must be finite, got {model.mean!r}"))
        if not (math.isfinite(model.stddev) and model.stddev > 0.0):
            out.append(Violation(path, f"stddev must be finite and > 0, got {model.stddev!r}"))
        if not (math.isfinite(model.lo) and math.isfinite(model.hi)):
            out.append(Violation(path, "truncation bounds must be finite"))
        elif not model.lo < model.hi:
            out.append(Violation(path, f"lo {model.lo!r} must be < hi {model.hi!r}"))
    else:
        out.append(Violation(path, f"unknown deviation model {type(model).__name__}"))


def validate(scenario: Scenario) -> list[Violation]:
    """Check every scenario invariant; an empty list means valid.

    Violations are data, not failures: callers decide what to do with them.
    """
    out: list[Violation] = []
    n = scenario.n_time_slots
    if n < 1:
        out.append(Violation("substation_profile", "at least one time slot required"))
    for t, label in enumerate(scenario.substation.assignment):
        if not isinstance(label, str) or not label:
            out.append(Violation(f"substation_profile[{t}]",
                                 "state label must be a non-empty string"))
    bp = scenario.slots.breakpoints
    if len(bp) < 2:
        out.append(Violation("power_slot_breakpoints_kw",
                             "at least two breakpoints required"))
    else:
        if not all(math.isfinite(b) for b in bp):
            out.append(Violation("power_slot_breakpoints_kw",
                                 "breakpoints must be finite"))
        if any(a >= b for a, b in zip(bp, bp[1:])):
            out.append(Violation("power_slot_breakpoints_kw",
                                 "breakpoints must be strictly increasing"))
    if len(scenario.users) < 1:
        out.append(Violation("users", "at least one user required"))
    for i, user in enumerate(scenario.users):
        if len(user.epp) != n:
            out.append(Violation(
                f"users[{i}].epp_kw",
                f"profile has {len(user.epp)} entries, expected {n}"))
        elif not all(math.isfinite(x) for x in user.epp):
            out.append(Violation(f"users[{i}].epp_kw", "profile values must be finite"))
        if len(user.deviation) != n:
            out.append(Violation(
                f"users[{i}].deviation",
                f"deviation defined for {len(user.deviation)} slots, expected {n}"))
        else:
            for t, model in enumerate(user.deviation):
                _validate_model(model, f"users[{i}].deviation[t={t}]", out)
    ids = [u.id for u in scenario.users]
    if len(set(ids)) != len(ids):
        out.append(Violation("users", "user ids are not unique"))
    return out


def sample_deviation(model: DeviationModel, u: float) -> float:
    """Map one uniform draw in [0, 1) through a deviation model.

    Inverse-CDF throughout, so every model consumes exactly one draw.  The
    batch kernels reproduce these formulas exactly.
    """
    if isinstance(model, DiscreteDeviation):
        # First support point whose cumulative probability exceeds u;
        # clamped to the last point so a <=1e-12 mass shortfall cannot
        # index past the support.
        acc = 0.0
        last = len(model.support) - 1
        for j in range(last):
            acc += model.probs[j]
            if u < acc:
                return model.support[j]
        return model.support[last]
    if isinstance(model, UniformDeviation):
        return model.lo + u * (model.hi - model.lo)
    if isinstance(model, TruncatedGaussianDeviation):
        a = (model.lo - model.mean) / model.stddev
        b = (model.hi - model.mean) / model.stddev
        cdf_lo = norm_cdf(a)
        span = norm_cdf(b) - cdf_lo
        return model.mean + model.stddev * norm_quantile(cdf_lo + u * span)
    raise TypeError(f"unknown deviation model {type(model).__name__}")


def sample_apd(scenario: Scenario, t: TimeSlotId, rng: RngStream) -> float:
    """Draw one aggregated power demand value for time slot ``t``.

    Consumes exactly one draw per user, in declared user order; the
    accumulation order is part of the determinism contract.
    """
    if not 0 <= t < scenario.n_time_slots:
        raise IndexError(f"time slot {t} out of range 0..{scenario.n_time_slots - 1}")
    acc = 0.0
    for user in scenario.users:
        dev = sample_deviation(user.deviation[t], rng.next_double())
        acc += user.epp[t] + dev
    return acc


def sample_indicator(scenario: Scenario, state: str, slot: int,
                     rng: RngStream) -> int:
    """One Bernoulli trial: does a random demand draw land in power slot ``slot``?

    Draws a time slot uniformly from the state's class (one draw), then the
    demand (one draw per user), then tests slot membership.  Demand outside
    the partition yields 0 for every slot.
    """
    tslots = scenario.substation.slots_for(state)
    if not tslots:
        raise ValueError(f"unknown substation state {state!r}")
    lo, hi, closed = scenario.slots.bounds(slot)  # raises IndexError on bad slot
    u = rng.next_double()
    idx = min(int(u * len(tslots)), len(tslots) - 1)
    apd = sample_apd(scenario, tslots[idx], rng)
    if closed:
        return 1 if lo <= apd <= hi else 0
    return 1 if lo <= apd < hi else 0
