"""Scenario JSON round-tripping, content digests, and synthetic generation.

File format (version 1)::

    {
      "format": "ppsv-scenario",
      "version": 1,
      "time_slots": 4,
      "substation_profile": ["v1", "v1", "v2", "v2"],
      "power_slot_breakpoints_kw": [0.0, 4.0, 6.0, 10.0],
      "users": [
        {"id": "u1",
         "epp_kw": [1.0, 1.2, 0.8, 1.1],
         "deviation": {"type": "discrete",
                       "support_kw": [-0.5, 0.0, 0.5],
                       "probs": [0.25, 0.5, 0.25]},
         "deviation_overrides": [
           {"time_slot": 2,
            "model": {"type": "uniform", "lo_kw": -0.2, "hi_kw": 0.2}}]}
      ]
    }

``deviation`` is the user's model for every time slot; ``deviation_overrides``
replaces it at specific slots.  Emitting inverts this: the slot-0 model is
written as the base and differing slots become overrides, so parse(emit(s))
reconstructs s exactly.  The digest is the SHA-256 of the canonical (sorted
keys, no whitespace) JSON emission, making reports verifiable against the
scenario file that produced them.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from .approximation import ParameterError
from .model import (
    DeviationModel,
    DiscreteDeviation,
    Scenario,
    SubstationProfile,
    PowerSlotPartition,
    TruncatedGaussianDeviation,
    UniformDeviation,
    User,
)
from .rng import RngStream

FORMAT_NAME = "ppsv-scenario"
FORMAT_VERSION = 1


class ScenarioFormatError(ValueError):
    """Structurally malformed scenario JSON; message names the bad path."""


def _expect(obj, key, kind, path):
    if key not in obj:
        raise ScenarioFormatError(f"{path}: missing required key {key!r}")
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ScenarioFormatError(f"{path}.{key}: expected a number, got {type(val).__name__}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ScenarioFormatError(f"{path}.{key}: expected an integer, got {type(val).__name__}")
        return val
    if not isinstance(val, kind):
        raise ScenarioFormatError(f"{path}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _number_list(obj, key, path):
    raw = _expect(obj, key, list, path)
    out = []
    for i, x in enumerate(raw):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ScenarioFormatError(f"{path}.{key}[{i}]: expected a number")
        out.append(float(x))
    return tuple(out)


def parse_deviation(obj, path: str) -> DeviationModel:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{path}: expected an object")
    kind = _expect(obj, "type", str, path)
    if kind == "discrete":
        return DiscreteDeviation(support=_number_list(obj, "support_kw", path),
                                 probs=_number_list(obj, "probs", path))
    if kind == "uniform":
        return UniformDeviation(lo=_expect(obj, "lo_kw", float, path),
                                hi=_expect(obj, "hi_kw", float, path))
    if kind == "truncated_gaussian":
        return TruncatedGaussianDeviation(
            mean=_expect(obj, "mean_kw", float, path),
            stddev=_expect(obj, "stddev_kw", float, path),
            lo=_expect(obj, "lo_kw", float, path),
            hi=_expect(obj, "hi_kw", float, path))
    raise ScenarioFormatError(
        f"{path}.type: unknown deviation type {kind!r} "
        "(expected discrete, uniform, or truncated_gaussian)")


def deviation_to_dict(model: DeviationModel) -> dict:
    if isinstance(model, DiscreteDeviation):
        return {"type": "discrete", "support_kw": list(model.support),
                "probs": list(model.probs)}
    if isinstance(model, UniformDeviation):
        return {"type": "uniform", "lo_kw": model.lo, "hi_kw": model.hi}
    if isinstance(model, TruncatedGaussianDeviation):
        return {"type": "truncated_gaussian", "mean_kw": model.mean,
                "stddev_kw": model.stddev, "lo_kw": model.lo, "hi_kw": model.hi}
    raise TypeError(f"unknown deviation model {type(model).__name__}")


def parse_scenario(obj) -> Scenario:
    """Build a Scenario from decoded JSON; structural errors only.

    Semantic checks (probabilities summing to 1, ordering of bounds, ...)
    belong to :func:`ppsv.model.validate`.
    """
    if not isinstance(obj, dict):
        raise ScenarioFormatError("$: expected a top-level object")
    if "format" in obj and obj["format"] != FORMAT_NAME:
        raise ScenarioFormatError(f"$.format: expected {FORMAT_NAME!r}, got {obj['format']!r}")
    if "version" in obj and obj["version"] != FORMAT_VERSION:
        raise ScenarioFormatError(f"$.version: unsupported version {obj['version']!r}")
    n_t = _expect(obj, "time_slots", int, "$")
    profile_raw = _expect(obj, "substation_profile", list, "$")
    if len(profile_raw) != n_t:
        raise ScenarioFormatError(
            f"$.substation_profile: has {len(profile_raw)} entries, expected time_slots={n_t}")
    for i, lab in enumerate(profile_raw):
        if not isinstance(lab, str):
            raise ScenarioFormatError(f"$.substation_profile[{i}]: expected a string label")
    breakpoints = _number_list(obj, "power_slot_breakpoints_kw", "$")
    users_raw = _expect(obj, "users", list, "$")
    users = []
    for ui, uo in enumerate(users_raw):
        upath = f"$.users[{ui}]"
        if not isinstance(uo, dict):
            raise ScenarioFormatError(f"{upath}: expected an object")
        uid = _expect(uo, "id", str, upath)
        epp = _number_list(uo, "epp_kw", upath)
        base = parse_deviation(_expect(uo, "deviation", dict, upath),
                               f"{upath}.deviation")
        models = [base] * n_t
        if "deviation_overrides" in uo:
            overrides = _expect(uo, "deviation_overrides", list, upath)
            for oi, oo in enumerate(overrides):
                opath = f"{upath}.deviation_overrides[{oi}]"
                if not isinstance(oo, dict):
                    raise ScenarioFormatError(f"{opath}: expected an object")
                t = _expect(oo, "time_slot", int, opath)
                if not 0 <= t < n_t:
                    raise ScenarioFormatError(
                        f"{opath}.time_slot: {t} out of range 0..{n_t - 1}")
                models[t] = parse_deviation(_expect(oo, "model", dict, opath),
                                            f"{opath}.model")
        users.append(User(id=uid, epp=epp, deviation=tuple(models)))
    return Scenario(users=tuple(users),
                    substation=SubstationProfile(assignment=tuple(profile_raw)),
                    slots=PowerSlotPartition(breakpoints=breakpoints))


def scenario_to_dict(scenario: Scenario) -> dict:
    users = []
    for user in scenario.users:
        base = user.deviation[0] if user.deviation else None
        uo = {"id": user.id, "epp_kw": list(user.epp),
              "deviation": deviation_to_dict(base)}
        overrides = [{"time_slot": t, "model": deviation_to_dict(m)}
                     for t, m in enumerate(user.deviation) if m != base]
        if overrides:
            uo["deviation_overrides"] = overrides
        users.append(uo)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "time_slots": scenario.n_time_slots,
        "substation_profile": list(scenario.substation.assignment),
        "power_slot_breakpoints_kw": list(scenario.slots.breakpoints),
        "users": users,
    }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def scenario_digest(scenario: Scenario) -> str:
    """SHA-256 over the canonical JSON emission of the scenario."""
    payload = canonical_json(scenario_to_dict(scenario)).encode()
    return hashlib.sha256(payload).hexdigest()


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return parse_scenario(obj)


def dump_scenario(scenario: Scenario, path: str) -> None:
    text = json.dumps(scenario_to_dict(scenario), indent=2, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# Synthetic scenario generation (deterministic in the seed).

_FAMILIES = ("discrete", "uniform", "truncated_gaussian", "mixed")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_users: int = 8
    n_time_slots: int = 24
    n_states: int = 3
    n_power_slots: int = 6
    family: str = "mixed"
    rel_magnitude: float = 0.15  # deviation half-width relative to a user's load


def generate_scenario(cfg: GenConfig) -> Scenario:
    """Deterministic synthetic scenario: same config, same scenario.

    Users get a sinusoidal daily load shape plus a per-user deviation model
    sized by ``rel_magnitude``.  Power-slot breakpoints are spread slightly
    beyond the attainable demand range, so no probability mass falls outside
    the partition and none sits exactly on a breakpoint.
    """
    if cfg.n_users < 1:
        raise ParameterError("n_users must be >= 1")
    if cfg.n_states < 1:
        raise ParameterError("n_states must be >= 1")
    if cfg.n_time_slots < cfg.n_states:
        raise ParameterError("n_time_slots must be >= n_states "
                             "(every state needs a non-empty time-slot class)")
    if cfg.n_power_slots < 1:
        raise ParameterError("n_power_slots must be >= 1")
    if not 0.0 < cfg.rel_magnitude <= 1.0:
        raise ParameterError("rel_magnitude must be in (0, 1]")
    if cfg.family not in _FAMILIES:
        raise ParameterError(f"family must be one of {_FAMILIES}")

    rng = RngStream.from_parts(cfg.seed, 0x5CE9A810)
    T = cfg.n_time_slots
    users = []
    min_dev_total = [0.0] * T
    max_dev_total = [0.0] * T
    for ui in range(cfg.n_users):
        load = 0.5 + 2.5 * rng.next_double()
        phase = rng.next_double()
        epp = tuple(load * (1.0 + 0.5 * math.sin(2.0 * math.pi * (t / T + phase)))
                    for t in range(T))
        d = cfg.rel_magnitude * load
        family = cfg.family
        if family == "mixed":
            family = _FAMILIES[ui % 3]
        if family == "discrete":
            model: DeviationModel = DiscreteDeviation(
                support=(-d, 0.0, d), probs=(0.3, 0.4, 0.3))
            dev_lo, dev_hi = -d, d
        elif family == "uniform":
            model = UniformDeviation(lo=-d, hi=d)
            dev_lo, dev_hi = -d, d
        else:
            model = TruncatedGaussianDeviation(mean=0.0, stddev=d / 2.0,
                                               lo=-2.0 * d, hi=2.0 * d)
            dev_lo, dev_hi = -2.0 * d, 2.0 * d
        for t in range(T):
            min_dev_total[t] += dev_lo
            max_dev_total[t] += dev_hi
        users.append(User.with_shared_model(id=f"u{ui + 1}", epp=epp, model=model))

    labels = [f"s{i + 1}" for i in range(cfg.n_states)]
    assignment = []
    for t in range(T):
        if t < cfg.n_states:
            assignment.append(labels[t])  # guarantees non-empty classes
        else:
            pick = min(int(rng.next_double() * cfg.n_states), cfg.n_states - 1)
            assignment.append(labels[pick])

    total_epp = [sum(u.epp[t] for u in users) for t in range(T)]
    lo = min(total_epp[t] + min_dev_total[t] for t in range(T))
    hi = max(total_epp[t] + max_dev_total[t] for t in range(T))
    pad = 0.02 * (hi - lo) + 1e-6
    lo -= pad
    hi += pad
    step = (hi - lo) / cfg.n_power_slots
    breakpoints = tuple(lo + i * step for i in range(cfg.n_power_slots)) + (hi,)

    return Scenario(users=tuple(users),
                    substation=SubstationProfile(assignment=tuple(assignment)),
                    slots=PowerSlotPartition(breakpoints=breakpoints))
