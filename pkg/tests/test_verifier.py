"""Verification reports: determinism, structure, streams, error paths."""

import json

import numpy as np
import pytest

from ppsv import kernels
from ppsv.approximation import make_params
from ppsv.model import (
    DiscreteDeviation,
    PowerSlotPartition,
    Scenario,
    SubstationProfile,
    User,
)
from ppsv.verifier import (
    IndicatorStream,
    InvalidScenarioError,
    VerificationReport,
    oracle_csv,
    oracle_report,
    verify,
)


@pytest.fixture(autouse=True)
def _restore_backend():
    before = kernels.active_backend()
    yield
    kernels.set_backend(before)


def test_report_shape(mixed_scenario):
    params = make_params(0.2, 0.2)
    report = verify(mixed_scenario, params, seed=11)
    det = report.deterministic
    assert det["epsilon"] == 0.2
    assert det["delta"] == 0.2
    assert det["master_seed"] == 11
    assert len(det["entries"]) == 6
    for entry in det["entries"]:
        assert entry["verdict"] in ("estimate", "bot")
        if entry["verdict"] == "estimate":
            assert 0.0 < entry["mean"] <= 1.0
        else:
            assert "mean" not in entry
        assert entry["samples"] >= 1
        assert entry["slot_lo_kw"] < entry["slot_hi_kw"]
    assert set(det["per_state"]) == {"v1", "v2"}
    rt = report.runtime
    assert rt["workers"] == 1
    assert rt["backend"] in ("numba", "numpy")
    assert len(rt["entry_wall_nanos"]) == 6


def test_entries_ordered_by_state_then_slot(mixed_scenario):
    report = verify(mixed_scenario, make_params(0.3, 0.3), seed=2)
    order = [(e["state"], e["slot_index"]) for e in report.deterministic["entries"]]
    assert order == sorted(order)


def test_deterministic_block_invariant_to_schedule(mixed_scenario):
    params = make_params(0.2, 0.2)
    blocks = set()
    for workers, batch_size, lookahead in ((1, 4096, None), (2, 7, 1),
                                           (5, 1, 4), (3, 64, None)):
        report = verify(mixed_scenario, params, seed=42, workers=workers,
                        batch_size=batch_size, lookahead=lookahead)
        blocks.add(report.deterministic_json())
    assert len(blocks) == 1


def test_deterministic_block_invariant_to_backend(mixed_scenario):
    if "numba" not in kernels.set_backend("auto"):
        pytest.skip("numba unavailable")
    params = make_params(0.2, 0.2)
    kernels.set_backend("numba")
    a = verify(mixed_scenario, params, seed=9).deterministic_json()
    kernels.set_backend("numpy")
    b = verify(mixed_scenario, params, seed=9).deterministic_json()
    assert a == b


def test_runtime_block_reflects_configuration(mixed_scenario):
    params = make_params(0.3, 0.3)
    report = verify(mixed_scenario, params, seed=1, workers=2, batch_size=128,
                    lookahead=3)
    rt = report.runtime
    assert rt["workers"] == 2
    assert rt["batch_size"] == 128
    assert rt["lookahead"] == 3
    assert rt["generated_batches"] >= rt["generated_batches"] - rt["discarded_batches"] >= 0


def test_seed_is_part_of_the_deterministic_block(mixed_scenario):
    params = make_params(0.3, 0.3)
    a = verify(mixed_scenario, params, seed=1).deterministic_json()
    b = verify(mixed_scenario, params, seed=2).deterministic_json()
    assert a != b


def test_invalid_scenario_raises_with_violations():
    bad = Scenario(users=(),
                   substation=SubstationProfile(assignment=("v",)),
                   slots=PowerSlotPartition(breakpoints=(0.0, 1.0)))
    with pytest.raises(InvalidScenarioError) as exc_info:
        verify(bad, make_params(0.5, 0.5))
    assert exc_info.value.violations


def test_family_wise_splits_delta(mixed_scenario):
    params = make_params(0.2, 0.12)
    report = verify(mixed_scenario, params, seed=4, family_wise=True)
    det = report.deterministic
    assert det["family_wise"] is True
    assert det["delta"] == 0.12
    assert det["entry_delta"] == pytest.approx(0.12 / 6)
    # a smaller per-entry delta means a larger sum target and cutoff
    assert det["cutoff"] > make_params(0.2, 0.12).cutoff


def test_coverage_accounting():
    # two slots capture all mass: estimates should sum near 1
    d = DiscreteDeviation(support=(0.0, 10.0), probs=(0.5, 0.5))
    user = User.with_shared_model("u", (0.0,), d)
    sc = Scenario(users=(user,),
                  substation=SubstationProfile(assignment=("v",)),
                  slots=PowerSlotPartition(breakpoints=(-1.0, 5.0, 11.0)))
    report = verify(sc, make_params(0.1, 0.1), seed=3)
    agg = report.deterministic["per_state"]["v"]
    assert agg["coverage"] == pytest.approx(1.0, abs=0.1)
    assert agg["bot_slots"] == 0
    assert agg["low_coverage"] is False


def test_low_coverage_flag_when_mass_escapes_range():
    # 40% of the mass lands beyond the top breakpoint
    d = DiscreteDeviation(support=(0.0, 100.0), probs=(0.6, 0.4))
    user = User.with_shared_model("u", (0.0,), d)
    sc = Scenario(users=(user,),
                  substation=SubstationProfile(assignment=("v",)),
                  slots=PowerSlotPartition(breakpoints=(-1.0, 5.0, 11.0)))
    report = verify(sc, make_params(0.1, 0.1), seed=3)
    assert report.deterministic["per_state"]["v"]["low_coverage"] is True


def test_report_json_round_trips(mixed_scenario):
    report = verify(mixed_scenario, make_params(0.3, 0.3), seed=6)
    parsed = json.loads(report.to_json())
    assert parsed["kind"] == "verification"
    assert parsed["schema_version"] == 1
    assert parsed["deterministic"] == json.loads(report.deterministic_json())


def test_csv_shape(mixed_scenario):
    report = verify(mixed_scenario, make_params(0.3, 0.3), seed=6)
    lines = report.to_csv().strip().split("\n")
    assert lines[0] == "state,slot_lo_kw,slot_hi_kw,verdict,mean,samples"
    assert len(lines) == 7
    for line in lines[1:]:
        fields = line.split(",")
        assert len(fields) == 6
        assert fields[3] in ("estimate", "bot")
        if fields[3] == "bot":
            assert fields[4] == ""
        else:
            float(fields[4])


def test_bot_entries_for_impossible_slot():
    # slot [5, 11) can never be hit: APD is always 0
    d = DiscreteDeviation(support=(0.0,), probs=(1.0,))
    user = User.with_shared_model("u", (0.0,), d)
    sc = Scenario(users=(user,),
                  substation=SubstationProfile(assignment=("v",)),
                  slots=PowerSlotPartition(breakpoints=(-1.0, 5.0, 11.0)))
    params = make_params(0.5, 0.5)
    report = verify(sc, params, seed=0)
    entries = {e["slot_index"]: e for e in report.deterministic["entries"]}
    assert entries[1]["verdict"] == "bot"
    assert entries[1]["samples"] == params.cutoff
    assert entries[0]["verdict"] == "estimate"
    assert entries[0]["mean"] == pytest.approx(1.0, abs=0.5)


class TestIndicatorStream:
    def test_element_matches_batch(self, mixed_scenario):
        stream = IndicatorStream(mixed_scenario, "v1", 1, seed=123456789)
        batch = stream.batch(0, 64)
        for i in range(64):
            assert stream.element(i) == batch[i]

    def test_iteration_matches_batches(self, mixed_scenario):
        stream = IndicatorStream(mixed_scenario, "v2", 0, seed=55)
        want = stream.batch(0, 300)
        got = []
        for bit in stream:
            got.append(bit)
            if len(got) == 300:
                break
        assert got == want.tolist()

    def test_rejects_bad_addresses(self, mixed_scenario):
        with pytest.raises(ValueError):
            IndicatorStream(mixed_scenario, "ghost", 0, seed=1)
        with pytest.raises(IndexError):
            IndicatorStream(mixed_scenario, "v1", 9, seed=1)
        stream = IndicatorStream(mixed_scenario, "v1", 0, seed=1)
        with pytest.raises(ValueError):
            stream.batch(-1, 4)


def test_oracle_report_envelope(discrete_scenario):
    report = oracle_report(discrete_scenario)
    assert report["kind"] == "exact"
    entries = report["deterministic"]["entries"]
    assert len(entries) == 2 * 3
    total = {}
    for e in entries:
        assert e["verdict"] == "exact"
        total[e["state"]] = total.get(e["state"], 0.0) + e["mean"]
    for state, cov in report["deterministic"]["per_state"].items():
        assert cov["coverage"] == pytest.approx(total[state], abs=1e-12)
    csv_text = oracle_csv(report)
    assert csv_text.startswith("state,slot_lo_kw,slot_hi_kw,verdict,mean,samples")
    assert len(csv_text.strip().split("\n")) == 7


def test_oracle_report_rejects_invalid_scenario():
    bad = Scenario(users=(),
                   substation=SubstationProfile(assignment=("v",)),
                   slots=PowerSlotPartition(breakpoints=(0.0, 1.0)))
    with pytest.raises(InvalidScenarioError):
        oracle_report(bad)
