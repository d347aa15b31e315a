"""Statistical verification of aggregated power demand.

For each substation state and each power slot, estimates the probability
that aggregated demand (predicted profiles plus random user deviations,
at a uniformly drawn time slot of the state's class) lands in the slot.
Every reported value is either an (epsilon, delta) relative-error estimate
or the verdict "bot", certifying the probability is below epsilon with
confidence at least 1 - delta.

Sampling is counter-based and deterministic: results depend only on the
scenario, the approximation parameters, and the master seed, never on
thread scheduling, worker count, or batch size.
"""

from .approximation import (
    Bot,
    BitstreamConsumer,
    DataError,
    EdParams,
    Estimate,
    ParameterError,
    consume_batches,
    estimate_mean,
    make_params,
    required_cutoff,
)
from .engine import DEFAULT_BATCH_SIZE, EngineRun, RunError, TaskOutcome, run
from .kernels import active_backend, compile_tables, indicator_batch, set_backend
from .model import (
    DiscreteDeviation,
    PowerSlotPartition,
    Scenario,
    SubstationProfile,
    TruncatedGaussianDeviation,
    UniformDeviation,
    User,
    Violation,
    sample_apd,
    sample_deviation,
    sample_indicator,
    validate,
)
from .oracle import (
    OracleInapplicableError,
    OracleResourceError,
    apd_distribution,
    exact_probability,
    exact_table,
)
from .rng import RngStream, derive_key, draw_double, draw_u64
from .scenario_io import (
    GenConfig,
    ScenarioFormatError,
    dump_scenario,
    generate_scenario,
    load_scenario,
    parse_scenario,
    scenario_digest,
    scenario_to_dict,
)
from .verifier import (
    IndicatorStream,
    InvalidScenarioError,
    VerificationReport,
    oracle_report,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "Bot", "BitstreamConsumer", "DataError", "EdParams", "Estimate",
    "ParameterError", "consume_batches", "estimate_mean", "make_params",
    "required_cutoff",
    "DEFAULT_BATCH_SIZE", "EngineRun", "RunError", "TaskOutcome", "run",
    "active_backend", "compile_tables", "indicator_batch", "set_backend",
    "DiscreteDeviation", "PowerSlotPartition", "Scenario",
    "SubstationProfile", "TruncatedGaussianDeviation", "UniformDeviation",
    "User", "Violation", "sample_apd", "sample_deviation", "sample_indicator",
    "validate",
    "OracleInapplicableError", "OracleResourceError", "apd_distribution",
    "exact_probability", "exact_table",
    "RngStream", "derive_key", "draw_double", "draw_u64",
    "GenConfig", "ScenarioFormatError", "dump_scenario", "generate_scenario",
    "load_scenario", "parse_scenario", "scenario_digest", "scenario_to_dict",
    "IndicatorStream", "InvalidScenarioError", "VerificationReport",
    "oracle_report", "verify",
    "__version__",
]
