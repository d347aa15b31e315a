"""Sequential mean estimation with relative (epsilon, delta) guarantees.

For a random variable Z with values in [0, 1] and unknown mean mu > 0, the
stopping rule samples until the running sum reaches

    UPSILON_1 = 1 + (1 + eps) * UPSILON,   UPSILON = 4 (e - 2) ln(2/delta) / eps**2

and outputs UPSILON_1 / N, where N is the number of samples consumed.  The
estimate satisfies  Pr[(1-eps) mu <= est <= (1+eps) mu] >= 1 - delta,  with
expected sample count about UPSILON_1 / mu.

The rule alone never terminates when mu = 0, so a budget cutoff

    M = ceil(UPSILON_1 / eps)

is layered on top: if the sum has not reached UPSILON_1 after M samples, the
outcome is Bot, read as "the mean is below eps with confidence >= 1-delta".
The rationale: a mean of at least eps would have stopped within about
UPSILON_1 / eps samples, so exhausting M is evidence against it.  The
confidence of both verdicts is certified empirically by the acceptance
suite, not re-derived here.

delta is a confidence *parameter* — the guarantee holds with probability at
least 1-delta over runs; it is never an error bar on a single estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

import numpy as np


class ParameterError(ValueError):
    """Raised for epsilon or delta outside (0, 1)."""


class DataError(ValueError):
    """Raised when a sample stream yields a value outside [0, 1]."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"sample {index} = {value!r} is outside [0, 1]")


@dataclass(frozen=True)
class EdParams:
    """Tolerance, confidence, and the derived stopping constants."""

    epsilon: float
    delta: float
    success_scale: float
    success_target: float
    cutoff: int

    @property
    def sum_target(self) -> int:
        # The running sum of indicator bits is an integer, so the stopping
        # condition S >= success_target is equivalent to S >= ceil(success_target).
        return math.ceil(self.success_target)


@dataclass(frozen=True)
class Estimate:
    """A successful (epsilon, delta)-approximation of the mean."""

    mean: float
    samples_used: int


@dataclass(frozen=True)
class Bot:
    """Budget exhausted: the mean is below epsilon with confidence >= 1-delta."""

    samples_used: int


EdOutcome = Union[Estimate, Bot]


def make_params(epsilon: float, delta: float) -> EdParams:
    """Compute the stopping constants for a tolerance/confidence pair."""
    if not (0.0 < epsilon < 1.0):
        raise ParameterError(f"epsilon must be in (0, 1), got {epsilon!r}")
    if not (0.0 < delta < 1.0):
        raise ParameterError(f"delta must be in (0, 1), got {delta!r}")
    success_scale = 4.0 * (math.e - 2.0) * math.log(2.0 / delta) / (epsilon * epsilon)
    success_target = 1.0 + (1.0 + epsilon) * success_scale
    cutoff = math.ceil(success_target / epsilon)
    return EdParams(epsilon=epsilon, delta=delta, success_scale=success_scale,
                    success_target=success_target, cutoff=cutoff)


def required_cutoff(params: EdParams) -> int:
    """The sample budget M whose exhaustion justifies the Bot verdict."""
    return params.cutoff


def estimate_mean(params: EdParams, samples: Iterable[float]) -> EdOutcome:
    """Run the stopping rule over an ordered stream of values in [0, 1].

    Consumes the stream strictly in order and never reads past the sample
    that decides the outcome.  The running sum uses Neumaier-compensated
    summation; for indicator (0/1) streams the sum is therefore exact up to
    the cutoff length.
    """
    target = params.success_target
    cutoff = params.cutoff
    total = 0.0
    comp = 0.0  # Neumaier compensation term
    n = 0
    for z in samples:
        z = float(z)
        if not (0.0 <= z <= 1.0):  # also rejects NaN
            raise DataError(n, z)
        n += 1
        t = total + z
        if abs(total) >= abs(z):
            comp += (total - t) + z
        else:
            comp += (z - t) + total
        total = t
        if total + comp >= target:
            return Estimate(mean=params.success_target / n, samples_used=n)
        if n >= cutoff:
            return Bot(samples_used=cutoff)
    raise ValueError(
        f"sample stream ended after {n} values; the stopping rule needs up to "
        f"{cutoff}"
    )


class BitstreamConsumer:
    """Batch-wise form of the stopping rule for 0/1 indicator streams.

    Feeding batches in order yields exactly the outcome of
    :func:`estimate_mean` over the concatenated stream, for any batching of
    the same bits — integer accumulation makes the running sum exact, and
    the decision index is located inside the deciding batch.
    """

    def __init__(self, params: EdParams):
        self._params = params
        self._target = params.sum_target
        self._cutoff = params.cutoff
        self._sum = 0
        self._n = 0
        self.outcome: EdOutcome | None = None

    @property
    def samples_consumed(self) -> int:
        return self._n

    def feed(self, bits: np.ndarray) -> EdOutcome | None:
        """Consume the next batch; returns the outcome once decided.

        Bits past the deciding sample (within this batch or in later calls)
        are ignored, mirroring the prefix property of the sequential rule.
        """
        if self.outcome is not None:
            return self.outcome
        take = min(len(bits), self._cutoff - self._n)
        chunk = bits[:take]
        hits = int(np.count_nonzero(chunk))
        if self._sum + hits >= self._target:
            # The decision lands inside this chunk; find the exact sample.
            cs = np.cumsum(chunk, dtype=np.int64)
            j = int(np.searchsorted(cs, self._target - self._sum, side="left"))
            self._n += j + 1
            self._sum += int(cs[j])
            self.outcome = Estimate(mean=self._params.success_target / self._n,
                                    samples_used=self._n)
        else:
            self._sum += hits
            self._n += take
            if self._n >= self._cutoff:
                self.outcome = Bot(samples_used=self._cutoff)
        return self.outcome


def consume_batches(params: EdParams, batches: Iterator[np.ndarray]) -> EdOutcome:
    """Drive a :class:`BitstreamConsumer` over an iterator of bit batches."""
    consumer = BitstreamConsumer(params)
    for batch in batches:
        out = consumer.feed(batch)
        if out is not None:
            return out
    raise ValueError("batch stream ended before the stopping rule decided")
