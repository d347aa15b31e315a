import pytest

from ppsv.model import (
    DiscreteDeviation,
    PowerSlotPartition,
    Scenario,
    SubstationProfile,
    TruncatedGaussianDeviation,
    UniformDeviation,
    User,
)


@pytest.fixture()
def mixed_scenario() -> Scenario:
    """Three users, one per deviation family, two states, three power slots."""
    disc = DiscreteDeviation(support=(-0.5, 0.0, 0.75), probs=(0.25, 0.5, 0.25))
    unif = UniformDeviation(lo=-0.3, hi=0.4)
    tg = TruncatedGaussianDeviation(mean=0.05, stddev=0.2, lo=-0.6, hi=0.7)
    users = (
        User.with_shared_model("a", (1.0, 1.2, 0.8, 1.5, 1.1, 0.9), disc),
        User.with_shared_model("b", (2.0, 2.2, 1.8, 2.5, 2.1, 1.9), unif),
        User.with_shared_model("c", (0.5, 0.4, 0.6, 0.3, 0.55, 0.45), tg),
    )
    sub = SubstationProfile(assignment=("v1", "v1", "v2", "v1", "v2", "v2"))
    slots = PowerSlotPartition(breakpoints=(2.0, 3.5, 4.5, 6.0))
    return Scenario(users=users, substation=sub, slots=slots)


@pytest.fixture()
def discrete_scenario() -> Scenario:
    """Two users, purely discrete deviations; exact oracle applies."""
    d1 = DiscreteDeviation(support=(-1.0, 0.0, 1.0), probs=(0.2, 0.5, 0.3))
    d2 = DiscreteDeviation(support=(0.0, 2.0), probs=(0.6, 0.4))
    users = (
        User.with_shared_model("u1", (3.0, 4.0, 5.0, 4.0), d1),
        User.with_shared_model("u2", (2.0, 1.0, 2.0, 3.0), d2),
    )
    sub = SubstationProfile(assignment=("lo", "lo", "hi", "hi"))
    slots = PowerSlotPartition(breakpoints=(3.0, 5.0, 7.0, 10.0))
    return Scenario(users=users, substation=sub, slots=slots)


def bernoulli_scenario(p: float) -> Scenario:
    """One state, two slots; slot 1 has exact landing probability p.

    A single user at a single time slot draws deviation 10 with probability
    p (APD 10, slot [5, 11]) and 0 otherwise (APD 0, slot [-1, 5)).
    """
    if p <= 0.0:
        model = DiscreteDeviation(support=(0.0,), probs=(1.0,))
    elif p >= 1.0:
        model = DiscreteDeviation(support=(10.0,), probs=(1.0,))
    else:
        model = DiscreteDeviation(support=(0.0, 10.0), probs=(1.0 - p, p))
    user = User.with_shared_model("u", (0.0,), model)
    return Scenario(users=(user,),
                    substation=SubstationProfile(assignment=("v",)),
                    slots=PowerSlotPartition(breakpoints=(-1.0, 5.0, 11.0)))
