"""Daily mini-batch allocation math.

Posteriors go in, a traffic-proportion vector comes out: Monte-Carlo
argmax over posterior draws, then blacklist zeroing and floor
redistribution.  All functions are pure; campaign state handling lives in
``campaign``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CampaignError, ConfigurationError, ParameterError
from .posterior import BetaPosterior

DEFAULT_N_DRAWS = 10_000
DEFAULT_FLOOR = 0.05

# Tolerance for "weights sum to 1" checks.
SUM_TOL = 1e-9


@dataclass(frozen=True)
class Allocation:
    """Normalized traffic proportions over arms for one epoch."""

    weights: dict[str, float]
    epoch: int = 0

    def __post_init__(self):
        if not self.weights:
            raise CampaignError("allocation must cover at least one arm")
        total = sum(self.weights.values())
        if abs(total - 1.0) > SUM_TOL:
            raise ParameterError(f"weights must sum to 1, got {total!r}")
        for arm, w in self.weights.items():
            if not (0.0 <= w <= 1.0):
                raise ParameterError(f"weight for {arm!r} outside [0,1]: {w!r}")

    @property
    def arms(self) -> list[str]:
        return sorted(self.weights)


@dataclass(frozen=True)
class FloorSchedule:
    """Minimum traffic share per live arm, switchable by epoch.

    ``entries`` are (from_epoch, floor) pairs with strictly increasing
    epochs; before the first entry the ``default`` floor applies.
    """

    default: float = DEFAULT_FLOOR
    entries: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        floors = [self.default] + [f for _, f in self.entries]
        for f in floors:
            if not (0.0 <= f < 1.0):
                raise ConfigurationError(f"floor must be in [0, 1), got {f!r}")
        epochs = [e for e, _ in self.entries]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ConfigurationError("schedule epochs must be strictly increasing")

    def floor_at(self, epoch: int) -> float:
        floor = self.default
        for from_epoch, f in self.entries:
            if from_epoch <= epoch:
                floor = f
            else:
                break
        return floor

    def max_floor(self) -> float:
        return max([self.default] + [f for _, f in self.entries])

    def validate_for(self, n_arms: int) -> None:
        """Feasibility guard: no scheduled floor may exceed 1/K."""
        if n_arms * self.max_floor() > 1.0 + SUM_TOL:
            raise ConfigurationError(
                f"floor {self.max_floor()} infeasible for {n_arms} arms"
            )


def raw_allocation(
    posteriors: dict[str, BetaPosterior],
    n_draws: int = DEFAULT_N_DRAWS,
    rng: np.random.Generator | None = None,
    epoch: int = 0,
) -> Allocation:
    """Monte-Carlo argmax allocation.

    For each of ``n_draws`` rounds, one sample is drawn per arm and the
    arm with the highest draw wins the round; an arm's weight is its share
    of wins.  Ties go to the lexicographically lowest arm id, which makes
    the output deterministic for a fixed seed.
    """
    if not posteriors:
        raise CampaignError("need at least one arm to allocate")
    if n_draws < 1:
        raise ParameterError(f"n_draws must be >= 1, got {n_draws}")
    if rng is None:
        rng = np.random.default_rng()

    arms = sorted(posteriors)
    alphas = np.array([posteriors[a].alpha for a in arms])
    betas = np.array([posteriors[a].beta for a in arms])
    draws = rng.beta(alphas, betas, size=(n_draws, len(arms)))
    # argmax returns the first (lexicographically lowest) index on ties
    winners = np.argmax(draws, axis=1)
    counts = np.bincount(winners, minlength=len(arms))
    weights = {arm: int(counts[i]) / n_draws for i, arm in enumerate(arms)}
    return Allocation(weights=weights, epoch=epoch)


def apply_blacklist(alloc: Allocation, blacklist: frozenset[str] | set[str]) -> Allocation:
    """Zero out blacklisted arms and renormalize the survivors.

    If every surviving arm had weight zero, the mass is split uniformly
    among survivors (a dominant arm can be blacklisted away).
    """
    if not blacklist:
        return alloc
    live = [a for a in alloc.weights if a not in blacklist]
    if not live:
        raise CampaignError("cannot blacklist every arm in a campaign")
    live_total = sum(alloc.weights[a] for a in live)
    weights: dict[str, float] = {}
    for arm, w in alloc.weights.items():
        if arm in blacklist:
            weights[arm] = 0.0
        elif live_total > 0.0:
            weights[arm] = w / live_total
        else:
            weights[arm] = 1.0 / len(live)
    return Allocation(weights=weights, epoch=alloc.epoch)


def apply_floor(
    alloc: Allocation,
    floor: float,
    blacklist: frozenset[str] | set[str] = frozenset(),
) -> Allocation:
    """Raise every live arm to at least ``floor``, funded by the winners.

    Arms below the floor are set to exactly the floor; the deficit is
    taken from above-floor arms in proportion to their current weights.
    A donor pushed below the floor by that subtraction is pinned on the
    next pass, so the result is a fixed point and the call is idempotent.
    """
    if floor < 0.0:
        raise ConfigurationError(f"floor must be >= 0, got {floor}")
    active = [a for a in alloc.weights if a not in blacklist]
    if len(active) * floor > 1.0 + SUM_TOL:
        raise ConfigurationError(
            f"floor {floor} infeasible for {len(active)} live arms"
        )
    if floor == 0.0:
        return alloc

    weights = dict(alloc.weights)
    while True:
        below = [a for a in active if weights[a] < floor]
        if not below:
            break
        deficit = sum(floor - weights[a] for a in below)
        for a in below:
            weights[a] = floor
        donors = [a for a in active if weights[a] > floor]
        donor_total = sum(weights[a] for a in donors)
        if donor_total <= 0.0:
            # only reachable when K_active * floor == 1: pin everything
            for a in active:
                weights[a] = floor
            break
        for a in donors:
            weights[a] -= deficit * weights[a] / donor_total
    return Allocation(weights=weights, epoch=alloc.epoch)


def uniform_allocation(arms: list[str] | tuple[str, ...], epoch: int = 0) -> Allocation:
    """Equal split over the given arms; how every campaign starts."""
    if not arms:
        raise CampaignError("need at least one arm to allocate")
    if len(set(arms)) != len(arms):
        raise CampaignError("duplicate arm ids")
    w = 1.0 / len(arms)
    return Allocation(weights={a: w for a in sorted(arms)}, epoch=epoch)
