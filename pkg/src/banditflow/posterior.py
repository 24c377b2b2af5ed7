"""Beta-Bernoulli belief per arm: counts in, Beta posterior out.

Each arm's click probability is a Bernoulli parameter with a conjugate
Beta belief.  Everything here is a pure value or a pure function, so the
types are safe to share across threads; random generators are not, and
each one must stay owned by a single logical task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SufficientStats:
    """Accumulated successes (clicks) and failures (non-clicking visitor-trials).

    Addition is field-wise, so deltas from separate days or shards can be
    merged in any order.
    """

    successes: int = 0
    failures: int = 0

    def __post_init__(self):
        if self.successes < 0 or self.failures < 0:
            raise ParameterError(
                f"counts must be non-negative, got ({self.successes}, {self.failures})"
            )

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        return SufficientStats(
            self.successes + other.successes, self.failures + other.failures
        )

    @property
    def trials(self) -> int:
        return self.successes + self.failures


@dataclass(frozen=True)
class BetaPosterior:
    """Shape parameters of the Beta belief over an arm's click probability."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError(
                f"shape parameters must be positive, got ({self.alpha}, {self.beta})"
            )

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    @property
    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))


def prior() -> BetaPosterior:
    """Uniform Beta(1,1) belief used before any data arrives."""
    return BetaPosterior(1.0, 1.0)


def update(stats: SufficientStats) -> BetaPosterior:
    """Conjugate update of the uniform prior with accumulated counts.

    Pure function of the counts: any permutation or re-batching of the same
    events yields the identical posterior.
    """
    return BetaPosterior(stats.successes + 1.0, stats.failures + 1.0)


def sample(posterior: BetaPosterior, rng: np.random.Generator) -> float:
    """Draw one value from the posterior.

    Deterministic sequence for a fixed generator state; distributional
    correctness is pinned by a KS test in the suite rather than by a
    particular sampling algorithm.
    """
    return float(rng.beta(posterior.alpha, posterior.beta))
