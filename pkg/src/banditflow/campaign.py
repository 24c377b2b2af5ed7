"""Campaign state and the daily mini-batch transaction.

A campaign is an immutable value: every batch or admin action returns a
new state, so a crash can only ever observe the pre-change or post-change
version.  ``run_batch`` is the single-writer transaction; readers keep
using the previously published :class:`~banditflow.allocator.Allocation`
snapshot until the new state is committed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .allocator import (
    DEFAULT_N_DRAWS,
    Allocation,
    FloorSchedule,
    apply_blacklist,
    apply_floor,
    raw_allocation,
    uniform_allocation,
)
from .errors import CampaignError, ConfigurationError, ConflictError
from .posterior import BetaPosterior, SufficientStats, update


@dataclass(frozen=True)
class AuditRecord:
    """One committed batch: the intermediate vectors and the inputs that
    produced them, enough to make the log authoritative."""

    epoch: int
    raw: dict[str, float]
    post_blacklist: dict[str, float]
    post_floor: dict[str, float]
    stats_delta: dict[str, SufficientStats]
    floor: float
    seed: int
    n_draws: int
    blacklist: tuple[str, ...]


@dataclass(frozen=True)
class CampaignState:
    """Arms, accumulated counts, floor schedule, blacklist and the latest
    published allocation.  ``epoch`` equals the number of committed batches;
    the audit log has exactly one record per committed batch."""

    campaign_id: str
    arms: dict[str, SufficientStats]
    epoch: int
    floor_schedule: FloorSchedule
    blacklist: frozenset[str]
    allocation: Allocation
    audit_log: tuple[AuditRecord, ...] = field(default_factory=tuple)
    log_cursor: int = 0  # records consumed from the durable campaign log

    def posteriors(self) -> dict[str, BetaPosterior]:
        """Beta posterior per arm, derived from the accumulated counts."""
        return {arm: update(stats) for arm, stats in self.arms.items()}

    def live_arms(self) -> list[str]:
        return sorted(a for a in self.arms if a not in self.blacklist)


def new_campaign(
    campaign_id: str,
    arms: list[str] | tuple[str, ...],
    floor_schedule: FloorSchedule | None = None,
) -> CampaignState:
    """Fresh campaign: zero counts, uniform allocation at epoch 0."""
    if not campaign_id:
        raise CampaignError("campaign_id must be non-empty")
    if not arms:
        raise CampaignError("campaign needs at least one arm")
    if len(set(arms)) != len(arms):
        raise CampaignError("duplicate arm ids in campaign config")
    if any(not a for a in arms):
        raise CampaignError("arm ids must be non-empty")
    schedule = floor_schedule if floor_schedule is not None else FloorSchedule()
    schedule.validate_for(len(arms))
    return CampaignState(
        campaign_id=campaign_id,
        arms={a: SufficientStats() for a in sorted(arms)},
        epoch=0,
        floor_schedule=schedule,
        blacklist=frozenset(),
        allocation=uniform_allocation(list(arms), epoch=0),
    )


def run_batch(
    state: CampaignState,
    stats_delta: dict[str, SufficientStats],
    n_draws: int = DEFAULT_N_DRAWS,
    seed: int = 0,
) -> tuple[CampaignState, Allocation]:
    """The daily mini-batch.

    Accumulates the delta into each arm's counts, recomputes posteriors,
    runs the Monte-Carlo allocation and applies blacklist then floor, and
    commits a new epoch with an audit record.

    If the delta is all-zero across every arm (upstream breakage or no
    traffic at all), the previous allocation is returned unchanged, the
    posteriors are not advanced and the epoch counter does not move.
    The per-batch ``seed`` is recorded in the audit log so the run can be
    replayed bit-for-bit.
    """
    unknown = set(stats_delta) - set(state.arms)
    if unknown:
        raise CampaignError(f"delta references unknown arms: {sorted(unknown)}")

    if all(s.trials == 0 for s in stats_delta.values()):
        return state, state.allocation

    new_epoch = state.epoch + 1
    arms = {
        arm: stats + stats_delta.get(arm, SufficientStats())
        for arm, stats in state.arms.items()
    }
    posteriors = {arm: update(stats) for arm, stats in arms.items()}

    rng = np.random.default_rng(seed)
    raw = raw_allocation(posteriors, n_draws=n_draws, rng=rng, epoch=new_epoch)
    after_blacklist = apply_blacklist(raw, state.blacklist)
    floor = state.floor_schedule.floor_at(new_epoch)
    final = apply_floor(after_blacklist, floor, state.blacklist)

    record = AuditRecord(
        epoch=new_epoch,
        raw=dict(raw.weights),
        post_blacklist=dict(after_blacklist.weights),
        post_floor=dict(final.weights),
        stats_delta={a: stats_delta.get(a, SufficientStats()) for a in arms},
        floor=floor,
        seed=seed,
        n_draws=n_draws,
        blacklist=tuple(sorted(state.blacklist)),
    )
    new_state = replace(
        state,
        arms=arms,
        epoch=new_epoch,
        allocation=final,
        audit_log=state.audit_log + (record,),
    )
    return new_state, final


def add_arm(state: CampaignState, arm: str) -> CampaignState:
    """Mid-campaign arm addition: uniform prior, zero counts.

    The arm participates from the next batch; the published allocation is
    untouched until then.
    """
    if arm in state.arms:
        raise ConflictError(f"arm {arm!r} already exists")
    if not arm:
        raise CampaignError("arm id must be non-empty")
    arms = dict(state.arms)
    arms[arm] = SufficientStats()
    return replace(state, arms=arms)


def set_blacklisted(state: CampaignState, arm: str, blacklisted: bool) -> CampaignState:
    """Add or remove an arm from the blacklist; takes effect at the next batch."""
    if arm not in state.arms:
        raise CampaignError(f"unknown arm {arm!r}")
    if blacklisted:
        new = state.blacklist | {arm}
        if set(state.arms) <= new:
            raise ConfigurationError("cannot blacklist the last live arm")
    else:
        new = state.blacklist - {arm}
    return replace(state, blacklist=frozenset(new))


def set_floor_schedule(state: CampaignState, schedule: FloorSchedule) -> CampaignState:
    """Replace the floor schedule, enforcing feasibility for the current arms."""
    schedule.validate_for(len(state.arms))
    return replace(state, floor_schedule=schedule)
