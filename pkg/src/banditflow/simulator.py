"""Desk-scale synthetic marketplace for end-to-end campaign runs.

Arms are Bernoulli click sources with optional seasonality, piecewise
drift, bot traffic and epoch-granular click delay.  Every epoch the
simulator routes visitors through the production randomizer, emits the
same served/interaction events the service would ingest, runs the real
attribution join and the real mini-batch, and records an allocation
trace with cumulative expected regret.

Everything is driven from a single seed through independent substreams
(human traffic, bot traffic, batch draws), so adding bots never perturbs
the human trajectory and identical inputs give bit-identical traces.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .allocator import DEFAULT_N_DRAWS, FloorSchedule
from .attribution import (
    MS_PER_DAY,
    InteractionEvent,
    InteractionKind,
    ServedEvent,
    aggregate_stats,
    filter_bots,
    join_ruds,
)
from .campaign import add_arm, new_campaign, run_batch, set_blacklisted
from .errors import ConfigurationError, ParameterError
from .randomizer import build_cumulative, pick_arm

BOT_PREFIX = "bot"
CLICK_OFFSET_MAX_MS = 25 * 60 * 1000  # immediate clicks land well inside the window


def is_bot_visitor(visitor_id: str) -> bool:
    return visitor_id.startswith(BOT_PREFIX)


@dataclass(frozen=True)
class EnvironmentSpec:
    """The synthetic world: per-arm click rates and traffic shape."""

    arms: dict[str, float]
    visitors_per_epoch: int
    seasonality: tuple[float, ...] = ()
    drift: dict[str, tuple[tuple[int, float], ...]] = field(default_factory=dict)
    bot_fraction: float = 0.0
    bot_behavior: str = "click_spam"
    click_delay: tuple[float, ...] = (1.0,)
    repeat_views: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.arms:
            raise ConfigurationError("environment needs at least one arm")
        for arm, ctr in self.arms.items():
            if not 0.0 < ctr < 1.0:
                raise ConfigurationError(f"base ctr for {arm!r} must be in (0, 1), got {ctr}")
        if self.visitors_per_epoch < 1:
            raise ConfigurationError("visitors_per_epoch must be positive")
        if any(m < 0.0 for m in self.seasonality):
            raise ConfigurationError("seasonality multipliers must be >= 0")
        for arm, schedule in self.drift.items():
            if arm not in self.arms:
                raise ConfigurationError(f"drift references unknown arm {arm!r}")
            for epoch, ctr in schedule:
                if epoch < 0 or not 0.0 < ctr < 1.0:
                    raise ConfigurationError(f"bad drift point ({epoch}, {ctr}) for {arm!r}")
        object.__setattr__(
            self, "drift", {a: tuple(sorted(s)) for a, s in self.drift.items()}
        )
        if not 0.0 <= self.bot_fraction < 1.0:
            raise ConfigurationError("bot_fraction must be in [0, 1)")
        if self.bot_behavior not in ("click_spam", "click_free"):
            raise ConfigurationError(f"unknown bot behavior {self.bot_behavior!r}")
        if not self.click_delay or any(p < 0.0 for p in self.click_delay):
            raise ConfigurationError("click_delay must be a non-negative distribution")
        if abs(sum(self.click_delay) - 1.0) > 1e-9:
            raise ConfigurationError("click_delay probabilities must sum to 1")
        if self.repeat_views < 1:
            raise ConfigurationError("repeat_views must be >= 1")

    def base_ctr_at(self, arm: str, epoch: int) -> float:
        ctr = self.arms[arm]
        for from_epoch, new_ctr in self.drift.get(arm, ()):
            if from_epoch <= epoch:
                ctr = new_ctr
        return ctr

    def multiplier(self, epoch: int) -> float:
        if epoch < len(self.seasonality):
            return self.seasonality[epoch]
        return 1.0

    def effective_ctr(self, arm: str, epoch: int) -> float:
        return min(1.0, max(0.0, self.base_ctr_at(arm, epoch) * self.multiplier(epoch)))


@dataclass(frozen=True)
class CampaignConfig:
    """Campaign-side knobs: floor schedule, draw count and admin events
    (arm additions and blacklist flips) keyed by the epoch at whose start
    they are issued; like the live service they influence allocations
    from the following batch."""

    floor_schedule: FloorSchedule | None = None
    n_draws: int = DEFAULT_N_DRAWS
    initial_arms: tuple[str, ...] | None = None
    arm_additions: dict[int, tuple[str, ...]] = field(default_factory=dict)
    blacklist_on: dict[int, tuple[str, ...]] = field(default_factory=dict)
    blacklist_off: dict[int, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class EpochRecord:
    """One epoch of the trace.

    ``weights`` is the allocation that served the epoch, ``stats`` the
    cumulative non-bot (successes, failures) per arm after the epoch's
    batch, and ``regret`` the cumulative expected regret so far.
    """

    epoch: int
    weights: dict[str, float]
    stats: dict[str, tuple[int, int]]
    effective_ctrs: dict[str, float]
    regret: float


@dataclass(frozen=True)
class CampaignTrace:
    records: tuple[EpochRecord, ...]
    final_weights: dict[str, float]


def regret(trace: CampaignTrace) -> float:
    """Cumulative expected regret: per epoch, visitors times the gap
    between the best live arm's rate and the served mixture's rate."""
    if not trace.records:
        raise ParameterError("trace has no epochs")
    return trace.records[-1].regret


def _spawn_rngs(seed: int):
    human_ss, bot_ss, batch_ss = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(human_ss),
        np.random.default_rng(bot_ss),
        np.random.default_rng(batch_ss),
    )


def _assign(cum, u: np.ndarray) -> list[int]:
    """Vectorized bucket lookup, identical to pick_arm per element."""
    cums = np.asarray(cum._cums)
    idx = np.searchsorted(cums, u, side="right")
    out = idx.tolist()
    arms = cum._arms
    for i, j in enumerate(out):
        if j >= len(arms):
            out[i] = arms.index(pick_arm(cum, float(u[i])))
    return out


def _human_epoch(
    env: EnvironmentSpec,
    epoch: int,
    cum,
    rng: np.random.Generator,
    delay_cdf: np.ndarray,
    served: list[ServedEvent],
    fresh: list[InteractionEvent],
    pending: dict[int, list[InteractionEvent]],
) -> None:
    n_vis = env.visitors_per_epoch
    n_views = n_vis * env.repeat_views
    u = rng.random(n_views)
    click_u = rng.random(n_views).tolist()
    delay_u = rng.random(n_views)
    offsets = rng.integers(0, MS_PER_DAY, size=n_views).tolist()
    click_offs = rng.integers(0, CLICK_OFFSET_MAX_MS, size=n_views).tolist()

    arm_idx = _assign(cum, u)
    arms = cum._arms
    ctr_by_idx = [env.effective_ctr(a, epoch) for a in arms]
    delays = np.minimum(
        np.searchsorted(delay_cdf, delay_u, side="right"), len(delay_cdf) - 1
    ).tolist()

    visitor_ids = [f"v{epoch}-{k}" for k in range(n_vis)]
    epoch_ms = epoch * MS_PER_DAY
    for i in range(n_views):
        j = arm_idx[i]
        vid = visitor_ids[i % n_vis]
        ts = epoch_ms + offsets[i]
        rid = f"r{epoch}-{i}"
        served.append(ServedEvent(vid, arms[j], ts, rid))
        if click_u[i] < ctr_by_idx[j]:
            d = delays[i]
            click = InteractionEvent(
                vid, InteractionKind.CLICK, ts + click_offs[i] + d * MS_PER_DAY, rid
            )
            if d == 0:
                fresh.append(click)
            else:
                pending.setdefault(epoch + d, []).append(click)


def _bot_epoch(
    env: EnvironmentSpec,
    epoch: int,
    cum,
    rng: np.random.Generator,
    served: list[ServedEvent],
    fresh: list[InteractionEvent],
) -> None:
    f = env.bot_fraction
    n_bot = int(round(env.visitors_per_epoch * f / (1.0 - f)))
    if n_bot == 0:
        return
    u = rng.random(n_bot)
    offsets = rng.integers(0, MS_PER_DAY, size=n_bot).tolist()
    spam = env.bot_behavior == "click_spam"
    n_clicks = rng.integers(1, 4, size=n_bot).tolist() if spam else [0] * n_bot

    arm_idx = _assign(cum, u)
    arms = cum._arms
    epoch_ms = epoch * MS_PER_DAY
    for i in range(n_bot):
        vid = f"{BOT_PREFIX}{epoch}-{i}"
        ts = epoch_ms + offsets[i]
        rid = f"b{epoch}-{i}"
        served.append(ServedEvent(vid, arms[arm_idx[i]], ts, rid))
        for c in range(n_clicks[i]):
            fresh.append(
                InteractionEvent(vid, InteractionKind.CLICK, ts + (c + 1) * 1000, rid)
            )


def simulate_campaign(
    env: EnvironmentSpec,
    config: CampaignConfig | None = None,
    n_epochs: int = 14,
) -> CampaignTrace:
    """Run a full campaign for ``n_epochs`` epochs and return its trace.

    Each epoch: apply scheduled admin events, serve every visitor through
    the randomizer under the current allocation, join interactions via the
    attribution pipeline (bots filtered by prefix), run the mini-batch,
    and append a trace record.  Deterministic for identical inputs.
    """
    if n_epochs < 1:
        raise ParameterError("n_epochs must be >= 1")
    config = config or CampaignConfig()
    initial = (
        tuple(config.initial_arms)
        if config.initial_arms is not None
        else tuple(sorted(env.arms))
    )
    added = {a for arms in config.arm_additions.values() for a in arms}
    for arm in set(initial) | added:
        if arm not in env.arms:
            raise ConfigurationError(f"campaign arm {arm!r} has no environment ctr")
    if added & set(initial):
        raise ConfigurationError("arm_additions overlap the initial arms")

    state = new_campaign("sim", list(initial), config.floor_schedule)
    rng_h, rng_b, rng_batch = _spawn_rngs(env.seed)
    delay_cdf = np.cumsum(env.click_delay)
    pending: dict[int, list[InteractionEvent]] = {}
    records: list[EpochRecord] = []
    regret_cum = 0.0

    for epoch in range(n_epochs):
        for arm in config.arm_additions.get(epoch, ()):
            state = add_arm(state, arm)
        for arm in config.blacklist_on.get(epoch, ()):
            state = set_blacklisted(state, arm, True)
        for arm in config.blacklist_off.get(epoch, ()):
            state = set_blacklisted(state, arm, False)

        weights = dict(state.allocation.weights)
        live = [a for a in weights if a not in state.blacklist]
        cum = build_cumulative(state.allocation)

        served: list[ServedEvent] = []
        interactions = pending.pop(epoch, [])
        _human_epoch(env, epoch, cum, rng_h, delay_cdf, served, interactions, pending)
        if env.bot_fraction > 0.0:
            _bot_epoch(env, epoch, cum, rng_b, served, interactions)

        ruds = join_ruds(served, interactions)
        humans, _ = filter_bots(ruds, is_bot_visitor)
        delta = aggregate_stats(humans, epoch)
        batch_seed = int(rng_batch.integers(0, 2**63 - 1))
        state, _ = run_batch(state, delta, n_draws=config.n_draws, seed=batch_seed)

        ctrs = {a: env.effective_ctr(a, epoch) for a in weights}
        best = max(ctrs[a] for a in live)
        mixture = sum(weights[a] * ctrs[a] for a in weights)
        regret_cum += env.visitors_per_epoch * (best - mixture)
        records.append(
            EpochRecord(
                epoch=epoch,
                weights=weights,
                stats={a: (s.successes, s.failures) for a, s in state.arms.items()},
                effective_ctrs=ctrs,
                regret=regret_cum,
            )
        )

    return CampaignTrace(
        records=tuple(records), final_weights=dict(state.allocation.weights)
    )


# ---------------------------------------------------------------------------
# spec files
# ---------------------------------------------------------------------------


def environment_from_json(obj: dict) -> EnvironmentSpec:
    try:
        return EnvironmentSpec(
            arms={str(a): float(c) for a, c in obj["arms"].items()},
            visitors_per_epoch=int(obj["visitors_per_epoch"]),
            seasonality=tuple(float(m) for m in obj.get("seasonality", ())),
            drift={
                str(a): tuple((int(e), float(c)) for e, c in points)
                for a, points in obj.get("drift", {}).items()
            },
            bot_fraction=float(obj.get("bot_fraction", 0.0)),
            bot_behavior=str(obj.get("bot_behavior", "click_spam")),
            click_delay=tuple(float(p) for p in obj.get("click_delay", (1.0,))),
            repeat_views=int(obj.get("repeat_views", 1)),
            seed=int(obj.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParameterError(f"malformed environment spec: {exc}") from None


def campaign_config_from_json(obj: dict) -> CampaignConfig:
    def by_epoch(key: str) -> dict[int, tuple[str, ...]]:
        return {
            int(epoch): tuple(str(a) for a in arms)
            for epoch, arms in obj.get(key, {}).items()
        }

    try:
        schedule = None
        if "floor_schedule" in obj:
            fs = obj["floor_schedule"]
            schedule = FloorSchedule(
                default=float(fs.get("default", 0.05)),
                entries=tuple((int(e), float(f)) for e, f in fs.get("entries", ())),
            )
        elif "floor" in obj:
            schedule = FloorSchedule(default=float(obj["floor"]))
        initial = obj.get("initial_arms")
        return CampaignConfig(
            floor_schedule=schedule,
            n_draws=int(obj.get("n_draws", DEFAULT_N_DRAWS)),
            initial_arms=tuple(str(a) for a in initial) if initial is not None else None,
            arm_additions=by_epoch("arm_additions"),
            blacklist_on=by_epoch("blacklist_on"),
            blacklist_off=by_epoch("blacklist_off"),
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ParameterError(f"malformed campaign config: {exc}") from None


# ---------------------------------------------------------------------------
# trace export
# ---------------------------------------------------------------------------


def trace_to_json(trace: CampaignTrace) -> dict:
    return {
        "records": [
            {
                "epoch": r.epoch,
                "weights": r.weights,
                "stats": {a: list(sf) for a, sf in r.stats.items()},
                "effective_ctrs": r.effective_ctrs,
                "regret_cum": r.regret,
            }
            for r in trace.records
        ],
        "final_weights": trace.final_weights,
    }


def trace_from_json(obj: dict) -> CampaignTrace:
    try:
        records = tuple(
            EpochRecord(
                epoch=r["epoch"],
                weights=dict(r["weights"]),
                stats={a: (int(s), int(f)) for a, (s, f) in r["stats"].items()},
                effective_ctrs=dict(r["effective_ctrs"]),
                regret=r["regret_cum"],
            )
            for r in obj["records"]
        )
        return CampaignTrace(records=records, final_weights=dict(obj["final_weights"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed trace JSON: {exc}") from None


def write_trace_json(trace: CampaignTrace, path: str | Path) -> None:
    Path(path).write_text(json.dumps(trace_to_json(trace), indent=2) + "\n")


def write_trace_csv(trace: CampaignTrace, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "arm", "weight", "S", "F", "true_ctr", "regret_cum"])
        for r in trace.records:
            for arm in sorted(r.weights):
                s, f = r.stats.get(arm, (0, 0))
                writer.writerow(
                    [r.epoch, arm, r.weights[arm], s, f, r.effective_ctrs[arm], r.regret]
                )


def plot_trace(trace: CampaignTrace, path: str | Path) -> None:
    """Render the allocation timeseries (plus the post-final-batch point)
    to an SVG file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    arms = sorted({a for r in trace.records for a in r.weights})
    epochs = [r.epoch for r in trace.records] + [trace.records[-1].epoch + 1]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for arm in arms:
        series = [r.weights.get(arm, 0.0) for r in trace.records]
        series.append(trace.final_weights.get(arm, 0.0))
        ax.plot(epochs, series, label=arm, linewidth=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("traffic share")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center right", fontsize=8)
    ax.set_title("allocation over time")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
