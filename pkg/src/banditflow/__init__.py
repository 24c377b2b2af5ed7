"""Traffic allocation engine for recommender experiments.

Beta-Bernoulli Thompson sampling over competing variants, run as daily
mini-batches: event attribution, Monte-Carlo allocation with floors and
blacklists, a weighted randomizer, offline ranking metrics, a synthetic
marketplace simulator, durable logs with crash recovery, and an HTTP
service with a CLI front door.
"""

from .allocator import (
    DEFAULT_FLOOR,
    DEFAULT_N_DRAWS,
    Allocation,
    FloorSchedule,
    apply_blacklist,
    apply_floor,
    raw_allocation,
    uniform_allocation,
)
from .attribution import (
    InteractionEvent,
    InteractionKind,
    RudsRecord,
    ServedEvent,
    aggregate_all,
    aggregate_stats,
    epoch_of,
    filter_bots,
    join_ruds,
    parse_event,
    purchase_stats,
)
from .campaign import (
    AuditRecord,
    CampaignState,
    add_arm,
    new_campaign,
    run_batch,
    set_blacklisted,
    set_floor_schedule,
)
from .errors import (
    BanditError,
    CampaignError,
    ConfigurationError,
    ConflictError,
    LogGapError,
    NotFoundError,
    ParameterError,
)
from .metrics import (
    InteractionMatrix,
    RankedList,
    evaluate,
    map_at_k,
    mrr,
    ndcg_at_k,
)
from .persistence import CampaignLog, CampaignStore, read_snapshot, write_snapshot
from .posterior import BetaPosterior, SufficientStats, prior, sample, update
from .randomizer import CumulativeAllocation, build_cumulative, pick_arm
from .simulator import (
    CampaignConfig,
    CampaignTrace,
    EnvironmentSpec,
    regret,
    simulate_campaign,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AuditRecord",
    "BanditError",
    "BetaPosterior",
    "CampaignConfig",
    "CampaignError",
    "CampaignLog",
    "CampaignState",
    "CampaignStore",
    "CampaignTrace",
    "ConfigurationError",
    "ConflictError",
    "CumulativeAllocation",
    "DEFAULT_FLOOR",
    "DEFAULT_N_DRAWS",
    "EnvironmentSpec",
    "InteractionEvent",
    "InteractionKind",
    "InteractionMatrix",
    "LogGapError",
    "NotFoundError",
    "ParameterError",
    "RankedList",
    "RudsRecord",
    "ServedEvent",
    "SufficientStats",
    "add_arm",
    "aggregate_all",
    "aggregate_stats",
    "apply_blacklist",
    "apply_floor",
    "build_cumulative",
    "epoch_of",
    "evaluate",
    "filter_bots",
    "join_ruds",
    "map_at_k",
    "mrr",
    "ndcg_at_k",
    "new_campaign",
    "parse_event",
    "pick_arm",
    "prior",
    "purchase_stats",
    "raw_allocation",
    "read_snapshot",
    "regret",
    "run_batch",
    "sample",
    "set_blacklisted",
    "set_floor_schedule",
    "simulate_campaign",
    "uniform_allocation",
    "update",
    "write_snapshot",
]
