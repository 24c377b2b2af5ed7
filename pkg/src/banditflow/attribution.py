"""Reward attribution: join serve logs with interaction events.

Served recommendations and front-end interaction events are joined inside
a look-ahead window into unified records (one per serve), bots are
filtered, and the records are reduced to visitor-based sufficient
statistics: one Bernoulli trial per distinct (visitor, arm) pair per
epoch, no matter how many times the visitor was served.

Ingestion may append events concurrently; the join itself always runs as
one sequential pass over a frozen slice of the log.
"""

from __future__ import annotations

import logging
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .errors import ParameterError
from .posterior import SufficientStats

logger = logging.getLogger(__name__)

MS_PER_DAY = 86_400_000

# Look-ahead defaults: clicks happen within a session, purchases can take
# days or weeks.
DEFAULT_CLICK_WINDOW_MS = 30 * 60 * 1000
DEFAULT_PURCHASE_WINDOW_MS = 7 * MS_PER_DAY


class InteractionKind(str, Enum):
    VIEW = "view"
    CLICK = "click"
    PURCHASE = "purchase"


def epoch_of(timestamp_ms: int) -> int:
    """UTC calendar day of a millisecond timestamp."""
    return timestamp_ms // MS_PER_DAY


@dataclass(frozen=True, slots=True)
class ServedEvent:
    """One recommendation response served to a visitor."""

    visitor_id: str
    arm: str
    timestamp: int
    request_id: str

    def __post_init__(self):
        if not self.visitor_id or not self.arm or not self.request_id:
            raise ParameterError("served event fields must be non-empty")

    def to_json(self) -> dict:
        return {
            "type": "served",
            "visitor_id": self.visitor_id,
            "arm": self.arm,
            "timestamp": self.timestamp,
            "request_id": self.request_id,
        }


@dataclass(frozen=True, slots=True)
class InteractionEvent:
    """A front-end view/click/purchase, optionally tied to a request."""

    visitor_id: str
    kind: InteractionKind
    timestamp: int
    request_id: str | None = None

    def __post_init__(self):
        if not self.visitor_id:
            raise ParameterError("interaction visitor_id must be non-empty")
        if not isinstance(self.kind, InteractionKind):
            object.__setattr__(self, "kind", InteractionKind(self.kind))

    def to_json(self) -> dict:
        out = {
            "type": "interaction",
            "visitor_id": self.visitor_id,
            "kind": self.kind.value,
            "timestamp": self.timestamp,
        }
        if self.request_id is not None:
            out["request_id"] = self.request_id
        return out


@dataclass(frozen=True, slots=True)
class RudsRecord:
    """One serve joined with its in-window interactions."""

    visitor_id: str
    arm: str
    served_at: int
    clicked: bool
    purchased: bool
    epoch: int


def parse_event(obj: dict) -> ServedEvent | InteractionEvent:
    """Turn one decoded JSON object into a typed event.

    Raises ParameterError with a human-readable reason for anything
    malformed; callers count and log rejects, the stream never aborts.
    """
    if not isinstance(obj, dict):
        raise ParameterError("event must be a JSON object")
    kind = obj.get("type")
    try:
        ts = int(obj["timestamp"])
    except (KeyError, TypeError, ValueError):
        raise ParameterError("missing or non-integer timestamp") from None
    if ts < 0:
        raise ParameterError("negative timestamp")
    if kind == "served":
        try:
            return ServedEvent(
                visitor_id=str(obj["visitor_id"]),
                arm=str(obj["arm"]),
                timestamp=ts,
                request_id=str(obj["request_id"]),
            )
        except KeyError as exc:
            raise ParameterError(f"served event missing field {exc}") from None
    if kind == "interaction":
        raw_kind = obj.get("kind")
        try:
            interaction = InteractionKind(raw_kind)
        except ValueError:
            raise ParameterError(f"unknown interaction kind {raw_kind!r}") from None
        try:
            return InteractionEvent(
                visitor_id=str(obj["visitor_id"]),
                kind=interaction,
                timestamp=ts,
                request_id=str(obj["request_id"]) if "request_id" in obj else None,
            )
        except KeyError as exc:
            raise ParameterError(f"interaction missing field {exc}") from None
    raise ParameterError(f"unknown event type {kind!r}")


def _window_index(
    interactions: Iterable[InteractionEvent], kind: InteractionKind
) -> tuple[dict[str, list[int]], dict[str, list[tuple[str, int]]]]:
    """Split one interaction kind into per-visitor and per-request indexes,
    each sorted by timestamp for bisection."""
    by_visitor: dict[str, list[int]] = defaultdict(list)
    by_request: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for ev in interactions:
        if ev.kind is not kind:
            continue
        if ev.request_id is None:
            by_visitor[ev.visitor_id].append(ev.timestamp)
        else:
            by_request[ev.request_id].append((ev.visitor_id, ev.timestamp))
    for times in by_visitor.values():
        times.sort()
    for pairs in by_request.values():
        pairs.sort(key=lambda p: p[1])
    return dict(by_visitor), dict(by_request)


def _matches(
    served: ServedEvent,
    window_ms: int,
    by_visitor: dict[str, list[int]],
    by_request: dict[str, list[tuple[str, int]]],
) -> bool:
    lo, hi = served.timestamp, served.timestamp + window_ms
    times = by_visitor.get(served.visitor_id)
    if times and bisect_right(times, hi) > bisect_left(times, lo):
        return True
    for visitor, ts in by_request.get(served.request_id, ()):
        if visitor == served.visitor_id and lo <= ts <= hi:
            return True
    return False


def join_ruds(
    served: Iterable[ServedEvent],
    interactions: Iterable[InteractionEvent],
    click_window_ms: int = DEFAULT_CLICK_WINDOW_MS,
    purchase_window_ms: int = DEFAULT_PURCHASE_WINDOW_MS,
) -> list[RudsRecord]:
    """Join serves with in-window interactions into one record per serve.

    A serve counts as clicked iff the same visitor clicked within
    [served_at, served_at + click_window_ms]; an interaction carrying a
    request_id only matches the serve with that request_id.  Purchases are
    attributed the same way with their own window.  The output is sorted
    by (timestamp, request_id), so it is invariant under any permutation
    of the inputs; duplicate served request_ids are dropped (first in that
    canonical order wins) and logged.
    """
    if click_window_ms <= 0 or purchase_window_ms <= 0:
        raise ParameterError("look-ahead windows must be positive")
    interactions = list(interactions)
    clicks_v, clicks_r = _window_index(interactions, InteractionKind.CLICK)
    buys_v, buys_r = _window_index(interactions, InteractionKind.PURCHASE)

    ordered = sorted(served, key=lambda s: (s.timestamp, s.request_id))
    seen: set[str] = set()
    duplicates = 0
    records = []
    for s in ordered:
        if s.request_id in seen:
            duplicates += 1
            continue
        seen.add(s.request_id)
        records.append(
            RudsRecord(
                visitor_id=s.visitor_id,
                arm=s.arm,
                served_at=s.timestamp,
                clicked=_matches(s, click_window_ms, clicks_v, clicks_r),
                purchased=_matches(s, purchase_window_ms, buys_v, buys_r),
                epoch=s.timestamp // MS_PER_DAY,
            )
        )
    if duplicates:
        logger.warning("join dropped %d duplicate served request_ids", duplicates)
    return records


def filter_bots(
    records: Iterable[RudsRecord], is_bot: Callable[[str], bool]
) -> tuple[list[RudsRecord], int]:
    """Drop records from flagged visitors; returns (kept, dropped_count)."""
    kept = []
    dropped = 0
    for rec in records:
        if is_bot(rec.visitor_id):
            dropped += 1
        else:
            kept.append(rec)
    return kept, dropped


def aggregate_stats(
    records: Iterable[RudsRecord], epoch: int
) -> dict[str, SufficientStats]:
    """Visitor-based sufficient statistics for one epoch.

    One Bernoulli trial per (visitor, arm) pair: success if any of the
    visitor's serves for that arm was clicked, else failure.  Repeat views
    never add trials.  Every record must belong to the given epoch.
    """
    trial_clicked: dict[tuple[str, str], bool] = {}
    for rec in records:
        if rec.epoch != epoch:
            raise ParameterError(
                f"record epoch {rec.epoch} does not belong to batch epoch {epoch}"
            )
        key = (rec.visitor_id, rec.arm)
        trial_clicked[key] = trial_clicked.get(key, False) or rec.clicked
    successes: dict[str, int] = defaultdict(int)
    failures: dict[str, int] = defaultdict(int)
    for (_, arm), clicked in trial_clicked.items():
        if clicked:
            successes[arm] += 1
        else:
            failures[arm] += 1
    return {
        arm: SufficientStats(successes[arm], failures[arm])
        for arm in set(successes) | set(failures)
    }


def aggregate_all(
    records: Iterable[RudsRecord],
) -> dict[str, SufficientStats]:
    """Group records by epoch, aggregate each day, and sum the deltas.

    Convenience for batches that span more than one calendar day (e.g. a
    manually triggered catch-up run): the visitor-per-epoch trial rule is
    preserved within each day.
    """
    by_epoch: dict[int, list[RudsRecord]] = defaultdict(list)
    for rec in records:
        by_epoch[rec.epoch].append(rec)
    total: dict[str, SufficientStats] = {}
    for epoch, recs in by_epoch.items():
        for arm, stats in aggregate_stats(recs, epoch).items():
            total[arm] = total.get(arm, SufficientStats()) + stats
    return total


def purchase_stats(
    records: Iterable[RudsRecord],
) -> dict[str, SufficientStats]:
    """Visitor-based purchase counts per arm, exposed alongside clicks.

    Purchases never drive allocation; the trial rule mirrors
    aggregate_all with purchased in place of clicked.
    """
    by_key: dict[tuple[int, str, str], bool] = {}
    for rec in records:
        key = (rec.epoch, rec.visitor_id, rec.arm)
        by_key[key] = by_key.get(key, False) or rec.purchased
    out: dict[str, SufficientStats] = {}
    for (_, _, arm), purchased in by_key.items():
        prev = out.get(arm, SufficientStats())
        out[arm] = prev + SufficientStats(int(purchased), int(not purchased))
    return out
