"""Durable storage and crash-safe recovery.

Layout (one directory per campaign under the store root):

* ``log.jsonl`` — append-only campaign log, the source of truth.  One
  JSON record per line: the creation record, then batch and admin
  records in commit order.  Appends are fsynced before the caller
  proceeds.
* ``campaign-<id>-epoch-<t>.json`` — atomic state snapshots (write to a
  temp file, fsync, rename); an optimization over replaying the log.
* ``events-<date>.jsonl[.gz]`` — raw served/interaction event segments,
  named by the UTC date of the event timestamp.

Commit order is: log append first, then snapshot.  A crash between the
two recovers to the post-batch state (older snapshot plus log tail); a
crash mid-append leaves a torn last line, which recovery ignores,
landing on the pre-batch state.  No hybrid is reachable.

Replay trusts the recorded vectors: posteriors come from summing the
logged deltas and the allocation is the logged post-floor vector, so no
random draws are re-executed.
"""

from __future__ import annotations

import gzip
import json
import os
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .allocator import Allocation, FloorSchedule
from .attribution import InteractionEvent, ServedEvent, parse_event
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
    CampaignError,
    ConflictError,
    LogGapError,
    NotFoundError,
)
from .posterior import SufficientStats

SNAPSHOT_VERSION = 1
LOG_NAME = "log.jsonl"


# ---------------------------------------------------------------------------
# JSON codecs
# ---------------------------------------------------------------------------


def _schedule_to_json(schedule: FloorSchedule) -> dict:
    return {"default": schedule.default, "entries": [list(e) for e in schedule.entries]}


def _schedule_from_json(obj: dict) -> FloorSchedule:
    return FloorSchedule(
        default=obj["default"],
        entries=tuple((int(e), float(f)) for e, f in obj["entries"]),
    )


def _audit_to_json(rec: AuditRecord) -> dict:
    return {
        "type": "batch",
        "epoch": rec.epoch,
        "raw": rec.raw,
        "post_blacklist": rec.post_blacklist,
        "post_floor": rec.post_floor,
        "stats_delta": {a: [s.successes, s.failures] for a, s in rec.stats_delta.items()},
        "floor": rec.floor,
        "seed": rec.seed,
        "n_draws": rec.n_draws,
        "blacklist": list(rec.blacklist),
    }


def _audit_from_json(obj: dict) -> AuditRecord:
    return AuditRecord(
        epoch=obj["epoch"],
        raw=dict(obj["raw"]),
        post_blacklist=dict(obj["post_blacklist"]),
        post_floor=dict(obj["post_floor"]),
        stats_delta={
            a: SufficientStats(int(s), int(f)) for a, (s, f) in obj["stats_delta"].items()
        },
        floor=obj["floor"],
        seed=obj["seed"],
        n_draws=obj["n_draws"],
        blacklist=tuple(obj["blacklist"]),
    )


def state_to_json(state: CampaignState) -> dict:
    return {
        "version": SNAPSHOT_VERSION,
        "campaign_id": state.campaign_id,
        "epoch": state.epoch,
        "arms": {a: [s.successes, s.failures] for a, s in state.arms.items()},
        "floor_schedule": _schedule_to_json(state.floor_schedule),
        "blacklist": sorted(state.blacklist),
        "allocation": {
            "weights": state.allocation.weights,
            "epoch": state.allocation.epoch,
        },
        "audit_log": [_audit_to_json(r) for r in state.audit_log],
        "log_cursor": state.log_cursor,
    }


def state_from_json(obj: dict) -> CampaignState:
    if obj.get("version") != SNAPSHOT_VERSION:
        raise CampaignError(f"unsupported snapshot version {obj.get('version')!r}")
    return CampaignState(
        campaign_id=obj["campaign_id"],
        arms={a: SufficientStats(int(s), int(f)) for a, (s, f) in obj["arms"].items()},
        epoch=obj["epoch"],
        floor_schedule=_schedule_from_json(obj["floor_schedule"]),
        blacklist=frozenset(obj["blacklist"]),
        allocation=Allocation(
            weights=dict(obj["allocation"]["weights"]),
            epoch=obj["allocation"]["epoch"],
        ),
        audit_log=tuple(_audit_from_json(r) for r in obj["audit_log"]),
        log_cursor=obj["log_cursor"],
    )


# ---------------------------------------------------------------------------
# atomic snapshots
# ---------------------------------------------------------------------------


def snapshot_path(root: str | Path, campaign_id: str, epoch: int) -> Path:
    return Path(root) / f"campaign-{campaign_id}-epoch-{epoch}.json"


def _fsync_dir(path: Path) -> None:
    fd = os.open(path, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def write_snapshot(state: CampaignState, root: str | Path) -> Path:
    """Atomically persist the state as campaign-<id>-epoch-<t>.json."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    final = snapshot_path(root, state.campaign_id, state.epoch)
    tmp = final.with_name(final.name + f".tmp{os.getpid()}")
    with tmp.open("w") as fh:
        json.dump(state_to_json(state), fh)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, final)
    _fsync_dir(root)
    return final


def read_snapshot(path: str | Path) -> CampaignState:
    """Load one snapshot file; missing → NotFoundError, corrupt →
    CampaignError.  Never fabricates a default state."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise NotFoundError(f"no snapshot at {path}") from None
    try:
        return state_from_json(json.loads(text))
    except CampaignError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CampaignError(f"corrupt snapshot {path.name}: {exc}") from None


# ---------------------------------------------------------------------------
# campaign log
# ---------------------------------------------------------------------------


class CampaignLog:
    """Append-only JSONL log with fsync on append and a torn-tail-tolerant
    reader."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = None

    def append(self, record: dict) -> None:
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a")
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def read(self) -> list[dict]:
        """All complete records.  A torn final line (crash mid-append) is
        dropped; corruption anywhere else raises."""
        if not self.path.exists():
            return []
        records = []
        lines = self.path.read_text().split("\n")
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if all(not later.strip() for later in lines[i + 1 :]):
                    break
                raise CampaignError(f"campaign log corrupt at line {i + 1}") from None
        return records


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def apply_record(state: CampaignState | None, rec: dict) -> CampaignState:
    """Fold one log record into the state, advancing the log cursor."""
    kind = rec.get("type")
    if state is None:
        if kind != "create":
            raise CampaignError(f"log must start with a create record, got {kind!r}")
        schedule = (
            _schedule_from_json(rec["floor_schedule"]) if rec.get("floor_schedule") else None
        )
        state = new_campaign(rec["campaign_id"], list(rec["arms"]), schedule)
        return replace(state, log_cursor=1)

    if kind == "create":
        raise CampaignError("duplicate create record in log")
    if kind == "batch":
        expected = state.epoch + 1
        if rec["epoch"] > expected:
            missing = (expected, rec["epoch"] - 1)
            span = str(missing[0]) if missing[0] == missing[1] else f"{missing[0]}..{missing[1]}"
            raise LogGapError(f"campaign log is missing epoch {span}", missing)
        if rec["epoch"] < expected:
            raise CampaignError(
                f"batch record epoch {rec['epoch']} out of order, expected {expected}"
            )
        audit = _audit_from_json(rec)
        unknown = set(audit.stats_delta) - set(state.arms)
        if unknown:
            raise CampaignError(f"batch record references unknown arms: {sorted(unknown)}")
        arms = {
            a: s + audit.stats_delta.get(a, SufficientStats())
            for a, s in state.arms.items()
        }
        new = replace(
            state,
            arms=arms,
            epoch=audit.epoch,
            allocation=Allocation(weights=dict(audit.post_floor), epoch=audit.epoch),
            audit_log=state.audit_log + (audit,),
        )
    elif kind == "add_arm":
        new = add_arm(state, rec["arm"])
    elif kind == "blacklist":
        new = set_blacklisted(state, rec["arm"], bool(rec["on"]))
    elif kind == "floor_schedule":
        new = set_floor_schedule(state, _schedule_from_json(rec["schedule"]))
    else:
        raise CampaignError(f"unknown log record type {kind!r}")
    return replace(new, log_cursor=state.log_cursor + 1)


def replay_records(records: Iterable[dict], base: CampaignState | None = None) -> CampaignState:
    state = base
    for rec in records:
        state = apply_record(state, rec)
    if state is None:
        raise NotFoundError("empty campaign log, nothing to replay")
    return state


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------


def _segment_date(timestamp_ms: int) -> str:
    return datetime.fromtimestamp(timestamp_ms / 1000.0, tz=timezone.utc).date().isoformat()


class CampaignStore:
    """All campaigns under one root directory.

    Mutations follow the same discipline: run the pure state transition,
    append its log record (fsynced), then snapshot atomically.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._logs: dict[str, CampaignLog] = {}

    # -- paths

    def campaign_dir(self, campaign_id: str) -> Path:
        return self.root / campaign_id

    def _log(self, campaign_id: str) -> CampaignLog:
        if campaign_id not in self._logs:
            self._logs[campaign_id] = CampaignLog(self.campaign_dir(campaign_id) / LOG_NAME)
        return self._logs[campaign_id]

    def list_campaigns(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / LOG_NAME).exists()
        )

    def exists(self, campaign_id: str) -> bool:
        return (self.campaign_dir(campaign_id) / LOG_NAME).exists()

    def close(self) -> None:
        for log in self._logs.values():
            log.close()
        self._logs.clear()

    # -- lifecycle

    def create(
        self,
        campaign_id: str,
        arms: list[str] | tuple[str, ...],
        floor_schedule: FloorSchedule | None = None,
        extra: dict | None = None,
    ) -> CampaignState:
        """Create and persist a fresh campaign.  ``extra`` keys ride along
        on the creation record (callers use it for their own settings);
        replay ignores them."""
        if self.exists(campaign_id):
            raise ConflictError(f"campaign {campaign_id!r} already exists")
        state = new_campaign(campaign_id, arms, floor_schedule)
        rec = {
            "type": "create",
            "campaign_id": campaign_id,
            "arms": sorted(state.arms),
            "floor_schedule": _schedule_to_json(state.floor_schedule),
        }
        if extra:
            rec.update(extra)
        self._log(campaign_id).append(rec)
        state = replace(state, log_cursor=1)
        write_snapshot(state, self.campaign_dir(campaign_id))
        return state

    def commit_batch(
        self,
        state: CampaignState,
        stats_delta: dict[str, SufficientStats],
        n_draws: int,
        seed: int,
        events_consumed: int = 0,
    ) -> tuple[CampaignState, Allocation]:
        """Run the mini-batch and make it durable.

        An all-zero delta changes nothing and writes nothing.  Otherwise
        the batch record reaches the fsynced log before the snapshot is
        replaced, so a crash anywhere recovers cleanly.
        """
        new_state, alloc = run_batch(state, stats_delta, n_draws=n_draws, seed=seed)
        if new_state is state:
            return state, alloc
        rec = _audit_to_json(new_state.audit_log[-1])
        if events_consumed:
            rec["events_consumed"] = events_consumed
        self._log(state.campaign_id).append(rec)
        new_state = replace(new_state, log_cursor=state.log_cursor + 1)
        write_snapshot(new_state, self.campaign_dir(state.campaign_id))
        return new_state, alloc

    def _commit_admin(self, new_state: CampaignState, rec: dict) -> CampaignState:
        self._log(new_state.campaign_id).append(rec)
        new_state = replace(new_state, log_cursor=new_state.log_cursor + 1)
        write_snapshot(new_state, self.campaign_dir(new_state.campaign_id))
        return new_state

    def commit_add_arm(self, state: CampaignState, arm: str) -> CampaignState:
        return self._commit_admin(add_arm(state, arm), {"type": "add_arm", "arm": arm})

    def commit_blacklist(
        self, state: CampaignState, arm: str, blacklisted: bool
    ) -> CampaignState:
        return self._commit_admin(
            set_blacklisted(state, arm, blacklisted),
            {"type": "blacklist", "arm": arm, "on": blacklisted},
        )

    def commit_floor_schedule(
        self, state: CampaignState, schedule: FloorSchedule
    ) -> CampaignState:
        return self._commit_admin(
            set_floor_schedule(state, schedule),
            {"type": "floor_schedule", "schedule": _schedule_to_json(schedule)},
        )

    # -- recovery

    def _snapshots(self, campaign_id: str) -> list[tuple[int, Path]]:
        """(epoch, path) pairs, newest epoch first."""
        prefix = f"campaign-{campaign_id}-epoch-"
        out = []
        cdir = self.campaign_dir(campaign_id)
        if not cdir.exists():
            return []
        for path in cdir.glob(f"{prefix}*.json"):
            suffix = path.name[len(prefix) : -len(".json")]
            if suffix.isdigit():
                out.append((int(suffix), path))
        return sorted(out, reverse=True)

    def replay(self, campaign_id: str, from_epoch: int = 0) -> CampaignState:
        """Rebuild state from the log, optionally starting at the snapshot
        taken at ``from_epoch``.  A missing batch epoch raises a gap error
        naming the missing range."""
        records = self._log(campaign_id).read()
        if not records:
            raise NotFoundError(f"unknown campaign {campaign_id!r}")
        if from_epoch == 0:
            return replay_records(records)
        base = read_snapshot(snapshot_path(self.campaign_dir(campaign_id), campaign_id, from_epoch))
        return replay_records(records[base.log_cursor :], base)

    def recover(self, campaign_id: str) -> CampaignState:
        """Newest valid snapshot plus the log tail; falls back through
        older snapshots if the latest is corrupt, and to full replay if
        none load."""
        records = self._log(campaign_id).read()
        for _, path in self._snapshots(campaign_id):
            try:
                base = read_snapshot(path)
            except (CampaignError, NotFoundError):
                continue
            return replay_records(records[base.log_cursor :], base)
        if not records:
            raise NotFoundError(f"unknown campaign {campaign_id!r}")
        return replay_records(records)

    def events_consumed(self, campaign_id: str) -> int:
        """How many ingested events past batches have already used."""
        return sum(
            rec.get("events_consumed", 0)
            for rec in self._log(campaign_id).read()
            if rec.get("type") == "batch"
        )

    # -- raw event segments

    def _segment(self, campaign_id: str, date: str, compressed: bool = False) -> Path:
        name = f"events-{date}.jsonl" + (".gz" if compressed else "")
        return self.campaign_dir(campaign_id) / name

    def append_events(
        self, campaign_id: str, events: Iterable[ServedEvent | InteractionEvent]
    ) -> int:
        """Append raw events to their per-date segments; one fsync per
        touched segment."""
        by_date: dict[str, list[dict]] = {}
        for ev in events:
            by_date.setdefault(_segment_date(ev.timestamp), []).append(ev.to_json())
        total = 0
        for date, objs in sorted(by_date.items()):
            path = self._segment(campaign_id, date)
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("a") as fh:
                for obj in objs:
                    fh.write(json.dumps(obj) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            total += len(objs)
        return total

    def read_events(self, campaign_id: str) -> list[ServedEvent | InteractionEvent]:
        """All stored events across segments (plain and gzip), in date
        order; a torn final line per segment is dropped."""
        cdir = self.campaign_dir(campaign_id)
        if not cdir.exists():
            return []
        paths: dict[str, Path] = {}
        for path in sorted(cdir.glob("events-*.jsonl.gz")):
            paths[path.name[: -len(".jsonl.gz")]] = path
        for path in sorted(cdir.glob("events-*.jsonl")):
            paths[path.name[: -len(".jsonl")]] = path
        events: list[ServedEvent | InteractionEvent] = []
        for _, path in sorted(paths.items()):
            opener = gzip.open if path.suffix == ".gz" else open
            with opener(path, "rt") as fh:
                lines = fh.read().split("\n")
            for i, line in enumerate(lines):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    if all(not later.strip() for later in lines[i + 1 :]):
                        break
                    raise CampaignError(
                        f"event segment {path.name} corrupt at line {i + 1}"
                    ) from None
                events.append(parse_event(obj))
        return events

    def compress_segment(self, campaign_id: str, date: str) -> Path:
        """Gzip one closed event segment in place."""
        plain = self._segment(campaign_id, date)
        if not plain.exists():
            raise NotFoundError(f"no event segment for {date}")
        packed = self._segment(campaign_id, date, compressed=True)
        with plain.open("rb") as src, gzip.open(packed, "wb") as dst:
            dst.write(src.read())
        plain.unlink()
        return packed
