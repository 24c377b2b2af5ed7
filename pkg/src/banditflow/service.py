"""HTTP facade over the engine.

Endpoints cover event ingestion, per-request arm assignment, batch
triggering, campaign administration and the monitoring feed.  All
mutations go through the durable store, so replaying the logs
reproduces campaign history exactly.

Concurrency: reads are lock-free against immutable state snapshots;
each campaign has a single-writer lock.  Admin calls queue on it, a
second concurrent batch trigger is rejected with a conflict instead of
queueing (two stacked batches is never what the operator meant).

Admin mutations (blacklist, add-arm, floor changes) take effect at the
next batch, never mid-epoch: the published allocation stays immutable
between batches.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from scipy import stats as scipy_stats

from .allocator import DEFAULT_FLOOR, DEFAULT_N_DRAWS, FloorSchedule
from .attribution import (
    InteractionEvent,
    ServedEvent,
    aggregate_all,
    filter_bots,
    join_ruds,
    parse_event,
)
from .campaign import CampaignState
from .errors import (
    BanditError,
    ConflictError,
    NotFoundError,
    ParameterError,
)
from .persistence import CampaignStore
from .posterior import update
from .randomizer import build_cumulative, pick_arm

STATUS_BY_CODE = {
    "invalid": 400,
    "not_found": 404,
    "conflict": 409,
    "infeasible": 422,
    "internal": 500,
}

_ID_CHARS = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-")


@dataclass
class ServiceConfig:
    """Service settings; `load_config` reads them from JSON with
    environment overrides for port and data directory."""

    port: int = 8000
    data_dir: str = "./data"
    n_draws: int = DEFAULT_N_DRAWS
    default_floor: float = DEFAULT_FLOOR
    batch_time_utc: str | None = None
    bot_prefix: str | None = "bot"
    api_token: str | None = None
    seed: int | None = None


def load_config(path: str | Path | None = None) -> ServiceConfig:
    """Config file (JSON) with BANDITFLOW_PORT / BANDITFLOW_DATA_DIR
    environment overrides."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise NotFoundError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config file is not valid JSON: {exc}") from None
    known = {f for f in ServiceConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    config = ServiceConfig(**raw)
    if "BANDITFLOW_PORT" in os.environ:
        config.port = int(os.environ["BANDITFLOW_PORT"])
    if "BANDITFLOW_DATA_DIR" in os.environ:
        config.data_dir = os.environ["BANDITFLOW_DATA_DIR"]
    return config


@dataclass
class CampaignRuntime:
    state: CampaignState
    n_draws: int
    events: list[ServedEvent | InteractionEvent] = field(default_factory=list)
    consumed: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


def _parse_schedule(obj: dict | None, default_floor: float) -> FloorSchedule | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ParameterError("floor_schedule must be an object")
    entries = obj.get("entries", [])
    try:
        return FloorSchedule(
            default=float(obj.get("default", default_floor)),
            entries=tuple((int(e), float(f)) for e, f in entries),
        )
    except (TypeError, ValueError):
        raise ParameterError("floor_schedule entries must be [epoch, floor] pairs") from None


class BanditService:
    """Application core behind the HTTP layer; also usable in-process."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = CampaignStore(config.data_dir)
        self.campaigns: dict[str, CampaignRuntime] = {}
        self._rng = np.random.default_rng(config.seed)
        self._rng_lock = threading.Lock()
        self._recover_all()

    def close(self) -> None:
        self.store.close()

    def _recover_all(self) -> None:
        for cid in self.store.list_campaigns():
            state = self.store.recover(cid)
            log_head = self.store._log(cid).read()[0]
            self.campaigns[cid] = CampaignRuntime(
                state=state,
                n_draws=int(log_head.get("n_draws", self.config.n_draws)),
                events=self.store.read_events(cid),
                consumed=self.store.events_consumed(cid),
            )

    def _runtime(self, campaign_id: str) -> CampaignRuntime:
        try:
            return self.campaigns[campaign_id]
        except KeyError:
            raise NotFoundError(f"unknown campaign {campaign_id!r}") from None

    def _is_bot(self, visitor_id: str) -> bool:
        prefix = self.config.bot_prefix
        return bool(prefix) and visitor_id.startswith(prefix)

    def _draw(self) -> float:
        with self._rng_lock:
            return float(self._rng.random())

    def _seed(self) -> int:
        with self._rng_lock:
            return int(self._rng.integers(0, 2**63 - 1))

    # -- operations

    def create_campaign(self, payload: dict) -> dict:
        arms = payload.get("arms")
        if not isinstance(arms, list) or not all(isinstance(a, str) for a in arms):
            raise ParameterError("arms must be a list of arm ids")
        campaign_id = payload.get("campaign_id") or uuid.uuid4().hex[:12]
        if not isinstance(campaign_id, str) or not campaign_id or set(campaign_id) - _ID_CHARS:
            raise ParameterError(
                "campaign_id must use only letters, digits, '_' and '-'"
            )
        schedule = _parse_schedule(payload.get("floor_schedule"), self.config.default_floor)
        if schedule is None:
            schedule = FloorSchedule(default=self.config.default_floor)
        n_draws = int(payload.get("n_draws", self.config.n_draws))
        if n_draws < 1:
            raise ParameterError("n_draws must be positive")
        if campaign_id in self.campaigns:
            raise ConflictError(f"campaign {campaign_id!r} already exists")
        state = self.store.create(campaign_id, arms, schedule, extra={"n_draws": n_draws})
        self.campaigns[campaign_id] = CampaignRuntime(state=state, n_draws=n_draws)
        return {"campaign_id": campaign_id, **self.get_allocation(campaign_id)}

    def ingest_events(self, campaign_id: str, payload: dict) -> dict:
        rt = self._runtime(campaign_id)
        items = payload.get("events")
        if not isinstance(items, list):
            raise ParameterError("body must carry an 'events' list")
        accepted: list[ServedEvent | InteractionEvent] = []
        rejected: list[dict] = []
        for i, item in enumerate(items):
            try:
                if not isinstance(item, dict):
                    raise ParameterError("event must be an object")
                accepted.append(parse_event(item))
            except ParameterError as exc:
                rejected.append({"index": i, "reason": str(exc)})
        with rt.lock:
            self.store.append_events(campaign_id, accepted)
            rt.events.extend(accepted)
        return {"accepted": len(accepted), "rejected": rejected}

    def get_allocation(self, campaign_id: str) -> dict:
        state = self._runtime(campaign_id).state
        cum = build_cumulative(state.allocation)
        return {
            "epoch": state.epoch,
            "weights": dict(state.allocation.weights),
            "cumulative": [[arm, boundary] for arm, boundary in cum.boundaries],
        }

    def assign(self, campaign_id: str, payload: dict) -> dict:
        visitor = payload.get("visitor_id")
        if not isinstance(visitor, str) or not visitor:
            raise ParameterError("visitor_id must be a non-empty string")
        state = self._runtime(campaign_id).state
        arm = pick_arm(build_cumulative(state.allocation), self._draw())
        return {"arm": arm, "epoch": state.epoch}

    def run_batch_now(self, campaign_id: str) -> dict:
        rt = self._runtime(campaign_id)
        if not rt.lock.acquire(blocking=False):
            raise ConflictError("a batch for this campaign is already running")
        try:
            fresh = rt.events[rt.consumed :]
            served = [e for e in fresh if isinstance(e, ServedEvent)]
            interactions = [e for e in fresh if isinstance(e, InteractionEvent)]
            humans, _ = filter_bots(join_ruds(served, interactions), self._is_bot)
            delta = aggregate_all(humans)
            before = rt.state
            state, _ = self.store.commit_batch(
                rt.state,
                delta,
                n_draws=rt.n_draws,
                seed=self._seed(),
                events_consumed=len(fresh),
            )
            changed = state is not before
            if changed:
                rt.state = state
                rt.consumed += len(fresh)
            return {"changed": changed, **self.get_allocation(campaign_id)}
        finally:
            rt.lock.release()

    def add_arm(self, campaign_id: str, payload: dict) -> dict:
        arm = payload.get("arm")
        if not isinstance(arm, str) or not arm:
            raise ParameterError("arm must be a non-empty string")
        rt = self._runtime(campaign_id)
        with rt.lock:
            rt.state = self.store.commit_add_arm(rt.state, arm)
        return {"arm": arm, "effective_epoch": rt.state.epoch + 1}

    def set_blacklist(self, campaign_id: str, arm: str, blacklisted: bool) -> dict:
        rt = self._runtime(campaign_id)
        with rt.lock:
            rt.state = self.store.commit_blacklist(rt.state, arm, blacklisted)
        return {
            "arm": arm,
            "blacklisted": blacklisted,
            "effective_epoch": rt.state.epoch + 1,
        }

    def put_floor_schedule(self, campaign_id: str, payload: dict) -> dict:
        schedule = _parse_schedule(payload, self.config.default_floor)
        rt = self._runtime(campaign_id)
        with rt.lock:
            rt.state = self.store.commit_floor_schedule(rt.state, schedule)
        return {
            "default": schedule.default,
            "entries": [list(e) for e in schedule.entries],
            "effective_epoch": rt.state.epoch + 1,
        }

    def get_history(self, campaign_id: str) -> dict:
        """Monitoring feed: per-epoch allocations, posterior summaries and
        cumulative stats, plus admin events with their effective epochs."""
        rt = self._runtime(campaign_id)
        state = rt.state
        epochs = []
        arms_at_creation = self._creation_arms(campaign_id)
        totals = {a: (0, 0) for a in arms_at_creation}
        epochs.append(self._epoch_entry(0, None, totals, uniform_over=arms_at_creation))
        for rec in state.audit_log:
            for arm, delta in rec.stats_delta.items():
                s, f = totals.get(arm, (0, 0))
                totals[arm] = (s + delta.successes, f + delta.failures)
            epochs.append(self._epoch_entry(rec.epoch, rec, dict(totals)))
        return {
            "campaign_id": campaign_id,
            "epoch": state.epoch,
            "blacklist": sorted(state.blacklist),
            "epochs": epochs,
            "admin": self._admin_events(campaign_id),
        }

    def _creation_arms(self, campaign_id: str) -> list[str]:
        head = self.store._log(campaign_id).read()[0]
        return list(head.get("arms", []))

    @staticmethod
    def _epoch_entry(epoch, rec, totals, uniform_over=None) -> dict:
        if rec is not None:
            weights = dict(rec.post_floor)
            floor = rec.floor
        else:
            weights = {a: 1.0 / len(uniform_over) for a in uniform_over}
            floor = None
        posteriors = {}
        for arm, (s, f) in totals.items():
            alpha, beta = s + 1.0, f + 1.0
            lo, hi = scipy_stats.beta.ppf([0.025, 0.975], alpha, beta)
            posteriors[arm] = {
                "alpha": alpha,
                "beta": beta,
                "mean": alpha / (alpha + beta),
                "ci95": [float(lo), float(hi)],
            }
        return {
            "epoch": epoch,
            "weights": weights,
            "floor": floor,
            "stats": {a: list(sf) for a, sf in totals.items()},
            "posteriors": posteriors,
        }

    def _admin_events(self, campaign_id: str) -> list[dict]:
        """Admin log records annotated with the epoch at which each took
        effect (the epoch of the next committed batch)."""
        out = []
        pending: list[dict] = []
        for rec in self.store._log(campaign_id).read():
            kind = rec.get("type")
            if kind == "batch":
                for item in pending:
                    item["effective_epoch"] = rec["epoch"]
                    out.append(item)
                pending = []
            elif kind in ("add_arm", "blacklist", "floor_schedule"):
                item = {k: v for k, v in rec.items()}
                pending.append(item)
        current = self._runtime(campaign_id).state.epoch
        for item in pending:
            item["effective_epoch"] = current + 1
            out.append(item)
        return out

    def list_campaigns(self) -> dict:
        return {
            "campaigns": [
                {
                    "campaign_id": cid,
                    "epoch": rt.state.epoch,
                    "arms": sorted(rt.state.arms),
                    "blacklist": sorted(rt.state.blacklist),
                }
                for cid, rt in sorted(self.campaigns.items())
            ]
        }


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    service = BanditService(config)
    app = FastAPI(title="banditflow", docs_url=None, redoc_url=None)
    app.state.service = service

    def error_response(code: str, message: str, status: int) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"error": {"code": code, "message": message}},
        )

    @app.exception_handler(BanditError)
    async def bandit_error_handler(_request: Request, exc: BanditError):
        return error_response(exc.api_code, str(exc), STATUS_BY_CODE[exc.api_code])

    @app.exception_handler(Exception)
    async def unexpected_error_handler(_request: Request, exc: Exception):
        return error_response("internal", f"unexpected error: {exc}", 500)

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if config.api_token and request.headers.get("x-api-token") != config.api_token:
            return error_response("invalid", "missing or wrong API token", 401)
        return await call_next(request)

    async def body_of(request: Request) -> dict:
        try:
            payload = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise ParameterError("request body must be a JSON object") from None
        if not isinstance(payload, dict):
            raise ParameterError("request body must be a JSON object")
        return payload

    @app.get("/campaigns")
    async def list_campaigns():
        return service.list_campaigns()

    @app.post("/campaigns", status_code=201)
    async def create_campaign(request: Request):
        return service.create_campaign(await body_of(request))

    @app.post("/campaigns/{campaign_id}/events")
    async def ingest(campaign_id: str, request: Request):
        return service.ingest_events(campaign_id, await body_of(request))

    @app.get("/campaigns/{campaign_id}/allocation")
    async def allocation(campaign_id: str):
        return service.get_allocation(campaign_id)

    @app.post("/campaigns/{campaign_id}/assign")
    async def assign(campaign_id: str, request: Request):
        return service.assign(campaign_id, await body_of(request))

    @app.post("/campaigns/{campaign_id}/batch")
    async def batch(campaign_id: str):
        return service.run_batch_now(campaign_id)

    @app.post("/campaigns/{campaign_id}/arms", status_code=201)
    async def add_arm(campaign_id: str, request: Request):
        return service.add_arm(campaign_id, await body_of(request))

    @app.post("/campaigns/{campaign_id}/arms/{arm}/blacklist")
    async def blacklist_on(campaign_id: str, arm: str):
        return service.set_blacklist(campaign_id, arm, True)

    @app.delete("/campaigns/{campaign_id}/arms/{arm}/blacklist")
    async def blacklist_off(campaign_id: str, arm: str):
        return service.set_blacklist(campaign_id, arm, False)

    @app.put("/campaigns/{campaign_id}/floor-schedule")
    async def floor_schedule(campaign_id: str, request: Request):
        return service.put_floor_schedule(campaign_id, await body_of(request))

    @app.get("/campaigns/{campaign_id}/history")
    async def history(campaign_id: str):
        return service.get_history(campaign_id)

    if config.batch_time_utc:
        _attach_daily_batch(app, service, config.batch_time_utc)

    return app


def seconds_until(now_utc_seconds: float, hhmm: str) -> float:
    """Seconds from a UTC timestamp to the next daily occurrence of HH:MM."""
    try:
        hours, minutes = hhmm.split(":")
        target = int(hours) * 3600 + int(minutes) * 60
        if not 0 <= int(hours) < 24 or not 0 <= int(minutes) < 60:
            raise ValueError
    except ValueError:
        raise ParameterError(f"batch_time_utc must be HH:MM, got {hhmm!r}") from None
    into_day = now_utc_seconds % 86_400
    wait = target - into_day
    if wait <= 0:
        wait += 86_400
    return wait


def _attach_daily_batch(app, service: BanditService, hhmm: str) -> None:
    import asyncio
    import time

    seconds_until(time.time(), hhmm)  # validate early

    async def loop():
        while True:
            await asyncio.sleep(seconds_until(time.time(), hhmm))
            for cid in list(service.campaigns):
                try:
                    service.run_batch_now(cid)
                except BanditError:
                    continue

    @app.on_event("startup")
    async def start_scheduler():
        app.state.batch_task = asyncio.get_event_loop().create_task(loop())

    @app.on_event("shutdown")
    async def stop_scheduler():
        app.state.batch_task.cancel()
