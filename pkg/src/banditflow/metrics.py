"""Offline ranking evaluation: MRR, NDCG@k and MAP@k.

Relevance is binary, read from sparse click or purchase interaction
matrices.  Conventions that the literature leaves open are fixed here and
declared in the report output so the numbers stay interpretable:

* users with no relevant item score 0 and stay in the mean,
* IDCG is truncated at min(k, number of relevant items),
* average precision is normalized by min(k, number of relevant items).
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ParameterError

CONVENTIONS = {
    "zero_relevant_users": "score 0, counted in the mean",
    "idcg_truncation": "min(k, n_relevant)",
    "map_normalizer": "min(k, n_relevant)",
}


@dataclass
class InteractionMatrix:
    """Sparse binary relevance: the set of (user, item) pairs observed."""

    kind: str = "click"
    entries: dict[str, set[str]] = field(default_factory=dict)

    def add(self, user_id: str, item_id: str) -> None:
        self.entries.setdefault(user_id, set()).add(item_id)

    def relevant(self, user_id: str) -> set[str]:
        return self.entries.get(user_id, set())

    def n_relevant(self, user_id: str) -> int:
        return len(self.entries.get(user_id, ()))

    @property
    def users(self) -> set[str]:
        return set(self.entries)


@dataclass(frozen=True)
class RankedList:
    """One user's recommendation list, best first."""

    user_id: str
    items: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise ParameterError(f"duplicate items in list for user {self.user_id!r}")


def _check_lists(lists: Iterable[RankedList]) -> list[RankedList]:
    out = list(lists)
    if not out:
        raise ParameterError("need at least one ranked list")
    for rl in out:
        if not rl.items:
            raise ParameterError(f"empty ranked list for user {rl.user_id!r}")
    return out


def mrr(lists: Iterable[RankedList], truth: InteractionMatrix) -> float:
    """Mean over users of 1/rank of the first relevant item (0 if none)."""
    lists = _check_lists(lists)
    total = 0.0
    for rl in lists:
        relevant = truth.relevant(rl.user_id)
        for rank, item in enumerate(rl.items, start=1):
            if item in relevant:
                total += 1.0 / rank
                break
    return total / len(lists)


def ndcg_at_k(lists: Iterable[RankedList], truth: InteractionMatrix, k: int) -> float:
    """Mean DCG@k / IDCG@k with binary gains and 1/log2(rank+1) discounts."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    lists = _check_lists(lists)
    total = 0.0
    for rl in lists:
        relevant = truth.relevant(rl.user_id)
        if not relevant:
            continue
        dcg = sum(
            1.0 / math.log2(rank + 1)
            for rank, item in enumerate(rl.items[:k], start=1)
            if item in relevant
        )
        ideal = sum(
            1.0 / math.log2(rank + 1)
            for rank in range(1, min(k, len(relevant)) + 1)
        )
        total += dcg / ideal
    return total / len(lists)


def map_at_k(lists: Iterable[RankedList], truth: InteractionMatrix, k: int) -> float:
    """Mean average precision truncated at k, normalized by min(k, n_relevant)."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    lists = _check_lists(lists)
    total = 0.0
    for rl in lists:
        relevant = truth.relevant(rl.user_id)
        if not relevant:
            continue
        hits = 0
        precision_sum = 0.0
        for rank, item in enumerate(rl.items[:k], start=1):
            if item in relevant:
                hits += 1
                precision_sum += hits / rank
        total += precision_sum / min(k, len(relevant))
    return total / len(lists)


def evaluate(
    lists: Iterable[RankedList],
    truth: InteractionMatrix,
    k: int,
    model: str = "model",
) -> dict:
    """Full metrics report, with the scoring conventions spelled out."""
    lists = _check_lists(lists)
    return {
        "model": model,
        "kind": truth.kind,
        "mrr": mrr(lists, truth),
        f"ndcg@{k}": ndcg_at_k(lists, truth, k),
        f"map@{k}": map_at_k(lists, truth, k),
        "n_users": len(lists),
        "conventions": dict(CONVENTIONS),
    }


# ---------------------------------------------------------------------------
# file loading: line-delimited JSON or CSV
# ---------------------------------------------------------------------------


def load_ranked_lists(path: str | Path) -> list[RankedList]:
    """Read ranked lists from JSONL ({"user_id", "items": [...]}) or CSV
    (columns user_id,item_id,rank)."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        per_user: dict[str, list[tuple[int, str]]] = defaultdict(list)
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                try:
                    per_user[row["user_id"]].append((int(row["rank"]), row["item_id"]))
                except (KeyError, TypeError, ValueError):
                    raise ParameterError(
                        f"{path}: CSV needs columns user_id,item_id,rank"
                    ) from None
        return [
            RankedList(user_id=u, items=tuple(item for _, item in sorted(rows)))
            for u, rows in per_user.items()
        ]
    lists = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            lists.append(RankedList(user_id=obj["user_id"], items=tuple(obj["items"])))
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ParameterError(f"{path}:{lineno}: bad ranked-list line") from None
    return lists


def load_interactions(path: str | Path, kind: str = "click") -> InteractionMatrix:
    """Read a sparse relevance matrix from JSONL ({"user_id", "item_id"})
    or CSV (columns user_id,item_id[,relevance])."""
    path = Path(path)
    matrix = InteractionMatrix(kind=kind)
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                try:
                    if int(row.get("relevance", 1)) != 0:
                        matrix.add(row["user_id"], row["item_id"])
                except (KeyError, TypeError, ValueError):
                    raise ParameterError(
                        f"{path}: CSV needs columns user_id,item_id"
                    ) from None
        return matrix
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if int(obj.get("relevance", 1)) != 0:
                matrix.add(obj["user_id"], obj["item_id"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ParameterError(f"{path}:{lineno}: bad interaction line") from None
    return matrix
