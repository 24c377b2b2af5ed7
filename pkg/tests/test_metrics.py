import json
import math
import random

import pytest

from banditflow.errors import ParameterError
from banditflow.metrics import (
    InteractionMatrix,
    RankedList,
    evaluate,
    load_interactions,
    load_ranked_lists,
    map_at_k,
    mrr,
    ndcg_at_k,
)


def matrix(pairs, kind="click"):
    m = InteractionMatrix(kind=kind)
    for user, item in pairs:
        m.add(user, item)
    return m


def test_mrr_uses_first_relevant_rank():
    truth = matrix([("u1", "x"), ("u2", "x")])
    lists = [RankedList("u1", ("x", "y")), RankedList("u2", ("y", "x"))]
    assert mrr(lists, truth) == pytest.approx((1.0 + 0.5) / 2)


def test_user_with_no_relevant_items_scores_zero_but_counts():
    truth = matrix([("u1", "x")])
    lists = [RankedList("u1", ("x",)), RankedList("u2", ("x",))]
    assert mrr(lists, truth) == pytest.approx(0.5)
    assert ndcg_at_k(lists, truth, k=5) == pytest.approx(0.5)
    assert map_at_k(lists, truth, k=5) == pytest.approx(0.5)


def test_ndcg_discount_formula():
    # relevant items at ranks 1 and 3 of a 2-relevant user
    truth = matrix([("u", "a"), ("u", "b")])
    lists = [RankedList("u", ("a", "x", "b"))]
    dcg = 1.0 + 1.0 / math.log2(4)
    idcg = 1.0 + 1.0 / math.log2(3)
    assert ndcg_at_k(lists, truth, k=10) == pytest.approx(dcg / idcg)


def test_ndcg_single_relevant_at_rank_two():
    truth = matrix([("u", "x")])
    lists = [RankedList("u", ("y", "x"))]
    assert ndcg_at_k(lists, truth, k=10) == pytest.approx(1.0 / math.log2(3))
    assert ndcg_at_k(lists, truth, k=10) == pytest.approx(0.6309, abs=1e-4)


def test_idcg_truncates_at_k():
    # 3 relevant items but k=2: the ideal only counts the top 2 slots
    truth = matrix([("u", "a"), ("u", "b"), ("u", "c")])
    lists = [RankedList("u", ("a", "b", "c"))]
    assert ndcg_at_k(lists, truth, k=2) == pytest.approx(1.0)


def test_map_normalizer_is_min_k_relevant():
    truth = matrix([("u", "a"), ("u", "b"), ("u", "c")])
    lists = [RankedList("u", ("a", "x", "b"))]
    # hits at ranks 1 and 3; k=3 truncation: normalizer min(3, 3)
    expected = (1.0 + 2.0 / 3.0) / 3.0
    assert map_at_k(lists, truth, k=3) == pytest.approx(expected)
    # with k=1 the normalizer shrinks to 1 and a top hit is perfect
    assert map_at_k(lists, truth, k=1) == pytest.approx(1.0)


def test_perfect_ranking_scores_one_everywhere():
    truth = matrix([("u1", "a"), ("u1", "b"), ("u2", "c")])
    lists = [RankedList("u1", ("a", "b", "z")), RankedList("u2", ("c", "z"))]
    assert mrr(lists, truth) == pytest.approx(1.0)
    assert ndcg_at_k(lists, truth, k=10) == pytest.approx(1.0)
    assert map_at_k(lists, truth, k=10) == pytest.approx(1.0)


def test_items_beyond_k_are_ignored():
    truth = matrix([("u", "x")])
    lists = [RankedList("u", ("a", "b", "x"))]
    assert ndcg_at_k(lists, truth, k=2) == pytest.approx(0.0)
    assert map_at_k(lists, truth, k=2) == pytest.approx(0.0)
    # MRR has no cutoff
    assert mrr(lists, truth) == pytest.approx(1.0 / 3.0)


def test_duplicate_items_rejected():
    with pytest.raises(ParameterError):
        RankedList("u", ("a", "a"))


def test_empty_inputs_rejected():
    truth = matrix([("u", "x")])
    with pytest.raises(ParameterError):
        mrr([], truth)
    with pytest.raises(ParameterError):
        ndcg_at_k([RankedList("u", ())], truth, k=5)
    with pytest.raises(ParameterError):
        map_at_k([RankedList("u", ("x",))], truth, k=0)


def test_evaluate_report_shape():
    truth = matrix([("u", "x")], kind="purchase")
    report = evaluate([RankedList("u", ("x",))], truth, k=3, model="m1")
    assert report["model"] == "m1"
    assert report["kind"] == "purchase"
    assert report["mrr"] == 1.0
    assert report["ndcg@3"] == 1.0
    assert report["map@3"] == 1.0
    assert report["n_users"] == 1
    assert "idcg_truncation" in report["conventions"]


# ---------------------------------------------------------------------------
# brute-force cross-check
# ---------------------------------------------------------------------------


def brute_mrr(items, relevant):
    for rank, item in enumerate(items, start=1):
        if item in relevant:
            return 1.0 / rank
    return 0.0


def brute_ndcg(items, relevant, k):
    if not relevant:
        return 0.0
    dcg = sum(
        1.0 / math.log2(r + 1) for r, it in enumerate(items[:k], start=1) if it in relevant
    )
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(k, len(relevant)) + 1))
    return dcg / ideal


def brute_map(items, relevant, k):
    if not relevant:
        return 0.0
    score = 0.0
    hits = 0
    for rank, item in enumerate(items[:k], start=1):
        if item in relevant:
            hits += 1
            score += hits / rank
    return score / min(k, len(relevant))


def test_metrics_match_brute_force_on_random_instances():
    rng = random.Random(99)
    catalog = list("abcdef")
    for _ in range(300):
        n = rng.randint(1, 6)
        items = rng.sample(catalog, n)
        relevant = {it for it in catalog if rng.random() < 0.4}
        k = rng.randint(1, 8)
        truth = matrix([("u", it) for it in relevant])
        lists = [RankedList("u", tuple(items))]
        assert mrr(lists, truth) == pytest.approx(brute_mrr(items, relevant), abs=1e-12)
        assert ndcg_at_k(lists, truth, k) == pytest.approx(
            brute_ndcg(items, relevant, k), abs=1e-12
        )
        assert map_at_k(lists, truth, k) == pytest.approx(
            brute_map(items, relevant, k), abs=1e-12
        )


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------


def test_load_ranked_lists_jsonl(tmp_path):
    path = tmp_path / "recs.jsonl"
    path.write_text(
        json.dumps({"user_id": "u1", "items": ["a", "b"]})
        + "\n\n"
        + json.dumps({"user_id": "u2", "items": ["b"]})
        + "\n"
    )
    lists = load_ranked_lists(path)
    assert lists == [RankedList("u1", ("a", "b")), RankedList("u2", ("b",))]


def test_load_ranked_lists_csv_orders_by_rank(tmp_path):
    path = tmp_path / "recs.csv"
    path.write_text(
        "user_id,item_id,rank\nu1,b,2\nu1,a,1\nu2,c,1\n"
    )
    lists = {rl.user_id: rl.items for rl in load_ranked_lists(path)}
    assert lists == {"u1": ("a", "b"), "u2": ("c",)}


def test_load_interactions_both_formats(tmp_path):
    jl = tmp_path / "truth.jsonl"
    jl.write_text(
        json.dumps({"user_id": "u1", "item_id": "a"})
        + "\n"
        + json.dumps({"user_id": "u1", "item_id": "b", "relevance": 0})
        + "\n"
    )
    m = load_interactions(jl)
    assert m.relevant("u1") == {"a"}
    cs = tmp_path / "truth.csv"
    cs.write_text("user_id,item_id,relevance\nu2,x,1\nu2,y,0\n")
    m = load_interactions(cs, kind="purchase")
    assert m.kind == "purchase"
    assert m.relevant("u2") == {"x"}


def test_loaders_reject_malformed(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json}\n")
    with pytest.raises(ParameterError):
        load_ranked_lists(bad)
    bad_csv = tmp_path / "bad.csv"
    bad_csv.write_text("wrong,columns\n1,2\n")
    with pytest.raises(ParameterError):
        load_ranked_lists(bad_csv)
