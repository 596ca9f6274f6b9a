import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from kgreason.evaluation import (ANSWER_BUCKETS, HOP_BUCKETS, ScoringError, answer_bucket,
                                 evaluate_run, f1_set, hits_at_1, hop_bucket, normalize_answer)


def test_normalize():
    assert normalize_answer("  Barack   Obama\n") == "barack obama"


def test_hits():
    assert hits_at_1(["Paris", "Lyon"], ["paris"]) == 1
    assert hits_at_1(["Lyon", "Paris"], ["paris"]) == 0
    assert hits_at_1([], ["paris"]) == 0


def test_hits_batch_mean():
    batch = [(["a"], ["a"]), (["b", "x"], ["b"]), (["c"], ["C "]), (["z"], ["d"])]
    assert sum(hits_at_1(p, g) for p, g in batch) / len(batch) == 0.75


def test_f1_cases():
    assert f1_set(["a", "b"], ["b", "a"]) == (1.0, 1.0, 1.0)
    p, r, f = f1_set(["a", "b", "c"], ["a", "b", "d", "e"])
    # hand computation: P = 2/3, R = 2/4, F1 = 2PR/(P+R) = 4/7
    expected = Fraction(2) * Fraction(2, 3) * Fraction(1, 2) / (Fraction(2, 3) + Fraction(1, 2))
    assert expected == Fraction(4, 7)
    assert max(abs(p - 2 / 3), abs(r - 0.5), abs(f - 4 / 7)) < 1e-12
    assert f1_set([], ["a"]) == (0.0, 0.0, 0.0)
    assert f1_set(["x"], ["a"]) == (0.0, 0.0, 0.0)
    with pytest.raises(ScoringError):
        f1_set(["a"], [])


@given(st.lists(st.sampled_from("abcdef")), st.lists(st.sampled_from("abcdef"), min_size=1))
def test_f1_set_semantics(pred, gold):
    base = f1_set(pred, gold)
    assert f1_set(pred + pred, list(reversed(gold))) == base
    p, r, f = base
    assert all(0 <= x <= 1 for x in base)
    assert f == (0.0 if p + r == 0 else 2 * p * r / (p + r))


@pytest.mark.parametrize("n,bucket", [(1, "#Ans=1"), (2, "#Ans=2-4"), (4, "#Ans=2-4"),
                                      (5, "#Ans=5-9"), (9, "#Ans=5-9"), (10, "#Ans>=10"),
                                      (250, "#Ans>=10")])
def test_answer_buckets(n, bucket):
    assert answer_bucket(n) == bucket


def test_hop_buckets():
    assert [hop_bucket(h) for h in (0, 1, 2, 3, 4)] == [None, "1 hop", "2 hop", ">=3 hop", ">=3 hop"]


def test_single_perfect_question():
    rep = evaluate_run({"q": ["a"]}, {"q": ["a"]})
    o = rep.overall
    assert (o.hits_at_1, o.macro_precision, o.macro_recall, o.macro_f1) == (1.0, 1.0, 1.0, 1.0)


def test_bucket_membership_fixture():
    gold = {
        "q1": ["a"],
        "q2": ["a", "b"],
        "q3": ["a", "b", "c", "d"],
        "q4": [str(i) for i in range(5)],
        "q5": [str(i) for i in range(9)],
        "q6": [str(i) for i in range(12)],
    }
    hops = {"q1": 1, "q2": 2, "q3": 3, "q4": 1, "q5": 4, "q6": 2}
    rep = evaluate_run({k: v[:1] for k, v in gold.items()}, gold, hops)
    assert {k: m.count for k, m in rep.by_answer_count.items()} == {
        "#Ans=1": 1, "#Ans=2-4": 2, "#Ans=5-9": 2, "#Ans>=10": 1}
    assert {k: m.count for k, m in rep.by_hops.items()} == {"1 hop": 2, "2 hop": 2, ">=3 hop": 2}
    assert list(rep.by_answer_count) == list(ANSWER_BUCKETS)
    assert list(rep.by_hops) == list(HOP_BUCKETS)
    assert rep.by_answer_count["#Ans=2-4"].macro_recall == pytest.approx((1 / 2 + 1 / 4) / 2)


def test_missing_predictions_and_unknown_ids():
    rep = evaluate_run({"q1": ["a"]}, {"q1": ["a"], "q2": ["b"]})
    assert rep.hits_at_1 == 0.5
    with pytest.raises(ScoringError, match="zz"):
        evaluate_run({"zz": ["a"]}, {"q1": ["a"]})


def test_macro_bounds_and_union_weighting():
    rng = random.Random(13)
    letters = "abcdefgh"

    def run(prefix, n):
        gold = {f"{prefix}{i}": rng.sample(letters, rng.randint(1, 4)) for i in range(n)}
        pred = {k: rng.sample(letters, rng.randint(0, 4)) for k in gold}
        return pred, gold

    p1, g1 = run("a", 17)
    p2, g2 = run("b", 5)
    r1, r2 = evaluate_run(p1, g1), evaluate_run(p2, g2)
    both = evaluate_run({**p1, **p2}, {**g1, **g2})
    f1s = [q.f1 for q in both.per_question]
    assert min(f1s) <= both.macro_f1 <= max(f1s)
    for attr in ("hits_at_1", "macro_f1", "macro_precision", "macro_recall"):
        weighted = (getattr(r1, attr) * 17 + getattr(r2, attr) * 5) / 22
        assert abs(getattr(both, attr) - weighted) < 1e-12


def test_report_rendering():
    rep = evaluate_run({"q": ["a"]}, {"q": ["a", "b"]}, {"q": 2})
    js = rep.to_json()
    assert js["overall"]["macro_recall"] == 0.5
    assert "2 hop" in rep.table()
