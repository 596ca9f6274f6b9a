import math
import random

import pytest

from kgreason.graph import Vocabulary, build_graph
from kgreason.llm import scripted_mock
from kgreason.mining import MinedPlans
from kgreason.planning import (STOP, BeamConfig, CountPlanner, UniformPlanner, fit_count_planner,
                               generate_plans, llm_generate_plans, plan_logprob, planning_loss,
                               question_features)
from kgreason.prompts import planning_prompt

from oracles import count_table_conditional, exhaustive_top_k


def _vocab(n):
    return Vocabulary([], [f"r{i}" for i in range(n)])


class TablePlanner:
    """Assigns fixed probabilities to whole plans via a prefix tree."""

    def __init__(self, plan_probs, num_relations):
        self.plan_probs = {tuple(z): p for z, p in plan_probs.items()}
        self.num_relations = num_relations

    def next_step_logprobs(self, question, prefix):
        prefix = tuple(prefix)
        mass = {}
        for z, p in self.plan_probs.items():
            if z[:len(prefix)] == prefix:
                sym = z[len(prefix)] if len(z) > len(prefix) else STOP
                mass[sym] = mass.get(sym, 0.0) + p
        total = sum(mass.values())
        return {s: math.log(m / total) for s, m in mass.items()}


def test_question_features():
    assert question_features("Who is the child of Alice?") == frozenset({"child", "alice"})


def test_single_pair_argmax():
    v = _vocab(3)
    m = fit_count_planner([("where was obama born", (1,))], v)
    first = m.next_step_logprobs("where was obama born", ())
    assert max(first, key=first.get) == 1
    second = m.next_step_logprobs("where was obama born", (1,))
    assert max(second, key=second.get) == STOP


def test_symmetry_two_plans():
    v = _vocab(2)
    m = fit_count_planner([("q a", (0,)), ("q a", (1,))], v, alpha=1e-12)
    lp = m.next_step_logprobs("q a", ())
    assert math.exp(lp[0]) == pytest.approx(0.5, abs=1e-9)
    assert math.exp(lp[1]) == pytest.approx(0.5, abs=1e-9)


def _toy_corpus(rng, n_pairs=20, n_rel=4, n_q=5):
    questions = [f"question about topic{i} thing{i % 2}" for i in range(n_q)]
    return [(rng.choice(questions), tuple(rng.randrange(n_rel) for _ in range(rng.randint(0, 3))))
            for _ in range(n_pairs)]


def test_conditionals_match_count_table():
    rng = random.Random(8)
    pairs = _toy_corpus(rng)
    v = _vocab(4)
    alpha = 0.1
    m = fit_count_planner(pairs, v, alpha=alpha)
    checked = 0
    for q, z in pairs:
        for i in range(len(z) + 1):
            lp = m.next_step_logprobs(q, z[:i])
            for sym in list(range(4)) + [STOP]:
                expect = count_table_conditional(pairs, q, z[:i], sym, alpha, 5)
                assert math.exp(lp[sym]) == pytest.approx(expect, abs=1e-12)
                checked += 1
    assert checked > 100


def test_backoff_levels():
    v = _vocab(3)
    m = fit_count_planner([("spouse of alice", (0,)), ("birthplace of bob", (2,))], v)
    # unseen word set, but "spouse" seen -> word level picks relation 0
    lp = m.next_step_logprobs("spouse of carol", ())
    assert max(lp, key=lp.get) == 0
    # no known word -> prefix-only level: 0 and 2 tie above 1
    lp = m.next_step_logprobs("totally new", ())
    assert lp[0] == lp[2] > lp[1]
    # unseen prefix everywhere -> uniform
    lp = m.next_step_logprobs("spouse of alice", (1,))
    assert len(set(lp.values())) == 1


@pytest.mark.parametrize("model", [
    UniformPlanner(4, max_len=3),
    fit_count_planner(_toy_corpus(random.Random(2)), _vocab(4)),
])
def test_normalization(model):
    rng = random.Random(0)
    for _ in range(50):
        prefix = tuple(rng.randrange(4) for _ in range(rng.randint(0, 4)))
        lp = model.next_step_logprobs("question about topic1 thing1", prefix)
        assert abs(sum(math.exp(x) for x in lp.values()) - 1) < 1e-9


def test_stop_forced_at_max_len():
    m = fit_count_planner([("q", (0, 1))], _vocab(2), max_len=2)
    assert m.next_step_logprobs("q", (0, 1)) == {STOP: 0.0}


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_count_planner([], _vocab(2))
    with pytest.raises(ValueError):
        fit_count_planner([("q", (0, 0, 0))], _vocab(1), max_len=2)
    with pytest.raises(ValueError):
        BeamConfig(beam_width=2, k=3)


def test_beam_exhaustible_space():
    m = fit_count_planner([("q", (0,))], _vocab(1), max_len=1)
    out = generate_plans(m, "q", BeamConfig(beam_width=2, k=2, max_len=1))
    assert [z for z, _ in out] == [(0,), ()]


def test_beam_equals_exhaustive():
    for seed in range(20):
        rng = random.Random(seed)
        n_rel = rng.randint(1, 4)
        max_len = rng.randint(1, 3)
        pairs = [(rng.choice(["a b", "c d", "a d"]),
                  tuple(rng.randrange(n_rel) for _ in range(rng.randint(0, max_len))))
                 for _ in range(rng.randint(1, 12))]
        m = fit_count_planner(pairs, _vocab(n_rel), alpha=rng.choice([0.1, 1.0]), max_len=max_len)
        cands = sum(n_rel ** i for i in range(max_len + 1))
        for q in ("a b", "c d", "a d", "unseen"):
            k = rng.randint(1, min(5, cands))
            cfg = BeamConfig(beam_width=cands, k=k, max_len=max_len)
            assert generate_plans(m, q, cfg) == exhaustive_top_k(m, q, n_rel, max_len, k)


def test_generated_scores_are_consistent():
    m = fit_count_planner(_toy_corpus(random.Random(4)), _vocab(4))
    cfg = BeamConfig(beam_width=5, k=3, max_len=3)
    out = generate_plans(m, "question about topic3 thing1", cfg)
    assert len(out) == 3
    assert [s for _, s in out] == sorted((s for _, s in out), reverse=True)
    for z, s in out:
        assert abs(plan_logprob(m, "question about topic3 thing1", z, max_len=3) - s) < 1e-12


def test_loss_degenerate_optimum():
    model = TablePlanner({(0, 1): 1.0}, 2)
    assert planning_loss(model, "q", MinedPlans(((0, 1),), 2)) == 0.0


def test_loss_uniform_two_plans():
    model = TablePlanner({(0,): 0.5, (1,): 0.5}, 2)
    loss = planning_loss(model, "q", MinedPlans(((0,), (1,)), 1))
    assert abs(loss - math.log(2)) < 1e-12


def test_loss_requires_plans():
    with pytest.raises(ValueError):
        planning_loss(UniformPlanner(2), "q", None)


def test_fitted_loss_is_conditional_entropy():
    # each question maps to its own set of distinct mined plans
    mined = {
        "who married alice": [(0,)],
        "child of alice": [(0, 1), (2, 1)],
        "grandchild of bob": [(1, 1), (1, 2), (3, 0)],
        "siblings of carol": [(1, 3), (0, 2), (2, 0), (3, 3)],
    }
    pairs = [(q, z) for q, zs in mined.items() for z in zs]
    m = fit_count_planner(pairs, _vocab(4), alpha=1e-12)
    for q, zs in mined.items():
        # empirical P(z|q) is uniform over the distinct plans
        p = 1 / len(zs)
        entropy = -sum(p * math.log(p) for _ in zs)
        loss = planning_loss(m, q, MinedPlans(tuple(zs), len(zs[0])))
        assert abs(loss - entropy) < 1e-9


def test_training_beats_uniform():
    mined = {"child of alice": ((0, 1), (2, 1)), "spouse of bob": ((3,),)}
    pairs = [(q, z) for q, zs in mined.items() for z in zs]
    m = fit_count_planner(pairs, _vocab(4))
    u = UniformPlanner(4)
    for q, zs in mined.items():
        mp = MinedPlans(zs, len(zs[0]))
        assert planning_loss(m, q, mp) < planning_loss(u, q, mp)


def test_save_load_round_trip(tmp_path):
    g = build_graph([("a", f"rel.{i}", "b") for i in range(4)])
    pairs = [(q, z) for q, z in _toy_corpus(random.Random(6))]
    m = fit_count_planner(pairs, g.vocab, alpha=0.25, max_len=3)
    m.save(tmp_path / "p.txt")
    m.save(tmp_path / "p2.txt")
    assert (tmp_path / "p.txt").read_bytes() == (tmp_path / "p2.txt").read_bytes()
    m2 = CountPlanner.load(tmp_path / "p.txt", g.vocab)
    assert (m2.alpha, m2.max_len) == (0.25, 3)
    for q in ("question about topic1 thing1", "question about topic4 thing0", "new"):
        for prefix in [(), (0,), (1, 2), (3, 3, 3)]:
            assert m2.next_step_logprobs(q, prefix) == m.next_step_logprobs(q, prefix)


def test_load_remaps_relation_ids(tmp_path):
    g1 = build_graph([("a", "x", "b"), ("a", "y", "b")])
    g2 = build_graph([("a", "y", "b"), ("a", "x", "b")])
    m = fit_count_planner([("q", (g1.vocab.relation_id("x"),))], g1.vocab)
    m.save(tmp_path / "p.txt")
    m2 = CountPlanner.load(tmp_path / "p.txt", g2.vocab)
    best = generate_plans(m2, "q", BeamConfig(1, 1, 2))[0][0]
    assert best == (g2.vocab.relation_id("x"),)


def test_llm_plans(ex2_graph):
    v = ex2_graph.vocab
    mock = scripted_mock([["<PATH> marry_to <SEP> father_of </PATH>"]])
    assert llm_generate_plans(mock, "Who is the child of Alice", v) == [(0, 1)]
    assert mock.calls[0].prompt == planning_prompt("Who is the child of Alice")
    assert mock.calls[0].num_completions == 3
    assert llm_generate_plans(scripted_mock([["no plan here", "<PATH> nope </PATH>"]]), "q", v) == []
    dup = scripted_mock([["<PATH> marry_to </PATH>", "<PATH> marry_to </PATH>", "<PATH> </PATH>"]])
    assert llm_generate_plans(dup, "q", v) == [(0,), ()]
