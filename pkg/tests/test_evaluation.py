import numpy as np
import pytest

import kgcl.evaluation as evaluation
from kgcl.evaluation import (
    HEAD,
    TAIL,
    FilterIndex,
    RetentionMatrix,
    eval_ranks,
    filtered_rank,
    forgetting_report,
    mrr,
    retention_update,
)
from kgcl.synthetic import make_random_triples
from kgcl.transe import ModelConfig, TransEModel, score

from conftest import make_model


def oracle_rank(model, index, triple, direction):
    """Scalar-scoring reference: explicit loop over candidate entities."""
    h, r, t = (int(x) for x in triple)
    n = model.num_entities
    if direction == TAIL:
        answer = t
        known = index.tails.get((h, r), np.zeros(0, dtype=np.int64))
        candidates = [np.array([h, r, e]) for e in range(n)]
    else:
        answer = h
        known = index.heads.get((r, t), np.zeros(0, dtype=np.int64))
        candidates = [np.array([e, r, t]) for e in range(n)]
    dist = [score(model, c) for c in candidates]
    keep = np.ones(n, dtype=bool)
    keep[known] = False
    keep[answer] = True
    smaller = sum(1 for e in range(n) if keep[e] and dist[e] < dist[answer])
    ties = sum(1 for e in range(n) if keep[e] and e != answer and dist[e] == dist[answer])
    return 1 + smaller + ties // 2


def line_model(values, relation=0.0):
    """One-dimensional embeddings make distances easy to stage by hand."""
    entities = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    relations = np.array([[relation]])
    return TransEModel(ModelConfig(dim=1), entities, relations)


class TestFilterIndex:
    def test_groups_by_query_key(self, tiny_graph):
        index = FilterIndex.from_splits(tiny_graph.train, tiny_graph.valid, tiny_graph.test)
        a, r0 = tiny_graph.ent2id["a"], tiny_graph.rel2id["r0"]
        b, c = tiny_graph.ent2id["b"], tiny_graph.ent2id["c"]
        assert sorted(index.tails[(a, r0)].tolist()) == sorted([b, c])
        assert sorted(index.heads[(r0, c)].tolist()) == sorted(
            [a, tiny_graph.ent2id["e"]]
        )

    def test_duplicates_across_splits_collapse(self):
        t = np.array([[0, 0, 1]])
        index = FilterIndex.from_splits(t, t, t)
        assert index.tails[(0, 0)].tolist() == [1]

    def test_empty(self):
        index = FilterIndex.from_splits(np.zeros((0, 3), dtype=np.int64))
        assert index.tails == {} and index.heads == {}


class TestFilteredRank:
    def test_tail_rank_with_staged_ties(self):
        # distances from query (e0, r0, ?): |e| per entity
        model = line_model([0.0, 1.0, 2.0, 1.0, -1.0, 3.0])
        splits = np.array([[0, 0, 1]])
        index = FilterIndex.from_splits(splits)
        # survivors: everyone; closer: e0; tied others: e3, e4 -> 1 + 1 + 2//2
        assert filtered_rank(model, index, np.array([0, 0, 1]), TAIL) == 3

    def test_filtering_removes_tied_competitor(self):
        model = line_model([0.0, 1.0, 2.0, 1.0, -1.0, 3.0])
        splits = np.array([[0, 0, 1], [0, 0, 3]])
        index = FilterIndex.from_splits(splits)
        # e3 is a known tail and drops out; only e4 still ties
        assert filtered_rank(model, index, np.array([0, 0, 1]), TAIL) == 2

    def test_filtering_removes_closer_competitor(self):
        model = line_model([0.0, 1.0, 2.0, 1.0, -1.0, 3.0])
        splits = np.array([[0, 0, 1], [0, 0, 0], [0, 0, 3], [0, 0, 4]])
        index = FilterIndex.from_splits(splits)
        # e0 (closer) and both tied competitors are all filtered
        assert filtered_rank(model, index, np.array([0, 0, 1]), TAIL) == 1

    def test_head_direction(self):
        # query (?, r0, e1) with r=0: distance |e - 1|
        model = line_model([0.0, 1.0, 2.0, 2.0])
        index = FilterIndex.from_splits(np.array([[2, 0, 1]]))
        # answer e2 (d=1); e1 sits at 0, e0 and e3 tie at 1 -> 1 + 1 + 2//2
        assert filtered_rank(model, index, np.array([2, 0, 1]), HEAD) == 3

    def test_perfect_answer_ranks_first(self):
        model = line_model([0.0, 2.0, 5.0, 9.0], relation=2.0)
        index = FilterIndex.from_splits(np.array([[0, 0, 1]]))
        assert filtered_rank(model, index, np.array([0, 0, 1]), TAIL) == 1

    def test_matches_oracle_on_random_models(self, rng):
        for case in range(30):
            n_ent = int(rng.integers(3, 30))
            n_rel = int(rng.integers(1, 5))
            model = make_model(n_ent, n_rel, dim=int(rng.integers(2, 8)), seed=case)
            if case % 3 == 0:
                # quantized tables produce genuine distance ties
                model.entities.setflags(write=True)
                np.round(model.entities, 1, out=model.entities)
                np.round(model.relations, 1, out=model.relations)
            triples = make_random_triples(n_ent, n_rel, int(rng.integers(4, 15)), rng)
            known = make_random_triples(n_ent, n_rel, int(rng.integers(4, 20)), rng)
            index = FilterIndex.from_splits(triples, known)
            for triple in triples[:5]:
                for direction in (TAIL, HEAD):
                    assert filtered_rank(model, index, triple, direction) == oracle_rank(
                        model, index, triple, direction
                    )


class TestEvalRanks:
    def test_order_is_tails_then_heads(self):
        model = line_model([0.0, 1.0, 5.0], relation=1.0)
        triples = np.array([[0, 0, 1]])
        index = FilterIndex.from_splits(triples)
        ranks = eval_ranks(model, index, triples)
        assert ranks[0] == filtered_rank(model, index, triples[0], TAIL)
        assert ranks[1] == filtered_rank(model, index, triples[0], HEAD)

    def test_batch_size_invariance_on_exact_path(self, rng):
        model = make_model(40, 4, dim=6, seed=8)
        triples = make_random_triples(40, 4, 30, rng)
        index = FilterIndex.from_splits(triples)
        a = eval_ranks(model, index, triples, batch_size=1)
        b = eval_ranks(model, index, triples, batch_size=7)
        c = eval_ranks(model, index, triples, batch_size=512)
        assert np.array_equal(a, b) and np.array_equal(b, c)

    def test_expansion_path_agrees_with_exact_path(self, rng, monkeypatch):
        model = make_model(60, 5, dim=10, seed=3)
        triples = make_random_triples(60, 5, 40, rng)
        index = FilterIndex.from_splits(triples)
        exact = eval_ranks(model, index, triples)
        monkeypatch.setattr(evaluation, "EXACT_PATH_MAX_ELEMENTS", 0)
        expansion = eval_ranks(model, index, triples)
        # continuous embeddings leave no near-ties, so ranks are identical
        assert np.array_equal(exact, expansion)

    def test_expansion_distances_close_to_exact(self, rng):
        model = make_model(50, 3, dim=8, seed=4)
        triples = make_random_triples(50, 3, 20, rng)
        for direction in (TAIL, HEAD):
            exact = evaluation._candidate_distances(model, triples, direction)
            big = evaluation.EXACT_PATH_MAX_ELEMENTS
            try:
                evaluation.EXACT_PATH_MAX_ELEMENTS = 0
                approx = evaluation._candidate_distances(model, triples, direction)
            finally:
                evaluation.EXACT_PATH_MAX_ELEMENTS = big
            assert np.allclose(exact, approx, atol=1e-9)


class TestMrr:
    def test_hand_value(self):
        assert mrr(np.array([1, 2, 4])) == pytest.approx(7.0 / 12.0)

    def test_empty_is_nan(self):
        assert np.isnan(mrr(np.array([])))


class TestRetention:
    def test_rows_fill_lower_triangle(self, rng):
        model = make_model(25, 3, dim=5, seed=0)
        tasks = [make_random_triples(25, 3, 8, rng) for _ in range(3)]
        index = FilterIndex.from_splits(*tasks)
        matrix = RetentionMatrix.empty(3, [len(t) for t in tasks])
        retention_update(matrix, model, index, tasks, after_task=0)
        assert not np.isnan(matrix.values[0, 0])
        assert np.isnan(matrix.values[0, 1]) and np.isnan(matrix.values[1, 0])
        retention_update(matrix, model, index, tasks, after_task=2)
        assert not np.any(np.isnan(matrix.values[2]))

    def test_entries_match_direct_evaluation(self, rng):
        model = make_model(20, 2, dim=4, seed=1)
        tasks = [make_random_triples(20, 2, 6, rng) for _ in range(2)]
        index = FilterIndex.from_splits(*tasks)
        matrix = RetentionMatrix.empty(2, [6, 6])
        retention_update(matrix, model, index, tasks, after_task=1)
        for j in range(2):
            expected = mrr(eval_ranks(model, index, tasks[j]))
            assert matrix.values[1, j] == expected


class TestForgettingReport:
    def test_hand_matrix(self):
        matrix = RetentionMatrix.empty(3, [10, 20, 30])
        matrix.values[0, 0] = 0.5
        matrix.values[1, :2] = [0.4, 0.6]
        matrix.values[2, :] = [0.3, 0.5, 0.7]
        report = forgetting_report(matrix)
        assert report.per_task_forgetting.tolist() == pytest.approx([0.2, 0.1])
        assert report.mean_forgetting == pytest.approx(0.15)
        assert report.final_mrr == pytest.approx(0.5)
        assert report.final_mrr_pooled == pytest.approx(34.0 / 60.0)
        assert report.diagonal.tolist() == pytest.approx([0.5, 0.6, 0.7])

    def test_round_trips_through_dict(self):
        matrix = RetentionMatrix.empty(2, [5, 5])
        matrix.values[0, 0] = 0.4
        matrix.values[1, :] = [0.3, 0.6]
        d = forgetting_report(matrix).as_dict()
        assert d["mean_forgetting"] == pytest.approx(0.1)
        assert d["final_mrr"] == pytest.approx(0.45)
