from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairqa.errors import ContractViolation, MissingScoreError
from pairqa.providers import FileScoreStore, ScoreKind
from pairqa.scoring import (
    CombineMode,
    PairScore,
    PairType,
    build_matrix,
    classify_pair,
    combine,
    load_matrix_dump,
    write_matrix_dump,
)

from conftest import make_example


class CountingScorer:
    """Deterministic scorer that records every query it answers."""

    def __init__(self, evidentiality=None, consistency=None):
        self.evid_calls = 0
        self.cons_calls = 0
        self.evidentiality = evidentiality or {}
        self.consistency = consistency or {}

    def score(self, req):
        if req.kind is ScoreKind.EVIDENTIALITY:
            self.evid_calls += 1
            return self.evidentiality.get(req.retrieved_id, 0.9)
        self.cons_calls += 1
        return self.consistency.get((req.generated_id, req.retrieved_id), 0.7)


class TestCombine:
    @pytest.mark.parametrize(
        "evid,cons,expected",
        [
            (0.4, 0.99, 0.0),
            (0.5, 0.8, 0.0),  # the gate is strictly greater-than
            (0.51, 0.6, 0.6),
            (1.0, 1.0, 1.0),
            (0.6, 0.0, 0.0),
        ],
    )
    def test_cutoff(self, evid, cons, expected):
        assert combine(evid, cons, CombineMode.CUTOFF) == expected

    def test_product(self):
        assert combine(0.9, 0.7, CombineMode.PRODUCT) == 0.9 * 0.7
        assert combine(0.9, 0.7, CombineMode.PRODUCT) == pytest.approx(0.63)

    @pytest.mark.parametrize("evid,cons", [(-0.1, 0.5), (0.5, 1.2), (2.0, 2.0)])
    def test_out_of_range_rejected(self, evid, cons):
        with pytest.raises(ContractViolation):
            combine(evid, cons, CombineMode.CUTOFF)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_cutoff_equals_indicator_form(self, evid, cons):
        assert combine(evid, cons, CombineMode.CUTOFF) == cons * (evid > 0.5)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_product_bounded_by_min(self, evid, cons):
        assert combine(evid, cons, CombineMode.PRODUCT) <= min(evid, cons) + 1e-15


class TestClassifyPair:
    def _score(self, evid, cons):
        return PairScore(0, 0, evid, cons, combine(evid, cons, CombineMode.CUTOFF))

    def test_rules(self):
        assert classify_pair(self._score(0.3, 0.9)) is PairType.NON_EVIDENTIAL
        assert classify_pair(self._score(0.9, 0.2)) is PairType.CONFLICTING
        assert classify_pair(self._score(0.9, 0.9)) is PairType.COMPATIBLE

    def test_boundaries_fall_away_from_compatible(self):
        assert classify_pair(self._score(0.5, 0.9)) is PairType.NON_EVIDENTIAL
        assert classify_pair(self._score(0.9, 0.5)) is PairType.CONFLICTING

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_partition(self, evid, cons):
        kind = classify_pair(self._score(evid, cons))
        assert isinstance(kind, PairType)
        if kind is PairType.COMPATIBLE:
            assert combine(evid, cons, CombineMode.CUTOFF) > 0.5


def ten_by_ten_example():
    return make_example(
        retrieved_texts=tuple(f"retrieved passage {j}" for j in range(10)),
        generated_texts=tuple(f"generated claim {i}" for i in range(10)),
    )


class TestBuildMatrix:
    def test_call_counts_for_ten_by_ten(self):
        scorer = CountingScorer()
        matrix = build_matrix(ten_by_ten_example(), scorer, CombineMode.CUTOFF)
        assert scorer.evid_calls == 10
        assert scorer.cons_calls == 100
        assert matrix.m == matrix.n == 10 and matrix.complete

    def test_single_cell_cutoff_and_product(self):
        example = make_example(retrieved_texts=("r",), generated_texts=("g",))
        cutoff = build_matrix(example, CountingScorer(), CombineMode.CUTOFF)
        assert cutoff.combined_grid() == [[0.7]]
        product = build_matrix(example, CountingScorer(), CombineMode.PRODUCT)
        assert product.combined_grid() == [[0.9 * 0.7]]

    def test_column_constancy(self):
        matrix = build_matrix(ten_by_ten_example(), CountingScorer(), CombineMode.CUTOFF)
        for j in range(matrix.n):
            column = {matrix.cell(i, j).evidentiality for i in range(matrix.m)}
            assert len(column) == 1

    def test_scorer_failure_marks_matrix_incomplete(self):
        class FailingScorer:
            def score(self, req):
                raise MissingScoreError(("q", None, "r"))

        matrix = build_matrix(make_example(), FailingScorer(), CombineMode.CUTOFF)
        assert matrix.complete is False
        assert matrix.scores == ()
        assert "no stored score" in matrix.error

    def test_empty_pool_is_a_contract_violation(self):
        example = make_example()
        from dataclasses import replace

        with pytest.raises(ContractViolation):
            build_matrix(replace(example, generated=()), CountingScorer(), CombineMode.CUTOFF)


class TestDumpRoundTrip:
    def test_dump_store_round_trip(self, tmp_path):
        example = ten_by_ten_example()
        scorer = CountingScorer(
            evidentiality={f"r{j}": j / 10 for j in range(10)},
            consistency={(f"g{i}", f"r{j}"): (i * 10 + j) / 100 for i in range(10) for j in range(10)},
        )
        matrix = build_matrix(example, scorer, CombineMode.CUTOFF)
        dump = tmp_path / "matrices.jsonl"
        write_matrix_dump(dump, [matrix])

        loaded = load_matrix_dump(dump)
        assert len(loaded) == 1
        assert loaded[0].combined_grid() == matrix.combined_grid()
        assert loaded[0].mode is None

        store = FileScoreStore.from_matrix_dump(dump, [example])
        rebuilt = build_matrix(example, store, CombineMode.CUTOFF)
        assert rebuilt.combined_grid() == matrix.combined_grid()
        for i in range(10):
            for j in range(10):
                assert rebuilt.cell(i, j) == matrix.cell(i, j)

    def test_incomplete_matrices_are_not_dumped(self, tmp_path):
        class FailingScorer:
            def score(self, req):
                raise MissingScoreError(("q", None, "r"))

        bad = build_matrix(make_example(), FailingScorer(), CombineMode.CUTOFF)
        dump = tmp_path / "matrices.jsonl"
        assert write_matrix_dump(dump, [bad]) == 0

    def test_missing_cells_rejected_on_load(self, tmp_path):
        from pairqa.lineio import write_jsonl

        dump = tmp_path / "m.jsonl"
        write_jsonl(
            dump,
            [
                {"question_id": "q", "i": 0, "j": 0, "evidentiality": 1, "consistency": 1, "combined": 1},
                {"question_id": "q", "i": 1, "j": 1, "evidentiality": 1, "consistency": 1, "combined": 1},
            ],
        )
        with pytest.raises(ContractViolation, match="missing cells"):
            load_matrix_dump(dump)
