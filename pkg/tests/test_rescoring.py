import pytest

from sanlm import rescoring as R
from sanlm.errors import DataError, ParameterError


def make_list(utt="u1", reference=None, scores=(-1.0, -2.0, -3.0)):
    entries = [R.NBestEntry(f"hyp {i}", s) for i, s in enumerate(scores)]
    return R.NBestList(utt, entries, reference=reference)


class TestCombine:
    def test_lambda_zero_is_am(self):
        assert R.combine(-10.0, -5.0, 0.0) == -10.0

    def test_lambda_one_is_lm(self):
        assert R.combine(-10.0, -5.0, 1.0) == -5.0

    def test_paper_dev_clean_weight(self):
        assert abs(R.combine(-10.0, -5.0, 0.2) + 9.0) < 1e-12

    def test_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            R.combine(0.0, 0.0, 1.5)


class TestCombineLms:
    def test_alpha_one_is_bi_only(self):
        assert R.combine_lms(-8.0, -6.0, 1.0) == -6.0

    def test_alpha_zero_is_uni_only(self):
        assert R.combine_lms(-8.0, -6.0, 0.0) == -8.0

    def test_midpoint(self):
        assert abs(R.combine_lms(-8.0, -6.0, 0.5) + 7.0) < 1e-12


class TestRescoreNbest:
    def test_lambda_zero_preserves_am_order(self):
        nbest = make_list()
        out = R.rescore_nbest(nbest, [-50.0, 0.0, -10.0], 0.0)
        assert [h.am_rank for h in out] == [1, 2, 3]

    def test_lambda_one_is_lm_order(self):
        nbest = make_list()
        out = R.rescore_nbest(nbest, [-50.0, 0.0, -10.0], 1.0)
        assert [h.lm_score for h in out] == [0.0, -10.0, -50.0]

    def test_hand_computed_ranking(self):
        nbest = R.NBestList("u", [R.NBestEntry("a", -4.0),
                                  R.NBestEntry("b", -6.0),
                                  R.NBestEntry("c", -8.0)])
        # lambda 0.5: a -> -4.5, b -> -3.5, c -> -5.0
        out = R.rescore_nbest(nbest, [-5.0, -1.0, -2.0], 0.5)
        assert [h.text for h in out] == ["b", "a", "c"]
        assert [h.rank for h in out] == [1, 2, 3]

    def test_ties_break_by_am_rank(self):
        nbest = make_list(scores=(-1.0, -1.0, -1.0))
        out = R.rescore_nbest(nbest, [-2.0, -2.0, -2.0], 0.5)
        assert [h.am_rank for h in out] == [1, 2, 3]

    def test_output_is_permutation(self):
        nbest = make_list()
        out = R.rescore_nbest(nbest, [-3.0, -1.0, -2.0], 0.7)
        assert sorted(h.text for h in out) == sorted(e.text for e in nbest.entries)

    def test_constant_lm_shift_does_not_change_ranking(self):
        nbest = make_list()
        scores = [-7.0, -3.0, -5.0]
        base = R.rescore_nbest(nbest, scores, 0.4)
        shifted = R.rescore_nbest(nbest, [s + 123.0 for s in scores], 0.4)
        assert [h.text for h in base] == [h.text for h in shifted]

    def test_score_count_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            R.rescore_nbest(make_list(), [-1.0], 0.5)

    def test_empty_list_rejected(self):
        with pytest.raises(DataError):
            R.NBestList("u", [])


class TestSweepLambda:
    def _dev_list(self):
        # reference equals the AM runner-up, so lambda must move it up
        entries = [R.NBestEntry("b b b", -1.0), R.NBestEntry("a a a", -2.0)]
        return R.NBestList("u1", entries, reference="a a a")

    def test_degenerate_grid(self):
        best, table = R.sweep_lambda([self._dev_list()],
                                     lambda text: 0.0, [0.3])
        assert best == 0.3
        assert len(table) == 1

    def test_prefers_lambda_that_fixes_errors(self):
        scorer = {"b b b": -10.0, "a a a": -1.0}.get
        best, table = R.sweep_lambda([self._dev_list()], scorer, [0.0, 1.0])
        assert best == 1.0
        assert table[0]["wer"] == 1.0 and table[1]["wer"] == 0.0

    def test_returns_zero_when_baseline_wins(self):
        entries = [R.NBestEntry("a a a", -1.0), R.NBestEntry("b b b", -2.0)]
        lists = [R.NBestList("u1", entries, reference="a a a")]
        scorer = {"a a a": -10.0, "b b b": -1.0}.get
        best, _ = R.sweep_lambda(lists, scorer, [0.0, 1.0])
        assert best == 0.0

    def test_table_row_per_grid_point(self):
        grid = [0.0, 0.25, 0.5, 0.75, 1.0]
        _, table = R.sweep_lambda([self._dev_list()], lambda t: 0.0, grid)
        assert [row["lambda"] for row in table] == grid

    def test_missing_reference_rejected(self):
        with pytest.raises(DataError):
            R.sweep_lambda([make_list()], lambda t: 0.0, [0.5])

    def test_tie_prefers_smaller_lambda(self):
        best, _ = R.sweep_lambda([self._dev_list()], lambda t: -1.0,
                                 [0.4, 0.6])
        assert best == 0.4


class TestNbestFiles:
    def test_round_trip(self, tmp_path):
        lists = [make_list("u1", reference="ref one"),
                 make_list("u2", reference="ref two")]
        path = tmp_path / "nbest.jsonl"
        R.save_nbest(lists, path)
        loaded = R.load_nbest(path)
        assert [nl.utterance_id for nl in loaded] == ["u1", "u2"]
        assert loaded[0].reference == "ref one"
        assert [e.am_score for e in loaded[0].entries] == [-1.0, -2.0, -3.0]

    def test_scored_fields_written(self, tmp_path):
        nbest = make_list("u1")
        scored = {"u1": R.rescore_nbest(nbest, [-1.0, -2.0, -3.0], 0.5)}
        path = tmp_path / "rescored.jsonl"
        R.save_nbest([nbest], path, scored=scored)
        text = path.read_text()
        assert "combined" in text and "lm_score" in text

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError):
            R.load_nbest(tmp_path / "nope.jsonl")

    def test_bad_record_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"utterance_id": "u1"}\n')
        with pytest.raises(DataError):
            R.load_nbest(path)
