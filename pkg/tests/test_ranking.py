"""Score cubes, fractional ranking, SSE/MSE, and the Tukey range test."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffcae.cli import bundled_scores_path
from ffcae.ranking import (
    RankTable,
    ScoreCube,
    TukeyResult,
    mse_from_ranks,
    rank_methods,
    rank_sse,
    tukey_hsd,
)

METHODS = (
    "windows_pca",
    "irmad",
    "sfi_irmad",
    "sfi_dsp",
    "s3dcae_ad",
    "deep_sfa",
    "ffcae_sam",
    "ffcae_ad",
)
METRICS = ("oa", "kappa", "f_score", "pwc", "dr")

# Average ranks computed from the bundled benchmark scores (frozen oracle).
# Four cells involve ties among 4-decimal scores, so they land on x.125
# midpoints instead of the quarter-steps a strict ordering would give.
BENCHMARK_AVG_RANKS = {
    "oa": [7.5, 7.5, 5.125, 4.25, 4.625, 4.0, 1.75, 1.25],
    "kappa": [7.625, 6.875, 5.5, 4.5, 4.75, 3.75, 1.5, 1.5],
    "f_score": [7.5, 7.25, 5.5, 4.5, 4.5, 3.75, 1.5, 1.5],
    "pwc": [7.5, 7.5, 5.25, 4.25, 4.5, 4.0, 1.75, 1.25],
    "dr": [6.5, 5.75, 5.5, 5.5, 5.75, 3.75, 1.5, 1.75],
}


def small_cube():
    records = [
        ("alpha", "d1", "acc", 0.9),
        ("alpha", "d1", "err", 1.0),
        ("alpha", "d2", "acc", 0.8),
        ("alpha", "d2", "err", 3.0),
        ("beta", "d1", "acc", 0.7),
        ("beta", "d1", "err", 2.0),
        ("beta", "d2", "acc", 0.6),
        ("beta", "d2", "err", 4.0),
    ]
    return ScoreCube.from_records(records, lower_better=("err",))


class TestScoreCube:
    def test_from_records_preserves_first_appearance_order(self):
        cube = small_cube()
        assert cube.methods == ("alpha", "beta")
        assert cube.datasets == ("d1", "d2")
        assert cube.metrics == ("acc", "err")
        assert cube.scores[0, 0, 0] == 0.9
        assert cube.scores[1, 1, 1] == 4.0

    def test_rejects_duplicates(self):
        records = [
            ("a", "d", "m", 1.0),
            ("a", "d", "m", 2.0),
        ]
        with pytest.raises(ValueError, match="duplicate"):
            ScoreCube.from_records(records)

    def test_rejects_incomplete(self):
        records = [
            ("a", "d1", "m", 1.0),
            ("a", "d2", "m", 1.0),
            ("b", "d1", "m", 1.0),
        ]
        with pytest.raises(ValueError, match="incomplete"):
            ScoreCube.from_records(records)

    def test_rejects_unknown_orientation(self):
        with pytest.raises(ValueError, match="unknown metrics"):
            ScoreCube(
                methods=("a", "b"),
                datasets=("d",),
                metrics=("m",),
                scores=np.zeros((2, 1, 1)),
                lower_better=frozenset({"nope"}),
            )

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            ScoreCube(
                methods=("a", "b"),
                datasets=("d",),
                metrics=("m",),
                scores=np.zeros((2, 2, 1)),
                lower_better=frozenset(),
            )

    def test_from_csv(self, tmp_path):
        text = "method,dataset,metric,value\na,d,m,1.5\nb,d,m,2.5\n"
        (tmp_path / "scores.csv").write_text(text)
        cube = ScoreCube.from_csv(tmp_path / "scores.csv")
        assert cube.methods == ("a", "b")
        assert cube.scores[1, 0, 0] == 2.5

    def test_from_csv_rejects_missing_columns(self, tmp_path):
        (tmp_path / "bad.csv").write_text("method,value\na,1.0\n")
        with pytest.raises(ValueError, match="columns"):
            ScoreCube.from_csv(tmp_path / "bad.csv")


class TestRankMethods:
    def test_higher_is_better_by_default(self):
        cube = small_cube()
        table = rank_methods(cube)
        # alpha wins 'acc' on both datasets -> rank 1; and has lower 'err'.
        acc = table.avg_rank[table.metrics.index("acc")]
        err = table.avg_rank[table.metrics.index("err")]
        assert acc.tolist() == [1.0, 2.0]
        assert err.tolist() == [1.0, 2.0]

    def test_ties_share_fractional_rank(self):
        records = [
            ("a", "d", "m", 0.5),
            ("b", "d", "m", 0.5),
            ("c", "d", "m", 0.1),
        ]
        table = rank_methods(ScoreCube.from_records(records, lower_better=()))
        assert table.avg_rank[0].tolist() == [1.5, 1.5, 3.0]

    def test_rejects_single_method(self):
        records = [("a", "d", "m", 1.0)]
        with pytest.raises(ValueError, match="2 methods"):
            rank_methods(ScoreCube.from_records(records))

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_rows_sum_to_rank_total(self, seed):
        """Fractional ranks over k methods always sum to k(k+1)/2."""
        local = np.random.default_rng(seed)
        k, d, m = 5, 3, 2
        records = [
            (f"m{i}", f"d{j}", f"s{s}", float(local.normal()))
            for i in range(k)
            for j in range(d)
            for s in range(m)
        ]
        table = rank_methods(ScoreCube.from_records(records, lower_better=("s1",)))
        expected = k * (k + 1) / 2
        for row in table.avg_rank:
            assert row.sum() == pytest.approx(expected)


@pytest.fixture(scope="module")
def table():
    return rank_methods(ScoreCube.from_csv(bundled_scores_path()))


class TestBenchmarkTable:
    def test_shipped_scores_are_complete(self):
        cube = ScoreCube.from_csv(bundled_scores_path())
        assert cube.methods == METHODS
        assert cube.datasets == ("china", "usa", "river", "hermiston")
        assert cube.metrics == METRICS
        assert cube.scores.shape == (8, 4, 5)
        assert cube.lower_better == frozenset({"pwc"})

    def test_average_ranks_match_frozen_oracle(self, table):
        assert table.methods == METHODS
        for k, metric in enumerate(table.metrics):
            assert table.avg_rank[k].tolist() == BENCHMARK_AVG_RANKS[metric], metric

    def test_proposed_methods_rank_first_and_second(self, table):
        means = table.method_means
        order = np.argsort(means)
        first, second = METHODS[order[0]], METHODS[order[1]]
        assert {first, second} == {"ffcae_ad", "ffcae_sam"}


class TestRankTable:
    def test_validation_bounds(self):
        with pytest.raises(ValueError, match=r"\[1, 2\]"):
            RankTable(("a", "b"), ("m",), np.array([[0.5, 2.0]]))
        with pytest.raises(ValueError, match="shape"):
            RankTable(("a", "b"), ("m",), np.array([[1.0, 2.0], [1.0, 2.0]]))

    def test_method_means(self):
        table = RankTable(("a", "b"), ("m1", "m2"), np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert table.method_means.tolist() == [1.5, 1.5]

    def test_to_csv(self):
        table = RankTable(("a", "b"), ("m1",), np.array([[1.0, 2.0]]))
        assert table.to_csv() == "metric,a,b\nm1,1.0000,2.0000\n"


class TestSseAndMse:
    def test_hand_example(self):
        table = RankTable(
            ("a", "b"), ("m1", "m2"), np.array([[1.0, 2.0], [2.0, 1.0]])
        )
        # Means are 1.5 each; four deviations of 0.5 -> SSE 1.0.
        assert rank_sse(table) == pytest.approx(1.0)
        assert mse_from_ranks(table, nu=4) == pytest.approx(0.25)

    def test_matches_brute_force(self, rng):
        ranks = rng.uniform(1.0, 4.0, size=(5, 4))
        table = RankTable(("a", "b", "c", "d"), tuple("mnopq"), ranks)
        means = ranks.mean(axis=0)
        brute = sum(
            (ranks[k, i] - means[i]) ** 2
            for k in range(5)
            for i in range(4)
        )
        assert rank_sse(table) == pytest.approx(brute, rel=1e-12)

    def test_default_nu_is_32(self):
        table = RankTable(
            ("a", "b"), ("m1", "m2"), np.array([[1.0, 2.0], [2.0, 1.0]])
        )
        assert mse_from_ranks(table) == pytest.approx(1.0 / 32.0)

    def test_rejects_constant_table(self):
        table = RankTable(
            ("a", "b"), ("m1", "m2"), np.array([[1.0, 2.0], [1.0, 2.0]])
        )
        with pytest.raises(ValueError, match="degenerate"):
            mse_from_ranks(table)

    def test_rejects_bad_nu(self):
        table = RankTable(
            ("a", "b"), ("m1", "m2"), np.array([[1.0, 2.0], [2.0, 1.0]])
        )
        with pytest.raises(ValueError, match="positive"):
            mse_from_ranks(table, nu=0)

    def test_rejects_tiny_table(self):
        table = RankTable(("a", "b"), ("m1",), np.array([[1.0, 2.0]]))
        with pytest.raises(ValueError, match="at least 2"):
            mse_from_ranks(table)


class TestTukeyHsd:
    def _table(self):
        return RankTable(
            ("a", "b", "c"),
            ("m1", "m2"),
            np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]),
        )

    def test_q_values(self):
        result = tukey_hsd(self._table(), n=4, mse=0.25, q_critical=3.0)
        # Mean ranks 1, 2, 3; scale sqrt(4/0.25) = 4.
        assert result.q[0, 1] == pytest.approx(4.0)
        assert result.q[0, 2] == pytest.approx(8.0)
        assert result.q[1, 2] == pytest.approx(4.0)

    def test_symmetry_and_zero_diagonal(self):
        result = tukey_hsd(self._table(), n=4, mse=0.25, q_critical=3.0)
        assert np.array_equal(result.q, result.q.T)
        assert np.all(np.diag(result.q) == 0.0)
        assert not result.significant.diagonal().any()

    def test_significance_is_strict_threshold(self):
        result = tukey_hsd(self._table(), n=4, mse=0.25, q_critical=4.0)
        assert not result.significant[0, 1]  # Q == critical is not enough
        assert result.significant[0, 2]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="sample count"):
            tukey_hsd(self._table(), n=0, mse=1.0, q_critical=1.0)
        with pytest.raises(ValueError, match="mse"):
            tukey_hsd(self._table(), n=4, mse=0.0, q_critical=1.0)

    def test_report_lists_every_pair(self):
        result = tukey_hsd(self._table(), n=4, mse=0.25, q_critical=3.0)
        report = result.report()
        assert "a vs b" in report
        assert "a vs c" in report
        assert "b vs c" in report
        assert report.count("\n") == 4  # header + three pairs

    def test_to_csv_shape(self):
        result = tukey_hsd(self._table(), n=4, mse=0.25, q_critical=3.0)
        lines = result.to_csv().splitlines()
        assert lines[0] == "method,a,b,c"
        assert len(lines) == 4
