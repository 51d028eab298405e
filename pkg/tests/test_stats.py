"""Statistics tests with scalar-arithmetic oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carvegen import stats
from carvegen.errors import NonFiniteValueError, TooFewSamplesError


def summary_oracle(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    std = math.sqrt(var)
    ordered = sorted(values)
    if n % 2:
        median = ordered[n // 2]
    else:
        median = (ordered[n // 2 - 1] + ordered[n // 2]) / 2
    return {
        "mean": mean,
        "median": median,
        "std": std,
        "ci95": 1.96 * std / math.sqrt(n),
        "min": min(values),
        "max": max(values),
    }


def quantile_oracle(values, p):
    """Linear interpolation between order statistics."""
    ordered = sorted(values)
    pos = p * (len(ordered) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    frac = pos - lo
    return ordered[lo] * (1 - frac) + ordered[hi] * frac


class TestSummary:
    def test_frozen_small_example(self):
        s = stats.summarize([1.0, 2.0, 3.0, 4.0], metric="chi_square", set_id="2_5")
        assert s.metric == "chi_square" and s.set_id == "2_5"
        assert s.n == 4
        assert s.mean == pytest.approx(2.5, abs=1e-15)
        assert s.median == pytest.approx(2.5, abs=1e-15)
        assert s.minimum == 1.0 and s.maximum == 4.0
        assert s.std == pytest.approx(1.2909944487358056, abs=1e-12)
        assert s.ci95 == pytest.approx(1.2651745597611895, abs=1e-12)

    def test_constant_data(self):
        s = stats.summarize([5.0, 5.0, 5.0])
        assert s.std == 0.0 and s.ci95 == 0.0
        assert s.mean == 5.0 and s.median == 5.0 and s.minimum == 5.0 == s.maximum

    def test_too_few(self):
        with pytest.raises(TooFewSamplesError):
            stats.summarize([1.0])
        with pytest.raises(TooFewSamplesError):
            stats.summarize([])

    def test_non_finite(self):
        with pytest.raises(NonFiniteValueError):
            stats.summarize([1.0, float("nan"), 2.0])
        with pytest.raises(NonFiniteValueError):
            stats.summarize([1.0, float("inf")])

    @settings(max_examples=100, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=2,
            max_size=200,
        )
    )
    def test_matches_oracle(self, values):
        s = stats.summarize(values)
        want = summary_oracle(values)
        assert s.mean == pytest.approx(want["mean"], rel=1e-9, abs=1e-9)
        assert s.median == pytest.approx(want["median"], rel=1e-9, abs=1e-9)
        assert s.std == pytest.approx(want["std"], rel=1e-9, abs=1e-9)
        assert s.ci95 == pytest.approx(want["ci95"], rel=1e-9, abs=1e-9)
        assert s.minimum == want["min"] and s.maximum == want["max"]

    @settings(max_examples=40, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
            min_size=2,
            max_size=60,
        ),
        shift=st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
    )
    def test_shift_equivariance(self, values, shift):
        base = stats.summarize(values)
        moved = stats.summarize([v + shift for v in values])
        assert moved.mean == pytest.approx(base.mean + shift, rel=1e-9, abs=1e-6)
        assert moved.median == pytest.approx(base.median + shift, rel=1e-9, abs=1e-6)
        assert moved.std == pytest.approx(base.std, rel=1e-9, abs=1e-6)
        assert moved.ci95 == pytest.approx(base.ci95, rel=1e-9, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
            min_size=2,
            max_size=60,
        ),
        scale=st.floats(min_value=-100.0, max_value=100.0, allow_nan=False),
    )
    def test_scale_equivariance(self, values, scale):
        base = stats.summarize(values)
        scaled = stats.summarize([v * scale for v in values])
        assert scaled.mean == pytest.approx(base.mean * scale, rel=1e-9, abs=1e-6)
        assert scaled.std == pytest.approx(base.std * abs(scale), rel=1e-9, abs=1e-6)
        assert scaled.ci95 == pytest.approx(base.ci95 * abs(scale), rel=1e-9, abs=1e-6)


class TestQuantiles:
    def test_frozen_percentiles(self):
        values = [float(v) for v in range(1, 101)]
        q = stats.quantiles(values, [0.25, 0.5, 0.75])
        assert q == pytest.approx([25.75, 50.5, 75.25], abs=1e-12)

    def test_endpoints(self):
        assert stats.quantiles([3.0, 1.0, 2.0], [0.0, 1.0]) == [1.0, 3.0]

    def test_bad_point(self):
        with pytest.raises(ValueError):
            stats.quantiles([1.0, 2.0], [1.5])

    @settings(max_examples=60, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
            min_size=2,
            max_size=60,
        ),
        p=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_matches_interpolation_oracle(self, values, p):
        got = stats.quantiles(values, [p])[0]
        assert got == pytest.approx(quantile_oracle(values, p), rel=1e-9, abs=1e-9)


class TestBoxStats:
    def test_whiskers_clip_to_data(self):
        values = [1.0, 2.0, 3.0, 4.0, 100.0]
        box = stats.box_stats(values)
        # q1=2, q3=4, iqr=2, fences at -1 and 7; 100 is an outlier
        assert box.q1 == pytest.approx(2.0)
        assert box.q3 == pytest.approx(4.0)
        assert box.whisker_low == 1.0
        assert box.whisker_high == 4.0
        assert box.outliers == (100.0,)

    def test_no_outliers(self):
        box = stats.box_stats([1.0, 2.0, 3.0, 4.0, 5.0])
        assert box.whisker_low == 1.0
        assert box.whisker_high == 5.0
        assert box.outliers == ()

    def test_single_value(self):
        box = stats.box_stats([7.5])
        assert box.q1 == box.median == box.q3 == 7.5
        assert box.whisker_low == box.whisker_high == 7.5
        assert box.outliers == ()

    @settings(max_examples=60, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
            min_size=2,
            max_size=80,
        )
    )
    def test_invariants(self, values):
        box = stats.box_stats(values)
        assert box.q1 <= box.median <= box.q3
        assert box.whisker_low <= box.whisker_high
        assert box.whisker_low in values and box.whisker_high in values
        iqr = box.q3 - box.q1
        assert box.whisker_low >= box.q1 - 1.5 * iqr - 1e-12
        assert box.whisker_high <= box.q3 + 1.5 * iqr + 1e-12
        for v in box.outliers:
            assert v < box.q1 - 1.5 * iqr or v > box.q3 + 1.5 * iqr


class TestExports:
    def test_distribution_files(self, tmp_path):
        path = tmp_path / "chi.csv"
        stats.export_distribution(
            [1.0, 2.0, 3.0, 4.0, 100.0], "chi_square", "2_5", path
        )
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "set_id,metric,value"
        assert lines[1].startswith("2_5,chi_square,")
        assert [float(v.split(",")[2]) for v in lines[1:]] == [
            1.0,
            2.0,
            3.0,
            4.0,
            100.0,
        ]
        rows = (tmp_path / "chi.box.csv").read_text().strip().split("\n")
        assert rows[0] == (
            "set_id,metric,q1,median,q3,whisker_low,whisker_high,outliers"
        )
        fields = rows[1].split(",")
        assert fields[0] == "2_5" and fields[1] == "chi_square"
        assert float(fields[2]) == pytest.approx(2.0)
        assert float(fields[7]) == 100.0

    def test_distribution_single_value(self, tmp_path):
        path = tmp_path / "one.csv"
        stats.export_distribution([3.25], "ssim", "4_5", path)
        rows = (tmp_path / "one.box.csv").read_text().strip().split("\n")
        fields = rows[1].split(",")
        assert float(fields[2]) == float(fields[3]) == float(fields[4]) == 3.25
        assert fields[7] == ""

    def test_values_round_trip_exactly(self, tmp_path):
        rng = np.random.default_rng(3)
        values = list(rng.normal(size=50))
        path = tmp_path / "d.csv"
        stats.export_distribution(values, "jsd", "3_5", path)
        lines = path.read_text().strip().split("\n")[1:]
        assert [float(v.split(",")[2]) for v in lines] == values

    def test_summary_csv(self, tmp_path):
        rows = [
            stats.summarize([1.0, 2.0], metric="cosine", set_id="3_5"),
            stats.summarize([3.0, 4.0], metric="cosine", set_id="2_5"),
            stats.summarize([5.0, 6.0], metric="chi_square", set_id="2_5"),
        ]
        path = tmp_path / "summary.csv"
        stats.write_summary_csv(rows, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "metric,set,n,mean,median,min,max,std,ci95"
        assert lines[1].startswith("chi_square,2_5,2,")
        assert lines[2].startswith("cosine,2_5,")
        assert lines[3].startswith("cosine,3_5,")

    def test_summary_text_layout(self):
        summaries = []
        for metric in ("chi_square", "cosine", "jsd", "ssim"):
            for set_id in ("2_5", "3_5", "4_5"):
                summaries.append(
                    stats.summarize([1.0, 2.0, 3.0], metric=metric, set_id=set_id)
                )
        text = stats.format_summary_text(summaries)
        lines = text.strip().split("\n")
        assert len(lines) == 2 + 4  # two header lines + one row per metric
        assert lines[0].split() == ["metric"] + ["mean"] * 3 + ["std"] * 3 + [
            "ci95"
        ] * 3
        assert lines[1].split() == ["2_5", "3_5", "4_5"] * 3
        assert lines[2].split()[0] == "chi_square"
        assert len(lines[2].split()) == 10
