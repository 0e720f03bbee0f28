import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advexplain.dataset import FeatureSchema, NormalizationStats
from advexplain.explainer import CorrectionResult
from advexplain.report import (DeviationSummary, apply_projection, categorical_comparison,
                               closeness_ratio, emit_report, feature_distribution, fit_projection, mean_deviation)

SCHEMA = FeatureSchema([("duration", "integer"), ("service", "categorical"), ("rate", "continuous")],
                       {"service": ["http", "private", "smtp"]})
STATS = NormalizationStats(np.zeros(5), np.ones(5))


def res(x0, x_hat, converged=True):
    x0, x_hat = np.asarray(x0, dtype=float), np.asarray(x_hat, dtype=float)
    return CorrectionResult(x0, x_hat, converged, 10, 0.0, float(((x0 - x_hat) ** 2).sum()) if converged else None)


def rec(duration, service, rate):
    onehot = [float(service == s) for s in ("http", "private", "smtp")]
    return [float(duration)] + onehot + [float(rate)]


class TestMeanDeviation:
    def test_all_zero(self):
        rs = [res(rec(1, "http", 0.5), rec(1, "http", 0.5)) for _ in range(3)]
        s = mean_deviation(rs, SCHEMA)
        assert all(f.mean == 0.0 and f.std == 0.0 for f in s.features)
        assert [f.name for f in s.features] == ["duration", "rate"]

    def test_mean_of_two(self):
        rs = [res(rec(1, "http", 0), rec(0, "http", 0)), res(rec(3, "http", 0), rec(0, "http", 0))]
        d = mean_deviation(rs, SCHEMA).by_name()["duration"]
        assert d.mean == 2.0 and d.count == 2 and d.std == 1.0

    def test_sorted_and_excludes_non_converged(self):
        rs = [res(rec(0, "http", 1.0), rec(0.5, "http", 0.0)),
              res(rec(9, "http", 9), rec(0, "http", 0), converged=False)]
        s = mean_deviation(rs, SCHEMA)
        assert [f.name for f in s.features] == ["rate", "duration"]
        assert s.n_included == 1 and s.n_excluded == 1 and s.non_converged_rate == 0.5

    def test_empty(self):
        s = mean_deviation([], SCHEMA)
        assert s.features == [] and s.n_included == 0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=12), st.data())
    def test_aggregation_linearity(self, pairs, data):
        rs = [res(rec(a, "http", b), rec(0, "http", 0)) for a, b in pairs]
        cut = data.draw(st.integers(1, len(rs) - 1))
        whole = mean_deviation(rs, SCHEMA).by_name()
        left, right = mean_deviation(rs[:cut], SCHEMA).by_name(), mean_deviation(rs[cut:], SCHEMA).by_name()
        for name in ("duration", "rate"):
            combined = (cut * left[name].mean + (len(rs) - cut) * right[name].mean) / len(rs)
            assert whole[name].mean == pytest.approx(combined, abs=1e-12)

    def test_dict_round_trip(self):
        rs = [res(rec(1, "http", 0.25), rec(0, "smtp", 0.5))]
        s = mean_deviation(rs, SCHEMA)
        assert DeviationSummary.from_dict(json.loads(json.dumps(s.to_dict()))) == s


class TestFeatureDistribution:
    def test_values(self):
        stats = NormalizationStats(np.array([10.0, 0, 0, 0, 0]), np.array([2.0, 1, 1, 1, 1]))
        rs = [res(rec(0, "http", 0), rec(-1, "http", 0))]  # normalized 0 -> raw 10 ; -1 -> 8
        assert feature_distribution(rs, "duration", SCHEMA, stats) == ([10.0], [8.0])

    def test_empty(self):
        assert feature_distribution([], "duration", SCHEMA, STATS) == ([], [])

    def test_categorical_rejected(self):
        with pytest.raises(ValueError):
            feature_distribution([], "service", SCHEMA, STATS)


class TestCategorical:
    def test_no_changes(self):
        rs = [res(rec(0, "http", 0), rec(1, "http", 0)), res(rec(0, "smtp", 0), rec(0, "smtp", 1))]
        cc = categorical_comparison(rs, SCHEMA, STATS)
        assert all(a == b for a, b in cc.counts["service"].values())
        assert cc.changed["service"] == 0

    def test_one_move(self):
        rs = [res(rec(0, "private", 0), rec(0, "http", 0)), res(rec(0, "private", 0), rec(0, "private", 0))]
        cc = categorical_comparison(rs, SCHEMA, STATS)
        assert cc.counts["service"] == {"http": (0, 1), "private": (2, 1), "smtp": (0, 0)}
        assert cc.changed_rate("service") == 0.5

    def test_uses_rounded_x_hat(self):
        # continuous x_hat one-hot slots (0.3, 0.6, 0.1) round to "private"
        x_hat = np.array([0.0, 0.3, 0.6, 0.1, 0.0])
        cc = categorical_comparison([res(rec(0, "http", 0), x_hat)], SCHEMA, STATS)
        assert cc.counts["service"]["private"] == (0, 1)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["http", "private", "smtp"]),
                              st.sampled_from(["http", "private", "smtp"]), st.booleans()), max_size=15))
    def test_conservation(self, moves):
        rs = [res(rec(0, a, 0), rec(0, b, 0), c) for a, b, c in moves]
        cc = categorical_comparison(rs, SCHEMA, STATS)
        n = sum(c for _, _, c in moves)
        assert cc.n_included == n
        col0 = sum(v[0] for v in cc.counts["service"].values())
        col1 = sum(v[1] for v in cc.counts["service"].values())
        assert col0 == col1 == n


class TestProjection:
    def test_axis_aligned_identity(self, rng):
        X = np.column_stack([rng.normal(scale=3, size=200), rng.normal(scale=1, size=200)])
        p = fit_projection(X)
        np.testing.assert_allclose(np.abs(p.components), np.eye(2), atol=0.05)
        assert p.explained_variance[0] >= p.explained_variance[1]

    def test_line_against_svd(self, rng):
        t = rng.normal(size=50)
        X = np.column_stack([t, 2 * t])
        p = fit_projection(X)
        assert np.abs(apply_projection(p, X)[:, 1]).max() < 1e-6
        # independent solver: right singular vectors of the centred data
        _, _, vt = np.linalg.svd(X - X.mean(axis=0))
        assert abs(abs(p.components[0] @ vt[0]) - 1) < 1e-12
        np.testing.assert_allclose(p.components[0], np.array([1.0, 2.0]) / np.sqrt(5), atol=1e-12)

    @pytest.mark.parametrize("d", [2, 5, 30])
    def test_orthonormal_and_ordered(self, d, rng):
        X = rng.normal(size=(80, d)) * rng.uniform(0.1, 3, size=d)
        p = fit_projection(X)
        np.testing.assert_allclose(p.components @ p.components.T, np.eye(2), atol=1e-9)
        proj = apply_projection(p, X)
        assert proj[:, 0].var() >= proj[:, 1].var()

    def test_sign_convention(self, rng):
        X = rng.normal(size=(40, 4))
        for row in fit_projection(X).components:
            assert row[np.argmax(np.abs(row))] > 0
        a, b = fit_projection(X), fit_projection(-X)
        np.testing.assert_allclose(a.components, b.components, atol=1e-12)

    def test_closeness_ratio(self):
        p = fit_projection(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [3.0, 0.0]]))
        x0 = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
        assert closeness_ratio(p, x0, x0) == 0.0
        # pair distances all 0.5; pairwise x0 distances 2, 4, 2 -> median 2
        shifted = x0 + np.array([0.3, 0.4])
        assert closeness_ratio(p, x0, shifted) == pytest.approx(0.25)


class TestEmit:
    def _inputs(self):
        rs = [res(rec(0, "private", 0.1), rec(-1.0, "http", 0.2)), res(rec(0, "http", 0.3), rec(-2.0, "http", 0.1)),
              res(rec(0, "smtp", 0.2), rec(-1.5, "smtp", 0.3)), res(rec(5, "http", 5), rec(0, "http", 0), False)]
        proj = fit_projection(np.array([r.x0 for r in rs if r.converged]))
        return rs, mean_deviation(rs, SCHEMA), categorical_comparison(rs, SCHEMA, STATS), proj

    def test_files_and_round_trip(self, tmp_path):
        rs, summary, comp, proj = self._inputs()
        written = emit_report(tmp_path, summary, comp, proj, rs, SCHEMA, STATS)
        names = sorted(os.path.basename(p) for p in written)
        for expected in ("deviation_summary.json", "deviation_summary.csv", "categorical_comparison.json",
                         "results.jsonl", "deviation_bar.svg", "categorical_service.svg",
                         "distribution_duration.svg", "projection.json", "projection_scatter.svg"):
            assert expected in names
        back = DeviationSummary.from_dict(json.loads((tmp_path / "deviation_summary.json").read_text()))
        assert back == summary
        assert len((tmp_path / "results.jsonl").read_text().splitlines()) == 4
        for p in written:
            if p.endswith(".svg"):
                assert ET.parse(p).getroot().tag.endswith("svg")
        csv_rows = (tmp_path / "deviation_summary.csv").read_text().splitlines()
        assert csv_rows[0] == "feature,mean,std,count" and len(csv_rows) == 3

    def test_top_k_limits_chart_only(self, tmp_path):
        rs, summary, comp, proj = self._inputs()
        emit_report(tmp_path, summary, comp, proj, rs, SCHEMA, STATS, top_k=1)
        chart = ET.parse(tmp_path / "deviation_bar.svg").getroot()
        labels = [t.text for t in chart.iter("{http://www.w3.org/2000/svg}text")]
        assert "duration" in labels and "rate" not in labels
        assert len(json.loads((tmp_path / "deviation_summary.json").read_text())["features"]) == 2

    def test_empty_inputs(self, tmp_path):
        summary = mean_deviation([], SCHEMA)
        comp = categorical_comparison([], SCHEMA, STATS)
        written = emit_report(tmp_path, summary, comp, None, [], SCHEMA, STATS)
        assert json.loads((tmp_path / "deviation_summary.json").read_text())["features"] == []
        cc = json.loads((tmp_path / "categorical_comparison.json").read_text())
        assert cc["n_included"] == 0
        assert (tmp_path / "results.jsonl").read_text() == ""
        for p in written:
            if p.endswith(".svg"):
                ET.parse(p)

    def test_escapes_labels(self, tmp_path):
        schema = FeatureSchema([("a<b", "continuous"), ("svc", "categorical")], {"svc": ["x&y", "z"]})
        stats = NormalizationStats(np.zeros(3), np.ones(3))
        rs = [res([1.0, 1.0, 0.0], [0.0, 0.0, 1.0])]
        emit_report(tmp_path, mean_deviation(rs, schema), categorical_comparison(rs, schema, stats),
                    None, rs, schema, stats, distribution_features=())
        ET.parse(tmp_path / "deviation_bar.svg")
        ET.parse(tmp_path / "categorical_svc.svg")

    @pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
    def test_unwritable_directory(self, tmp_path):
        d = tmp_path / "ro"
        d.mkdir()
        d.chmod(0o500)
        try:
            with pytest.raises(OSError):
                emit_report(d, mean_deviation([], SCHEMA), categorical_comparison([], SCHEMA, STATS))
        finally:
            d.chmod(0o700)

    def test_path_is_a_file(self, tmp_path):
        f = tmp_path / "file"
        f.write_text("x")
        with pytest.raises(OSError):
            emit_report(f, mean_deviation([], SCHEMA), categorical_comparison([], SCHEMA, STATS))
