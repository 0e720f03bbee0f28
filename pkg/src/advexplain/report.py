"""Aggregate corrections into explanation artifacts (tables, JSON and SVG charts)."""

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import svg
from .dataset import denormalize
from .explainer import round_for_indicator, write_results_jsonl


@dataclass
class FeatureDeviation:
    name: str
    mean: float
    std: float
    count: int


@dataclass
class DeviationSummary:
    features: list
    n_included: int
    n_excluded: int

    @property
    def non_converged_rate(self):
        total = self.n_included + self.n_excluded
        return self.n_excluded / total if total else 0.0

    def by_name(self):
        return {f.name: f for f in self.features}

    def to_dict(self):
        return {
            "n_included": self.n_included,
            "n_excluded": self.n_excluded,
            "non_converged_rate": self.non_converged_rate,
            "features": [asdict(f) for f in self.features],
        }

    @classmethod
    def from_dict(cls, d):
        return cls([FeatureDeviation(**f) for f in d["features"]], d["n_included"], d["n_excluded"])


def mean_deviation(results, schema):
    """Mean/std of ``x0 - x_hat`` per non-categorical feature over converged results.

    Deviations are in normalized space. Sorted by |mean| descending, ties in
    schema order.
    """
    included = [r for r in results if r.converged]
    n_excluded = len(results) - len(included)
    if not included:
        return DeviationSummary([], 0, n_excluded)
    slots = [f for f in schema if f.kind != "categorical"]
    D = np.array([r.delta for r in included])[:, [f.start for f in slots]]
    means, stds = D.mean(axis=0), D.std(axis=0)
    rows = [FeatureDeviation(f.name, float(m), float(s), len(included)) for f, m, s in zip(slots, means, stds)]
    rows.sort(key=lambda r: -abs(r.mean))
    return DeviationSummary(rows, len(included), n_excluded)


def feature_distribution(results, feature_name, schema, stats):
    """Denormalized values of one single-slot feature for x0 and x_hat, per converged result."""
    f = schema[feature_name]
    if f.kind == "categorical":
        raise ValueError(f"{feature_name} is categorical; use categorical_comparison")
    x0s, xhats = [], []
    for r in results:
        if r.converged:
            x0s.append(float(denormalize(r.x0, stats)[f.start]))
            xhats.append(float(denormalize(r.x_hat, stats)[f.start]))
    return x0s, xhats


@dataclass
class CategoricalComparison:
    """Per categorical feature: level -> (count among x0, count among rounded x_hat)."""

    counts: dict
    changed: dict
    n_included: int

    def changed_rate(self, name):
        return self.changed[name] / self.n_included if self.n_included else 0.0

    def to_dict(self):
        return {
            "n_included": self.n_included,
            "features": {
                name: {
                    "levels": [{"level": lv, "x0": c[0], "x_hat": c[1]} for lv, c in levels.items()],
                    "changed": self.changed[name],
                    "changed_rate": self.changed_rate(name),
                }
                for name, levels in self.counts.items()
            },
        }


def categorical_comparison(results, schema, stats):
    cats = [f for f in schema if f.kind == "categorical"]
    counts = {f.name: {lv: [0, 0] for lv in f.levels} for f in cats}
    changed = {f.name: 0 for f in cats}
    included = [r for r in results if r.converged]
    for r in included:
        raw0 = denormalize(r.x0, stats)
        raw1 = denormalize(round_for_indicator(r.x_hat, schema, stats), stats)
        for f in cats:
            a = int(np.argmax(raw0[f.span]))
            b = int(np.argmax(raw1[f.span]))
            counts[f.name][f.levels[a]][0] += 1
            counts[f.name][f.levels[b]][1] += 1
            changed[f.name] += a != b
    counts = {name: {lv: tuple(c) for lv, c in levels.items()} for name, levels in counts.items()}
    return CategoricalComparison(counts, changed, len(included))


@dataclass
class Projection2D:
    components: np.ndarray  # (2, d), orthonormal rows
    mean: np.ndarray
    explained_variance: np.ndarray = field(default_factory=lambda: np.zeros(2))


def fit_projection(reference_matrix):
    """Top-2 principal axes of the reference rows (eigendecomposition of the covariance).

    Each axis is signed so that its largest-magnitude entry is positive.
    """
    X = np.asarray(reference_matrix, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("need a matrix with at least 2 columns")
    mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
    centered = X - mean
    cov = centered.T @ centered / max(len(X) - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:2]
    comps = evecs[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return Projection2D(comps, mean, evals[order])


def apply_projection(proj, xs):
    return (np.asarray(xs, dtype=float) - proj.mean) @ proj.components.T


def closeness_ratio(proj, x0s, xhats):
    """median |P(x0) - P(x_hat)| over pairs divided by the median pairwise distance among P(x0)."""
    a, b = apply_projection(proj, x0s), apply_projection(proj, xhats)
    if len(a) < 2:
        return float("nan")
    pair = np.median(np.linalg.norm(a - b, axis=1))
    i, j = np.triu_indices(len(a), k=1)
    spread = np.median(np.linalg.norm(a[i] - a[j], axis=1))
    return float(pair / spread) if spread > 0 else float("inf")


def _histogram_bins(a, b, bins=10):
    values = list(a) + list(b)
    if not values:
        return [], [], []
    lo, hi = min(values), max(values)
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    ca, _ = np.histogram(a, edges)
    cb, _ = np.histogram(b, edges)
    labels = [f"{edges[k]:.3g}" for k in range(bins)]
    return labels, ca.tolist(), cb.tolist()


def emit_report(output_dir, summary, comparison, projection=None, results=(), schema=None, stats=None,
                top_k=20, distribution_features=("duration",)):
    """Write data files and SVG charts; returns the list of written paths.

    Data files are never filtered; ``top_k`` only limits the deviation bar chart.
    """
    os.makedirs(output_dir, exist_ok=True)
    if not os.access(output_dir, os.W_OK):
        raise OSError(f"{output_dir}: directory is not writable")
    written = []

    def path(name):
        p = os.path.join(output_dir, name)
        written.append(p)
        return p

    with open(path("deviation_summary.json"), "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(path("deviation_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "mean", "std", "count"])
        for f in summary.features:
            w.writerow([f.name, repr(f.mean), repr(f.std), f.count])
    with open(path("categorical_comparison.json"), "w") as fh:
        json.dump(comparison.to_dict(), fh, indent=2)
        fh.write("\n")
    write_results_jsonl(path("results.jsonl"), results, schema, stats)

    shown = summary.features[:top_k] if top_k else summary.features
    with open(path("deviation_bar.svg"), "w") as fh:
        fh.write(svg.hbar_chart([f.name for f in shown], [f.mean for f in shown],
                                "Mean deviation x0 - x_hat (normalized)"))
    for name, levels in comparison.counts.items():
        used = [(lv, c) for lv, c in levels.items() if c[0] or c[1]]
        with open(path(f"categorical_{name}.svg"), "w") as fh:
            fh.write(svg.grouped_bar_chart([lv for lv, _ in used],
                                           [[c[0] for _, c in used], [c[1] for _, c in used]],
                                           ["x0", "x_hat (rounded)"], f"{name}: level counts"))

    if schema is not None and stats is not None:
        for feat in distribution_features:
            try:
                a, b = feature_distribution(results, feat, schema, stats)
            except (KeyError, ValueError):
                continue
            labels, ca, cb = _histogram_bins(a, b)
            with open(path(f"distribution_{feat}.svg"), "w") as fh:
                fh.write(svg.grouped_bar_chart(labels, [ca, cb], ["x0", "x_hat"], f"{feat}: x0 vs x_hat"))

    converged = [r for r in results if r.converged]
    if projection is not None:
        a = apply_projection(projection, [r.x0 for r in converged]) if converged else np.zeros((0, 2))
        b = apply_projection(projection, [r.x_hat for r in converged]) if converged else np.zeros((0, 2))
        doc = {
            "components": projection.components.tolist(),
            "mean": projection.mean.tolist(),
            "explained_variance": projection.explained_variance.tolist(),
            "x0": a.tolist(),
            "x_hat": b.tolist(),
            "closeness_ratio": None,
        }
        if len(converged) > 1:
            ratio = closeness_ratio(projection, [r.x0 for r in converged], [r.x_hat for r in converged])
            doc["closeness_ratio"] = ratio if np.isfinite(ratio) else None
        with open(path("projection.json"), "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        with open(path("projection_scatter.svg"), "w") as fh:
            fh.write(svg.scatter([a.tolist(), b.tolist()], ["x0", "x_hat"], "PCA projection"))
    return written
