"""Minimal corrections of misclassified samples.

For a misclassified ``x0`` and its true class ``t`` we look for the closest
``x_hat`` (in the Q-weighted quadratic metric) inside the training box that
the model assigns to ``t``. The search minimizes

    alpha * I(x_hat) * H(t, p(y | x_hat)) + (x_hat - x0)^T Q (x_hat - x0)

by projected gradient steps. ``I`` is 1 while ``x_hat`` is still assigned to
another class and 0 once it is not; it gates the cross-entropy term but is
never differentiated, which is what allows rounding inside it.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import denormalize, normalize
from .model import cross_entropy, forward_proba, grad_input, one_hot, predict_class


class ExplainError(ValueError):
    pass


@dataclass
class ExplainConfig:
    x_min: np.ndarray
    x_max: np.ndarray
    q_diag: Optional[np.ndarray] = None
    alpha: float = 10.0
    step_size: float = 0.05
    max_iters: int = 2000
    tolerance: float = 1e-6
    rounding_enabled: bool = False
    # needed only when rounding_enabled
    schema: object = field(default=None, repr=False)
    stats: object = field(default=None, repr=False)

    def __post_init__(self):
        self.x_min = np.asarray(self.x_min, dtype=float)
        self.x_max = np.asarray(self.x_max, dtype=float)
        if self.q_diag is None:
            self.q_diag = np.ones_like(self.x_min)
        self.q_diag = np.broadcast_to(np.asarray(self.q_diag, dtype=float), self.x_min.shape).copy()
        if np.any(self.x_min > self.x_max):
            raise ExplainError("x_min must not exceed x_max")
        if np.any(self.q_diag <= 0):
            raise ExplainError("q_diag entries must be positive")
        if self.alpha <= 0 or self.step_size <= 0 or self.tolerance <= 0 or self.max_iters <= 0:
            raise ExplainError("alpha, step_size, tolerance and max_iters must be positive")
        if self.rounding_enabled and (self.schema is None or self.stats is None):
            raise ExplainError("rounding needs the feature schema and normalization stats")

    @property
    def bounds(self):
        return self.x_min, self.x_max


@dataclass
class CorrectionResult:
    x0: np.ndarray
    x_hat: np.ndarray
    converged: bool
    iterations: int
    final_objective: float
    feasible_distance: Optional[float]
    objective_trace: list = field(default_factory=list, repr=False)
    feasible_trace: list = field(default_factory=list, repr=False)
    index: Optional[int] = None

    @property
    def delta(self):
        return self.x0 - self.x_hat


def round_for_indicator(x_hat, schema, stats):
    """Snap integer/binary/categorical dimensions of a normalized point to valid raw values."""
    raw = denormalize(x_hat, stats)
    out = raw.copy()
    ints = schema.kind_slots["integer"]
    out[ints] = np.floor(raw[ints] + 0.5)
    bins = schema.kind_slots["binary"]
    out[bins] = (raw[bins] >= 0.5).astype(float)
    for span in schema.categorical_spans:
        block = np.zeros(span.stop - span.start)
        block[np.argmax(raw[span])] = 1.0
        out[span] = block
    # renormalizing an untouched continuous value can move it by an ulp; keep the original
    rounded = normalize(out, stats)
    cont = schema.kind_slots["continuous"]
    rounded[cont] = x_hat[cont]
    return rounded


def indicator(model, x_hat, target_class, config=None):
    """0 if ``x_hat`` (rounded first when enabled) is classified as the target, else 1."""
    if config is not None and config.rounding_enabled:
        x_hat = round_for_indicator(x_hat, config.schema, config.stats)
    return 0 if predict_class(model, x_hat) == target_class else 1


def quadratic_distance(x_hat, x0, q_diag):
    d = x_hat - x0
    return float(np.dot(d * q_diag, d))


def adversarial_objective(model, x_hat, x0, target_class, config, gate=None):
    """alpha * I * H + (x_hat - x0)^T Q (x_hat - x0); ``gate`` overrides the evaluated indicator."""
    gate = indicator(model, x_hat, target_class, config) if gate is None else gate
    quad = quadratic_distance(x_hat, x0, config.q_diag)
    if not gate:
        return quad
    ce = float(cross_entropy(one_hot(target_class, model.n_classes), forward_proba(model, x_hat)))
    return config.alpha * gate * ce + quad


def project_box(x, bounds):
    return np.clip(x, bounds[0], bounds[1])


def correct_sample(model, x0, target_class, config, index=None):
    """Projected descent from ``x0`` towards the nearest point classified as ``target_class``.

    The best feasible iterate (smallest quadratic distance among those with
    I = 0) is returned; if none is found the last iterate is returned with
    ``converged=False``.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != config.x_min.shape:
        raise ExplainError(f"x0 has shape {x0.shape}, bounds have {config.x_min.shape}")
    if np.any(x0 < config.x_min) or np.any(x0 > config.x_max):
        raise ExplainError("x0 lies outside the box bounds")
    if not 0 <= target_class < model.n_classes:
        raise ExplainError(f"invalid target class {target_class}")

    q2 = 2.0 * config.q_diag
    x = x0.copy()
    gate = indicator(model, x, target_class, config)
    if gate == 0:
        return CorrectionResult(x0, x.copy(), True, 0, 0.0, 0.0, [0.0], [0.0], index)

    best, best_dist = None, np.inf
    objective_trace, feasible_trace = [], []
    it = 0
    for it in range(1, config.max_iters + 1):
        grad = q2 * (x - x0)
        if gate:
            grad = grad + config.alpha * grad_input(model, x, target_class)
        if not np.all(np.isfinite(grad)):
            raise ExplainError(f"non-finite gradient at iteration {it}")
        x_new = project_box(x - config.step_size * grad, config.bounds)
        moved = float(np.linalg.norm(x_new - x))
        x = x_new
        gate = indicator(model, x, target_class, config)
        objective_trace.append(adversarial_objective(model, x, x0, target_class, config, gate))
        if gate == 0:
            dist = quadratic_distance(x, x0, config.q_diag)
            if dist < best_dist:
                best, best_dist = x.copy(), dist
        feasible_trace.append(best_dist)
        if gate == 0 and moved < config.tolerance:
            break

    if best is None:
        return CorrectionResult(x0, x, False, it, objective_trace[-1], None,
                                objective_trace, feasible_trace, index)
    final = adversarial_objective(model, best, x0, target_class, config, 0)
    return CorrectionResult(x0, best, True, it, final, best_dist, objective_trace, feasible_trace, index)


def explain_set(model, samples, target_class, config):
    """Correct each sample independently. ``samples`` holds vectors or ``(x0, index)`` pairs."""
    results = []
    for item in samples:
        if isinstance(item, tuple):
            x0, idx = item
        else:
            x0, idx = item, None
        results.append(correct_sample(model, x0, target_class, config, idx))
    return results


# -- results.jsonl ------------------------------------------------------------
#
# One JSON object per sample:
#   index             row index in the source split (or null)
#   x0, x_hat         denormalized vectors (raw feature units)
#   x_hat_rounded     denormalized rounded x_hat (integer/binary/one-hot snapped)
#   delta             x0 - x_hat in normalized space
#   converged, iterations, final_objective
#   feasible_distance quadratic distance of the returned x_hat, null if not converged

def result_to_dict(result, schema, stats):
    x_hat_rounded = round_for_indicator(result.x_hat, schema, stats)
    return {
        "index": result.index,
        "x0": denormalize(result.x0, stats).tolist(),
        "x_hat": denormalize(result.x_hat, stats).tolist(),
        "x_hat_rounded": denormalize(x_hat_rounded, stats).tolist(),
        "delta": result.delta.tolist(),
        "converged": result.converged,
        "iterations": result.iterations,
        "final_objective": result.final_objective,
        "feasible_distance": result.feasible_distance,
    }


def write_results_jsonl(path, results, schema, stats):
    with open(path, "w") as fh:
        for r in results:
            fh.write(json.dumps(result_to_dict(r, schema, stats)) + "\n")


def read_results_jsonl(path, stats):
    """Rebuild CorrectionResults (normalized space); delta is taken verbatim from the file."""
    results = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            x0 = normalize(np.array(d["x0"]), stats)
            x_hat = x0 - np.array(d["delta"])
            results.append(CorrectionResult(x0, x_hat, d["converged"], d["iterations"], d["final_objective"],
                                            d["feasible_distance"], index=d["index"]))
    return results
