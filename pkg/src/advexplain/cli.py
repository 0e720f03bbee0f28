"""advexplain command line: ingest, train, eval, explain, report.

Exit codes: 0 ok, 1 internal error, 2 usage or input error, 3 model/data
incompatibility. Every option can also be given in a ``--config`` file of
``key = value`` lines (keys are option names, dashes or underscores);
command-line flags override file values.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import dataset as ds
from . import nslkdd
from .explainer import ExplainConfig, explain_set, write_results_jsonl, read_results_jsonl
from .model import ClassifierModel, ModelFormatError, load_model, save_model
from .report import categorical_comparison, emit_report, fit_projection, mean_deviation
from .trainer import TrainConfig, collect_misclassified, evaluate, train

log = logging.getLogger("advexplain")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_INCOMPATIBLE = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise CliError(f"missing required option --{name.replace('_', '-')}")


def _existing(path):
    if not os.path.isfile(path):
        raise CliError(f"no such file: {path}")
    return path


def _read_records(path):
    try:
        return ds.read_records(_existing(path))
    except ds.ParseError as e:
        raise CliError(f"{path}: {e}") from None


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# -- model + data loading -------------------------------------------------------

class LoadedModel:
    def __init__(self, path):
        try:
            self.model, self.header, arrays = load_model(_existing(path))
        except ModelFormatError as e:
            raise CliError(str(e)) from None
        if self.header.get("schema") is None or "stats_mean" not in arrays or "x_min" not in arrays:
            raise CliError(f"{path}: model file lacks schema, normalization stats or bounds", EXIT_INCOMPATIBLE)
        self.schema = ds.FeatureSchema.from_dict(self.header["schema"])
        self.stats = ds.NormalizationStats(arrays["stats_mean"], arrays["stats_std"])
        self.bounds = (arrays["x_min"], arrays["x_max"])


def _load_split(path, lm):
    """Raw NSL-KDD text or an ingested .npz, encoded in the model's feature space."""
    if path.endswith(".npz"):
        with np.load(_existing(path)) as z:
            fp = (str(z["schema_fingerprint"]), str(z["stats_fingerprint"]))
            if fp != (lm.schema.fingerprint(), lm.stats.fingerprint()):
                raise CliError(f"{path}: schema/normalization fingerprint does not match the model",
                               EXIT_INCOMPATIBLE)
            return ds.Dataset(z["X"], z["y"], lm.schema, lm.stats, *lm.bounds, z["difficulty"])
    labelled = ds.filter_and_relabel(_read_records(path))
    try:
        return ds.make_dataset(labelled, lm.schema, lm.stats, lm.bounds)
    except ds.DataError as e:
        raise CliError(f"{path}: not encodable with the model's schema: {e}", EXIT_INCOMPATIBLE) from None


def _save_npz(path, data):
    np.savez(path, X=data.X, y=data.y, difficulty=data.difficulty,
             x_min=data.x_min, x_max=data.x_max, stats_mean=data.stats.mean, stats_std=data.stats.std,
             schema=json.dumps(data.schema.to_dict(), sort_keys=True),
             schema_fingerprint=data.schema.fingerprint(), stats_fingerprint=data.stats.fingerprint())


# -- commands -------------------------------------------------------------------

def cmd_ingest(args):
    _require(args, "train", "out")
    train_ds, test_ds = ds.build_datasets(_read_records(args.train),
                                          _read_records(args.test) if args.test else [])
    os.makedirs(args.out, exist_ok=True)
    _save_npz(os.path.join(args.out, "train.npz"), train_ds)
    if args.test:
        _save_npz(os.path.join(args.out, "test.npz"), test_ds)
    _write_json(os.path.join(args.out, "schema.json"), train_ds.schema.to_dict())
    print(f"train: {len(train_ds)} samples {dict(zip(nslkdd.CLASS_NAMES, train_ds.class_counts().tolist()))}")
    if args.test:
        print(f"test: {len(test_ds)} samples {dict(zip(nslkdd.CLASS_NAMES, test_ds.class_counts().tolist()))}")
    print(f"encoded_dim: {train_ds.schema.encoded_dim}")
    return EXIT_OK


def cmd_train(args):
    _require(args, "data", "out")
    train_ds, _ = ds.build_datasets(_read_records(args.data), _read_records(args.test) if args.test else [])
    config = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size, max_epochs=args.max_epochs,
                         weight_decay=args.weight_decay, early_stop_patience=args.patience,
                         validation_fraction=args.val_fraction, seed=args.seed, optimizer=args.optimizer)
    hidden = () if args.model == "linear" else tuple(int(h) for h in str(args.hidden).split(",") if h)
    model = ClassifierModel.create(train_ds.schema.encoded_dim, hidden, seed=args.seed)
    model, history = train(model, train_ds, config)

    os.makedirs(args.out, exist_ok=True)
    save_model(os.path.join(args.out, "model.bin"), model, train_ds.schema, train_ds.stats,
               (train_ds.x_min, train_ds.x_max),
               metadata={"train_config": vars(config), "best_epoch": history.best_epoch})
    history.to_csv(os.path.join(args.out, "history.csv"))
    _write_json(os.path.join(args.out, "schema.json"), train_ds.schema.to_dict())
    print(f"trained {model.architecture} on {len(train_ds)} samples; "
          f"best epoch {history.best_epoch}/{history.epochs_run}, "
          f"val accuracy {history.val_accuracy[history.best_epoch - 1]:.4f}")
    return EXIT_OK


def cmd_eval(args):
    _require(args, "model_file", "data")
    lm = LoadedModel(args.model_file)
    data = _load_split(args.data, lm)
    rep = evaluate(lm.model, data)
    print(f"accuracy: {rep.accuracy:.4f} ({rep.n_samples} samples)")
    print("confusion (rows true, cols predicted):", " ".join(nslkdd.CLASS_NAMES))
    for name, row in zip(nslkdd.CLASS_NAMES, rep.confusion):
        print(f"  {name:>6} " + " ".join(f"{v:7d}" for v in row))
    out = args.out or os.path.dirname(os.path.abspath(args.model_file))
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.data))[0]
    _write_json(os.path.join(out, f"eval_{stem}.json"), rep.to_dict())
    return EXIT_OK


def cmd_explain(args):
    _require(args, "model_file", "data", "true", "pred", "out")
    true_c, pred_c = nslkdd.class_index(args.true), nslkdd.class_index(args.pred)
    if true_c == pred_c:
        raise CliError("--true and --pred must name different classes")
    lm = LoadedModel(args.model_file)
    data = _load_split(args.data, lm)
    config = ExplainConfig(*lm.bounds, q_diag=args.q_weight, alpha=args.alpha, step_size=args.step_size,
                           max_iters=args.max_iters, tolerance=args.tolerance, rounding_enabled=args.rounding,
                           schema=lm.schema, stats=lm.stats)
    samples = collect_misclassified(lm.model, data, true_c, pred_c)
    if args.limit:
        samples = samples[:args.limit]
    if not samples:
        print(f"warning: no {args.true} samples misclassified as {args.pred}", file=sys.stderr)
    results = explain_set(lm.model, samples, true_c, config)

    os.makedirs(args.out, exist_ok=True)
    write_results_jsonl(os.path.join(args.out, "results.jsonl"), results, lm.schema, lm.stats)
    _write_json(os.path.join(args.out, "explain_meta.json"), {
        "true_class": nslkdd.CLASS_NAMES[true_c],
        "predicted_class": nslkdd.CLASS_NAMES[pred_c],
        "target_class": nslkdd.CLASS_NAMES[true_c],
        "config": {"alpha": config.alpha, "step_size": config.step_size, "max_iters": config.max_iters,
                   "tolerance": config.tolerance, "rounding_enabled": config.rounding_enabled,
                   "q_weight": args.q_weight},
        "schema": lm.schema.to_dict(),
        "stats_mean": lm.stats.mean.tolist(),
        "stats_std": lm.stats.std.tolist(),
    })
    n_conv = sum(r.converged for r in results)
    print(f"explained {len(results)} samples ({args.true} -> {args.pred}); {n_conv} converged")
    return EXIT_OK


def cmd_report(args):
    _require(args, "results", "out")
    _existing(args.results)
    meta_path = args.meta or os.path.join(os.path.dirname(os.path.abspath(args.results)), "explain_meta.json")
    with open(_existing(meta_path)) as fh:
        meta = json.load(fh)
    schema = ds.FeatureSchema.from_dict(meta["schema"])
    stats = ds.NormalizationStats(meta["stats_mean"], meta["stats_std"])
    results = read_results_jsonl(args.results, stats)
    summary = mean_deviation(results, schema)
    comparison = categorical_comparison(results, schema, stats)
    converged = [r for r in results if r.converged]
    projection = fit_projection(np.array([r.x0 for r in converged])) if converged else None
    features = tuple(f for f in str(args.distribution_features).split(",") if f)
    emit_report(args.out, summary, comparison, projection, results, schema, stats,
                top_k=args.top_k, distribution_features=features)
    print(f"report: {summary.n_included} converged, {summary.n_excluded} not converged -> {args.out}")
    for f in summary.features[:args.top_k or None]:
        print(f"  {f.name:<30} {f.mean:+.4f}")
    return EXIT_OK


# -- parser / config ------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file supplying defaults for any option")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="advexplain", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="encode NSL-KDD files into .npz datasets")
    p.add_argument("--train", help="training split (KDDTrain+ format)")
    p.add_argument("--test", help="test split; its categorical levels join the schema")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    p.add_argument("--data", help="training split (KDDTrain+ format)")
    p.add_argument("--test", help="test split, used only for categorical levels")
    p.add_argument("--model", choices=("linear", "mlp"), default="mlp")
    p.add_argument("--hidden", default="64,64", help="comma-separated MLP hidden widths")
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=100)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="accuracy and confusion matrix")
    p.add_argument("--model-file")
    p.add_argument("--data", help="raw split or ingested .npz")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", parents=[common], help="correct misclassified samples")
    p.add_argument("--model-file")
    p.add_argument("--data", help="raw split or ingested .npz")
    p.add_argument("--true", help="true class of the samples (normal, dos, probe)")
    p.add_argument("--pred", help="class the model wrongly predicts")
    p.add_argument("--rounding", action="store_true", help="round integer/categorical inputs inside the indicator")
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--step-size", type=float, default=0.05)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--q-weight", type=float, default=1.0, help="diagonal weight of the quadratic distance")
    p.add_argument("--limit", type=int, default=0, help="explain at most this many samples (0 = all)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", parents=[common], help="deviation summaries and charts")
    p.add_argument("--results", help="results.jsonl written by explain")
    p.add_argument("--meta", help="explain_meta.json (default: next to the results file)")
    p.add_argument("--top-k", type=int, default=20, help="features shown in the bar chart (data files unfiltered)")
    p.add_argument("--distribution-features", default="duration")
    p.set_defaults(func=cmd_report)
    return parser


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config(path):
    values = {}
    with open(_existing(path)) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(subparser, values):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise CliError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise CliError(f"config key {key!r}: expected a boolean, got {raw!r}")
            defaults[key] = low in _TRUE
        else:
            try:
                value = action.type(raw) if action.type else raw
            except ValueError:
                raise CliError(f"config key {key!r}: bad value {raw!r}") from None
            if action.choices and value not in action.choices:
                raise CliError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
            defaults[key] = value
    subparser.set_defaults(**defaults)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
            _apply_config(subparsers.choices[args.command], read_config(args.config))
            args = parser.parse_args(argv)
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ds.DataError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
