"""Command-line entry point: compute, compare, and plot-data subcommands.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
All reals are serialized with 17 significant digits so identical configs
and seeds produce byte-identical output files.
"""

import argparse
import csv
import io
import json
import os
import sys

from . import comparison, dataset as ds, plotdata, predictors
from .comparison import ImpactReport
from .impact import analyze_features

SCHEMA_VERSION = 1

BUILTIN_MODELS = ("builtin:ols", "builtin:logistic", "builtin:forest")


class UsageError(ValueError):
    """Invalid configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# deterministic JSON with .17g reals (the stdlib encoder offers no control
# over float formatting)

def format_real(v: float) -> str:
    s = format(float(v), ".17g")
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def dump_json(obj) -> str:
    out = io.StringIO()
    _dump(obj, out, 0)
    out.write("\n")
    return out.getvalue()


def _dump(obj, out, level):
    pad = "  " * level
    inner = "  " * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.write(f"{inner}{json.dumps(str(key))}: ")
            _dump(value, out, level + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.write("[]")
            return
        out.write("[\n")
        for i, value in enumerate(obj):
            out.write(inner)
            _dump(value, out, level + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(pad + "]")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif isinstance(obj, int):
        out.write(str(obj))
    elif isinstance(obj, float):
        out.write(format_real(obj))
    elif obj is None:
        out.write("null")
    else:
        out.write(json.dumps(str(obj)))


# ---------------------------------------------------------------------------
# argument parsing

def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--target", required=True, help="target column name")
    p.add_argument("--missing-marker", default="?")
    p.add_argument("--impute", choices=("mean", "drop-row"), default="mean")
    p.add_argument("--kind", action="append", default=[], metavar="NAME=KIND",
                   help="override an inferred feature kind")


def _add_model_args(p):
    p.add_argument("--model", default="builtin:ols",
                   help="builtin:ols | builtin:logistic | builtin:forest | external"
                        " (external command follows after --)")
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=2)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--timeout", type=float, default=60.0,
                   help="per-batch timeout for external models (seconds)")
    p.add_argument("external_cmd", nargs=argparse.REMAINDER, metavar="-- CMD...",
                   help="external predictor argv (after --)")


def _add_output_args(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", default=None, help="output path (default stdout)")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel per-feature analyses; env ICE_IMPACT_JOBS "
                        "is the fallback, then 1 for external models and the "
                        "core count for builtins")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iceimpact",
        description="Quantify per-feature impact on a black-box model's predictions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="per-feature impact metrics")
    _add_data_args(p)
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--lambda", dest="lambdas", type=float, action="append",
                   metavar="LAMBDA", help="in-distribution decay rate, repeatable")
    p.add_argument("--feature", dest="features", action="append",
                   help="restrict to these feature names (repeatable)")
    p.add_argument("--chunk-size", type=int, default=256)

    p = sub.add_parser("compare", help="impact vs importance metrics")
    _add_data_args(p)
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--lambda", dest="lambdas", type=float, action="append",
                   metavar="LAMBDA")
    p.add_argument("--feature", dest="features", action="append")
    p.add_argument("--chunk-size", type=int, default=256)
    p.add_argument("--metrics", action="append", default=None,
                   help="fi | idfi:<lambda> | permutation | impurity (repeatable)")
    p.add_argument("--score", choices=comparison.SCORES, default=None)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--perm-seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=2,
                   help="rows per side of the difference tables")

    p = sub.add_parser("plot-data", help="export ICE / c-ICE curve data")
    _add_data_args(p)
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--feature", required=True, help="feature name to sweep")
    p.add_argument("--centered", action="store_true",
                   help="shift each curve to start at 0")
    p.add_argument("--per-quantile", type=int, default=5)
    p.add_argument("--quantiles", type=int, default=10)
    p.add_argument("--sample-seed", type=int, default=0)

    return parser


# ---------------------------------------------------------------------------
# shared plumbing

def _parse_kinds(pairs) -> dict:
    kinds = {}
    for pair in pairs:
        name, sep, kind = pair.partition("=")
        if not sep:
            raise UsageError(f"--kind expects NAME=KIND, got {pair!r}")
        kinds[name] = kind
    return kinds


def _validate_lambdas(lambdas):
    lambdas = lambdas or [0.75]
    for lam in lambdas:
        if not 0.0 < lam <= 1.0:
            raise UsageError(f"--lambda must be in (0, 1], got {lam:g}")
    return lambdas


def _external_argv(args):
    argv = list(args.external_cmd)
    if argv and argv[0] == "--":
        argv = argv[1:]
    return argv


def _validate_model(args):
    if args.model == "external":
        if not _external_argv(args):
            raise UsageError("external model requires a command after --")
    elif args.model not in BUILTIN_MODELS:
        raise UsageError(f"unknown model {args.model!r}")
    elif _external_argv(args):
        raise UsageError("builtin models take no trailing command")


def _load_dataset(args):
    return ds.load_csv(args.data, target=args.target,
                       missing_marker=args.missing_marker, impute=args.impute,
                       kinds=_parse_kinds(args.kind))


def _fit_model(args, data):
    if args.model == "builtin:ols":
        return predictors.fit_ols(data)
    if args.model == "builtin:logistic":
        return predictors.fit_logistic(data, epochs=args.epochs,
                                       learning_rate=args.learning_rate,
                                       seed=args.model_seed)
    if args.model == "builtin:forest":
        return predictors.fit_forest(data, n_trees=args.trees,
                                     max_depth=args.max_depth,
                                     min_leaf=args.min_leaf,
                                     seed=args.model_seed)
    return predictors.external_predictor(_external_argv(args),
                                         timeout=args.timeout)


def _resolve_jobs(args) -> int:
    if args.jobs is not None:
        jobs = args.jobs
    elif os.environ.get("ICE_IMPACT_JOBS"):
        try:
            jobs = int(os.environ["ICE_IMPACT_JOBS"])
        except ValueError:
            raise UsageError("ICE_IMPACT_JOBS must be an integer")
    elif args.model == "external":
        jobs = 1
    else:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return jobs


def _feature_indices(args, data):
    if getattr(args, "features", None) is None:
        return None
    indices = []
    for name in args.features:
        try:
            indices.append(data.feature_index(name))
        except KeyError:
            raise UsageError(f"unknown feature {name!r}") from None
    return indices


def _model_provenance(args) -> dict:
    prov = {"spec": args.model}
    if args.model == "external":
        prov["command"] = _external_argv(args)
        prov["timeout"] = args.timeout
    elif args.model == "builtin:forest":
        prov.update(trees=args.trees, max_depth=args.max_depth,
                    min_leaf=args.min_leaf, seed=args.model_seed)
    elif args.model == "builtin:logistic":
        prov.update(epochs=args.epochs, learning_rate=args.learning_rate,
                    seed=args.model_seed)
    return prov


def _provenance(args, lambdas) -> dict:
    return {
        "data": args.data,
        "target": args.target,
        "missing_marker": args.missing_marker,
        "impute": args.impute,
        "model": _model_provenance(args),
        "lambdas": lambdas,
        "sigma_source": "interrogation-dataset",
    }


def _emit(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _impact_row(result, lambdas) -> dict:
    return {
        "name": result.name,
        "fi": result.fi,
        "fi_directional": result.fi_directional,
        "idfi": {f"{lam:g}": result.idfi[lam] for lam in lambdas},
        "heterogeneity": result.heterogeneity,
        "non_linearity": result.non_linearity,
        "n_obs": result.n_obs,
        "n_grid": result.n_grid,
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_compute(args) -> str:
    lambdas = _validate_lambdas(args.lambdas)
    _validate_model(args)
    data = _load_dataset(args)
    indices = _feature_indices(args, data)
    handle = _fit_model(args, data)
    jobs = _resolve_jobs(args)
    try:
        impacts = analyze_features(data, handle, lambdas=lambdas,
                                   features=indices, jobs=jobs,
                                   chunk_size=args.chunk_size)
    finally:
        if hasattr(handle, "close"):
            handle.close()

    if args.format == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "provenance": _provenance(args, lambdas),
            "features": [_impact_row(r, lambdas) for r in impacts],
        }
        return dump_json(doc)
    return _impacts_csv(impacts, lambdas)


def _impacts_csv(impacts, lambdas) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = (["feature", "fi", "fi_directional"]
              + [f"idfi:{lam:g}" for lam in lambdas]
              + ["heterogeneity", "non_linearity", "n_obs", "n_grid"])
    writer.writerow(header)
    for r in impacts:
        writer.writerow(
            [r.name, format_real(r.fi), format_real(r.fi_directional)]
            + [format_real(r.idfi[lam]) for lam in lambdas]
            + [format_real(r.heterogeneity), format_real(r.non_linearity),
               r.n_obs, r.n_grid])
    return buf.getvalue()


def cmd_compare(args) -> str:
    lambdas = _validate_lambdas(args.lambdas)
    _validate_model(args)
    metrics = args.metrics or ["fi", "permutation"]
    for token in metrics:
        base = token.split(":", 1)[0]
        if base not in ("fi", "idfi", "perm", "permutation", "impurity"):
            raise UsageError(f"unknown metric {token!r}")
    if "impurity" in metrics and args.model != "builtin:forest":
        raise UsageError("impurity importance requires --model builtin:forest")
    if args.top_k < 1:
        raise UsageError("--top-k must be >= 1")

    data = _load_dataset(args)
    indices = _feature_indices(args, data)
    handle = _fit_model(args, data)
    jobs = _resolve_jobs(args)
    try:
        rep = comparison.report(data, handle, metrics=metrics, lambdas=lambdas,
                                score=args.score, repeats=args.repeats,
                                seed=args.perm_seed, features=indices, jobs=jobs)
    finally:
        if hasattr(handle, "close"):
            handle.close()

    if args.format == "json":
        return dump_json(_compare_doc(args, rep, lambdas))
    return _compare_csv(rep, args.top_k)


def _compare_doc(args, rep: ImpactReport, lambdas) -> dict:
    prov = _provenance(args, lambdas)
    prov["permutation"] = {"score": rep.metadata["score"],
                           "repeats": args.repeats, "seed": args.perm_seed}
    diffs = {}
    for name, rows in rep.differences.items():
        k = min(args.top_k, len(rows))
        diffs[name] = {"most_positive": rows[:k], "most_negative": rows[-k:][::-1]}
    return {
        "schema_version": SCHEMA_VERSION,
        "provenance": prov,
        "features": [_impact_row(r, lambdas) for r in rep.impacts],
        "metrics": {name: vec.values for name, vec in rep.metrics.items()},
        "normalized": {name: vec.values for name, vec in rep.normalized.items()},
        "correlations": rep.correlations,
        "differences": diffs,
        "notes": rep.metadata["notes"],
    }


def _compare_csv(rep: ImpactReport, top_k: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(rep.normalized)

    buf.write("# table: normalized\n")
    writer.writerow(["feature"] + names)
    features = list(rep.normalized[names[0]].values)
    for feat in features:
        writer.writerow([feat] + [format_real(rep.normalized[m].values[feat])
                                  for m in names])

    buf.write("# table: correlations\n")
    writer.writerow(["metric"] + names)
    for a in names:
        writer.writerow([a] + [format_real(rep.correlations[a][b]) for b in names])

    for name, rows in rep.differences.items():
        buf.write(f"# table: differences fi-vs-{name}\n")
        writer.writerow(["feature", "fi", name, "difference"])
        k = min(top_k, len(rows))
        for row in rows[:k] + rows[-k:][::-1]:
            writer.writerow([row["feature"], format_real(row["fi"]),
                             format_real(row[name]), format_real(row["difference"])])
    return buf.getvalue()


def cmd_plot_data(args) -> str:
    _validate_model(args)
    data = _load_dataset(args)
    try:
        data.feature_index(args.feature)
    except KeyError:
        raise UsageError(f"unknown feature {args.feature!r}") from None
    handle = _fit_model(args, data)
    cfg = ds.SamplingConfig(per_quantile=args.per_quantile,
                            quantiles=args.quantiles, seed=args.sample_seed)
    try:
        if args.centered:
            cs = plotdata.c_ice_curves(data, handle, args.feature, sampling=cfg)
        else:
            cs = plotdata.ice_curves(data, handle, args.feature, sampling=cfg)
    finally:
        if hasattr(handle, "close"):
            handle.close()

    if args.format == "json":
        return dump_json(plotdata.curves_to_dict(cs))
    return plotdata.curves_to_csv(cs)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    runner = {"compute": cmd_compute, "compare": cmd_compare,
              "plot-data": cmd_plot_data}[args.command]
    try:
        text = runner(args)
    except UsageError as exc:
        print(f"iceimpact {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # module failures: exit 1, nothing written
        feature = getattr(exc, "feature_index", None)
        where = f" (feature index {feature})" if feature is not None else ""
        print(f"iceimpact {args.command}: {type(exc).__name__}{where}: {exc}",
              file=sys.stderr)
        return 1
    _emit(text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
