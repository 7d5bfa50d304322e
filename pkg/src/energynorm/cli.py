"""energynorm command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 infeasible
experiment. ``ENERGYNORM_OUTPUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import platform
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, kernels
from .archcost import ConfigError, cost_table, enumerate_study_configs, enumeration_report, load_configs
from .dataset import DataError, ingest, pivot_pair, write_table
from .evaluate import (
    AXES,
    ExperimentSpec,
    InfeasibleExperimentError,
    reports_to_csv,
    run_experiment,
    sweep,
)
from .normalize import (
    FEATURE_SETS,
    STRATEGIES,
    TRANSFORMS,
    CoincidentReferenceError,
    InsufficientModelsError,
    MissingFeatureError,
    NormalizationMap,
    ReferenceStrategy,
    apply_map,
    feature_matrix,
    fit_map,
)
from .plot import PlotError, Series, bar_csv, bar_svg, mean_abs_log_ratio, scatter_csv, scatter_svg
from .regress import KINDS, RankDeficiencyError, RegressionSpec
from .synth import SynthError, resolve_scenario

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3
OUTPUT_ENV = "ENERGYNORM_OUTPUT_DIR"

DATA_ERRORS = (DataError, ConfigError, SynthError, MissingFeatureError, RankDeficiencyError,
               CoincidentReferenceError, PlotError, FileNotFoundError, json.JSONDecodeError, KeyError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ReportBundle:
    command: list[str]
    seeds: dict
    inputs: dict[str, str] = field(default_factory=dict)
    reports: list[dict] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    timestamp: str = ""

    def versions(self) -> dict:
        return {"energynorm": __version__, "numpy": np.__version__, "python": platform.python_version(),
                "kernel_backend": kernels.BACKEND}

    def body(self) -> dict:
        """Everything except the timestamp; this is what the digest covers."""
        return {"run": {"command": self.command, "seeds": self.seeds, "versions": self.versions()},
                "inputs": self.inputs, "reports": self.reports, "artifacts": self.artifacts}

    def digest(self) -> str:
        return hashlib.sha256(_canonical(self.body()).encode()).hexdigest()

    def to_dict(self) -> dict:
        out = self.body()
        out["digest"] = self.digest()
        out["timestamp"] = self.timestamp
        return out


def _out_dir(value: Optional[str]) -> Path:
    path = Path(value or os.environ.get(OUTPUT_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _pair(value: str) -> tuple[str, str]:
    for sep in (":", ","):
        if sep in value:
            a, b = value.split(sep, 1)
            if a and b:
                return a, b
    raise argparse.ArgumentTypeError(f"expected SOURCE:TARGET, got {value!r}")


def _arch_kind(model_id: str) -> str:
    prefix = model_id.split("_", 1)[0].upper()
    return prefix if prefix in ("MLP", "CNN", "RNN", "CRNN") else "other"


def cmd_ingest(args) -> int:
    summaries = []
    lines = []
    for path in args.paths:
        table = ingest(path, args.format, args.hardware)
        per_hw = {h: len(table.models_on(h)) for h in table.hardware_ids}
        per_kind = dict(sorted(Counter(_arch_kind(m) for m in table.model_ids).items()))
        s = {"path": str(path), "hardware": len(table.hardware_ids), "models": len(table.model_ids),
             "records": len(table.records), "records_per_hardware": per_hw, "models_per_kind": per_kind}
        summaries.append(s)
        lines.append(f"{path}: {s['hardware']} hardware, {s['models']} models, {s['records']} records")
        lines.append("  per hardware: " + ", ".join(f"{h}={n}" for h, n in per_hw.items()))
        lines.append("  per kind: " + ", ".join(f"{k}={n}" for k, n in per_kind.items()))
    _emit(args, {"tables": summaries}, "\n".join(lines))
    return EXIT_OK


def cmd_flops(args) -> int:
    if args.study_set:
        configs = [c for _, c in enumerate_study_configs()]
        footer = enumeration_report()
    else:
        configs = load_configs(args.config)
        footer = {}
    rows = [r.to_dict() for r in cost_table(configs)]
    if args.json or args.format == "json":
        print(json.dumps({"rows": rows, "footer": footer}, sort_keys=True, indent=2))
        return EXIT_OK
    cols = ["model_id", "kind", "params", "flops_forward"]
    print(",".join(cols))
    for cfg, row in zip(configs, rows):
        print(f"{row['model_id']},{cfg.kind},{row['params']},{row['flops_forward']}")
    for k, v in footer.items():
        print(f"# {k}: {v}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = resolve_scenario(args.scenario)
    table = scenario.generate(args.seed)
    out = Path(args.out) if args.out else _out_dir(None) / "synthetic.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    written = write_table(table, out, args.format)
    payload = {"scenario": args.scenario, "seed": args.seed, "records": len(table.records),
               "files": [str(p) for p in written], "description": scenario.description}
    _emit(args, payload, f"wrote {len(table.records)} records to " + ", ".join(map(str, written)))
    return EXIT_OK


def _regression(args, kind: Optional[str] = None) -> RegressionSpec:
    return RegressionSpec(kind or args.regression, svr_c=args.svr_c, svr_epsilon=args.svr_epsilon,
                          standardize=args.standardize)


def _strategy(args, default: str = "dual_minmax") -> ReferenceStrategy:
    return ReferenceStrategy(args.strategy or default, args.fraction, args.ref_seed)


def cmd_fit(args) -> int:
    table = ingest(args.data, args.format)
    source, target = args.pair
    pair = pivot_pair(table, source, target)
    try:
        nmap = fit_map(pair, _strategy(args), _regression(args), args.features, args.transform, args.rank_by)
    except InsufficientModelsError as exc:
        raise InfeasibleExperimentError(str(exc)) from exc
    text = json.dumps(nmap.to_dict(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    if args.json or not args.out:
        print(text)
    else:
        print(f"wrote {nmap.kind} map {source}->{target} ({len(nmap.reference_ids)} references) to {args.out}")
    return EXIT_OK


def _load_map(path: str) -> NormalizationMap:
    return NormalizationMap.from_dict(json.loads(Path(path).read_text()))


def _predict_pair(table, nmap: NormalizationMap):
    pair = pivot_pair(table, nmap.source, nmap.target, allow_identity=nmap.source == nmap.target)
    rows = feature_matrix(pair, nmap.features) if nmap.kind == "regression" else pair.e_source
    return pair, apply_map(nmap, rows)


def cmd_normalize(args) -> int:
    table = ingest(args.data, args.format)
    nmap = _load_map(args.map)
    pair, pred = _predict_pair(table, nmap)
    rows = [{"model_id": m, "source_kwh": float(s), "normalized_kwh": float(p), "target_kwh": float(t)}
            for m, s, p, t in zip(pair.model_ids, pair.e_source, pred, pair.e_target)]
    if args.json:
        print(json.dumps({"source": nmap.source, "target": nmap.target, "rows": rows}, sort_keys=True, indent=2))
    else:
        print("model_id,source_kwh,normalized_kwh,target_kwh")
        for r in rows:
            print(f"{r['model_id']},{r['source_kwh']!r},{r['normalized_kwh']!r},{r['target_kwh']!r}")
    return EXIT_OK


def _num(value):
    return "n/a" if value is None else f"{value:.6g}"


def cmd_evaluate(args) -> int:
    table = ingest(args.data, args.format)
    source, target = args.pair
    # regression and feature comparisons default to the full train set as references
    default_strategy = "minmax_fraction" if args.axis in ("fraction", "regression", "features") else "dual_minmax"
    spec = ExperimentSpec(source, target, _regression(args), args.features, _strategy(args, default_strategy),
                          args.repeats, args.train_fraction, args.seed, args.transform, args.rank_by,
                          args.fixed_references)
    if args.axis:
        try:
            reports = sweep(table, spec, args.axis, workers=args.workers)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        reports = [run_experiment(table, spec, label="single")]
    out = _out_dir(args.out)
    stem = args.name or ("sweep_" + args.axis if args.axis else "report")
    json_path, csv_path = out / f"{stem}.json", out / f"{stem}.csv"
    bundle = ReportBundle(
        command=["evaluate"] + _normalized_argv(args),
        seeds={"master_seed": args.seed, "reference_seed": args.ref_seed, "rng_algorithm": "numpy.PCG64"},
        inputs={str(args.data): sha256_file(args.data)},
        reports=[r.to_dict() for r in reports],
        artifacts=[str(json_path), str(csv_path)],
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    csv_path.write_text(reports_to_csv(reports))
    json_path.write_text(json.dumps(bundle.to_dict(), sort_keys=True, indent=2) + "\n")
    lines = []
    for r in reports:
        agg = r.aggregate()
        if r.error:
            lines.append(f"{r.label}: infeasible: {r.error}")
        else:
            lines.append(f"{r.label}: R2 mean {_num(agg['r2_mean'])} (sd {_num(agg['r2_std'])}), "
                         f"MSE mean {_num(agg['mse_mean'])}, folds ok {agg['n_ok']}/{agg['n_folds']}")
    lines.append(f"wrote {json_path} and {csv_path}")
    _emit(args, bundle.to_dict(), "\n".join(lines))
    if not args.axis and reports[0].error:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _normalized_argv(args) -> list[str]:
    """Flags as parsed (not as typed), so equivalent spellings give equal digests."""
    skip = {"func", "json", "workers"}
    out = []
    for k, v in sorted(vars(args).items()):
        if k in skip or v is None or v is False:
            continue
        out.append(f"--{k.replace('_', '-')}=" + (":".join(v) if isinstance(v, tuple) else str(v)))
    return out


def cmd_plot(args) -> int:
    prefix = Path(args.out) if args.out else _out_dir(None) / "plot"
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if args.report:
        data = json.loads(Path(args.report).read_text())
        reports = [r for r in data.get("reports", [data]) if r.get("aggregate", {}).get("n_ok")]
        if not reports:
            raise PlotError(f"{args.report}: no report with successful folds")
        groups = [r.get("label") or str(i) for i, r in enumerate(reports)]
        metrics = {"R2": [r["aggregate"]["r2_mean"] for r in reports],
                   "MSE": [r["aggregate"]["mse_mean"] for r in reports]}
        errors = {"R2": [r["aggregate"]["r2_std"] for r in reports],
                  "MSE": [r["aggregate"]["mse_std"] for r in reports]}
        svg = bar_svg(groups, metrics, errors, title=args.title or "R2 and MSE per cell")
        table_csv = bar_csv(groups, metrics, errors)
        payload = {"kind": "bars", "groups": groups, "metrics": metrics}
    else:
        if not args.data:
            raise UsageError("plot needs --report, or --data with --map or --pair")
        table = ingest(args.data, args.format)
        if args.map:
            nmap = _load_map(args.map)
        elif args.pair:
            pair = pivot_pair(table, *args.pair, allow_identity=args.pair[0] == args.pair[1])
            nmap = fit_map(pair, _strategy(args), _regression(args), args.features, args.transform)
        else:
            raise UsageError("plot needs --map or --pair together with --data")
        pair, pred = _predict_pair(table, nmap)
        if len(pair) == 0:
            raise PlotError("empty pair")
        series = [Series("unnormalized (source)", pair.e_target, pair.e_source, pair.model_ids),
                  Series(f"normalized ({nmap.kind})", pair.e_target, pred, pair.model_ids)]
        svg = scatter_svg(series, f"measured energy on {nmap.target} [kWh]",
                          f"energy from {nmap.source} [kWh]", args.title or f"{nmap.source} -> {nmap.target}")
        table_csv = scatter_csv(series)
        payload = {"kind": "scatter", "points": len(pair),
                   "mean_abs_log10_ratio": {"unnormalized": mean_abs_log_ratio(pair.e_source, pair.e_target),
                                            "normalized": mean_abs_log_ratio(pred, pair.e_target)}}
    svg_path, csv_path = prefix.with_suffix(".svg"), prefix.with_suffix(".csv")
    svg_path.write_text(svg)
    csv_path.write_text(table_csv)
    payload["files"] = [str(svg_path), str(csv_path)]
    _emit(args, payload, f"wrote {svg_path} and {csv_path}")
    return EXIT_OK


def _add_model_flags(p, regression_default="linear"):
    p.add_argument("--regression", choices=KINDS, default=regression_default)
    p.add_argument("--features", choices=list(FEATURE_SETS), default="energy_only")
    p.add_argument("--strategy", choices=STRATEGIES, default=None,
                   help="reference selection (default dual_minmax; minmax_fraction for sweeps)")
    p.add_argument("--fraction", type=float, default=1.0, help="reference fraction for *_fraction strategies")
    p.add_argument("--ref-seed", type=int, default=0, help="seed for random reference selection")
    p.add_argument("--transform", choices=TRANSFORMS, default="raw")
    p.add_argument("--rank-by", choices=("source", "target"), default="source")
    p.add_argument("--svr-c", type=float, default=0.1)
    p.add_argument("--svr-epsilon", type=float, default=1e-4)
    p.add_argument("--standardize", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="energynorm", description="Normalize GPU training energy across hardware.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.set_defaults(func=func)
        return p

    p = command("ingest", cmd_ingest, "validate dataset files and summarize them")
    p.add_argument("paths", nargs="+")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--hardware", help="hardware CSV (default: <stem>_hardware.csv)")

    p = command("flops", cmd_flops, "parameter and forward FLOP counts")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config", help="JSON list of architecture configs")
    g.add_argument("--study-set", action="store_true", help="every row of the reference configuration table")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = command("simulate", cmd_simulate, "write a synthetic dataset")
    p.add_argument("--scenario", default="default", help="built-in scenario name or scenario JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="dataset path (.csv or .json)")
    p.add_argument("--format", choices=("csv", "json"))

    p = command("fit", cmd_fit, "fit a normalization map on one hardware pair")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--pair", type=_pair, required=True, metavar="SOURCE:TARGET")
    p.add_argument("--out", help="where to write the map JSON")
    _add_model_flags(p)

    p = command("normalize", cmd_normalize, "apply a saved map to a dataset")
    p.add_argument("--map", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "json"))

    p = command("evaluate", cmd_evaluate, "repeated train/test evaluation, optionally swept over an axis")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--pair", type=_pair, required=True, metavar="SOURCE:TARGET")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0, help="master seed; fold f uses seed + f")
    p.add_argument("--fixed-references", action="store_true", help="reuse one random reference seed for all folds")
    p.add_argument("--axis", choices=AXES, help="sweep over the reference fractions, regressions or feature sets")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("--name", help="file stem for the report")
    _add_model_flags(p)

    p = command("plot", cmd_plot, "SVG scatter of a normalized pair, or bars from an evaluation report")
    p.add_argument("--report", help="evaluation report JSON (bar chart)")
    p.add_argument("--data", help="dataset for a scatter plot")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--map", help="saved map JSON")
    p.add_argument("--pair", type=_pair, metavar="SOURCE:TARGET", help="fit a map on the fly")
    p.add_argument("--out", help="output prefix; .svg and .csv are appended")
    p.add_argument("--title")
    _add_model_flags(p)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"energynorm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleExperimentError as exc:
        print(f"energynorm: infeasible experiment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DATA_ERRORS as exc:
        print(f"energynorm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"energynorm: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
