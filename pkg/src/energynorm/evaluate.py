"""Repeated train/test evaluation of normalization maps, scored by R^2 and MSE."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import MeasurementTable, PairData, pivot_pair
from .normalize import (
    FEATURE_SETS,
    CoincidentReferenceError,
    InsufficientModelsError,
    MissingFeatureError,
    ReferenceStrategy,
    apply_map,
    feature_matrix,
    fit_map,
)
from .regress import RankDeficiencyError, RegressionSpec, min_points

RNG_ALGORITHM = "numpy.PCG64"
STUDY_FRACTIONS = (0.10, 0.15, 0.20, 0.50, 1.00)
REGRESSION_AXIS = ("linear", "poly2", "svr")
FEATURE_AXIS = tuple(FEATURE_SETS)
AXES = ("fraction", "regression", "features")

_NUMBER_WORDS = {1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six", 7: "seven", 8: "eight",
                 9: "nine", 10: "ten"}


class InfeasibleExperimentError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


def r_squared(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    if len(y_true) < 2:
        raise ValueError("R^2 needs at least 2 points")
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined for a constant y_true")
    ss_res = float(((y_true - y_pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def mse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    if len(y_true) < 1:
        raise ValueError("MSE needs at least 1 point")
    return float(((y_true - y_pred) ** 2).mean())


def train_size(n: int, train_fraction: float) -> int:
    # round half up, so 0.8 * 43 = 34.4 -> 34 and 0.5 * 5 = 2.5 -> 3
    return int(math.floor(train_fraction * n + 0.5))


def split_train_test(n: int, train_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Uniform random partition of range(n); both halves returned sorted."""
    if n < 2:
        raise ValueError(f"cannot split {n} models")
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = train_size(n, train_fraction)
    if n_train < 1 or n_train >= n:
        raise ValueError(f"degenerate split: {n_train} train of {n} at fraction {train_fraction}")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    return sorted(int(i) for i in perm[:n_train]), sorted(int(i) for i in perm[n_train:])


@dataclass(frozen=True)
class ExperimentSpec:
    source: str
    target: str
    regression: RegressionSpec = field(default_factory=RegressionSpec)
    features: str = "energy_only"
    strategy: ReferenceStrategy = field(default_factory=ReferenceStrategy)
    n_repeats: int = 5
    train_fraction: float = 0.8
    master_seed: int = 0
    transform: str = "raw"
    rank_by: str = "source"
    fixed_references: bool = False

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        if self.features not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {self.features!r}")

    def fold_seed(self, fold: int) -> int:
        return self.master_seed + fold

    def reference_seed(self, fold: int) -> int:
        """Seed for random reference draws; shared by all folds when references are fixed."""
        entropy = [self.strategy.seed] if self.fixed_references else [self.strategy.seed, self.fold_seed(fold)]
        return int(np.random.SeedSequence(entropy).generate_state(1)[0])

    def to_dict(self) -> dict:
        return {
            "pair": [self.source, self.target],
            "regression": self.regression.to_dict(),
            "features": self.features,
            "strategy": self.strategy.to_dict(),
            "n_repeats": self.n_repeats,
            "train_fraction": self.train_fraction,
            "master_seed": self.master_seed,
            "transform": self.transform,
            "rank_by": self.rank_by,
            "fixed_references": self.fixed_references,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        source, target = d["pair"]
        return cls(source, target, RegressionSpec.from_dict(d["regression"]), d["features"],
                   ReferenceStrategy(**d["strategy"]), d["n_repeats"], d["train_fraction"], d["master_seed"],
                   d.get("transform", "raw"), d.get("rank_by", "source"), d.get("fixed_references", False))


@dataclass
class FoldResult:
    fold: int
    seed: int
    n_train: int
    n_test: int
    n_refs: int = 0
    r2: Optional[float] = None
    mse: Optional[float] = None
    reference_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)
    failed: bool = False
    error: str = ""
    converged: Optional[bool] = None


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


@dataclass
class EvalReport:
    spec: ExperimentSpec
    folds: list[FoldResult] = field(default_factory=list)
    label: str = ""
    error: str = ""
    rng_algorithm: str = RNG_ALGORITHM

    def _ok(self) -> list[FoldResult]:
        return [f for f in self.folds if not f.failed]

    @property
    def infeasible(self) -> bool:
        return bool(self.error)

    def aggregate(self) -> dict:
        ok = self._ok()
        out = {"n_folds": len(self.folds), "n_ok": len(ok), "n_failed": len(self.folds) - len(ok)}
        for name in ("r2", "mse"):
            values = np.array([getattr(f, name) for f in ok], dtype=float)
            out[f"{name}_mean"] = float(values.mean()) if len(values) else None
            out[f"{name}_std"] = float(values.std(ddof=1)) if len(values) > 1 else None
        return out

    def flags(self) -> dict:
        return {
            "negative_r2_folds": [f.fold for f in self._ok() if f.r2 < 0],
            "nonconverged_folds": [f.fold for f in self.folds if f.converged is False],
            "failed_folds": [f.fold for f in self.folds if f.failed],
        }

    @property
    def r2_mean(self) -> Optional[float]:
        return self.aggregate()["r2_mean"]

    @property
    def mse_mean(self) -> Optional[float]:
        return self.aggregate()["mse_mean"]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "spec": self.spec.to_dict(),
            "rng_algorithm": self.rng_algorithm,
            "error": self.error,
            "aggregate": self.aggregate(),
            "flags": self.flags(),
            "folds": [{k: _clean(v) for k, v in asdict(f).items()} for f in self.folds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(ExperimentSpec.from_dict(d["spec"]), [FoldResult(**f) for f in d.get("folds", [])],
                   d.get("label", ""), d.get("error", ""), d.get("rng_algorithm", RNG_ALGORITHM))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    CSV_COLUMNS = ("label", "source", "target", "regression", "features", "strategy", "fraction", "fold", "seed",
                   "n_train", "n_test", "n_refs", "r2", "mse", "failed", "converged", "error")

    def csv_rows(self) -> list[dict]:
        s = self.spec
        base = {"label": self.label, "source": s.source, "target": s.target, "regression": s.regression.kind,
                "features": s.features, "strategy": s.strategy.kind, "fraction": s.strategy.fraction}
        if not self.folds:
            return [{**base, "failed": True, "error": self.error}]
        return [{**base, "fold": f.fold, "seed": f.seed, "n_train": f.n_train, "n_test": f.n_test,
                 "n_refs": f.n_refs, "r2": f.r2, "mse": f.mse, "failed": f.failed, "converged": f.converged,
                 "error": f.error} for f in self.folds]


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EvalReport.CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for row in report.csv_rows():
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def required_points(spec: ExperimentSpec) -> int:
    if spec.strategy.kind in ("single_low", "single_high") and spec.features == "energy_only":
        return 1
    d = 1 + len(FEATURE_SETS[spec.features])
    return min_points(spec.regression.kind, d)


def check_feasible(spec: ExperimentSpec, n: int) -> int:
    """Number of references each fold will use; raises if the experiment cannot be fitted."""
    n_train = train_size(n, spec.train_fraction)
    if n_train < 1 or n_train >= n:
        raise InfeasibleExperimentError(f"{n} models cannot be split at train_fraction {spec.train_fraction}")
    k = spec.strategy.count(n_train)
    if k > n_train:
        raise InfeasibleExperimentError(f"strategy {spec.strategy.kind} needs {k} references, "
                                        f"only {n_train} training models")
    need = required_points(spec)
    if k < need:
        words = _NUMBER_WORDS.get(need, str(need))
        detail = ""
        if spec.features == "energy_flops_params" and spec.regression.kind != "poly2":
            detail = " (three for energy and FLOPs, plus one more once parameters are added)"
        elif spec.strategy.kind in ("single_low", "single_high"):
            detail = " (a single reference supports the energy_only ratio map only)"
        raise InfeasibleExperimentError(
            f"{spec.features} with {spec.regression.kind} regression needs at least {words} reference points"
            f"{detail}; strategy {spec.strategy.kind} (fraction {spec.strategy.fraction}) yields {k}")
    return k


def _run_fold(pair: PairData, spec: ExperimentSpec, fold: int, X_all: np.ndarray) -> FoldResult:
    seed = spec.fold_seed(fold)
    train, test = split_train_test(len(pair), spec.train_fraction, seed)
    result = FoldResult(fold, seed, len(train), len(test), test_ids=[pair.model_ids[i] for i in test])
    strategy = replace(spec.strategy, seed=spec.reference_seed(fold))
    try:
        train_pair = pair.subset(train)
        nmap = fit_map(train_pair, strategy, spec.regression, spec.features, spec.transform, spec.rank_by)
        result.reference_ids = list(nmap.reference_ids)
        result.n_refs = len(nmap.reference_ids)
        if nmap.model is not None and nmap.model.kind == "svr":
            result.converged = bool(nmap.model.diagnostics.get("converged"))
        rows = X_all[test] if nmap.kind == "regression" else pair.e_source[test]
        pred = apply_map(nmap, rows)
        y = pair.e_target[test]
        if not np.all(np.isfinite(pred)):
            raise FloatingPointError("non-finite predictions")
        result.r2 = r_squared(y, pred)
        result.mse = mse(y, pred)
    except (RankDeficiencyError, CoincidentReferenceError, InsufficientModelsError, UndefinedMetricError,
            FloatingPointError, ValueError) as exc:
        result.failed = True
        result.r2 = result.mse = None
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def run_experiment(table: MeasurementTable, spec: ExperimentSpec, label: str = "") -> EvalReport:
    pair = pivot_pair(table, spec.source, spec.target, allow_identity=spec.source == spec.target)
    check_feasible(spec, len(pair))
    try:
        X_all = feature_matrix(pair, spec.features)
    except MissingFeatureError as exc:
        raise InfeasibleExperimentError(str(exc)) from exc
    folds = [_run_fold(pair, spec, f, X_all) for f in range(spec.n_repeats)]
    return EvalReport(spec, folds, label=label)


def axis_values(axis: str) -> tuple:
    if axis == "fraction":
        return STUDY_FRACTIONS
    if axis == "regression":
        return REGRESSION_AXIS
    if axis == "features":
        return FEATURE_AXIS
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def cell_spec(base: ExperimentSpec, axis: str, value) -> ExperimentSpec:
    if axis == "fraction":
        if base.strategy.kind not in ("random_fraction", "minmax_fraction"):
            raise ValueError(f"the fraction axis needs a fraction strategy, got {base.strategy.kind}")
        return replace(base, strategy=replace(base.strategy, fraction=float(value)))
    if axis == "regression":
        return replace(base, regression=replace(base.regression, kind=value))
    if axis == "features":
        return replace(base, features=value)
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def sweep(table: MeasurementTable, base: ExperimentSpec, axis: str, values: Optional[Sequence] = None,
          workers: int = 1) -> list[EvalReport]:
    """One report per axis value. Every cell shares ``base.master_seed``, so fold f has
    the same train/test split in all cells; infeasible cells carry an ``error`` and no folds."""
    values = tuple(values) if values is not None else axis_values(axis)
    specs = [cell_spec(base, axis, v) for v in values]

    def run(i):
        label = f"{axis}={values[i]}"
        try:
            return run_experiment(table, specs[i], label=label)
        except InfeasibleExperimentError as exc:
            return EvalReport(specs[i], [], label=label, error=str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, range(len(specs))))
    return [run(i) for i in range(len(specs))]
