"""Reference selection and normalization maps between two hardware.

A normalization map predicts the energy a model would use on the target
hardware from its energy on the source hardware, optionally using FLOPs and
parameter counts as extra predictors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dataset import PairData
from .regress import FittedModel, RegressionSpec, fit

STRATEGIES = ("single_low", "single_high", "dual_minmax", "random_fraction", "minmax_fraction")
FRACTION_KINDS = ("random_fraction", "minmax_fraction")
FEATURE_SETS = {
    "energy_only": (),
    "energy_flops": ("flops",),
    "energy_params": ("params",),
    "energy_flops_params": ("flops", "params"),
}
TRANSFORMS = ("raw", "log10")


class InsufficientModelsError(ValueError):
    pass


class CoincidentReferenceError(ValueError):
    """Two reference models share a source energy, so no line passes through both."""


class MissingFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceStrategy:
    kind: str = "dual_minmax"
    fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown reference strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.kind in FRACTION_KINDS and not 0 < self.fraction <= 1:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")

    def count(self, n: int) -> int:
        """Number of references drawn from ``n`` candidates."""
        if self.kind in ("single_low", "single_high"):
            return 1
        if self.kind == "dual_minmax":
            return 2
        return max(2, math.floor(self.fraction * n + 1e-9))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fraction": self.fraction, "seed": self.seed}


def _ranked(pair: PairData, rank_by: str) -> list[int]:
    if rank_by not in ("source", "target"):
        raise ValueError(f"rank_by must be 'source' or 'target', got {rank_by!r}")
    energy = pair.e_source if rank_by == "source" else pair.e_target
    return sorted(range(len(pair)), key=lambda i: (energy[i], pair.model_ids[i]))


def select_references(pair: PairData, strategy: ReferenceStrategy, rank_by: str = "source") -> list[int]:
    """Indices into ``pair`` of the reference models, ascending.

    Min-max picks ceil(k/2) lowest and floor(k/2) highest by energy (ties by model_id);
    random picks k uniformly without replacement under ``strategy.seed``.
    """
    n = len(pair)
    if n == 0:
        raise InsufficientModelsError("no models to choose references from")
    k = strategy.count(n)
    if k > n:
        raise InsufficientModelsError(f"strategy {strategy.kind} needs {k} models, only {n} available")
    if strategy.kind == "random_fraction":
        rng = np.random.default_rng(strategy.seed)
        return sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    order = _ranked(pair, rank_by)
    if strategy.kind == "single_low":
        return [order[0]]
    if strategy.kind == "single_high":
        return [order[-1]]
    n_low = (k + 1) // 2
    n_high = k // 2
    chosen = order[:n_low] + (order[-n_high:] if n_high else [])
    return sorted(chosen)


@dataclass
class NormalizationMap:
    kind: str
    source: str
    target: str
    reference_ids: tuple[str, ...] = ()
    factor: Optional[float] = None
    slope: Optional[float] = None
    intercept: Optional[float] = None
    anchors: Optional[tuple[tuple[float, float], tuple[float, float]]] = None
    model: Optional[FittedModel] = None
    features: str = "energy_only"
    transform: str = "raw"
    extra: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return 1 + len(FEATURE_SETS[self.features])

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "source": self.source,
            "target": self.target,
            "reference_ids": list(self.reference_ids),
            "features": self.features,
            "transform": self.transform,
        }
        if self.kind == "ratio":
            out["parameters"] = {"factor": self.factor}
        elif self.kind == "two_point":
            out["parameters"] = {"slope": self.slope, "intercept": self.intercept,
                                 "anchors": [list(a) for a in self.anchors]}
        else:
            out["parameters"] = {"model": self.model.to_dict()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationMap":
        params = d.get("parameters", {})
        kw = dict(kind=d["kind"], source=d["source"], target=d["target"],
                  reference_ids=tuple(d.get("reference_ids", ())),
                  features=d.get("features", "energy_only"), transform=d.get("transform", "raw"))
        if d["kind"] == "ratio":
            return cls(factor=float(params["factor"]), **kw)
        if d["kind"] == "two_point":
            anchors = tuple(tuple(float(v) for v in a) for a in params["anchors"])
            return cls(slope=float(params["slope"]), intercept=float(params["intercept"]), anchors=anchors, **kw)
        if d["kind"] == "regression":
            return cls(model=FittedModel.from_dict(params["model"]), **kw)
        raise ValueError(f"unknown map kind {d['kind']!r}")


def fit_single_reference(ref_source_kwh: float, ref_target_kwh: float, source: str = "", target: str = "",
                         reference_id: str = "") -> NormalizationMap:
    if not (ref_source_kwh > 0 and ref_target_kwh > 0):
        raise ValueError(f"reference energies must be > 0, got ({ref_source_kwh}, {ref_target_kwh})")
    return NormalizationMap("ratio", source, target, (reference_id,) if reference_id else (),
                            factor=ref_target_kwh / ref_source_kwh)


def fit_dual_reference(ref_lo: tuple[float, float], ref_hi: tuple[float, float], source: str = "",
                       target: str = "", reference_ids: Sequence[str] = ()) -> NormalizationMap:
    (s_lo, t_lo), (s_hi, t_hi) = (tuple(map(float, ref_lo)), tuple(map(float, ref_hi)))
    if s_lo == s_hi:
        raise CoincidentReferenceError(f"both references have source energy {s_lo}; the line is vertical")
    slope = (t_hi - t_lo) / (s_hi - s_lo)
    if not math.isfinite(slope):
        raise CoincidentReferenceError("reference source energies too close for a finite slope")
    return NormalizationMap("two_point", source, target, tuple(reference_ids), slope=slope,
                            intercept=t_lo - slope * s_lo, anchors=((s_lo, t_lo), (s_hi, t_hi)))


def feature_matrix(pair: PairData, features: str = "energy_only") -> np.ndarray:
    """Raw predictor rows: source energy, then FLOPs and/or params."""
    if features not in FEATURE_SETS:
        raise ValueError(f"unknown feature set {features!r}; expected one of {list(FEATURE_SETS)}")
    cols = [pair.e_source]
    for name in FEATURE_SETS[features]:
        values = getattr(pair, name)
        missing = [m for m, v in zip(pair.model_ids, values) if not np.isfinite(v)]
        if missing:
            label = "flops_forward" if name == "flops" else "params"
            raise MissingFeatureError(f"{label} missing for model(s) {', '.join(missing)} (needed by {features})")
        cols.append(values)
    return np.column_stack(cols)


def _forward(values: np.ndarray, transform: str) -> np.ndarray:
    if transform == "raw":
        return values
    if transform == "log10":
        if np.any(values <= 0):
            raise ValueError("log10 transform needs positive values")
        return np.log10(values)
    raise ValueError(f"unknown transform {transform!r}")


def build_design_matrix(pair: PairData, features: str = "energy_only", transform: str = "raw"):
    """(X, y) for regressing target energy; log10 applies to X and y alike."""
    X = feature_matrix(pair, features)
    return _forward(X, transform), _forward(pair.e_target, transform)


def fit_regression_map(pair: PairData, spec: RegressionSpec, features: str = "energy_only",
                       transform: str = "raw") -> NormalizationMap:
    X, y = build_design_matrix(pair, features, transform)
    model = fit(X, y, spec)
    return NormalizationMap("regression", pair.source, pair.target, tuple(pair.model_ids), model=model,
                            features=features, transform=transform)


def apply_map(nmap: NormalizationMap, rows) -> np.ndarray:
    """Predicted target energies (kWh) for source energies or raw feature rows."""
    rows = np.asarray(rows, dtype=float)
    if nmap.kind in ("ratio", "two_point"):
        if rows.ndim == 2:
            if rows.shape[1] != 1:
                raise ValueError(f"{nmap.kind} map takes source energies only, got {rows.shape[1]} columns")
            rows = rows[:, 0]
        if nmap.kind == "ratio":
            return rows * nmap.factor
        (s_lo, t_lo), (s_hi, t_hi) = nmap.anchors
        # point-slope form from the nearer anchor reproduces both anchors exactly
        near_hi = np.abs(rows - s_hi) < np.abs(rows - s_lo)
        return np.where(near_hi, t_hi + nmap.slope * (rows - s_hi), t_lo + nmap.slope * (rows - s_lo))
    if rows.ndim == 1:
        rows = rows[:, None] if nmap.input_dim == 1 else rows[None, :]
    if rows.shape[1] != nmap.input_dim:
        raise ValueError(f"map over {nmap.features} expects {nmap.input_dim} columns, got {rows.shape[1]}")
    pred = nmap.model.predict(_forward(rows, nmap.transform))
    return 10.0 ** pred if nmap.transform == "log10" else pred


def fit_map(pair: PairData, strategy: ReferenceStrategy, spec: RegressionSpec, features: str = "energy_only",
            transform: str = "raw", rank_by: str = "source") -> NormalizationMap:
    """Select references in ``pair`` and fit the map the strategy calls for.

    Single-reference strategies give a ratio map and dual_minmax with plain linear
    regression gives the two-point map; everything else fits ``spec`` on the references.
    """
    idx = select_references(pair, strategy, rank_by)
    refs = pair.subset(idx)
    if strategy.kind in ("single_low", "single_high"):
        if features != "energy_only":
            raise InsufficientModelsError(f"a single reference cannot fit the {features} feature set")
        return fit_single_reference(refs.e_source[0], refs.e_target[0], pair.source, pair.target, refs.model_ids[0])
    if (strategy.kind == "dual_minmax" and spec.kind == "linear" and transform == "raw"
            and features == "energy_only" and not spec.standardize):
        lo, hi = (0, 1) if refs.e_source[0] <= refs.e_source[1] else (1, 0)
        return fit_dual_reference((refs.e_source[lo], refs.e_target[lo]), (refs.e_source[hi], refs.e_target[hi]),
                                  pair.source, pair.target, (refs.model_ids[lo], refs.model_ids[hi]))
    return fit_regression_map(refs, spec, features, transform)
