"""Least squares, degree-2 polynomial and linear epsilon-SVR regression."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels

KINDS = ("linear", "poly2", "svr")
RANK_TOL = 1e-10


class RankDeficiencyError(ValueError):
    """Design matrix [1 | X] does not have full column rank."""


@dataclass(frozen=True)
class RegressionSpec:
    kind: str = "linear"
    svr_c: float = 0.1
    svr_epsilon: float = 1e-4
    svr_tol: float = 1e-10
    svr_max_iter: int = 100_000
    standardize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regression kind {self.kind!r}; expected one of {KINDS}")
        if not self.svr_c > 0:
            raise ValueError("svr_c must be > 0")
        if not self.svr_epsilon >= 0:
            raise ValueError("svr_epsilon must be >= 0")
        if not self.svr_tol > 0:
            raise ValueError("svr_tol must be > 0")
        if self.svr_max_iter < 1:
            raise ValueError("svr_max_iter must be >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "svr_c": self.svr_c,
            "svr_epsilon": self.svr_epsilon,
            "svr_tol": self.svr_tol,
            "svr_max_iter": self.svr_max_iter,
            "standardize": self.standardize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionSpec":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class FittedModel:
    kind: str
    weights: np.ndarray
    intercept: float
    expansion: str = "identity"
    input_dim: int = 1
    scaler_mean: Optional[np.ndarray] = None
    scaler_std: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.intercept = float(self.intercept)
        if expanded_dim(self.input_dim, self.expansion) != len(self.weights):
            raise ValueError(
                f"{self.expansion} expansion of {self.input_dim} inputs has "
                f"{expanded_dim(self.input_dim, self.expansion)} columns, got {len(self.weights)} weights")
        if self.scaler_mean is not None:
            self.scaler_mean = np.asarray(self.scaler_mean, dtype=float)
            self.scaler_std = np.asarray(self.scaler_std, dtype=float)

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"model expects {self.input_dim} input columns, got {X.shape[1]}")
        if self.scaler_mean is not None:
            X = (X - self.scaler_mean) / self.scaler_std
        return expand_poly2(X) if self.expansion == "poly2" else X

    def predict(self, X) -> np.ndarray:
        return self.transform(X) @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "expansion": self.expansion,
            "input_dim": self.input_dim,
            "scaler": None if self.scaler_mean is None else {
                "mean": self.scaler_mean.tolist(), "std": self.scaler_std.tolist()},
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        scaler = d.get("scaler") or {}
        return cls(
            kind=d["kind"],
            weights=np.asarray(d["weights"], dtype=float),
            intercept=d["intercept"],
            expansion=d.get("expansion", "identity"),
            input_dim=d.get("input_dim", 1),
            scaler_mean=scaler.get("mean"),
            scaler_std=scaler.get("std"),
            diagnostics=d.get("diagnostics", {}),
        )


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"expected a 1-D or 2-D array, got shape {X.shape}")
    return X


def expanded_dim(d: int, expansion: str) -> int:
    return d + d * (d + 1) // 2 if expansion == "poly2" else d


def expand_poly2(X) -> np.ndarray:
    """Columns x_1..x_d followed by x_i * x_j for i <= j (no constant column)."""
    X = as_matrix(X)
    d = X.shape[1]
    if d < 1:
        raise ValueError("need at least one input column")
    cross = [X[:, i] * X[:, j] for i in range(d) for j in range(i, d)]
    return np.column_stack([X] + cross)


def _lstsq(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    n, d = X.shape
    if n < d + 1:
        raise RankDeficiencyError(f"{n} points cannot determine {d} weights plus an intercept")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    # equilibrate so the rank test compares columns on equal footing
    norms = np.sqrt((Xc * Xc).sum(axis=0))
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise RankDeficiencyError("a predictor column is constant (collinear with the intercept)")
    Q, R = np.linalg.qr(Xc / norms)
    diag = np.abs(np.diag(R))
    if diag.min() <= RANK_TOL * diag.max():
        raise RankDeficiencyError(
            f"collinear predictors (|R| diagonal ratio {diag.min() / diag.max():.3g} <= {RANK_TOL:g})")
    coef = np.linalg.solve(R, Q.T @ (y - y_mean))
    w = coef / norms
    return w, y_mean - float(x_mean @ w)


def fit_ols(X, y) -> FittedModel:
    X = as_matrix(X)
    y = np.asarray(y, dtype=float)
    w, b = _lstsq(X, y)
    return FittedModel("linear", w, b, input_dim=X.shape[1])


def _scaler(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


def fit_poly2(X, y, standardize: bool = False) -> FittedModel:
    X = as_matrix(X)
    y = np.asarray(y, dtype=float)
    mean = std = None
    Z = X
    if standardize:
        mean, std = _scaler(X)
        Z = (X - mean) / std
    w, b = _lstsq(expand_poly2(Z), y)
    return FittedModel("poly2", w, b, expansion="poly2", input_dim=X.shape[1], scaler_mean=mean, scaler_std=std)


def fit_svr_linear(X, y, spec: RegressionSpec) -> FittedModel:
    X = as_matrix(X)
    y = np.asarray(y, dtype=float)
    if len(y) < 2:
        raise ValueError("SVR needs at least 2 points")
    if len(y) != X.shape[0]:
        raise ValueError("X and y lengths differ")
    mean = std = None
    Z = X
    if spec.standardize:
        mean, std = _scaler(X)
        Z = (X - mean) / std
    w, b, objective, iterations, converged, trace = kernels.svr_solve(
        Z, y, spec.svr_c, spec.svr_epsilon, spec.svr_tol, spec.svr_max_iter)
    diagnostics = {
        "iterations": int(iterations),
        "objective": float(kernels.svr_objective(w, b, Z, y, spec.svr_c, spec.svr_epsilon)),
        "converged": bool(converged),
        "stop_reason": "duality_gap" if converged else "max_iter_or_stall",
        "trace": [float(t) for t in trace],
        "backend": kernels.BACKEND,
    }
    return FittedModel("svr", np.asarray(w), b, input_dim=X.shape[1], scaler_mean=mean, scaler_std=std,
                       diagnostics=diagnostics)


def svr_objective(w, b, X, y, C, eps) -> float:
    return float(kernels.svr_objective(np.atleast_1d(np.asarray(w, dtype=float)), float(b), as_matrix(X),
                                       np.asarray(y, dtype=float), C, eps))


def fit(X, y, spec: RegressionSpec) -> FittedModel:
    if spec.kind == "linear":
        if spec.standardize:
            X = as_matrix(X)
            mean, std = _scaler(X)
            w, b = _lstsq((X - mean) / std, np.asarray(y, dtype=float))
            return FittedModel("linear", w, b, input_dim=X.shape[1], scaler_mean=mean, scaler_std=std)
        return fit_ols(X, y)
    if spec.kind == "poly2":
        return fit_poly2(X, y, spec.standardize)
    return fit_svr_linear(X, y, spec)


def predict(model: FittedModel, X) -> np.ndarray:
    return model.predict(X)


def min_points(kind: str, d: int) -> int:
    """Smallest sample count that can identify the model on ``d`` raw inputs."""
    if kind == "poly2":
        return expanded_dim(d, "poly2") + 1
    return d + 1
