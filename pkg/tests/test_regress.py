import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energynorm.regress import (
    FittedModel,
    RankDeficiencyError,
    RegressionSpec,
    expand_poly2,
    fit,
    fit_ols,
    fit_poly2,
    fit_svr_linear,
    min_points,
    predict,
    svr_objective,
)


def svr_grid_oracle(x, y, C, eps, step=1e-4):
    """Brute-force min of the 1-d SVR objective: coarse grid, then a fine grid around the best cell."""
    x, y = np.asarray(x, float), np.asarray(y, float)

    def J(w, b):
        r = y[None, None, :] - w[:, None, None] * x[None, None, :] - b[None, :, None]
        return 0.5 * w[:, None] ** 2 + C * np.maximum(0, np.abs(r) - eps).sum(-1)

    span = max(1.0, np.abs(y).max() * 2)
    ws = np.linspace(-span, span, 401)
    bs = np.linspace(-span, span, 401)
    vals = J(ws, bs)
    i, j = np.unravel_index(vals.argmin(), vals.shape)
    coarse = ws[1] - ws[0]
    fw = np.arange(ws[i] - coarse, ws[i] + coarse + step / 2, step)
    fb = np.arange(bs[j] - coarse, bs[j] + coarse + step / 2, step)
    vals = J(fw, fb)
    i, j = np.unravel_index(vals.argmin(), vals.shape)
    return fw[i], fb[j], vals[i, j]


# ------------------------------------------------------------------ OLS

def test_ols_exact_line():
    m = fit_ols([1, 2, 3], [1, 2, 3])
    assert m.weights[0] == pytest.approx(1, abs=1e-12)
    assert m.intercept == pytest.approx(0, abs=1e-12)


def test_ols_two_points():
    m = fit_ols([0, 1], [1, 3])
    assert m.weights[0] == pytest.approx(2, abs=1e-12) and m.intercept == pytest.approx(1, abs=1e-12)


def test_ols_tent():
    m = fit_ols([0, 1, 2], [0, 1, 0])
    assert m.weights[0] == pytest.approx(0, abs=1e-12)
    assert m.intercept == pytest.approx(1 / 3, abs=1e-12)
    # brute-force grid over (slope, intercept)
    s, b = np.meshgrid(np.linspace(-1, 1, 201), np.linspace(-1, 1, 601), indexing="ij")
    x, y = np.array([0, 1, 2.0]), np.array([0, 1, 0.0])
    sse = ((y - s[..., None] * x - b[..., None]) ** 2).sum(-1)
    i, j = np.unravel_index(sse.argmin(), sse.shape)
    assert abs(s[i, j]) < 1e-2 and abs(b[i, j] - 1 / 3) < 1e-2


@pytest.mark.parametrize("X, y", [
    ([[1.0]], [1.0]),
    ([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]], [1.0, 2.0, 3.0, 4.0]),
    ([[1.0], [1.0], [1.0]], [1.0, 2.0, 3.0]),
    ([[1.0, 2.0], [2.0, 1.0]], [1.0, 2.0]),
], ids=["too_few_points", "duplicated_column", "constant_column", "n_below_d_plus_1"])
def test_ols_rank_deficiency(X, y):
    with pytest.raises(RankDeficiencyError):
        fit_ols(X, y)


def test_ols_normal_equations_with_spread_scales(rng):
    X = np.column_stack([rng.uniform(1e-3, 1, 30), rng.uniform(1e6, 1e9, 30)])
    y = X @ [2.0, 3e-9] + 0.5 + rng.normal(0, 0.01, 30)
    m = fit_ols(X, y)
    A = np.column_stack([np.ones(30), X])
    r = y - A @ np.r_[m.intercept, m.weights]
    grad = A.T @ r
    assert np.all(np.abs(grad) <= 1e-10 * np.abs(A).sum(0) * np.abs(y).max())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(3, 6), d=st.integers(1, 2), k=st.floats(-100, 100))
def test_ols_optimality_and_equivariance(seed, n, d, k):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-10, 10, (n, d))
    y = rng.uniform(-10, 10, n)
    try:
        m = fit_ols(X, y)
    except RankDeficiencyError:
        return
    sse = ((y - m.predict(X)) ** 2).sum()
    theta = np.r_[m.weights, m.intercept]
    for _ in range(1000):
        t = theta * (1 + rng.uniform(-0.1, 0.1, theta.shape))
        assert sse <= ((y - X @ t[:-1] - t[-1]) ** 2).sum() * (1 + 1e-12) + 1e-12
    if abs(k) > 1e-3:
        mk = fit_ols(X, k * y)
        np.testing.assert_allclose(mk.weights, k * m.weights, rtol=1e-9, atol=1e-9 * abs(k))
        assert mk.intercept == pytest.approx(k * m.intercept, rel=1e-9, abs=1e-9 * abs(k))
    Z = X.copy()
    Z[:, 0] = 3.7 * Z[:, 0] - 12.0
    np.testing.assert_allclose(fit_ols(Z, y).predict(Z), m.predict(X), rtol=1e-9, atol=1e-9 * np.abs(y).max())


# ------------------------------------------------------------------ poly2

def test_expand_poly2_examples():
    assert expand_poly2([[2.0]]).tolist() == [[2.0, 4.0]]
    assert expand_poly2([[1.0, 3.0]]).tolist() == [[1.0, 3.0, 1.0, 3.0, 9.0]]
    assert expand_poly2(np.ones((4, 3))).shape == (4, 9)


def test_poly2_zero_quadratic_weights_match_linear(rng):
    X = rng.uniform(0, 5, (8, 2))
    lin = fit_ols(X, X @ [1.0, -2.0] + 3)
    quad = FittedModel("poly2", np.r_[lin.weights, 0, 0, 0], lin.intercept, expansion="poly2", input_dim=2)
    np.testing.assert_allclose(quad.predict(X), lin.predict(X), rtol=1e-12)


def test_poly2_recovers_parabola():
    x = np.linspace(-2, 3, 7)
    m = fit_poly2(x, 1 + 2 * x - 0.5 * x ** 2)
    np.testing.assert_allclose(m.weights, [2, -0.5], atol=1e-10)
    assert m.intercept == pytest.approx(1, abs=1e-10)


def test_poly2_standardized_predicts_the_same(rng):
    x = rng.uniform(10, 1000, 9)
    y = 0.3 + 0.01 * x + 1e-5 * x ** 2
    a = fit_poly2(x, y)
    b = fit_poly2(x, y, standardize=True)
    np.testing.assert_allclose(a.predict(x), b.predict(x), rtol=1e-9)


def test_min_points():
    assert min_points("linear", 1) == 2
    assert min_points("linear", 3) == 4
    assert min_points("poly2", 1) == 3
    assert min_points("poly2", 2) == 6


# ------------------------------------------------------------------ predict

def test_predict_examples():
    assert predict(FittedModel("linear", [2.0], 1.0), [[3.0]]).tolist() == [7.0]
    assert predict(FittedModel("poly2", [0.0, 1.0], 0.0, expansion="poly2"), [[3.0]]).tolist() == [9.0]
    scaled = FittedModel("linear", [1.0], 0.0, scaler_mean=[10.0], scaler_std=[2.0])
    assert predict(scaled, [[12.0]]).tolist() == [1.0]


def test_predict_dimension_mismatch():
    with pytest.raises(ValueError):
        FittedModel("linear", [1.0, 2.0], 0.0, input_dim=2).predict([[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        FittedModel("poly2", [1.0, 2.0, 3.0], 0.0, expansion="poly2")


def test_model_json_roundtrip(rng):
    m = fit(rng.uniform(0, 1, (6, 2)), rng.uniform(0, 1, 6), RegressionSpec("poly2", standardize=True))
    back = FittedModel.from_dict(m.to_dict())
    X = rng.uniform(0, 1, (4, 2))
    np.testing.assert_array_equal(back.predict(X), m.predict(X))


# ------------------------------------------------------------------ SVR

@pytest.mark.parametrize("kw", [dict(svr_c=0), dict(svr_epsilon=-1), dict(svr_tol=0), dict(svr_max_iter=0),
                                dict(kind="ridge")])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        RegressionSpec(**kw)


def test_svr_objective_examples():
    X, y = np.array([[0.0], [1.0]]), np.array([0.0, 1.0])
    assert svr_objective([0.0], 0.0, X, [0.0, 0.0], 0.1, 0.1) == 0
    assert svr_objective([0.1], 0.45, X, y, 0.1, 0.1) == pytest.approx(0.075, abs=1e-15)
    for eps in (0, 0.3, 2):
        assert svr_objective([1.0], 0.0, X, y, 7.0, eps) == 0.5


def test_grid_oracle_on_two_point_example():
    w, b, J = svr_grid_oracle([0, 1], [0, 1], 0.1, 0.1)
    assert J == pytest.approx(0.075, abs=1e-6)
    assert w == pytest.approx(0.1, abs=1e-3)


def test_svr_two_point_example(backend):
    w, b, J, iters, converged, trace = backend.svr_solve(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]),
                                                         0.1, 0.1, 1e-10, 100000)
    assert converged
    assert J == pytest.approx(0.075, abs=1e-9)
    assert w[0] == pytest.approx(0.1, abs=1e-6) and b == pytest.approx(0.45, abs=1e-6)


def test_svr_tiny_c_flattens(backend):
    X = np.array([[0.0], [1.0], [2.0], [5.0]])
    w, b, *_ = backend.svr_solve(X, np.array([1.0, 3.0, 2.0, 7.0]), 1e-12, 0.1, 1e-10, 100000)
    assert abs(w[0]) < 1e-9


def test_svr_tube_cover_gives_zero(backend):
    X = np.array([[0.0], [3.0], [7.0]])
    w, b, J, iters, converged, _ = backend.svr_solve(X, np.array([1.0, 1.05, 0.95]), 0.1, 0.1, 1e-10, 100000)
    assert J <= 1e-12 and np.all(w == 0) and converged


def test_svr_trace_monotone(backend, rng):
    X = rng.normal(size=(20, 2))
    y = X @ [1.0, -2.0] + rng.normal(0, 0.3, 20)
    *_, trace = backend.svr_solve(X, y, 1.0, 0.05, 1e-10, 100000)
    assert all(b <= a for a, b in zip(trace, trace[1:]))


@pytest.mark.parametrize("seed", range(25))
def test_svr_matches_grid_oracle_1d(backend, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    x, y = rng.uniform(-2, 2, n), rng.uniform(-2, 2, n)
    C, eps = float(rng.choice([0.1, 1.0, 5.0])), float(rng.choice([0.0, 0.1, 0.5]))
    *_, J_grid = svr_grid_oracle(x, y, C, eps)
    w, b, J, _, converged, _ = backend.svr_solve(x[:, None], y, C, eps, 1e-10, 100000)
    assert converged
    assert J <= J_grid + 1e-6
    assert backend.svr_objective(w, b, x[:, None], y, C, eps) == pytest.approx(J, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_svr_matches_cvxpy(backend, seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(100 + seed)
    n, d = int(rng.integers(3, 30)), int(rng.integers(1, 4))
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 10, d)
    y = X @ rng.normal(size=d) + rng.normal(0, 1, n)
    C, eps = float(rng.choice([0.1, 1.0, 10.0])), float(rng.choice([1e-4, 0.1]))
    w, b = cp.Variable(d), cp.Variable()
    prob = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(w) + C * cp.sum(cp.pos(cp.abs(y - X @ w - b) - eps))))
    prob.solve()
    *_, J, _, converged, _ = backend.svr_solve(X, y, C, eps, 1e-10, 100000)
    assert converged
    assert J <= prob.value * (1 + 1e-6) + 1e-9


def test_fit_svr_records_diagnostics():
    m = fit_svr_linear([[0.0], [1.0]], [0.0, 1.0], RegressionSpec("svr", svr_c=0.1, svr_epsilon=0.1))
    d = m.diagnostics
    assert d["converged"] and d["stop_reason"] == "duality_gap"
    assert d["objective"] == pytest.approx(0.075, abs=1e-9)
    assert d["iterations"] >= 1 and d["backend"] in ("cython", "python")


def test_fit_svr_iteration_cap_is_flagged_not_raised():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2))
    m = fit_svr_linear(X, X @ [1, 2] + rng.normal(size=30), RegressionSpec("svr", svr_c=10, svr_max_iter=1))
    assert m.diagnostics["iterations"] == 1
    assert m.diagnostics["converged"] is False


def test_fit_svr_needs_two_points():
    with pytest.raises(ValueError):
        fit_svr_linear([[1.0]], [1.0], RegressionSpec("svr"))
