import os
import subprocess
import sys

import numpy as np
import pytest

from energynorm import kernels


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("ENERGYNORM_PURE_PYTHON", None)
    if env_value is not None:
        env["ENERGYNORM_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "import energynorm.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_var_forces_fallback():
    assert _backend_in_subprocess("1") == "python"


def test_default_prefers_compiled():
    expected = "cython" if "cython" in kernels.implementations() else "python"
    assert _backend_in_subprocess(None) == expected


def test_best_offset_midpoint(backend):
    b, loss = backend.best_offset(np.array([0.0, 0.9]), 0.1)
    assert b == pytest.approx(0.45) and loss == pytest.approx(0.7)
    b, loss = backend.best_offset(np.array([1.0, 1.1]), 0.1)
    assert loss == 0 and 1.0 <= b <= 1.1


@pytest.mark.parametrize("seed", range(20))
def test_backends_agree(seed):
    impls = kernels.implementations()
    if len(impls) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(2, 40)), int(rng.integers(1, 4))
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + rng.normal(0, 0.5, n)
    C, eps = float(rng.choice([0.1, 1, 10])), float(rng.choice([1e-4, 0.1]))
    results = {name: m.svr_solve(X, y, C, eps, 1e-10, 100000) for name, m in impls.items()}
    Jc, Jp = results["cython"][2], results["python"][2]
    assert Jc == pytest.approx(Jp, rel=1e-8, abs=1e-12)
    for m in impls.values():
        assert m.svr_objective(np.ones(d), 0.3, X, y, C, eps) == pytest.approx(
            impls["python"].svr_objective(np.ones(d), 0.3, X, y, C, eps), rel=1e-14)
