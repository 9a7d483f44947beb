import os
import subprocess
import sys

import numpy as np
import pytest

from lifegraph import _kernels, _pykernels

BACKENDS = _kernels.backends()


def _sorted_instance(rng, n, p):
    X = rng.normal(size=(n, p))
    T = np.sort(rng.integers(0, 8, size=n)).astype(float)
    E = (rng.random(n) < 0.6).astype(float)
    return X, T, E, rng.normal(scale=0.3, size=p)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_backend_efron_matches_reference(name, rng):
    mod = BACKENDS[name]
    for _ in range(10):
        X, T, E, beta = _sorted_instance(rng, 40, 3)
        ll, g, H = mod.efron_terms(X, T, E, beta)
        ll0, g0, H0 = _pykernels.efron_terms(X, T, E, beta)
        assert ll == pytest.approx(ll0, rel=1e-12)
        assert np.allclose(g, g0, rtol=1e-11, atol=1e-12)
        assert np.allclose(H, H0, rtol=1e-11, atol=1e-12)
        assert np.allclose(H, np.asarray(H).T)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_backend_concordance_matches_reference(name, rng):
    mod = BACKENDS[name]
    for _ in range(10):
        n = 60
        s = rng.integers(0, 5, size=n).astype(float)
        T = rng.integers(0, 6, size=n).astype(float)
        E = rng.integers(0, 2, size=n).astype(float)
        assert tuple(mod.concordance_counts(s, T, E)) == tuple(_pykernels.concordance_counts(s, T, E))


def test_large_linear_predictor_is_stable(rng):
    X, T, E, _ = _sorted_instance(rng, 30, 2)
    for mod in BACKENDS.values():
        ll, g, H = mod.efron_terms(X * 100, T, E, np.array([5.0, -5.0]))
        assert np.isfinite(ll) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))


def test_env_forces_python_backend():
    env = dict(os.environ, LIFEGRAPH_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import lifegraph; print(lifegraph.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"
