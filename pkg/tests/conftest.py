import itertools

import numpy as np
import pytest

from crashshap import kernels
from crashshap.dataset import EncodedMatrix, bundled_data_path, load_csv, load_schema


@pytest.fixture(scope="session")
def schema():
    return load_schema()


@pytest.fixture(scope="session")
def bundled(schema):
    return load_csv(bundled_data_path(), schema)


@pytest.fixture(params=[m.NAME for m in kernels.available_backends()])
def backend(request):
    prev = kernels.use(request.param)
    yield request.param
    kernels.use(prev)


def matrix(x, y, names=None):
    x = np.asarray(x, dtype=np.float64)
    names = tuple(names or (f"f{j}" for j in range(x.shape[1])))
    return EncodedMatrix(x, np.asarray(y, dtype=np.int64), names, {}, tuple((0.0, 1.0) for _ in names))


def product_grid(rng, p, max_rows=200, min_rows=8):
    """Full-factorial background: every combination of per-feature levels."""
    while True:
        levels = rng.integers(1, 4, size=p)
        if min_rows <= np.prod(levels) <= max_rows:
            break
    axes = [np.sort(rng.random(k)) for k in levels]
    return np.array(list(itertools.product(*axes)))


def signal_noise(seed, n=500, p_noise=7):
    """3 informative columns followed by ``p_noise`` pure-noise columns."""
    rng = np.random.default_rng(seed)
    x = rng.random((n, 3 + p_noise))
    z = 4 * (x[:, 0] - 0.5) + 3 * (x[:, 1] - 0.5) + 2.5 * (x[:, 2] - 0.5)
    y = (rng.random(n) < 1 / (1 + np.exp(-2 * z))).astype(np.int64)
    names = ["s0", "s1", "s2"] + [f"n{i}" for i in range(p_noise)]
    return matrix(x, y, names)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
