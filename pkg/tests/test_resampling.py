import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crashshap.errors import ConfigError, DataError
from crashshap.resampling import SmoteConfig, minority_neighbors, smote

from conftest import matrix


def brute_knn(xm, i, k):
    """k nearest other rows of ``xm[i]``; ties to the lower index."""
    d = [(float(np.sum((xm[i] - xm[j]) ** 2)), j) for j in range(len(xm)) if j != i]
    d.sort()
    return {j for _, j in d[:k]}


def synthetic_parents(xm, s, k):
    """Find (a, b, u) with s = xm[a] + u (xm[b] - xm[a]), b among a's k-NN."""
    for a in range(len(xm)):
        for b in brute_knn(xm, a, k):
            d = xm[b] - xm[a]
            nz = np.abs(d) > 0
            if not nz.any():
                continue
            u = float(np.dot(s - xm[a], d) / np.dot(d, d))
            resid = np.max(np.abs(xm[a] + u * d - s))
            if resid <= 1e-12 and 0 < u < 1:
                return a, b, u
    return None


def check_smote(train, out, cfg):
    n0, n1 = train.class_counts()
    minority = 0 if n0 < n1 else 1
    major = max(n0, n1)
    target = math.ceil(cfg.target_ratio * major)
    c0, c1 = out.class_counts()
    assert (c0, c1)[minority] == max(target, min(n0, n1))
    assert (c0, c1)[1 - minority] == major
    np.testing.assert_array_equal(out.x[:train.n], train.x)
    np.testing.assert_array_equal(out.y[:train.n], train.y)
    xm = train.x[train.y == minority]
    k = min(cfg.k_neighbors, len(xm) - 1)
    for s in out.x[train.n:]:
        assert synthetic_parents(xm, s, k) is not None


def test_paper_counts():
    rng = np.random.default_rng(0)
    y = np.array([0] * 428 + [1] * 931)
    out = smote(matrix(rng.random((len(y), 4)), y), SmoteConfig(5, 0, 1.0))
    assert out.n == 1862
    assert out.class_counts() == (931, 931)


def test_two_point_segment():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.1], [0.2, 0.9], [0.9, 0.3]])
    y = np.array([1, 1, 0, 0, 0])
    out = smote(matrix(x, y), SmoteConfig(5, 3))
    synth = out.x[5:]
    assert len(synth) == 1
    for s in synth:
        assert abs(s[0] - s[1]) <= 1e-12 and 0 < s[0] < 1


def test_balanced_unchanged():
    m = matrix(np.eye(4), [0, 1, 0, 1])
    assert smote(m, SmoteConfig()) is m


def test_errors_and_clamp(caplog):
    with pytest.raises(DataError):
        smote(matrix(np.eye(4), [0, 0, 0, 1]), SmoteConfig())
    with pytest.raises(DataError):
        smote(matrix(np.zeros((0, 2)), []), SmoteConfig())
    with pytest.raises(ConfigError):
        SmoteConfig(k_neighbors=0)
    with pytest.raises(ConfigError):
        SmoteConfig(target_ratio=1.5)
    m = matrix(np.random.default_rng(1).random((9, 2)), [1, 1, 1, 0, 0, 0, 0, 0, 0])
    with caplog.at_level("WARNING"):
        out = smote(m, SmoteConfig(k_neighbors=5))
    assert "clamped" in caplog.text
    check_smote(m, out, SmoteConfig(k_neighbors=5))


def test_neighbors_match_brute_force():
    rng = np.random.default_rng(2)
    xm = rng.integers(0, 4, size=(70, 3)).astype(float) / 3  # many distance ties
    nn = minority_neighbors(xm, 5)
    for i in range(len(xm)):
        assert set(nn[i].tolist()) == brute_knn(xm, i, 5)


def test_deterministic():
    rng = np.random.default_rng(4)
    m = matrix(rng.random((60, 3)), (rng.random(60) < 0.3).astype(int))
    a, b = smote(m, SmoteConfig(seed=9)), smote(m, SmoteConfig(seed=9))
    np.testing.assert_array_equal(a.x, b.x)
    assert SmoteConfig(seed=9).for_fold(2) == SmoteConfig(seed=9).for_fold(2)
    assert SmoteConfig(seed=9).for_fold(1) != SmoteConfig(seed=9).for_fold(2)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 25), st.integers(26, 60), st.integers(1, 6), st.floats(0.3, 1.0), st.integers(0, 10_000))
def test_smote_properties(m_min, m_maj, k, ratio, seed):
    rng = np.random.default_rng(seed)
    n = m_min + m_maj
    y = np.array([1] * m_min + [0] * m_maj)
    perm = rng.permutation(n)
    train = matrix(rng.random((n, 3)), y[perm])
    cfg = SmoteConfig(k, seed, ratio)
    out = smote(train, cfg)
    check_smote(train, out, cfg)
    assert out.x.min() >= 0 and out.x.max() <= 1
