"""Pure numpy implementations of the hot loops.

These are the reference fallbacks for ``_kernels.pyx``. The histogram and
split-scan routines add values in the same order as the compiled versions,
so both backends grow bit-identical trees. TreeSHAP uses a different
algorithm here (per-leaf polynomial expansion, vectorised over rows) and
agrees with the compiled recursion to rounding error.
"""
from __future__ import annotations

from math import factorial

import numpy as np

NAME = "python"


def build_histogram(bins, grad, hess, rows, n_bins):
    """Per-feature sums of gradient, hessian and row count for ``rows``.

    Returns three ``(p, n_bins)`` arrays.
    """
    p = bins.shape[1]
    flat = (bins[rows].astype(np.intp) + np.arange(p, dtype=np.intp) * n_bins).ravel()
    g = np.repeat(grad[rows], p)
    h = np.repeat(hess[rows], p)
    size = p * n_bins
    G = np.bincount(flat, weights=g, minlength=size).reshape(p, n_bins)
    H = np.bincount(flat, weights=h, minlength=size).reshape(p, n_bins)
    C = np.bincount(flat, minlength=size).astype(np.int64).reshape(p, n_bins)
    return G, H, C


def best_split(G, H, C, n_bins_per_feature, lambda_l2, min_child_hessian):
    """Scan every bin boundary; return ``(gain, feature, bin)`` of the best split.

    A split after bin ``b`` sends bins ``0..b`` left. ``feature`` is -1 when
    no boundary has positive gain with both children above the hessian floor.
    Ties resolve to the lowest feature, then the lowest bin.
    """
    GL = np.cumsum(G, axis=1)
    HL = np.cumsum(H, axis=1)
    CL = np.cumsum(C, axis=1)
    p, nb = G.shape
    last = np.asarray(n_bins_per_feature, dtype=np.intp) - 1
    rows = np.arange(p)
    Gt = GL[rows, np.maximum(last, 0)][:, None]
    Ht = HL[rows, np.maximum(last, 0)][:, None]
    Ct = CL[rows, np.maximum(last, 0)][:, None]
    GR = Gt - GL
    HR = Ht - HL
    CR = Ct - CL
    gain = 0.5 * (GL * GL / (HL + lambda_l2) + GR * GR / (HR + lambda_l2) - Gt * Gt / (Ht + lambda_l2))
    valid = (
        (np.arange(nb)[None, :] < last[:, None])
        & (HL >= min_child_hessian) & (HR >= min_child_hessian)
        & (CL > 0) & (CR > 0)
        & (gain > 0.0)
    )
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    f, b = divmod(flat, nb)
    best = float(gain[f, b])
    if best == -np.inf:
        return -np.inf, -1, -1
    return best, f, b


def _shapley_weights(d):
    return np.array([factorial(k) * factorial(d - k - 1) / factorial(d) for k in range(d)])


def _leaf_paths(feature, threshold, left, right, weight):
    """Yield ``(leaf, [(feature, threshold, goes_left, cover_ratio), ...])``."""
    stack = [(0, ())]
    while stack:
        node, path = stack.pop()
        if left[node] < 0:
            yield node, path
            continue
        w = weight[node]
        for child, goes_left in ((left[node], True), (right[node], False)):
            ratio = weight[child] / w if w > 0 else 0.0
            stack.append((child, path + ((feature[node], threshold[node], goes_left, ratio),)))


def tree_shap_accumulate(feature, threshold, left, right, value, weight, max_depth, X, phi):
    """Add one tree's path-dependent Shapley values for every row of ``X`` into ``phi``.

    For a leaf reached through features ``P`` the conditional expectation
    restricted to ``S`` is ``v * prod_{j in S} o_j * prod_{j notin S} z_j``
    (``o_j`` = row follows the path on ``j``, ``z_j`` = product of cover
    ratios). Its Shapley value for ``i`` is ``v (o_i - z_i)`` times the
    weighted sum of the coefficients of ``prod_{j != i} (z_j + o_j t)``.
    """
    n = X.shape[0]
    for leaf, path in _leaf_paths(feature, threshold, left, right, weight):
        if not path:
            continue
        feats = []
        z = {}
        o = {}
        for f, thr, goes_left, ratio in path:
            follows = (X[:, f] < thr) == goes_left
            if f in z:
                z[f] *= ratio
                o[f] = o[f] & follows
            else:
                feats.append(f)
                z[f] = ratio
                o[f] = follows
        d = len(feats)
        Z = np.array([z[f] for f in feats])
        O = np.column_stack([o[f] for f in feats]).astype(np.float64)
        coef = np.zeros((n, d + 1))
        coef[:, 0] = 1.0
        for j in range(d):
            nxt = coef * Z[j]
            nxt[:, 1:] += coef[:, :-1] * O[:, j:j + 1]
            coef = nxt
        w = _shapley_weights(d)
        v = value[leaf]
        for i in range(d):
            zi = Z[i]
            oi = O[:, i]
            # quotient by (zi + t) for rows on the path, by zi otherwise
            q_on = np.empty((n, d))
            q_on[:, d - 1] = coef[:, d]
            for k in range(d - 1, 0, -1):
                q_on[:, k - 1] = coef[:, k] - zi * q_on[:, k]
            if zi > 0:
                q_off = coef[:, :d] / zi
            else:
                q_off = np.zeros((n, d))
            q = np.where(oi[:, None] > 0, q_on, q_off)
            phi[:, feats[i]] += v * (oi - zi) * (q @ w)
