# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: histogram accumulation, split scan and TreeSHAP recursion.

Mirrors the function signatures in ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "cython"

ctypedef cnp.intp_t intp


def build_histogram(const cnp.uint8_t[:, ::1] bins, const double[::1] grad,
                    const double[::1] hess, const intp[::1] rows, int n_bins):
    cdef Py_ssize_t p = bins.shape[1]
    cdef Py_ssize_t n = rows.shape[0]
    G_arr = np.zeros((p, n_bins), dtype=np.float64)
    H_arr = np.zeros((p, n_bins), dtype=np.float64)
    C_arr = np.zeros((p, n_bins), dtype=np.int64)
    cdef double[:, ::1] G = G_arr
    cdef double[:, ::1] H = H_arr
    cdef cnp.int64_t[:, ::1] C = C_arr
    cdef Py_ssize_t i, f, r
    cdef int b
    cdef double g, h
    with nogil:
        for i in range(n):
            r = rows[i]
            g = grad[r]
            h = hess[r]
            for f in range(p):
                b = bins[r, f]
                G[f, b] += g
                H[f, b] += h
                C[f, b] += 1
    return G_arr, H_arr, C_arr


def best_split(const double[:, ::1] G, const double[:, ::1] H, const cnp.int64_t[:, ::1] C,
               n_bins_per_feature, double lambda_l2, double min_child_hessian):
    cdef const intp[::1] nbf = np.ascontiguousarray(n_bins_per_feature, dtype=np.intp)
    cdef Py_ssize_t p = G.shape[0]
    cdef Py_ssize_t f, b, last
    cdef double gl, hl, gt, ht, gr, hr, gain
    cdef cnp.int64_t cl, ct
    cdef double best = -np.inf
    cdef Py_ssize_t best_f = -1, best_b = -1
    with nogil:
        for f in range(p):
            last = nbf[f] - 1
            if last < 1:
                continue
            gt = 0.0
            ht = 0.0
            ct = 0
            for b in range(last + 1):
                gt += G[f, b]
                ht += H[f, b]
                ct += C[f, b]
            gl = 0.0
            hl = 0.0
            cl = 0
            for b in range(last):
                gl += G[f, b]
                hl += H[f, b]
                cl += C[f, b]
                gr = gt - gl
                hr = ht - hl
                if hl < min_child_hessian or hr < min_child_hessian or cl <= 0 or ct - cl <= 0:
                    continue
                gain = 0.5 * (gl * gl / (hl + lambda_l2) + gr * gr / (hr + lambda_l2) - gt * gt / (ht + lambda_l2))
                if gain > 0.0 and gain > best:
                    best = gain
                    best_f = f
                    best_b = b
    return best, best_f, best_b


# ---------------------------------------------------------------------------
# TreeSHAP (path-dependent), after the unique-path recursion of Lundberg et al.

cdef struct PathElement:
    intp feature
    double zero_fraction
    double one_fraction
    double pweight


cdef inline void extend_path(PathElement* path, intp depth, double zero_fraction,
                             double one_fraction, intp feature) noexcept nogil:
    cdef intp i
    path[depth].feature = feature
    path[depth].zero_fraction = zero_fraction
    path[depth].one_fraction = one_fraction
    path[depth].pweight = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / <double>(depth + 1)
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) / <double>(depth + 1)


cdef inline void unwind_path(PathElement* path, intp depth, intp index) noexcept nogil:
    cdef double one_fraction = path[index].one_fraction
    cdef double zero_fraction = path[index].zero_fraction
    cdef double next_one = path[depth].pweight
    cdef double tmp
    cdef intp i
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0:
            tmp = path[i].pweight
            path[i].pweight = next_one * (depth + 1) / <double>((i + 1) * one_fraction)
            next_one = tmp - path[i].pweight * zero_fraction * (depth - i) / <double>(depth + 1)
        else:
            path[i].pweight = path[i].pweight * (depth + 1) / <double>(zero_fraction * (depth - i))
    for i in range(index, depth):
        path[i].feature = path[i + 1].feature
        path[i].zero_fraction = path[i + 1].zero_fraction
        path[i].one_fraction = path[i + 1].one_fraction


cdef inline double unwound_path_sum(PathElement* path, intp depth, intp index) noexcept nogil:
    cdef double one_fraction = path[index].one_fraction
    cdef double zero_fraction = path[index].zero_fraction
    cdef double next_one = path[depth].pweight
    cdef double total = 0.0
    cdef double tmp
    cdef intp i
    if one_fraction != 0:
        for i in range(depth - 1, -1, -1):
            tmp = next_one / <double>((i + 1) * one_fraction)
            total += tmp
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += path[i].pweight / (zero_fraction * (depth - i))
    return total * (depth + 1)


cdef void recurse(intp node, intp depth, PathElement* parent_path,
                  double parent_zero, double parent_one, intp parent_feature,
                  const intp* feature, const double* threshold, const intp* left,
                  const intp* right, const double* value, const double* weight,
                  const double* x, double* phi) noexcept nogil:
    cdef PathElement* path = parent_path + depth + 1
    cdef intp i, split, hot, cold, k
    cdef double w, hot_zero, cold_zero, incoming_zero, incoming_one, s
    for i in range(depth + 1):
        path[i] = parent_path[i]
    extend_path(path, depth, parent_zero, parent_one, parent_feature)

    if left[node] < 0:
        for i in range(1, depth + 1):
            s = unwound_path_sum(path, depth, i)
            phi[path[i].feature] += s * (path[i].one_fraction - path[i].zero_fraction) * value[node]
        return

    split = feature[node]
    if x[split] < threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    w = weight[node]
    if w > 0:
        hot_zero = weight[hot] / w
        cold_zero = weight[cold] / w
    else:
        hot_zero = 0.0
        cold_zero = 0.0
    incoming_zero = 1.0
    incoming_one = 1.0

    k = 0
    while k <= depth:
        if path[k].feature == split:
            break
        k += 1
    if k != depth + 1:
        incoming_zero = path[k].zero_fraction
        incoming_one = path[k].one_fraction
        unwind_path(path, depth, k)
        depth -= 1

    recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, split,
            feature, threshold, left, right, value, weight, x, phi)
    recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, split,
            feature, threshold, left, right, value, weight, x, phi)


def tree_shap_accumulate(const intp[::1] feature, const double[::1] threshold,
                         const intp[::1] left, const intp[::1] right,
                         const double[::1] value, const double[::1] weight,
                         int max_depth, const double[:, ::1] X, double[:, ::1] phi):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef Py_ssize_t size = (max_depth + 2) * (max_depth + 3) // 2 + 1
    cdef PathElement* buf
    if feature.shape[0] == 1:
        return
    buf = <PathElement*> malloc(size * sizeof(PathElement))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                recurse(0, 0, buf, 1.0, 1.0, -1,
                        &feature[0], &threshold[0], &left[0], &right[0], &value[0], &weight[0],
                        &X[i, 0], &phi[i, 0])
    finally:
        free(buf)
