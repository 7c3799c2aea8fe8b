# cython: boundscheck=False, wraparound=False, cdivision=False
"""Compiled hot kernels: NVS quantum-grant loop and tree-ensemble margins.

Semantics and float operation order are kept identical to the pure-Python
twin in ``_kernels_py.py``; the backend-parity tests assert bit equality.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def nvs_grants(kinds, reserves, refs, emas, max_prbs, budget, grid_size,
               alpha, rate_scale, quantum, eps):
    cdef cnp.ndarray[cnp.int32_t, ndim=1] kind_a = np.ascontiguousarray(kinds, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] res_a = np.ascontiguousarray(reserves, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ref_a = np.ascontiguousarray(refs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ema_a = np.ascontiguousarray(emas, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] max_a = np.ascontiguousarray(max_prbs, dtype=np.int64)
    cdef Py_ssize_t n = kind_a.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] granted = np.zeros(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prov = np.zeros(n, dtype=np.float64)

    cdef double c_alpha = alpha
    cdef double c_scale = rate_scale
    cdef double c_eps = eps
    cdef long c_budget = budget
    cdef long c_grid = grid_size
    cdef long c_quantum = quantum

    cdef Py_ssize_t i, best
    cdef double e, d, p, best_p, pr
    cdef long remaining, g, room

    for i in range(n):
        e = ema_a[i]
        if kind_a[i] == 0 and e > ref_a[i]:
            e = ref_a[i]
        prov[i] = e

    remaining = c_budget
    while remaining > 0:
        best = -1
        best_p = 0.0
        for i in range(n):
            if granted[i] >= max_a[i]:
                continue
            d = prov[i]
            if d < c_eps:
                d = c_eps
            p = res_a[i] / d
            if best < 0 or p > best_p:
                best = i
                best_p = p
        if best < 0:
            break
        g = c_quantum
        if g > remaining:
            g = remaining
        room = max_a[best] - granted[best]
        if g > room:
            g = room
        granted[best] += g
        remaining -= g
        if kind_a[best] == 0:
            pr = (1.0 - c_alpha) * ema_a[best] + c_alpha * (granted[best] * c_scale)
            if pr > ref_a[best]:
                pr = ref_a[best]
            prov[best] = pr
        else:
            pr = (1.0 - c_alpha) * ema_a[best] + c_alpha * (<double>granted[best] / <double>c_grid)
            prov[best] = pr
    return [int(granted[i]) for i in range(n)]


cdef class _MarginFn:
    cdef cnp.int32_t[::1] feat
    cdef cnp.float64_t[::1] thr
    cdef cnp.int32_t[::1] left
    cdef cnp.int32_t[::1] right
    cdef cnp.float64_t[::1] val
    cdef cnp.int32_t[::1] roots
    cdef double bias

    def __call__(self, x):
        cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
        return self._eval(xa)

    cdef double _eval(self, cnp.float64_t[::1] xa):
        cdef double m = self.bias
        cdef Py_ssize_t t, idx
        cdef int f
        for t in range(self.roots.shape[0]):
            idx = self.roots[t]
            f = self.feat[idx]
            while f >= 0:
                if xa[f] <= self.thr[idx]:
                    idx = self.left[idx]
                else:
                    idx = self.right[idx]
                f = self.feat[idx]
            m += self.val[idx]
        return m

    def batch(self, rows):
        cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(rows, dtype=np.float64)
        cdef Py_ssize_t nrows = X.shape[0]
        cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(nrows, dtype=np.float64)
        cdef Py_ssize_t r
        for r in range(nrows):
            out[r] = self._eval(X[r])
        return [float(v) for v in out]


def make_margin_fn(features, thresholds, lefts, rights, values, roots, bias):
    cdef _MarginFn fn = _MarginFn()
    fn.feat = np.ascontiguousarray(features, dtype=np.int32)
    fn.thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    fn.left = np.ascontiguousarray(lefts, dtype=np.int32)
    fn.right = np.ascontiguousarray(rights, dtype=np.int32)
    fn.val = np.ascontiguousarray(values, dtype=np.float64)
    fn.roots = np.ascontiguousarray(roots, dtype=np.int32)
    fn.bias = bias
    return fn


def make_margin_batch_fn(features, thresholds, lefts, rights, values, roots, bias):
    fn = make_margin_fn(features, thresholds, lefts, rights, values, roots, bias)
    return fn.batch
