# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Must stay bit-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from libc.stdint cimport uint64_t, int64_t, int8_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t GOLDEN_GAMMA = 0x9E3779B97F4A7C15ULL
cdef double TWO_POW_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t splitmix_next(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN_GAMMA
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double splitmix_uniform(uint64_t* state) noexcept nogil:
    return <double>(splitmix_next(state) >> 11) * TWO_POW_M53


cdef void _anneal_one(
    const int64_t[::1] indptr, const int64_t[::1] nbrs, const double[::1] w,
    const double[::1] h, const double[::1] betas, uint64_t seed, bint random_order,
    int8_t[::1] s, int64_t* order, double* energy_out,
) noexcept nogil:
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i, j, p, t, k
    cdef int64_t tmp
    cdef uint64_t state = seed
    cdef double e = 0.0, f, de, beta

    for i in range(n):
        s[i] = 1 if (splitmix_next(&state) >> 63) else -1
    for i in range(n):
        e += h[i] * s[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = nbrs[p]
            if j > i:
                e += w[p] * s[i] * s[j]
    for i in range(n):
        order[i] = i
    for t in range(betas.shape[0]):
        beta = betas[t]
        if random_order:
            for i in range(n - 1, 0, -1):
                k = <Py_ssize_t>(splitmix_next(&state) % <uint64_t>(i + 1))
                tmp = order[i]
                order[i] = order[k]
                order[k] = tmp
        for k in range(n):
            i = order[k]
            f = h[i]
            for p in range(indptr[i], indptr[i + 1]):
                f += w[p] * s[nbrs[p]]
            de = -2.0 * s[i] * f
            if de <= 0.0 or splitmix_uniform(&state) < exp(-beta * de):
                s[i] = -s[i]
                e += de
    energy_out[0] = e


def anneal(indptr, nbrs, weights, h, betas, uint64_t seed, uint64_t start, Py_ssize_t count, bint random_order):
    cdef const int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[::1] nb = np.ascontiguousarray(nbrs, dtype=np.int64)
    cdef const double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(betas, dtype=np.float64)
    cdef Py_ssize_t n = hv.shape[0]
    out = np.empty((count, n), dtype=np.int8)
    out_e = np.empty(count, dtype=np.float64)
    cdef int8_t[:, ::1] ov = out
    cdef double[::1] ev = out_e
    cdef Py_ssize_t k
    cdef int64_t* order = <int64_t*>malloc(max(n, 1) * sizeof(int64_t))
    if order == NULL:
        raise MemoryError()
    try:
        with nogil:
            for k in range(count):
                _anneal_one(ip, nb, wt, hv, bv, seed + start + <uint64_t>k, random_order,
                            ov[k], order, &ev[k])
    finally:
        free(order)
    return out, out_e


cdef void _combine(
    const int64_t[::1] indptr, const int64_t[::1] nbrs, const double[::1] w,
    const double[::1] h, const int64_t[::1] gauge, Py_ssize_t ngauge,
    const int8_t[::1] s1, const int8_t[::1] s2,
    int8_t[::1] out, int64_t* label, int64_t* stack, double* acc,
    int64_t* agree, int64_t* size, int64_t* first,
) noexcept nogil:
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i, j, p, root, top, g
    cdef Py_ssize_t ncomp = 0, ndiff = 0
    cdef int8_t b
    cdef double t

    for g in range(ngauge):
        agree[g] = 0
        size[g] = 0
        first[g] = -1
    for i in range(n):
        g = gauge[i]
        if g < 0:
            continue
        size[g] += 1
        if s1[i] == s2[i]:
            agree[g] += 1
        if first[g] < 0:
            first[g] = i
    # agree[g] becomes the flip flag for cluster g.
    for g in range(ngauge):
        agree[g] = 2 * agree[g] < size[g] or (2 * agree[g] == size[g] and s1[first[g]] != s2[first[g]])

    for i in range(n):
        out[i] = s1[i]
        b = s2[i]
        g = gauge[i]
        if g >= 0 and agree[g]:
            b = -b
        # label -1: disagreement, not yet labelled; -2: agreement.
        if s1[i] != b:
            label[i] = -1
            ndiff += 1
        else:
            label[i] = -2
    if ndiff == 0:
        return

    for root in range(n):
        if label[root] != -1:
            continue
        label[root] = ncomp
        top = 0
        stack[top] = root
        top += 1
        while top > 0:
            top -= 1
            i = stack[top]
            for p in range(indptr[i], indptr[i + 1]):
                j = nbrs[p]
                if label[j] == -1 and w[p] != 0.0:
                    label[j] = ncomp
                    stack[top] = j
                    top += 1
        ncomp += 1

    for i in range(ncomp):
        acc[i] = 0.0
    for i in range(n):
        if label[i] < 0:
            continue
        t = h[i] * s1[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = nbrs[p]
            if label[j] == -2:
                t += w[p] * s1[i] * s1[j]
        acc[label[i]] += t
    for i in range(n):
        if label[i] >= 0 and acc[label[i]] > 0.0:
            out[i] = -s1[i]


cdef class _Scratch:
    cdef int64_t* label
    cdef int64_t* stack
    cdef double* acc
    cdef int64_t* agree
    cdef int64_t* size
    cdef int64_t* first

    def __cinit__(self, Py_ssize_t n):
        n = max(n, 1)
        self.label = <int64_t*>malloc(n * sizeof(int64_t))
        self.stack = <int64_t*>malloc(n * sizeof(int64_t))
        self.acc = <double*>malloc(n * sizeof(double))
        self.agree = <int64_t*>malloc(n * sizeof(int64_t))
        self.size = <int64_t*>malloc(n * sizeof(int64_t))
        self.first = <int64_t*>malloc(n * sizeof(int64_t))
        if (self.label == NULL or self.stack == NULL or self.acc == NULL
                or self.agree == NULL or self.size == NULL or self.first == NULL):
            raise MemoryError()

    def __dealloc__(self):
        free(self.label)
        free(self.stack)
        free(self.acc)
        free(self.agree)
        free(self.size)
        free(self.first)


def combine(indptr, nbrs, weights, h, gauge, Py_ssize_t ngauge, s1, s2):
    cdef const int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[::1] nb = np.ascontiguousarray(nbrs, dtype=np.int64)
    cdef const double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const int64_t[::1] gv = np.ascontiguousarray(gauge, dtype=np.int64)
    cdef const int8_t[::1] a = np.ascontiguousarray(s1, dtype=np.int8)
    cdef const int8_t[::1] b = np.ascontiguousarray(s2, dtype=np.int8)
    out = np.empty(hv.shape[0], dtype=np.int8)
    cdef int8_t[::1] ov = out
    cdef _Scratch sc = _Scratch(hv.shape[0])
    with nogil:
        _combine(ip, nb, wt, hv, gv, ngauge, a, b, ov,
                 sc.label, sc.stack, sc.acc, sc.agree, sc.size, sc.first)
    return out


def combine_level(indptr, nbrs, weights, h, gauge, Py_ssize_t ngauge, level):
    cdef const int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[::1] nb = np.ascontiguousarray(nbrs, dtype=np.int64)
    cdef const double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const int64_t[::1] gv = np.ascontiguousarray(gauge, dtype=np.int64)
    cdef const int8_t[:, ::1] lv = np.ascontiguousarray(level, dtype=np.int8)
    cdef Py_ssize_t k = lv.shape[0], i
    out = np.empty(((k + 1) // 2, lv.shape[1]), dtype=np.int8)
    cdef int8_t[:, ::1] ov = out
    cdef _Scratch sc = _Scratch(hv.shape[0])
    with nogil:
        for i in range(k // 2):
            _combine(ip, nb, wt, hv, gv, ngauge, lv[2 * i], lv[2 * i + 1], ov[i],
                     sc.label, sc.stack, sc.acc, sc.agree, sc.size, sc.first)
        if k % 2:
            ov[k // 2, :] = lv[k - 1, :]
    return out
