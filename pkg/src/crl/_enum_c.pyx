# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernel over int64 numerators.

Callers guarantee that the product of all factor denominators is below
2**62, which bounds every weight and every partial sum.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


def joint_weights(cards, factors):
    cdef Py_ssize_t n = len(cards)
    cdef Py_ssize_t nf = len(factors)
    cdef Py_ssize_t total = 1
    for c in cards:
        total *= c

    cdef cnp.ndarray[int64_t, ndim=1] card = np.asarray(cards, dtype=np.int64)
    begins = [0]
    svars = []
    sstrides = []
    tstarts = []
    flat = []
    for scope, table in factors:
        stride = 1
        local = []
        for v in reversed(scope):
            local.append((v, stride))
            stride *= cards[v]
        local.reverse()
        for v, s in local:
            svars.append(v)
            sstrides.append(s)
        begins.append(len(svars))
        tstarts.append(len(flat))
        flat.extend(table)

    cdef cnp.ndarray[int64_t, ndim=1] f_begin = np.asarray(begins, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] s_var = np.asarray(svars + [0], dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] s_stride = np.asarray(sstrides + [0], dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] t_start = np.asarray(tstarts + [0], dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] tables = np.asarray(flat + [0], dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] digits = np.zeros(max(n, 1), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] out = np.empty(total, dtype=np.int64)

    cdef Py_ssize_t i, f, j, k
    cdef int64_t w, idx
    for i in range(total):
        w = 1
        for f in range(nf):
            idx = 0
            for j in range(f_begin[f], f_begin[f + 1]):
                idx += digits[s_var[j]] * s_stride[j]
            w *= tables[t_start[f] + idx]
            if w == 0:
                break
        out[i] = w
        k = n - 1
        while k >= 0:
            digits[k] += 1
            if digits[k] < card[k]:
                break
            digits[k] = 0
            k -= 1
    return out


def project(cnp.ndarray[int64_t, ndim=1] weights, cards, fixed, keep):
    cdef Py_ssize_t n = len(cards)
    cdef Py_ssize_t total = weights.shape[0]
    cdef cnp.ndarray[int64_t, ndim=1] card = np.asarray(list(cards) + [1], dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] want = np.full(n + 1, -1, dtype=np.int64)
    for v, x in fixed.items():
        want[v] = x
    cdef cnp.ndarray[int64_t, ndim=1] kstride = np.zeros(n + 1, dtype=np.int64)
    size = 1
    for v in reversed(list(keep)):
        kstride[v] = size
        size *= cards[v]
    cdef cnp.ndarray[int64_t, ndim=1] acc = np.zeros(size, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] digits = np.zeros(n + 1, dtype=np.int64)

    cdef Py_ssize_t i, k
    cdef int64_t w, kidx
    cdef bint ok
    for i in range(total):
        w = weights[i]
        if w != 0:
            ok = True
            kidx = 0
            for k in range(n):
                if want[k] >= 0 and digits[k] != want[k]:
                    ok = False
                    break
                kidx += digits[k] * kstride[k]
            if ok:
                acc[kidx] += w
        k = n - 1
        while k >= 0:
            digits[k] += 1
            if digits[k] < card[k]:
                break
            digits[k] = 0
            k -= 1
    return [int(x) for x in acc]
